#ifndef TREEAMP_FACTOR_HPP
#define TREEAMP_FACTOR_HPP

#include "treeamp/errors.hpp"
#include "treeamp/quadrature.hpp"
#include "treeamp/special.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace treeamp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

// Isotropic Gaussian message exp(-a|x|^2/2 + b.x) on a directed edge.
struct Message {
    double a = 0;
    Vec b;
};

struct Endpoint {
    Vec r;
    double v = 0;
    // Closed-form outgoing message; bypasses moment matching when set.
    std::optional<Message> direct;
};

struct FactorPosterior {
    double A = 0;  // extensive log-partition
    std::vector<Endpoint> ends;
};

// State evolution quantities, per component of each endpoint.
struct SEHat {
    double mhat = 0;
    double qhat = 0;
    double tauhat = 0;
};

struct SEOverlap {
    double m = 0;
    double q = 0;
    double v = 0;
    double tau = 0;
};

struct RSPotential {
    double A = 0;  // per component of the factor's normalization dim
    std::vector<SEOverlap> ends;
};

struct BOPotential {
    double A = 0;
    std::vector<double> m;
    std::vector<double> v;
};

struct TeacherMoment {
    double A = 0;
    std::vector<double> tau;
};

enum class FactorRole { prior, likelihood, channel, penalty };

// Slot conventions: priors and penalties have slot 0 = x; likelihoods have
// slot 0 = z; channels have slot 0 = input z and slot 1 = output x.
class Factor {
public:
    virtual ~Factor() = default;

    virtual std::string kind() const = 0;
    virtual FactorRole role() const = 0;
    int arity() const { return role() == FactorRole::channel ? 2 : 1; }
    virtual Index dim(int slot) const = 0;
    // N_k used to scale the factor's SE potential
    virtual Index se_dim() const { return dim(0); }

    virtual FactorPosterior posterior(std::span<const Message> in) const = 0;

    virtual bool has_map() const { return false; }
    virtual FactorPosterior map_posterior(std::span<const Message> in) const;

    // Priors draw x, channels push z forward, likelihoods draw y given z.
    virtual bool samplable() const { return false; }
    virtual Vec sample(const Vec *input, Rng &rng) const;
    // Likelihoods only: copy bound to new observations.
    virtual std::shared_ptr<Factor> with_observation(const Vec &y) const;

    virtual TeacherMoment teacher_moment(std::span<const double> tau_hat) const;
    virtual RSPotential rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                                     std::span<const double> tau_hat0,
                                     const QuadratureOptions &opt) const;
    virtual BOPotential bo_potential(std::span<const double> mhat,
                                     std::span<const double> tau_hat0,
                                     const QuadratureOptions &opt) const;
    // Entropic constant E_k of the BO decomposition H_k = I_k + E_k;
    // NaN when I_k is ill-defined (noiseless outputs).
    virtual double entropy_constant() const { return 0.0; }

protected:
    void check_inputs(std::span<const Message> in) const;
};

using FactorPtr = std::shared_ptr<const Factor>;

// Helpers shared by the modules.
Vec standard_normal(Index n, Rng &rng);

} // namespace treeamp

#endif
