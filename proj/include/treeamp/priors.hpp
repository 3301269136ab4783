#ifndef TREEAMP_PRIORS_HPP
#define TREEAMP_PRIORS_HPP

#include "treeamp/exp_family.hpp"
#include "treeamp/factor.hpp"

namespace treeamp {

namespace detail {
struct TiltedComponent;
}

struct PriorSpec {
    enum class Kind { gaussian, binary, gauss_bernoulli, interval } kind = Kind::gaussian;
    double mean = 0;    // r0
    double var = 1;     // v0
    double rho = 1;     // gauss_bernoulli
    double p_plus = 0.5;
    double x_min = -kInf, x_max = kInf;
    Index size = 1;
};

// Separable prior on x: componentwise scalar module, isotropic average.
class Prior : public Factor {
public:
    explicit Prior(Index n) : n_(n) {}

    FactorRole role() const override { return FactorRole::prior; }
    Index dim(int) const override { return n_; }

    // Scalar log-partition ln E_p0 exp(-a x^2/2 + b x) with moments.
    virtual ScalarMoments scalar(double a, double b) const = 0;
    // Pieces of p0(x) exp(-tau_hat x^2/2), weights summing to one.
    virtual std::vector<detail::TiltedComponent> tilted(double tau_hat) const = 0;
    virtual double draw(Rng &rng) const = 0;

    FactorPosterior posterior(std::span<const Message> in) const override;
    bool samplable() const override { return true; }
    Vec sample(const Vec *input, Rng &rng) const override;

    TeacherMoment teacher_moment(std::span<const double> tau_hat) const override;
    RSPotential rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                             std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;
    BOPotential bo_potential(std::span<const double> mhat, std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;

protected:
    Index n_;
};

class GaussianPrior : public Prior {
public:
    GaussianPrior(double mean, double var, Index n);
    std::string kind() const override { return "gaussian_prior"; }
    ScalarMoments scalar(double a, double b) const override;
    std::vector<detail::TiltedComponent> tilted(double tau_hat) const override;
    double draw(Rng &rng) const override;
    FactorPosterior posterior(std::span<const Message> in) const override;
    bool has_map() const override { return true; }
    FactorPosterior map_posterior(std::span<const Message> in) const override;
    RSPotential rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                             std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;

    double a0() const { return a0_; }
    double b0() const { return b0_; }

private:
    double mean_, var_, a0_, b0_;
};

class BinaryPrior : public Prior {
public:
    BinaryPrior(double p_plus, Index n);
    std::string kind() const override { return "binary_prior"; }
    ScalarMoments scalar(double a, double b) const override;
    std::vector<detail::TiltedComponent> tilted(double tau_hat) const override;
    double draw(Rng &rng) const override;

private:
    double p_plus_, b0_;
};

class GaussBernoulliPrior : public Prior {
public:
    GaussBernoulliPrior(double rho, double mean, double var, Index n);
    std::string kind() const override { return "gauss_bernoulli_prior"; }
    ScalarMoments scalar(double a, double b) const override;
    std::vector<detail::TiltedComponent> tilted(double tau_hat) const override;
    double draw(Rng &rng) const override;

private:
    double rho_, mean_, var_, a0_, b0_, eta0_;
};

class IntervalPrior : public Prior {
public:
    IntervalPrior(double x_min, double x_max, double mean, double var, Index n);
    std::string kind() const override { return "interval_prior"; }
    ScalarMoments scalar(double a, double b) const override;
    std::vector<detail::TiltedComponent> tilted(double tau_hat) const override;
    double draw(Rng &rng) const override;

private:
    double x_min_, x_max_, a0_, b0_, A0_;
};

std::shared_ptr<Prior> make_prior(const PriorSpec &spec);

} // namespace treeamp

#endif
