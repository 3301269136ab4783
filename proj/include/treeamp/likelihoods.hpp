#ifndef TREEAMP_LIKELIHOODS_HPP
#define TREEAMP_LIKELIHOODS_HPP

#include "treeamp/exp_family.hpp"
#include "treeamp/factor.hpp"

namespace treeamp {

struct LikelihoodSpec {
    enum class Kind { gaussian, sgn, abs, phase, modulus } kind = Kind::gaussian;
    double var = 1;  // noise variance, gaussian kind
    Index size = 1;  // dimension of z in reals (complex kinds: twice the count)
    Vec y;           // empty until observations are bound
};

// Separable likelihood p(y|z). Complex kinds read z as interleaved (re, im)
// pairs; phase stores y the same way, modulus stores one value per pair.
class Likelihood : public Factor {
public:
    Likelihood(Index n, Vec y);

    FactorRole role() const override { return FactorRole::likelihood; }
    Index dim(int) const override { return n_; }
    const Vec &y() const { return y_; }
    bool bound() const { return y_.size() > 0; }
    bool samplable() const override { return true; }

    TeacherMoment teacher_moment(std::span<const double> tau_hat) const override;
    BOPotential bo_potential(std::span<const double> mhat, std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;

protected:
    void require_bound() const;
    virtual void check_y(const Vec &y) const = 0;

    Index n_;
    Vec y_;
};

class GaussianLikelihood : public Likelihood {
public:
    GaussianLikelihood(double var, Index n, Vec y = {});
    std::string kind() const override { return "gaussian_likelihood"; }
    double var() const { return var_; }

    ScalarMoments scalar(double a, double b, double y) const;
    FactorPosterior posterior(std::span<const Message> in) const override;
    bool has_map() const override { return true; }
    FactorPosterior map_posterior(std::span<const Message> in) const override;
    Vec sample(const Vec *z, Rng &rng) const override;
    std::shared_ptr<Factor> with_observation(const Vec &y) const override;
    RSPotential rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                             std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;
    double entropy_constant() const override;

private:
    void check_y(const Vec &y) const override;
    double var_;
};

// Real deterministic outputs y = g(z): sgn and abs.
class DeterministicLikelihood : public Likelihood {
public:
    using Likelihood::Likelihood;
    virtual ScalarMoments scalar(double a, double b, double y) const = 0;
    virtual double output(double z) const = 0;

    FactorPosterior posterior(std::span<const Message> in) const override;
    Vec sample(const Vec *z, Rng &rng) const override;
    RSPotential rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                             std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;
    double entropy_constant() const override { return kNaN; }
};

class SgnLikelihood : public DeterministicLikelihood {
public:
    explicit SgnLikelihood(Index n, Vec y = {});
    std::string kind() const override { return "sgn_likelihood"; }
    ScalarMoments scalar(double a, double b, double y) const override;
    double output(double z) const override { return z >= 0 ? 1.0 : -1.0; }
    std::shared_ptr<Factor> with_observation(const Vec &y) const override;

private:
    void check_y(const Vec &y) const override;
};

class AbsLikelihood : public DeterministicLikelihood {
public:
    explicit AbsLikelihood(Index n, Vec y = {});
    std::string kind() const override { return "abs_likelihood"; }
    ScalarMoments scalar(double a, double b, double y) const override;
    double output(double z) const override { return std::abs(z); }
    std::shared_ptr<Factor> with_observation(const Vec &y) const override;

private:
    void check_y(const Vec &y) const override;
};

// Complex deterministic outputs, per (re, im) pair.
class ComplexLikelihood : public Likelihood {
public:
    using Likelihood::Likelihood;
    // log-partition, mean pair and per-real variance for one complex entry
    virtual PhaseMoments scalar(double a, std::complex<double> b, Index k) const = 0;
    FactorPosterior posterior(std::span<const Message> in) const override;
    RSPotential rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                             std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;
    double entropy_constant() const override { return kNaN; }

protected:
    // moments for z0 = t > 0 on the real axis
    virtual PhaseMoments scalar_at(double a, std::complex<double> b, double t) const = 0;
};

class PhaseLikelihood : public ComplexLikelihood {
public:
    explicit PhaseLikelihood(Index n, Vec y = {});
    std::string kind() const override { return "phase_likelihood"; }
    PhaseMoments scalar(double a, std::complex<double> b, Index k) const override;
    Vec sample(const Vec *z, Rng &rng) const override;
    std::shared_ptr<Factor> with_observation(const Vec &y) const override;
    static PhaseMoments moments(double a, std::complex<double> b, std::complex<double> y);

private:
    PhaseMoments scalar_at(double a, std::complex<double> b, double t) const override;
    void check_y(const Vec &y) const override;
};

class ModulusLikelihood : public ComplexLikelihood {
public:
    explicit ModulusLikelihood(Index n, Vec y = {});
    std::string kind() const override { return "modulus_likelihood"; }
    PhaseMoments scalar(double a, std::complex<double> b, Index k) const override;
    Vec sample(const Vec *z, Rng &rng) const override;
    std::shared_ptr<Factor> with_observation(const Vec &y) const override;
    static PhaseMoments moments(double a, std::complex<double> b, double y);

private:
    PhaseMoments scalar_at(double a, std::complex<double> b, double t) const override;
    void check_y(const Vec &y) const override;
};

std::shared_ptr<Likelihood> make_likelihood(const LikelihoodSpec &spec);

} // namespace treeamp

#endif
