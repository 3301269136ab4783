#ifndef TREEAMP_CHANNELS_SEPARABLE_HPP
#define TREEAMP_CHANNELS_SEPARABLE_HPP

#include "treeamp/exp_family.hpp"
#include "treeamp/factor.hpp"

namespace treeamp {

// Scalar moments of a separable two-variable channel.
struct ChannelMoments {
    double A = 0;
    double rz = 0, vz = 0;
    double rx = 0, vx = 0;
};

// x = z + sqrt(var) * noise, componentwise.
class GaussianNoiseChannel : public Factor {
public:
    GaussianNoiseChannel(double var, Index n);

    std::string kind() const override { return "gaussian_noise"; }
    FactorRole role() const override { return FactorRole::channel; }
    Index dim(int) const override { return n_; }
    double var() const { return var_; }

    ChannelMoments scalar(double az, double bz, double ax, double bx) const;
    FactorPosterior posterior(std::span<const Message> in) const override;
    bool has_map() const override { return true; }
    FactorPosterior map_posterior(std::span<const Message> in) const override;
    bool samplable() const override { return true; }
    Vec sample(const Vec *z, Rng &rng) const override;

    TeacherMoment teacher_moment(std::span<const double> tau_hat) const override;
    RSPotential rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                             std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;
    BOPotential bo_potential(std::span<const double> mhat, std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;
    double entropy_constant() const override;

private:
    double var_;
    Index n_;
};

struct LinearRegion {
    double lo, hi;     // z in [lo, hi)
    double x0, slope;  // x = x0 + slope * z
};

struct PiecewiseLinearSpec {
    std::string name = "piecewise_linear";
    std::vector<LinearRegion> regions;

    double operator()(double z) const;
    void validate() const;

    static PiecewiseLinearSpec identity();
    static PiecewiseLinearSpec relu();
    static PiecewiseLinearSpec leaky_relu(double slope);
    static PiecewiseLinearSpec hard_tanh();
    static PiecewiseLinearSpec hard_sigmoid();
    static PiecewiseLinearSpec abs();
    static PiecewiseLinearSpec sgn();
    static PiecewiseLinearSpec named(const std::string &name);
};

// x = f(z) componentwise for piecewise-linear f.
class PiecewiseLinearChannel : public Factor {
public:
    PiecewiseLinearChannel(PiecewiseLinearSpec spec, Index n);

    std::string kind() const override { return spec_.name; }
    FactorRole role() const override { return FactorRole::channel; }
    Index dim(int) const override { return n_; }
    const PiecewiseLinearSpec &spec() const { return spec_; }

    ChannelMoments scalar(double az, double bz, double ax, double bx) const;
    // Region log-weights (softmax inputs) at the given natural parameters.
    std::vector<double> region_log_weights(double az, double bz, double ax, double bx) const;
    FactorPosterior posterior(std::span<const Message> in) const override;
    bool samplable() const override { return true; }
    Vec sample(const Vec *z, Rng &rng) const override;

    TeacherMoment teacher_moment(std::span<const double> tau_hat) const override;
    RSPotential rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                             std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;
    BOPotential bo_potential(std::span<const double> mhat, std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;
    double entropy_constant() const override { return kNaN; }

private:
    PiecewiseLinearSpec spec_;
    Index n_;
};

} // namespace treeamp

#endif
