#include "treeamp/priors.hpp"

#include "se_quad.hpp"

#include <gsl/gsl_cdf.h>

namespace treeamp {

using detail::TiltedComponent;
using Kind = TiltedComponent::Kind;

FactorPosterior Prior::posterior(std::span<const Message> in) const
{
    check_inputs(in);
    const Message &m = in[0];
    FactorPosterior out;
    Endpoint e;
    e.r.resize(n_);
    double vsum = 0;
    for (Index i = 0; i < n_; ++i) {
        ScalarMoments s = scalar(m.a, m.b(i));
        out.A += s.A;
        e.r(i) = s.r;
        vsum += s.v;
    }
    e.v = vsum / double(n_);
    out.ends.push_back(std::move(e));
    return out;
}

Vec Prior::sample(const Vec *, Rng &rng) const
{
    Vec x(n_);
    for (Index i = 0; i < n_; ++i) x(i) = draw(rng);
    return x;
}

TeacherMoment Prior::teacher_moment(std::span<const double> tau_hat) const
{
    TeacherMoment t;
    try {
        t.A = scalar(tau_hat[0], 0.0).A;
    } catch (const NonPositivePrecision &) {
        throw DivergentTilt(kind() + ": tilt " + std::to_string(tau_hat[0]) + " diverges");
    }
    double tau = 0;
    for (const auto &c : tilted(tau_hat[0])) tau += c.weight * c.second_moment();
    t.tau = {tau};
    return t;
}

RSPotential Prior::rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                                std::span<const double> tau_hat0, const QuadratureOptions &opt) const
{
    const auto *tp = dynamic_cast<const Prior *>(&teacher);
    if (!tp) throw DomainError(kind() + ": teacher must be a prior");
    double a = hat[0].tauhat + hat[0].qhat;
    auto comps = tp->tilted(tau_hat0[0]);
    double scale = 0.5 * std::min(1.0, std::sqrt(std::max(a, 0.0)));
    return detail::checked_quadrature(opt, kind(), [&](const QuadratureOptions &o) {
        detail::Accum acc;
        for (const auto &c : comps)
            detail::integrate_component(c, hat[0].mhat, hat[0].qhat, scale, o,
                                        [&](double b) { return scalar(a, b); }, acc);
        RSPotential p;
        p.A = acc.A;
        p.ends = {acc.overlap()};
        return p;
    });
}

BOPotential Prior::bo_potential(std::span<const double> mhat, std::span<const double> tau_hat0,
                                const QuadratureOptions &opt) const
{
    SEHat h{mhat[0], mhat[0], tau_hat0[0]};
    RSPotential rs = rs_potential(std::span<const SEHat>(&h, 1), *this, tau_hat0, opt);
    double tau0 = teacher_moment(tau_hat0).tau[0];
    BOPotential bo;
    bo.A = rs.A;
    bo.v = {rs.ends[0].v};
    bo.m = {tau0 - rs.ends[0].v};
    return bo;
}

// ---------------------------------------------------------------- gaussian

GaussianPrior::GaussianPrior(double mean, double var, Index n)
    : Prior(n), mean_(mean), var_(var), a0_(1.0 / var), b0_(mean / var)
{
    if (!(var > 0)) throw DomainError("gaussian_prior: var must be positive");
}

ScalarMoments GaussianPrior::scalar(double a, double b) const
{
    ScalarMoments s = real_belief(a + a0_, b + b0_);
    s.A -= real_log_partition(a0_, b0_);
    return s;
}

std::vector<TiltedComponent> GaussianPrior::tilted(double tau_hat) const
{
    double a = a0_ + tau_hat;
    if (!(a > kMinPrecision)) throw DivergentTilt("gaussian_prior: tilt diverges");
    return {TiltedComponent{Kind::gaussian, 1.0, a, b0_}};
}

double GaussianPrior::draw(Rng &rng) const
{
    return mean_ + std::sqrt(var_) * std::normal_distribution<double>()(rng);
}

FactorPosterior GaussianPrior::posterior(std::span<const Message> in) const
{
    FactorPosterior out = Prior::posterior(in);
    out.ends[0].direct = Message{a0_, Vec::Constant(n_, b0_)};
    return out;
}

FactorPosterior GaussianPrior::map_posterior(std::span<const Message> in) const
{
    check_inputs(in);
    double a = in[0].a + a0_;
    check_precision(a, "gaussian_prior");
    Vec b = in[0].b.array() + b0_;
    FactorPosterior out;
    // energy (x - r0)^2 / 2 v0
    out.A = 0.5 * b.squaredNorm() / a - n_ * 0.5 * b0_ * b0_ / a0_;
    Endpoint e;
    e.r = b / a;
    e.v = 1.0 / a;
    e.direct = Message{a0_, Vec::Constant(n_, b0_)};
    out.ends.push_back(std::move(e));
    return out;
}

// Quadratic kernel: exact for any teacher given its first two moments.
RSPotential GaussianPrior::rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                                        std::span<const double> tau_hat0,
                                        const QuadratureOptions &) const
{
    const auto *tp = dynamic_cast<const Prior *>(&teacher);
    if (!tp) throw DomainError(kind() + ": teacher must be a prior");
    double mu1 = 0, mu2 = 0;
    for (const auto &c : tp->tilted(tau_hat0[0])) {
        double m1 = c.kind == Kind::atom       ? c.b
                    : c.kind == Kind::gaussian ? c.b / c.a
                                               : interval_belief(c.a, c.b, c.lo, c.hi).r;
        mu1 += c.weight * m1;
        mu2 += c.weight * c.second_moment();
    }
    const SEHat &h = hat[0];
    double a = h.tauhat + h.qhat + a0_;
    check_precision(a, "gaussian_prior rs");
    double ebb = h.mhat * h.mhat * mu2 + std::max(h.qhat, 0.0) + 2 * b0_ * h.mhat * mu1 + b0_ * b0_;
    RSPotential p;
    p.A = 0.5 * ebb / a + 0.5 * (kLn2Pi - std::log(a)) - real_log_partition(a0_, b0_);
    SEOverlap o;
    o.m = (h.mhat * mu2 + b0_ * mu1) / a;
    o.q = ebb / (a * a);
    o.v = 1.0 / a;
    o.tau = o.q + o.v;
    p.ends = {o};
    return p;
}

// ------------------------------------------------------------------ binary

BinaryPrior::BinaryPrior(double p_plus, Index n)
    : Prior(n), p_plus_(p_plus), b0_(0.5 * std::log(p_plus / (1 - p_plus)))
{
    if (!(p_plus > 0 && p_plus < 1)) throw DomainError("binary_prior: p_plus outside (0,1)");
}

ScalarMoments BinaryPrior::scalar(double a, double b) const
{
    ScalarMoments s = binary_belief(b + b0_);
    s.A -= binary_belief(b0_).A + 0.5 * a;
    return s;
}

std::vector<TiltedComponent> BinaryPrior::tilted(double) const
{
    return {TiltedComponent{Kind::atom, p_plus_, 0, 1.0},
            TiltedComponent{Kind::atom, 1 - p_plus_, 0, -1.0}};
}

double BinaryPrior::draw(Rng &rng) const
{
    return std::bernoulli_distribution(p_plus_)(rng) ? 1.0 : -1.0;
}

// ---------------------------------------------------------- gauss-bernoulli

GaussBernoulliPrior::GaussBernoulliPrior(double rho, double mean, double var, Index n)
    : Prior(n), rho_(rho), mean_(mean), var_(var), a0_(1.0 / var), b0_(mean / var)
{
    if (!(rho > 0 && rho <= 1)) throw DomainError("gauss_bernoulli_prior: rho outside (0,1]");
    if (!(var > 0)) throw DomainError("gauss_bernoulli_prior: var must be positive");
    eta0_ = rho < 1 ? real_log_partition(a0_, b0_) - std::log(rho / (1 - rho)) : kInf;
}

ScalarMoments GaussBernoulliPrior::scalar(double a, double b) const
{
    if (rho_ == 1) {
        ScalarMoments s = real_belief(a + a0_, b + b0_);
        s.A -= real_log_partition(a0_, b0_);
        s.rho = 1;
        return s;
    }
    ScalarMoments s = sparse_belief(a + a0_, b + b0_, eta0_);
    s.A -= eta0_ - std::log1p(-rho_);
    return s;
}

std::vector<TiltedComponent> GaussBernoulliPrior::tilted(double tau_hat) const
{
    double a = a0_ + tau_hat;
    if (!(a > kMinPrecision)) throw DivergentTilt("gauss_bernoulli_prior: tilt diverges");
    if (rho_ == 1) return {TiltedComponent{Kind::gaussian, 1.0, a, b0_}};
    double log_slab = std::log(rho_) + real_log_partition(a, b0_) - real_log_partition(a0_, b0_);
    double log_z = logaddexp(std::log1p(-rho_), log_slab);
    return {TiltedComponent{Kind::atom, std::exp(std::log1p(-rho_) - log_z), 0, 0.0},
            TiltedComponent{Kind::gaussian, std::exp(log_slab - log_z), a, b0_}};
}

double GaussBernoulliPrior::draw(Rng &rng) const
{
    bool on = std::bernoulli_distribution(rho_)(rng);
    double g = std::normal_distribution<double>()(rng);
    return on ? mean_ + std::sqrt(var_) * g : 0.0;
}

// ---------------------------------------------------------------- interval

IntervalPrior::IntervalPrior(double x_min, double x_max, double mean, double var, Index n)
    : Prior(n), x_min_(x_min), x_max_(x_max), a0_(1.0 / var), b0_(mean / var)
{
    if (!(var > 0)) throw DomainError("interval_prior: var must be positive");
    A0_ = interval_belief(a0_, b0_, x_min, x_max).A;
}

ScalarMoments IntervalPrior::scalar(double a, double b) const
{
    ScalarMoments s = interval_belief(a + a0_, b + b0_, x_min_, x_max_);
    s.A -= A0_;
    return s;
}

std::vector<TiltedComponent> IntervalPrior::tilted(double tau_hat) const
{
    double a = a0_ + tau_hat;
    if (!(a > kMinPrecision)) throw DivergentTilt("interval_prior: tilt diverges");
    return {TiltedComponent{Kind::truncated, 1.0, a, b0_, x_min_, x_max_}};
}

double IntervalPrior::draw(Rng &rng) const
{
    double mu = b0_ / a0_, s = 1.0 / std::sqrt(a0_);
    double z_lo = (x_min_ - mu) / s, z_hi = (x_max_ - mu) / s;
    double u = std::uniform_real_distribution<double>()(rng);
    double z;
    if (z_lo > 0) {
        double q_lo = gsl_cdf_ugaussian_Q(z_lo), q_hi = x_max_ == kInf ? 0.0 : gsl_cdf_ugaussian_Q(z_hi);
        z = gsl_cdf_ugaussian_Qinv(q_lo - u * (q_lo - q_hi));
    } else {
        double p_lo = x_min_ == -kInf ? 0.0 : gsl_cdf_ugaussian_P(z_lo);
        double p_hi = x_max_ == kInf ? 1.0 : gsl_cdf_ugaussian_P(z_hi);
        z = gsl_cdf_ugaussian_Pinv(p_lo + u * (p_hi - p_lo));
    }
    return std::clamp(mu + s * z, x_min_, x_max_);
}

std::shared_ptr<Prior> make_prior(const PriorSpec &spec)
{
    switch (spec.kind) {
    case PriorSpec::Kind::gaussian:
        return std::make_shared<GaussianPrior>(spec.mean, spec.var, spec.size);
    case PriorSpec::Kind::binary:
        return std::make_shared<BinaryPrior>(spec.p_plus, spec.size);
    case PriorSpec::Kind::gauss_bernoulli:
        return std::make_shared<GaussBernoulliPrior>(spec.rho, spec.mean, spec.var, spec.size);
    case PriorSpec::Kind::interval:
        return std::make_shared<IntervalPrior>(spec.x_min, spec.x_max, spec.mean, spec.var, spec.size);
    }
    throw DomainError("unknown prior kind");
}

} // namespace treeamp
