#include "treeamp/likelihoods.hpp"

#include "se_quad.hpp"

namespace treeamp {

Likelihood::Likelihood(Index n, Vec y) : n_(n), y_(std::move(y)) {}

void Likelihood::require_bound() const
{
    if (!bound()) throw DomainError(kind() + ": no observations bound");
}

TeacherMoment Likelihood::teacher_moment(std::span<const double> tau_hat) const
{
    double t = tau_hat[0];
    if (!(t > 0)) throw NonPositiveTilt(kind() + ": teacher precision must be positive");
    return {0.5 * (kLn2Pi - std::log(t)), {1.0 / t}};
}

BOPotential Likelihood::bo_potential(std::span<const double> mhat, std::span<const double> tau_hat0,
                                     const QuadratureOptions &opt) const
{
    SEHat h{mhat[0], mhat[0], tau_hat0[0]};
    RSPotential rs = rs_potential(std::span<const SEHat>(&h, 1), *this, tau_hat0, opt);
    BOPotential bo;
    bo.A = rs.A;
    bo.v = {rs.ends[0].v};
    bo.m = {1.0 / tau_hat0[0] - rs.ends[0].v};
    return bo;
}

// ---------------------------------------------------------------- gaussian

GaussianLikelihood::GaussianLikelihood(double var, Index n, Vec y)
    : Likelihood(n, std::move(y)), var_(var)
{
    if (!(var > 0)) throw DomainError("gaussian_likelihood: var must be positive");
    if (bound()) check_y(y_);
}

void GaussianLikelihood::check_y(const Vec &y) const
{
    if (y.size() != n_) throw ShapeMismatch("gaussian_likelihood: y has wrong size");
    if (!y.allFinite()) throw DomainError("gaussian_likelihood: non-finite y");
}

ScalarMoments GaussianLikelihood::scalar(double a, double b, double y) const
{
    double ad = 1.0 / var_;
    ScalarMoments s = real_belief(a + ad, b + y * ad);
    s.A -= real_log_partition(ad, y * ad);
    return s;
}

FactorPosterior GaussianLikelihood::posterior(std::span<const Message> in) const
{
    check_inputs(in);
    require_bound();
    const Message &m = in[0];
    FactorPosterior out;
    Endpoint e;
    e.r.resize(n_);
    double vsum = 0;
    for (Index i = 0; i < n_; ++i) {
        ScalarMoments s = scalar(m.a, m.b(i), y_(i));
        out.A += s.A;
        e.r(i) = s.r;
        vsum += s.v;
    }
    e.v = vsum / double(n_);
    e.direct = Message{1.0 / var_, y_ / var_};
    out.ends.push_back(std::move(e));
    return out;
}

FactorPosterior GaussianLikelihood::map_posterior(std::span<const Message> in) const
{
    check_inputs(in);
    require_bound();
    double a = in[0].a + 1.0 / var_;
    check_precision(a, "gaussian_likelihood");
    Vec b = in[0].b + y_ / var_;
    FactorPosterior out;
    // energy |y - z|^2 / 2 var
    out.A = 0.5 * b.squaredNorm() / a - 0.5 * y_.squaredNorm() / var_;
    Endpoint e;
    e.r = b / a;
    e.v = 1.0 / a;
    e.direct = Message{1.0 / var_, y_ / var_};
    out.ends.push_back(std::move(e));
    return out;
}

Vec GaussianLikelihood::sample(const Vec *z, Rng &rng) const
{
    return *z + std::sqrt(var_) * standard_normal(z->size(), rng);
}

std::shared_ptr<Factor> GaussianLikelihood::with_observation(const Vec &y) const
{
    return std::make_shared<GaussianLikelihood>(var_, n_, y);
}

// Joint Gaussian (z0, y, b): closed form for any gaussian teacher.
RSPotential GaussianLikelihood::rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                                             std::span<const double> tau_hat0,
                                             const QuadratureOptions &) const
{
    const auto *tp = dynamic_cast<const GaussianLikelihood *>(&teacher);
    if (!tp) throw DomainError(kind() + ": teacher must be a gaussian likelihood");
    if (!(tau_hat0[0] > 0)) throw NonPositiveTilt(kind() + ": teacher precision must be positive");
    const SEHat &h = hat[0];
    double tz = 1.0 / tau_hat0[0];
    double d0 = tp->var_, ad = 1.0 / var_;
    double a = h.tauhat + h.qhat + ad;
    check_precision(a, "gaussian_likelihood rs");
    double g = h.mhat + ad;
    double ebb = g * g * tz + std::max(h.qhat, 0.0) + d0 * ad * ad;
    RSPotential p;
    p.A = 0.5 * ebb / a + 0.5 * (kLn2Pi - std::log(a)) - 0.5 * (tz + d0) * ad -
          0.5 * (kLn2Pi + std::log(var_));
    SEOverlap o;
    o.m = g * tz / a;
    o.q = ebb / (a * a);
    o.v = 1.0 / a;
    o.tau = o.q + o.v;
    p.ends = {o};
    return p;
}

double GaussianLikelihood::entropy_constant() const
{
    return 0.5 * (kLn2Pi + 1.0 + std::log(var_));
}

// ----------------------------------------------------------- deterministic

FactorPosterior DeterministicLikelihood::posterior(std::span<const Message> in) const
{
    check_inputs(in);
    require_bound();
    const Message &m = in[0];
    check_precision(m.a, kind().c_str());
    FactorPosterior out;
    Endpoint e;
    e.r.resize(n_);
    double vsum = 0;
    for (Index i = 0; i < n_; ++i) {
        ScalarMoments s = scalar(m.a, m.b(i), y_(i));
        out.A += s.A;
        e.r(i) = s.r;
        vsum += s.v;
    }
    e.v = vsum / double(n_);
    out.ends.push_back(std::move(e));
    return out;
}

Vec DeterministicLikelihood::sample(const Vec *z, Rng &) const
{
    Vec y(z->size());
    for (Index i = 0; i < z->size(); ++i) y(i) = output((*z)(i));
    return y;
}

RSPotential DeterministicLikelihood::rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                                                  std::span<const double> tau_hat0,
                                                  const QuadratureOptions &opt) const
{
    if (teacher.kind() != kind()) throw DomainError(kind() + ": teacher kind must match");
    if (!(tau_hat0[0] > 0)) throw NonPositiveTilt(kind() + ": teacher precision must be positive");
    const SEHat &h = hat[0];
    double a = h.tauhat + h.qhat;
    check_precision(a, (kind() + " rs").c_str());
    double s = 1.0 / std::sqrt(tau_hat0[0]);
    double sq = std::sqrt(std::max(h.qhat, 0.0));
    return detail::checked_quadrature(opt, kind(), [&](const QuadratureOptions &o) {
        auto outer = detail::split_gaussian_nodes(s, o.legendre);
        detail::Accum acc;
        for (size_t i = 0; i < outer.x.size(); ++i) {
            double z0 = outer.x[i], y = output(z0);
            // the kernel varies over sqrt(a) in b, and over 1/|y| for abs
            double scale = 0.5 * std::min(std::sqrt(a), 1.0 / std::max(std::abs(y), 1e-300));
            auto inner = detail::gaussian_rule(h.mhat * z0, sq, scale, 8, o.nested_panels);
            for (size_t j = 0; j < inner.x.size(); ++j)
                acc.add(outer.w[i] * inner.w[j], scalar(a, inner.x[j], y), z0);
        }
        RSPotential p;
        p.A = acc.A;
        p.ends = {acc.overlap()};
        return p;
    });
}

SgnLikelihood::SgnLikelihood(Index n, Vec y) : DeterministicLikelihood(n, std::move(y))
{
    if (bound()) check_y(y_);
}

void SgnLikelihood::check_y(const Vec &y) const
{
    if (y.size() != n_) throw ShapeMismatch("sgn_likelihood: y has wrong size");
    for (Index i = 0; i < y.size(); ++i)
        if (y(i) != 1.0 && y(i) != -1.0) throw DomainError("sgn_likelihood: y must be +-1");
}

ScalarMoments SgnLikelihood::scalar(double a, double b, double y) const
{
    return y > 0 ? interval_belief(a, b, 0.0, kInf) : interval_belief(a, b, -kInf, 0.0);
}

std::shared_ptr<Factor> SgnLikelihood::with_observation(const Vec &y) const
{
    return std::make_shared<SgnLikelihood>(n_, y);
}

AbsLikelihood::AbsLikelihood(Index n, Vec y) : DeterministicLikelihood(n, std::move(y))
{
    if (bound()) check_y(y_);
}

void AbsLikelihood::check_y(const Vec &y) const
{
    if (y.size() != n_) throw ShapeMismatch("abs_likelihood: y has wrong size");
    for (Index i = 0; i < y.size(); ++i)
        if (!(y(i) >= 0) || !std::isfinite(y(i))) throw DomainError("abs_likelihood: y must be >= 0");
}

ScalarMoments AbsLikelihood::scalar(double a, double b, double y) const
{
    ScalarMoments s = binary_belief(y * b);
    s.A -= 0.5 * a * y * y;
    s.r *= y;
    s.v *= y * y;
    return s;
}

std::shared_ptr<Factor> AbsLikelihood::with_observation(const Vec &y) const
{
    return std::make_shared<AbsLikelihood>(n_, y);
}

// ----------------------------------------------------------------- complex

FactorPosterior ComplexLikelihood::posterior(std::span<const Message> in) const
{
    check_inputs(in);
    require_bound();
    const Message &m = in[0];
    check_precision(m.a, kind().c_str());
    FactorPosterior out;
    Endpoint e;
    e.r.resize(n_);
    double vsum = 0;
    for (Index k = 0; k < n_ / 2; ++k) {
        PhaseMoments s = scalar(m.a, {m.b(2 * k), m.b(2 * k + 1)}, k);
        out.A += s.A;
        e.r(2 * k) = s.r.real();
        e.r(2 * k + 1) = s.r.imag();
        vsum += 2 * s.v;
    }
    e.v = vsum / double(n_);
    out.ends.push_back(std::move(e));
    return out;
}

// z0 is circular: fix its direction on the positive real axis and
// integrate the Rayleigh radius t.
RSPotential ComplexLikelihood::rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                                            std::span<const double> tau_hat0,
                                            const QuadratureOptions &opt) const
{
    if (teacher.kind() != kind()) throw DomainError(kind() + ": teacher kind must match");
    if (!(tau_hat0[0] > 0)) throw NonPositiveTilt(kind() + ": teacher precision must be positive");
    const SEHat &h = hat[0];
    double a = h.tauhat + h.qhat;
    check_precision(a, (kind() + " rs").c_str());
    double s = 1.0 / std::sqrt(tau_hat0[0]);
    double sq = std::sqrt(std::max(h.qhat, 0.0));
    return detail::checked_quadrature(opt, kind(), [&](const QuadratureOptions &o) {
        const auto &gh = gauss_hermite(std::min(o.order, 31));
        auto outer = composite_legendre(0, 11 * s, 22, o.legendre);
        double A = 0, m = 0, q = 0, v = 0;
        for (size_t i = 0; i < outer.x.size(); ++i) {
            double t = outer.x[i];
            double wt = outer.w[i] * t / (s * s) * std::exp(-0.5 * t * t / (s * s));
            for (size_t j = 0; j < gh.x.size(); ++j)
                for (size_t l = 0; l < gh.x.size(); ++l) {
                    double w = wt * gh.w[j] * gh.w[l];
                    std::complex<double> b(h.mhat * t + sq * gh.x[j], sq * gh.x[l]);
                    PhaseMoments pm = scalar_at(a, b, t);
                    A += w * pm.A;
                    m += w * t * pm.r.real();
                    q += w * std::norm(pm.r);
                    v += w * pm.v;
                }
        }
        RSPotential p;
        p.A = A / 2;
        p.ends = {SEOverlap{m / 2, q / 2, v, q / 2 + v}};
        return p;
    });
}

PhaseLikelihood::PhaseLikelihood(Index n, Vec y) : ComplexLikelihood(n, std::move(y))
{
    if (n % 2) throw ShapeMismatch("phase_likelihood: dimension must be even");
    if (bound()) check_y(y_);
}

void PhaseLikelihood::check_y(const Vec &y) const
{
    if (y.size() != n_) throw ShapeMismatch("phase_likelihood: y has wrong size");
    for (Index k = 0; k < n_ / 2; ++k)
        if (std::abs(std::hypot(y(2 * k), y(2 * k + 1)) - 1.0) > 1e-9)
            throw DomainError("phase_likelihood: y must have unit modulus");
}

// As printed: the interval belief along the observed phase, no radial
// Jacobian.
PhaseMoments PhaseLikelihood::moments(double a, std::complex<double> b, std::complex<double> y)
{
    double by = b.real() * y.real() + b.imag() * y.imag();
    ScalarMoments s = interval_belief(a, by, 0.0, kInf);
    return {s.A, y * s.r, 0.5 * s.v};
}

PhaseMoments PhaseLikelihood::scalar(double a, std::complex<double> b, Index k) const
{
    return moments(a, b, {y_(2 * k), y_(2 * k + 1)});
}

PhaseMoments PhaseLikelihood::scalar_at(double a, std::complex<double> b, double) const
{
    return moments(a, b, 1.0);
}

Vec PhaseLikelihood::sample(const Vec *z, Rng &) const
{
    Vec y(z->size());
    for (Index k = 0; k < z->size() / 2; ++k) {
        double r = std::hypot((*z)(2 * k), (*z)(2 * k + 1));
        y(2 * k) = r > 0 ? (*z)(2 * k) / r : 1.0;
        y(2 * k + 1) = r > 0 ? (*z)(2 * k + 1) / r : 0.0;
    }
    return y;
}

std::shared_ptr<Factor> PhaseLikelihood::with_observation(const Vec &y) const
{
    return std::make_shared<PhaseLikelihood>(n_, y);
}

ModulusLikelihood::ModulusLikelihood(Index n, Vec y) : ComplexLikelihood(n, std::move(y))
{
    if (n % 2) throw ShapeMismatch("modulus_likelihood: dimension must be even");
    if (bound()) check_y(y_);
}

void ModulusLikelihood::check_y(const Vec &y) const
{
    if (y.size() != n_ / 2) throw ShapeMismatch("modulus_likelihood: y has wrong size");
    for (Index k = 0; k < y.size(); ++k)
        if (!(y(k) > 0) || !std::isfinite(y(k))) throw DomainError("modulus_likelihood: y must be > 0");
}

PhaseMoments ModulusLikelihood::moments(double a, std::complex<double> b, double y)
{
    PhaseMoments s = phase_belief(y * b);
    s.A += std::log(y) - 0.5 * a * y * y;
    s.r *= y;
    s.v *= y * y;
    return s;
}

PhaseMoments ModulusLikelihood::scalar(double a, std::complex<double> b, Index k) const
{
    return moments(a, b, y_(k));
}

PhaseMoments ModulusLikelihood::scalar_at(double a, std::complex<double> b, double t) const
{
    return moments(a, b, t);
}

Vec ModulusLikelihood::sample(const Vec *z, Rng &) const
{
    Vec y(z->size() / 2);
    for (Index k = 0; k < y.size(); ++k) y(k) = std::hypot((*z)(2 * k), (*z)(2 * k + 1));
    return y;
}

std::shared_ptr<Factor> ModulusLikelihood::with_observation(const Vec &y) const
{
    return std::make_shared<ModulusLikelihood>(n_, y);
}

std::shared_ptr<Likelihood> make_likelihood(const LikelihoodSpec &spec)
{
    using K = LikelihoodSpec::Kind;
    switch (spec.kind) {
    case K::gaussian: return std::make_shared<GaussianLikelihood>(spec.var, spec.size, spec.y);
    case K::sgn: return std::make_shared<SgnLikelihood>(spec.size, spec.y);
    case K::abs: return std::make_shared<AbsLikelihood>(spec.size, spec.y);
    case K::phase: return std::make_shared<PhaseLikelihood>(spec.size, spec.y);
    case K::modulus: return std::make_shared<ModulusLikelihood>(spec.size, spec.y);
    }
    throw DomainError("unknown likelihood kind");
}

} // namespace treeamp
