#include "treeamp/map_penalties.hpp"
#include "treeamp/exp_family.hpp"

namespace treeamp {

Vec soft_threshold(const Vec &u, double t)
{
    Vec r(u.size());
    for (Index i = 0; i < u.size(); ++i) {
        double m = std::abs(u(i)) - t;
        r(i) = m > 0 ? std::copysign(m, u(i)) : 0.0;
    }
    return r;
}

Vec group_soft_threshold(const Vec &u, double t, Index d, Index n)
{
    if (u.size() != d * n) throw ShapeMismatch("group_soft_threshold: size != d n");
    Vec r = Vec::Zero(u.size());
    for (Index g = 0; g < n; ++g) {
        double s = 0;
        for (Index j = 0; j < d; ++j) s += u(j * n + g) * u(j * n + g);
        s = std::sqrt(s);
        if (s <= t) continue;
        double c = 1 - t / s;
        for (Index j = 0; j < d; ++j) r(j * n + g) = c * u(j * n + g);
    }
    return r;
}

namespace {

void check_spec(const PenaltySpec &spec)
{
    if (!(spec.strength >= 0)) throw DomainError("penalty strength must be >= 0");
    if (spec.n < 1 || spec.d < 1) throw ShapeMismatch("penalty: non-positive size");
}

double group_norm(const Vec &x, Index g, Index d, Index n)
{
    double s = 0;
    for (Index j = 0; j < d; ++j) s += x(j * n + g) * x(j * n + g);
    return std::sqrt(s);
}

} // namespace

double penalty_energy(const PenaltySpec &spec, const Vec &x)
{
    if (spec.kind == PenaltySpec::Kind::l1) return spec.strength * x.lpNorm<1>();
    double s = 0;
    for (Index g = 0; g < spec.n; ++g) s += group_norm(x, g, spec.d, spec.n);
    return spec.strength * s;
}

MapMoments map_moments(const PenaltySpec &spec, double a, const Vec &b)
{
    check_spec(spec);
    if (!(a > 0)) throw NonPositivePrecision("map_moments: a <= 0");
    Index N = spec.kind == PenaltySpec::Kind::l1 ? spec.n : spec.d * spec.n;
    if (b.size() != N) throw ShapeMismatch("map_moments: b has the wrong size");
    Vec u = b / a;
    double t = spec.strength / a;
    MapMoments m;
    double trace = 0;
    if (spec.kind == PenaltySpec::Kind::l1) {
        m.r = soft_threshold(u, t);
        for (Index i = 0; i < N; ++i) trace += m.r(i) != 0 ? 1.0 : 0.0;
    } else {
        m.r = group_soft_threshold(u, t, spec.d, spec.n);
        for (Index g = 0; g < spec.n; ++g) {
            double s = group_norm(u, g, spec.d, spec.n);
            if (s > t) trace += double(spec.d) - double(spec.d - 1) * t / s;
        }
    }
    m.v = trace / double(N) / a;
    m.A = b.dot(m.r) - 0.5 * a * m.r.squaredNorm() - penalty_energy(spec, m.r);
    return m;
}

double moreau_envelope(const PenaltySpec &spec, double a, const Vec &u)
{
    MapMoments m = map_moments(spec, a, a * u);
    return penalty_energy(spec, m.r) + 0.5 * a * (m.r - u).squaredNorm();
}

PenaltyFactor::PenaltyFactor(PenaltySpec spec) : spec_(spec)
{
    check_spec(spec_);
}

FactorPosterior PenaltyFactor::posterior(std::span<const Message>) const
{
    throw DomainError(kind() + ": penalty factors only have MAP moments");
}

FactorPosterior PenaltyFactor::map_posterior(std::span<const Message> in) const
{
    check_inputs(in);
    MapMoments m = map_moments(spec_, in[0].a, in[0].b);
    FactorPosterior out;
    out.A = m.A;
    out.ends.push_back(Endpoint{std::move(m.r), m.v, {}});
    return out;
}

std::shared_ptr<PenaltyFactor> make_l1(double strength, Index n)
{
    return std::make_shared<PenaltyFactor>(PenaltySpec{PenaltySpec::Kind::l1, strength, 1, n});
}

std::shared_ptr<PenaltyFactor> make_l21(double strength, Index d, Index n)
{
    return std::make_shared<PenaltyFactor>(PenaltySpec{PenaltySpec::Kind::l21, strength, d, n});
}

} // namespace treeamp
