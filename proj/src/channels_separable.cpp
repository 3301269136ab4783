#include "treeamp/channels_separable.hpp"

#include "se_quad.hpp"

#include <Eigen/Dense>

namespace treeamp {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

// ------------------------------------------------------------ gaussian noise

GaussianNoiseChannel::GaussianNoiseChannel(double var, Index n) : var_(var), n_(n)
{
    if (!(var > 0)) throw DomainError("gaussian_noise: var must be positive");
}

namespace {

// Precision of (z, x) for x = z + noise with the given diagonal tilts.
Mat2 noise_precision(double az, double ax, double var)
{
    double ad = 1.0 / var;
    Mat2 P;
    P << az + ad, -ad, -ad, ax + ad;
    return P;
}

} // namespace

ChannelMoments GaussianNoiseChannel::scalar(double az, double bz, double ax, double bx) const
{
    double ad = 1.0 / var_;
    double a = ax + az + ax * az / ad;
    if (!(a > kMinPrecision) || !(az + ad > 0))
        throw NonPositivePrecision("gaussian_noise: precision " + std::to_string(a));
    double det = ad * a;
    double szz = (ax + ad) / det, sxx = (az + ad) / det, szx = ad / det;
    ChannelMoments m;
    m.rz = szz * bz + szx * bx;
    m.rx = szx * bz + sxx * bx;
    m.vz = szz;
    m.vx = sxx;
    m.A = 0.5 * (bz * m.rz + bx * m.rx) + kLn2Pi - 0.5 * std::log(det) -
          0.5 * (kLn2Pi + std::log(var_));
    return m;
}

FactorPosterior GaussianNoiseChannel::posterior(std::span<const Message> in) const
{
    check_inputs(in);
    const Message &mz = in[0], &mx = in[1];
    FactorPosterior out;
    Endpoint ez, ex;
    ez.r.resize(n_);
    ex.r.resize(n_);
    for (Index i = 0; i < n_; ++i) {
        ChannelMoments c = scalar(mz.a, mz.b(i), mx.a, mx.b(i));
        out.A += c.A;
        ez.r(i) = c.rz;
        ex.r(i) = c.rx;
        ez.v = c.vz;
        ex.v = c.vx;
    }
    double ad = 1.0 / var_;
    ez.direct = Message{ad * mx.a / (ad + mx.a), mx.b * (ad / (ad + mx.a))};
    ex.direct = Message{ad * mz.a / (ad + mz.a), mz.b * (ad / (ad + mz.a))};
    out.ends = {std::move(ez), std::move(ex)};
    return out;
}

FactorPosterior GaussianNoiseChannel::map_posterior(std::span<const Message> in) const
{
    FactorPosterior out = posterior(in);
    // energy |x - z|^2 / 2 var: only the quadratic part of A survives
    out.A = 0.5 * (in[0].b.dot(out.ends[0].r) + in[1].b.dot(out.ends[1].r));
    return out;
}

Vec GaussianNoiseChannel::sample(const Vec *z, Rng &rng) const
{
    return *z + std::sqrt(var_) * standard_normal(z->size(), rng);
}

TeacherMoment GaussianNoiseChannel::teacher_moment(std::span<const double> tau_hat) const
{
    Mat2 P0 = noise_precision(tau_hat[0], tau_hat[1], var_);
    double det = P0.determinant();
    if (!(P0(0, 0) > 0) || !(det > 0)) throw NonPositiveTilt("gaussian_noise: tilt diverges");
    Mat2 C0 = P0.inverse();
    return {kLn2Pi - 0.5 * std::log(det) - 0.5 * (kLn2Pi + std::log(var_)), {C0(0, 0), C0(1, 1)}};
}

RSPotential GaussianNoiseChannel::rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                                               std::span<const double> tau_hat0,
                                               const QuadratureOptions &) const
{
    const auto *tp = dynamic_cast<const GaussianNoiseChannel *>(&teacher);
    if (!tp) throw DomainError(kind() + ": teacher must be a gaussian noise channel");
    Mat2 P0 = noise_precision(tau_hat0[0], tau_hat0[1], tp->var_);
    if (!(P0(0, 0) > 0) || !(P0.determinant() > 0))
        throw NonPositiveTilt("gaussian_noise: teacher tilt diverges");
    Mat2 C0 = P0.inverse();
    Mat2 M = Vec2(hat[0].mhat, hat[1].mhat).asDiagonal();
    Mat2 Q = Vec2(std::max(hat[0].qhat, 0.0), std::max(hat[1].qhat, 0.0)).asDiagonal();
    double az = hat[0].tauhat + hat[0].qhat, ax = hat[1].tauhat + hat[1].qhat;
    double ad = 1.0 / var_;
    if (!(ax + az + ax * az / ad > kMinPrecision) || !(az + ad > 0))
        throw NonPositivePrecision("gaussian_noise rs: precision");
    Mat2 P = noise_precision(az, ax, var_);
    Mat2 S = P.inverse();
    Mat2 Ebb = M * C0 * M + Q;
    Mat2 mm = C0 * M * S;
    Mat2 qq = S * Ebb * S;
    RSPotential p;
    p.A = 0.5 * (S * Ebb).trace() + kLn2Pi - 0.5 * std::log(P.determinant()) -
          0.5 * (kLn2Pi + std::log(var_));
    for (int s = 0; s < 2; ++s)
        p.ends.push_back(SEOverlap{mm(s, s), qq(s, s), S(s, s), qq(s, s) + S(s, s)});
    return p;
}

BOPotential GaussianNoiseChannel::bo_potential(std::span<const double> mhat,
                                               std::span<const double> tau_hat0,
                                               const QuadratureOptions &opt) const
{
    SEHat h[2] = {{mhat[0], mhat[0], tau_hat0[0]}, {mhat[1], mhat[1], tau_hat0[1]}};
    RSPotential rs = rs_potential(h, *this, tau_hat0, opt);
    auto tau0 = teacher_moment(tau_hat0).tau;
    BOPotential bo;
    bo.A = rs.A;
    for (int s = 0; s < 2; ++s) {
        bo.v.push_back(rs.ends[s].v);
        bo.m.push_back(tau0[s] - rs.ends[s].v);
    }
    return bo;
}

double GaussianNoiseChannel::entropy_constant() const
{
    return 0.5 * (kLn2Pi + 1.0 + std::log(var_));
}

// ---------------------------------------------------------- piecewise linear

double PiecewiseLinearSpec::operator()(double z) const
{
    for (const auto &r : regions)
        if (z < r.hi) return r.x0 + r.slope * z;
    const auto &r = regions.back();
    return r.x0 + r.slope * z;
}

void PiecewiseLinearSpec::validate() const
{
    if (regions.empty()) throw DomainError(name + ": no regions");
    if (regions.front().lo != -kInf || regions.back().hi != kInf)
        throw DomainError(name + ": regions must cover the real line");
    for (size_t i = 0; i < regions.size(); ++i) {
        if (!(regions[i].lo < regions[i].hi)) throw DomainError(name + ": empty region");
        if (i > 0 && regions[i].lo != regions[i - 1].hi)
            throw DomainError(name + ": regions must be contiguous");
    }
}

PiecewiseLinearSpec PiecewiseLinearSpec::identity()
{
    return {"identity", {{-kInf, kInf, 0, 1}}};
}

PiecewiseLinearSpec PiecewiseLinearSpec::relu()
{
    return {"relu", {{-kInf, 0, 0, 0}, {0, kInf, 0, 1}}};
}

PiecewiseLinearSpec PiecewiseLinearSpec::leaky_relu(double slope)
{
    return {"leaky_relu", {{-kInf, 0, 0, slope}, {0, kInf, 0, 1}}};
}

PiecewiseLinearSpec PiecewiseLinearSpec::hard_tanh()
{
    return {"hard_tanh", {{-kInf, -1, -1, 0}, {-1, 1, 0, 1}, {1, kInf, 1, 0}}};
}

PiecewiseLinearSpec PiecewiseLinearSpec::hard_sigmoid()
{
    return {"hard_sigmoid", {{-kInf, -1, 0, 0}, {-1, 1, 0.5, 0.5}, {1, kInf, 1, 0}}};
}

PiecewiseLinearSpec PiecewiseLinearSpec::abs()
{
    return {"abs", {{-kInf, 0, 0, -1}, {0, kInf, 0, 1}}};
}

PiecewiseLinearSpec PiecewiseLinearSpec::sgn()
{
    return {"sgn", {{-kInf, 0, -1, 0}, {0, kInf, 1, 0}}};
}

PiecewiseLinearSpec PiecewiseLinearSpec::named(const std::string &name)
{
    if (name == "identity") return identity();
    if (name == "relu") return relu();
    if (name == "leaky_relu") return leaky_relu(0.1);
    if (name == "hard_tanh") return hard_tanh();
    if (name == "hard_sigmoid") return hard_sigmoid();
    if (name == "abs") return abs();
    if (name == "sgn") return sgn();
    throw DomainError("unknown activation " + name);
}

PiecewiseLinearChannel::PiecewiseLinearChannel(PiecewiseLinearSpec spec, Index n)
    : spec_(std::move(spec)), n_(n)
{
    spec_.validate();
}

std::vector<double> PiecewiseLinearChannel::region_log_weights(double az, double bz, double ax,
                                                               double bx) const
{
    std::vector<double> lw;
    lw.reserve(spec_.regions.size());
    for (const auto &r : spec_.regions) {
        double ai = az + r.slope * r.slope * ax;
        double bi = bz + r.slope * (bx - ax * r.x0);
        lw.push_back(-0.5 * ax * r.x0 * r.x0 + bx * r.x0 + interval_belief(ai, bi, r.lo, r.hi).A);
    }
    return lw;
}

ChannelMoments PiecewiseLinearChannel::scalar(double az, double bz, double ax, double bx) const
{
    size_t k = spec_.regions.size();
    std::vector<double> lw(k), rz(k), vz(k), rx(k), vx(k);
    double L = -kInf;
    for (size_t i = 0; i < k; ++i) {
        const auto &r = spec_.regions[i];
        double ai = az + r.slope * r.slope * ax;
        double bi = bz + r.slope * (bx - ax * r.x0);
        ScalarMoments s = interval_belief(ai, bi, r.lo, r.hi);
        lw[i] = -0.5 * ax * r.x0 * r.x0 + bx * r.x0 + s.A;
        rz[i] = s.r;
        vz[i] = s.v;
        rx[i] = r.x0 + r.slope * s.r;
        vx[i] = r.slope * r.slope * s.v;
        L = logaddexp(L, lw[i]);
    }
    ChannelMoments m;
    m.A = L;
    for (size_t i = 0; i < k; ++i) {
        double p = std::exp(lw[i] - L);
        m.rz += p * rz[i];
        m.rx += p * rx[i];
        m.vz += p * vz[i];
        m.vx += p * vx[i];
    }
    // between-region spread
    for (size_t i = 0; i < k; ++i) {
        double p = std::exp(lw[i] - L);
        m.vz += p * (rz[i] - m.rz) * (rz[i] - m.rz);
        m.vx += p * (rx[i] - m.rx) * (rx[i] - m.rx);
    }
    return m;
}

FactorPosterior PiecewiseLinearChannel::posterior(std::span<const Message> in) const
{
    check_inputs(in);
    const Message &mz = in[0], &mx = in[1];
    FactorPosterior out;
    Endpoint ez, ex;
    ez.r.resize(n_);
    ex.r.resize(n_);
    double vz = 0, vx = 0;
    for (Index i = 0; i < n_; ++i) {
        ChannelMoments c = scalar(mz.a, mz.b(i), mx.a, mx.b(i));
        out.A += c.A;
        ez.r(i) = c.rz;
        ex.r(i) = c.rx;
        vz += c.vz;
        vx += c.vx;
    }
    ez.v = vz / double(n_);
    ex.v = vx / double(n_);
    out.ends = {std::move(ez), std::move(ex)};
    return out;
}

Vec PiecewiseLinearChannel::sample(const Vec *z, Rng &) const
{
    Vec x(z->size());
    for (Index i = 0; i < z->size(); ++i) x(i) = spec_((*z)(i));
    return x;
}

TeacherMoment PiecewiseLinearChannel::teacher_moment(std::span<const double> tau_hat) const
{
    ChannelMoments c;
    try {
        c = scalar(tau_hat[0], 0.0, tau_hat[1], 0.0);
    } catch (const NonPositivePrecision &) {
        throw NonPositiveTilt(kind() + ": tilt diverges");
    }
    return {c.A, {c.rz * c.rz + c.vz, c.rx * c.rx + c.vx}};
}

RSPotential PiecewiseLinearChannel::rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                                                 std::span<const double> tau_hat0,
                                                 const QuadratureOptions &opt) const
{
    const auto *tp = dynamic_cast<const PiecewiseLinearChannel *>(&teacher);
    if (!tp) throw DomainError(kind() + ": teacher must be a piecewise linear channel");
    double tz0 = tau_hat0[0], tx0 = tau_hat0[1];
    double az = hat[0].tauhat + hat[0].qhat, ax = hat[1].tauhat + hat[1].qhat;
    double sqz = std::sqrt(std::max(hat[0].qhat, 0.0)), sqx = std::sqrt(std::max(hat[1].qhat, 0.0));
    const auto &treg = tp->spec_.regions;

    std::vector<double> lw;
    try {
        lw = tp->region_log_weights(tz0, 0.0, tx0, 0.0);
    } catch (const NonPositivePrecision &) {
        throw NonPositiveTilt(kind() + ": teacher tilt diverges");
    }
    double L = -kInf;
    for (double l : lw) L = logaddexp(L, l);

    return detail::checked_quadrature(opt, kind(), [&](const QuadratureOptions &o) {
        bool both = sqz > 0 && sqx > 0;
        const auto &gh = gauss_hermite(both ? std::min(o.order, 31) : o.order);
        static const QuadratureRule point{{0.0}, {1.0}};
        const auto &gz = sqz > 0 ? gh : point;
        const auto &gx = sqx > 0 ? gh : point;
        double acc[7] = {0, 0, 0, 0, 0, 0, 0};
        for (size_t ri = 0; ri < treg.size(); ++ri) {
            const auto &r = treg[ri];
            double w = std::exp(lw[ri] - L);
            if (w < 1e-300) continue;
            double a0 = tz0 + r.slope * r.slope * tx0;
            double b0 = -r.slope * tx0 * r.x0;
            auto outer = detail::truncated_nodes(a0, b0, r.lo, r.hi, w, o.legendre);
            for (size_t i = 0; i < outer.x.size(); ++i) {
                double z0 = outer.x[i], x0 = r.x0 + r.slope * z0;
                for (size_t j = 0; j < gz.x.size(); ++j)
                    for (size_t l = 0; l < gx.x.size(); ++l) {
                        double ww = outer.w[i] * gz.w[j] * gx.w[l];
                        ChannelMoments c = scalar(az, hat[0].mhat * z0 + sqz * gz.x[j], ax,
                                                  hat[1].mhat * x0 + sqx * gx.x[l]);
                        acc[0] += ww * c.A;
                        acc[1] += ww * z0 * c.rz;
                        acc[2] += ww * c.rz * c.rz;
                        acc[3] += ww * c.vz;
                        acc[4] += ww * x0 * c.rx;
                        acc[5] += ww * c.rx * c.rx;
                        acc[6] += ww * c.vx;
                    }
            }
        }
        RSPotential p;
        p.A = acc[0];
        p.ends = {SEOverlap{acc[1], acc[2], acc[3], acc[2] + acc[3]},
                  SEOverlap{acc[4], acc[5], acc[6], acc[5] + acc[6]}};
        return p;
    });
}

BOPotential PiecewiseLinearChannel::bo_potential(std::span<const double> mhat,
                                                 std::span<const double> tau_hat0,
                                                 const QuadratureOptions &opt) const
{
    SEHat h[2] = {{mhat[0], mhat[0], tau_hat0[0]}, {mhat[1], mhat[1], tau_hat0[1]}};
    RSPotential rs = rs_potential(h, *this, tau_hat0, opt);
    auto tau0 = teacher_moment(tau_hat0).tau;
    BOPotential bo;
    bo.A = rs.A;
    for (int s = 0; s < 2; ++s) {
        bo.v.push_back(rs.ends[s].v);
        bo.m.push_back(tau0[s] - rs.ends[s].v);
    }
    return bo;
}

} // namespace treeamp
