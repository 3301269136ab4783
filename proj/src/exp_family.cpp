#include "treeamp/exp_family.hpp"
#include "treeamp/errors.hpp"

#include <algorithm>
#include <string>

namespace treeamp {

void check_precision(double a, const char *where)
{
    if (!(a > kMinPrecision))
        throw NonPositivePrecision(std::string(where) + ": precision " + std::to_string(a));
}

ScalarMoments real_belief(double a, double b)
{
    check_precision(a, "real_belief");
    return {real_log_partition(a, b), b / a, 1.0 / a};
}

ScalarMoments binary_belief(double b)
{
    double ab = std::abs(b);
    double e = std::exp(-2.0 * ab);
    ScalarMoments m;
    m.A = ab + std::log1p(e);
    m.r = std::tanh(b);
    m.v = 4.0 * e / ((1.0 + e) * (1.0 + e));
    return m;
}

ScalarMoments sparse_belief(double a, double b, double eta)
{
    check_precision(a, "sparse_belief");
    double xi = real_log_partition(a, b) - eta;
    double s = sigmoid(xi), sc = sigmoid(-xi);
    double mean = b / a;
    ScalarMoments m;
    m.A = eta + log1pexp(xi);
    m.rho = s;
    m.r = mean * s;
    m.v = s / a + mean * mean * s * sc;
    return m;
}

namespace {

// Tail of the Laplace continued fraction for the Mills ratio: returns
// g = h(z) - z and k with v = g(k - g), where h is the normal hazard.
void mills_tail(double z, double &g, double &k)
{
    double c = 0;
    double next = 0;
    for (int n = 120; n >= 1; --n) {
        next = c;
        c = n / (z + c);
    }
    g = c;
    k = next;
}

constexpr double kTailSwitch = 10.0;

// Truncation to [x_lo, inf) deep in the tail: z_lo = (a x_lo - b)/sqrt(a)
ScalarMoments lower_tail(double a, double b, double x_lo, double z)
{
    double g, k;
    mills_tail(z, g, k);
    double sa = std::sqrt(a);
    ScalarMoments m;
    m.A = real_log_partition(a, b) + log_norm_cdf(-z);
    m.r = x_lo + g / sa;
    m.v = g * (k - g) / a;
    return m;
}

} // namespace

ScalarMoments interval_belief(double a, double b, double x_min, double x_max)
{
    check_precision(a, "interval_belief");
    if (!(x_min < x_max)) throw EmptyInterval("interval_belief: x_min >= x_max");
    if (x_min == -kInf && x_max == kInf) return real_belief(a, b);

    double sa = std::sqrt(a);
    double z_lo = x_min == -kInf ? -kInf : (a * x_min - b) / sa;
    double z_hi = x_max == kInf ? kInf : (a * x_max - b) / sa;

    // Deep one-sided tails, or two-sided with negligible mass at the far end.
    if (z_lo > kTailSwitch && (x_max == kInf || z_hi - z_lo > 40.0))
        return lower_tail(a, b, x_min, z_lo);
    if (z_hi < -kTailSwitch && (x_min == -kInf || z_hi - z_lo > 40.0)) {
        ScalarMoments m = lower_tail(a, -b, -x_max, -z_hi);
        m.r = -m.r;
        return m;
    }

    double log_mass = log_norm_mass(z_lo, z_hi);
    double t_lo = x_min == -kInf ? 0.0 : std::exp(norm_logpdf(z_lo) - log_mass);
    double t_hi = x_max == kInf ? 0.0 : std::exp(norm_logpdf(z_hi) - log_mass);
    double zt_lo = x_min == -kInf ? 0.0 : z_lo * t_lo;
    double zt_hi = x_max == kInf ? 0.0 : z_hi * t_hi;

    ScalarMoments m;
    m.A = real_log_partition(a, b) + log_mass;
    m.r = b / a - (t_hi - t_lo) / sa;
    m.v = (1.0 - (zt_hi - zt_lo) - (t_hi - t_lo) * (t_hi - t_lo)) / a;
    m.r = std::clamp(m.r, x_min, x_max);
    m.v = std::max(m.v, 0.0);
    return m;
}

PhaseMoments phase_belief(std::complex<double> b)
{
    double s = std::abs(b);
    double ratio = bessel_ratio(s);
    PhaseMoments m;
    m.A = kLn2Pi + log_bessel_i0(s);
    m.r = s > 0 ? b / s * ratio : std::complex<double>(0.0, 0.0);
    m.v = 0.5 * (1.0 - ratio * ratio);
    return m;
}

} // namespace treeamp
