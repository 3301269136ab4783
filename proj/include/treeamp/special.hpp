#ifndef TREEAMP_SPECIAL_HPP
#define TREEAMP_SPECIAL_HPP

#include <cmath>
#include <numbers>

namespace treeamp {

constexpr double kLn2Pi = 1.8378770664093454836;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

// ln(1 + e^x)
inline double log1pexp(double x)
{
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x)
{
    if (x >= 0)
        return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// ln(e^x + e^y)
inline double logaddexp(double x, double y)
{
    if (x == -kInf) return y;
    if (y == -kInf) return x;
    return std::max(x, y) + std::log1p(std::exp(-std::abs(x - y)));
}

inline double norm_logpdf(double z) { return -0.5 * z * z - 0.5 * kLn2Pi; }

double norm_cdf(double z);
double log_norm_cdf(double z);
// ln(Phi(z_hi) - Phi(z_lo)) for z_lo < z_hi, either may be infinite
double log_norm_mass(double z_lo, double z_hi);
// phi(z) / (1 - Phi(z))
double norm_hazard(double z);

// ln I0(s) and I1(s)/I0(s) for s >= 0, stable for large s
double log_bessel_i0(double s);
double bessel_ratio(double s);

} // namespace treeamp

#endif
