#include "treeamp/special.hpp"

#include <gsl/gsl_cdf.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_sf_erf.h>

#include <algorithm>

namespace treeamp {

namespace {

// GSL aborts on domain errors by default; every call below is guarded.
const bool gsl_quiet = [] {
    gsl_set_error_handler_off();
    return true;
}();

} // namespace

double norm_cdf(double z)
{
    if (z == kInf) return 1.0;
    if (z == -kInf) return 0.0;
    return gsl_cdf_ugaussian_P(z);
}

double log_norm_cdf(double z)
{
    if (z == kInf) return 0.0;
    if (z == -kInf) return -kInf;
    if (z > 5.0) return std::log1p(-gsl_cdf_ugaussian_Q(z));
    return gsl_sf_log_erfc(-z / std::numbers::sqrt2) - std::numbers::ln2;
}

double norm_hazard(double z)
{
    if (z == -kInf) return 0.0;
    return gsl_sf_hazard(z);
}

double log_norm_mass(double z_lo, double z_hi)
{
    if (z_lo > 0) {
        // both in the upper tail: Q(z_lo) - Q(z_hi)
        double l1 = log_norm_cdf(-z_lo);
        double l2 = log_norm_cdf(-z_hi);
        return l1 + std::log(-std::expm1(l2 - l1));
    }
    if (z_hi < 0) {
        double l1 = log_norm_cdf(z_hi);
        double l2 = log_norm_cdf(z_lo);
        return l1 + std::log(-std::expm1(l2 - l1));
    }
    // straddles zero: sum of two positive erf halves, no cancellation
    double hi = z_hi == kInf ? 1.0 : std::erf(z_hi / std::numbers::sqrt2);
    double lo = z_lo == -kInf ? 1.0 : std::erf(-z_lo / std::numbers::sqrt2);
    return std::log(0.5 * (hi + lo));
}

double log_bessel_i0(double s)
{
    return std::log(gsl_sf_bessel_I0_scaled(s)) + s;
}

double bessel_ratio(double s)
{
    if (s == 0.0) return 0.0;
    return gsl_sf_bessel_I1_scaled(s) / gsl_sf_bessel_I0_scaled(s);
}

} // namespace treeamp
