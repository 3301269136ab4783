#ifndef TREEAMP_EXP_FAMILY_HPP
#define TREEAMP_EXP_FAMILY_HPP

#include "treeamp/special.hpp"

#include <complex>

namespace treeamp {

// Smallest precision accepted by any Gaussian-type log-partition.
constexpr double kMinPrecision = 1e-11;

struct ScalarMoments {
    double A = 0;
    double r = 0;
    double v = 0;
    double rho = kNaN;  // sparse belief only
};

struct PhaseMoments {
    double A = 0;
    std::complex<double> r;
    double v = 0;  // per real component
};

void check_precision(double a, const char *where);

// A only, for the hot paths
inline double real_log_partition(double a, double b)
{
    return 0.5 * b * b / a + 0.5 * (kLn2Pi - std::log(a));
}

ScalarMoments real_belief(double a, double b);
ScalarMoments binary_belief(double b);
ScalarMoments sparse_belief(double a, double b, double eta);
ScalarMoments interval_belief(double a, double b, double x_min, double x_max);
PhaseMoments phase_belief(std::complex<double> b);

} // namespace treeamp

#endif
