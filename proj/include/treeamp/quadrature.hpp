#ifndef TREEAMP_QUADRATURE_HPP
#define TREEAMP_QUADRATURE_HPP

#include <vector>

namespace treeamp {

struct QuadratureRule {
    std::vector<double> x;
    std::vector<double> w;
};

// Probabilists' Gauss-Hermite: sum_i w_i f(x_i) ~ E f(xi), xi ~ N(0,1).
const QuadratureRule &gauss_hermite(int n);
// Gauss-Legendre on [-1, 1].
const QuadratureRule &gauss_legendre(int n);

// Composite Gauss-Legendre nodes on [lo, hi] with equal panels.
QuadratureRule composite_legendre(double lo, double hi, int panels, int order);

struct QuadratureOptions {
    int order = 63;       // Gauss-Hermite order for Gaussian averages
    int legendre = 12;    // nodes per Gauss-Legendre panel
    int max_panels = 400; // panels of a one-dimensional Gaussian average
    int nested_panels = 32; // panels of an inner average under an outer one
    bool check = false;   // compare against a coarser rule
    double tol = 1e-8;
};

} // namespace treeamp

#endif
