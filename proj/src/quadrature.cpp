#include "treeamp/quadrature.hpp"
#include "treeamp/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace treeamp {

namespace {

// Golub-Welsch for a symmetric Jacobi matrix with zero diagonal, nodes
// polished by Newton on the orthonormal recurrence, weights from the
// Christoffel function.
QuadratureRule symmetric_rule(int n, double mass, double (*beta)(int))
{
    if (n < 1) throw DomainError("quadrature order must be positive");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd off(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) off(k - 1) = beta(k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);

    QuadratureRule rule;
    rule.x.resize(n);
    rule.w.resize(n);
    double p0 = 1.0 / std::sqrt(mass);
    for (int i = 0; i < n; ++i) {
        double x = es.eigenvalues()(i);
        double sum = 0;
        for (int it = 0; it < 3; ++it) {
            double pm = 0, p = p0, dpm = 0, dp = 0;
            sum = p * p;
            for (int k = 0; k < n; ++k) {
                double bk = k > 0 ? beta(k) : 0.0;
                double bn = beta(k + 1);
                double pn = (x * p - bk * pm) / bn;
                double dpn = (p + x * dp - bk * dpm) / bn;
                pm = p; p = pn; dpm = dp; dp = dpn;
                if (k + 1 < n) sum += p * p;
            }
            if (dp != 0) x -= p / dp;
        }
        rule.x[i] = x;
        rule.w[i] = 1.0 / sum;
    }
    // enforce exact symmetry
    for (int i = 0; i < n / 2; ++i) {
        double xs = 0.5 * (rule.x[n - 1 - i] - rule.x[i]);
        double ws = 0.5 * (rule.w[n - 1 - i] + rule.w[i]);
        rule.x[i] = -xs; rule.x[n - 1 - i] = xs;
        rule.w[i] = ws; rule.w[n - 1 - i] = ws;
    }
    if (n % 2) rule.x[n / 2] = 0.0;
    return rule;
}

double hermite_beta(int k) { return std::sqrt(double(k)); }
double legendre_beta(int k) { return k / std::sqrt(4.0 * k * k - 1.0); }

struct Cache {
    std::mutex mu;
    std::map<int, std::unique_ptr<QuadratureRule>> rules;
};

const QuadratureRule &cached(Cache &c, int n, double mass, double (*beta)(int))
{
    std::lock_guard<std::mutex> lock(c.mu);
    auto &slot = c.rules[n];
    if (!slot) slot = std::make_unique<QuadratureRule>(symmetric_rule(n, mass, beta));
    return *slot;
}

} // namespace

const QuadratureRule &gauss_hermite(int n)
{
    static Cache cache;
    return cached(cache, n, 1.0, hermite_beta);
}

const QuadratureRule &gauss_legendre(int n)
{
    static Cache cache;
    return cached(cache, n, 2.0, legendre_beta);
}

QuadratureRule composite_legendre(double lo, double hi, int panels, int order)
{
    const auto &gl = gauss_legendre(order);
    QuadratureRule out;
    out.x.reserve(size_t(panels) * order);
    out.w.reserve(size_t(panels) * order);
    double h = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
        double c = lo + (p + 0.5) * h;
        for (int i = 0; i < order; ++i) {
            out.x.push_back(c + 0.5 * h * gl.x[i]);
            out.w.push_back(0.5 * h * gl.w[i]);
        }
    }
    return out;
}

} // namespace treeamp
