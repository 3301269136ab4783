#ifndef TREEAMP_SE_QUAD_HPP
#define TREEAMP_SE_QUAD_HPP

// Quadrature building blocks shared by the SE potentials of the modules.

#include "treeamp/exp_family.hpp"
#include "treeamp/factor.hpp"
#include "treeamp/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace treeamp::detail {

struct Accum {
    double A = 0, m = 0, q = 0, v = 0;

    void add(double w, const ScalarMoments &s, double x0)
    {
        A += w * s.A;
        m += w * x0 * s.r;
        q += w * s.r * s.r;
        v += w * s.v;
    }

    SEOverlap overlap() const { return {m, q, v, q + v}; }
};

// One piece of a teacher's tilted scalar measure.
struct TiltedComponent {
    enum class Kind { atom, gaussian, truncated } kind;
    double weight = 1;
    double a = 0;  // precision of the gaussian/truncated piece
    double b = 0;  // linear coefficient, or the location of an atom
    double lo = -kInf, hi = kInf;

    double second_moment() const;
};

// Nodes and weights for x ~ exp(-a x^2/2 + b x) restricted to [lo, hi],
// normalized to the given total weight.
QuadratureRule truncated_nodes(double a, double b, double lo, double hi, double total, int per_panel);

// Nodes for z ~ N(0, s^2) split at zero, so kinks at the origin are exact.
QuadratureRule split_gaussian_nodes(double s, int per_panel);

// Nodes for b ~ N(mean, sd^2): composite Gauss-Legendre over mean +- 12 sd
// with panels no wider than `scale` (up to max_panels), weights summing to 1.
QuadratureRule gaussian_rule(double mean, double sd, double scale, int per_panel, int max_panels);

// E over x0 ~ component, b ~ N(mhat x0, qhat) of kernel(b); `scale` is the
// width over which the kernel varies in b.
template <class Kernel>
void integrate_component(const TiltedComponent &c, double mhat, double qhat, double scale,
                         const QuadratureOptions &opt, Kernel &&kernel, Accum &acc)
{
    double sq = std::sqrt(std::max(qhat, 0.0));
    switch (c.kind) {
    case TiltedComponent::Kind::atom: {
        auto rule = gaussian_rule(mhat * c.b, sq, scale, opt.legendre, opt.max_panels);
        for (size_t j = 0; j < rule.x.size(); ++j) acc.add(c.weight * rule.w[j], kernel(rule.x[j]), c.b);
        break;
    }
    case TiltedComponent::Kind::gaussian: {
        double mu = c.b / c.a, s2 = 1.0 / c.a;
        double var_b = mhat * mhat * s2 + std::max(qhat, 0.0);
        double gain = var_b > 0 ? mhat * s2 / var_b : 0.0;
        auto rule = gaussian_rule(mhat * mu, std::sqrt(var_b), scale, opt.legendre, opt.max_panels);
        for (size_t j = 0; j < rule.x.size(); ++j) {
            double b = rule.x[j];
            double x0 = mu + gain * (b - mhat * mu);
            acc.add(c.weight * rule.w[j], kernel(b), x0);
        }
        break;
    }
    case TiltedComponent::Kind::truncated: {
        auto outer = truncated_nodes(c.a, c.b, c.lo, c.hi, c.weight, opt.legendre);
        for (size_t i = 0; i < outer.x.size(); ++i) {
            auto rule = gaussian_rule(mhat * outer.x[i], sq, scale, opt.legendre, opt.nested_panels);
            for (size_t j = 0; j < rule.x.size(); ++j)
                acc.add(outer.w[i] * rule.w[j], kernel(rule.x[j]), outer.x[i]);
        }
        break;
    }
    }
}

inline double max_abs_diff(const RSPotential &p, const RSPotential &q)
{
    double d = std::abs(p.A - q.A);
    for (size_t s = 0; s < p.ends.size(); ++s) {
        d = std::max(d, std::abs(p.ends[s].m - q.ends[s].m));
        d = std::max(d, std::abs(p.ends[s].q - q.ends[s].q));
        d = std::max(d, std::abs(p.ends[s].v - q.ends[s].v));
    }
    return d;
}

// Runs fn(opt), and with opt.check also with coarser rules, failing when
// the two disagree beyond opt.tol.
template <class Fn>
RSPotential checked_quadrature(const QuadratureOptions &opt, const std::string &who, Fn &&fn)
{
    RSPotential fine = fn(opt);
    if (opt.check) {
        QuadratureOptions c = opt;
        c.order = std::max(opt.order / 2 + 1, 5);
        c.legendre = std::max(opt.legendre * 2 / 3, 4);
        c.max_panels = std::max(opt.max_panels / 2, 8);
        c.nested_panels = std::max(opt.nested_panels / 2, 8);
        RSPotential coarse = fn(c);
        double d = max_abs_diff(fine, coarse);
        if (!(d <= opt.tol))
            throw QuadratureFailure(who + ": quadrature error estimate " + std::to_string(d));
    }
    return fine;
}

} // namespace treeamp::detail

#endif
