#include "se_quad.hpp"

namespace treeamp::detail {

double TiltedComponent::second_moment() const
{
    switch (kind) {
    case Kind::atom:
        return b * b;
    case Kind::gaussian:
        return (b / a) * (b / a) + 1.0 / a;
    case Kind::truncated: {
        auto s = interval_belief(a, b, lo, hi);
        return s.r * s.r + s.v;
    }
    }
    return kNaN;
}

QuadratureRule truncated_nodes(double a, double b, double lo, double hi, double total, int per_panel)
{
    auto mom = interval_belief(a, b, lo, hi);
    double sd = std::sqrt(std::max(mom.v, 1e-300));
    double s = 1.0 / std::sqrt(a);
    double mu = b / a;
    double L = std::max({lo, mu - 12 * s, mom.r - 40 * sd});
    double U = std::min({hi, mu + 12 * s, mom.r + 40 * sd});
    if (!(U > L)) {
        // degenerate width: a single atom at the mean
        return QuadratureRule{{mom.r}, {total}};
    }
    int panels = std::clamp(int(std::ceil((U - L) / sd)), 4, 200);
    auto rule = composite_legendre(L, U, panels, per_panel);
    double norm = 0;
    for (size_t i = 0; i < rule.x.size(); ++i) {
        double x = rule.x[i];
        rule.w[i] *= std::exp(-0.5 * a * x * x + b * x - mom.A);
        norm += rule.w[i];
    }
    // renormalize away the truncation and rounding error
    for (auto &w : rule.w) w *= total / norm;
    return rule;
}

QuadratureRule split_gaussian_nodes(double s, int per_panel)
{
    auto neg = composite_legendre(-11 * s, 0, 22, per_panel);
    auto pos = composite_legendre(0, 11 * s, 22, per_panel);
    QuadratureRule out;
    for (auto *r : {&neg, &pos})
        for (size_t i = 0; i < r->x.size(); ++i) {
            double z = r->x[i] / s;
            out.x.push_back(r->x[i]);
            out.w.push_back(r->w[i] * std::exp(norm_logpdf(z)) / s);
        }
    return out;
}

QuadratureRule gaussian_rule(double mean, double sd, double scale, int per_panel, int max_panels)
{
    if (!(sd > 0)) return QuadratureRule{{mean}, {1.0}};
    double half = 12 * sd;
    int panels = int(std::min(double(max_panels), std::ceil(2 * half / scale)));
    panels = std::max(panels, 8);
    auto rule = composite_legendre(mean - half, mean + half, panels, per_panel);
    double norm = 0;
    for (size_t i = 0; i < rule.x.size(); ++i) {
        double z = (rule.x[i] - mean) / sd;
        rule.w[i] *= std::exp(-0.5 * z * z);
        norm += rule.w[i];
    }
    for (auto &w : rule.w) w /= norm;
    return rule;
}

} // namespace treeamp::detail
