#ifndef TREEAMP_MAP_PENALTIES_HPP
#define TREEAMP_MAP_PENALTIES_HPP

#include "treeamp/factor.hpp"

namespace treeamp {

struct PenaltySpec {
    enum class Kind { l1, l21 } kind = Kind::l1;
    double strength = 0;  // lambda >= 0
    Index d = 1;          // l21: components per group
    Index n = 1;          // l1: size; l21: number of groups
};

// Zero-temperature moments: A = max_x [-E(x) - a|x|^2/2 + b.x], r the
// argmax (the prox of E/a at b/a) and v the mean diagonal of dr/db.
struct MapMoments {
    double A = 0;
    Vec r;
    double v = 0;
};

// u -> sign(u) max(|u| - t, 0); |u| == t maps to 0
Vec soft_threshold(const Vec &u, double t);
// group g = {j n + g : j < d}, scaled by max(0, 1 - t/|u_g|)
Vec group_soft_threshold(const Vec &u, double t, Index d, Index n);

double penalty_energy(const PenaltySpec &spec, const Vec &x);
MapMoments map_moments(const PenaltySpec &spec, double a, const Vec &b);
// min_x E(x) + (a/2)|x - u|^2
double moreau_envelope(const PenaltySpec &spec, double a, const Vec &u);

// Penalty factor exp(-E(x)) on one variable; MAP only.
class PenaltyFactor : public Factor {
public:
    explicit PenaltyFactor(PenaltySpec spec);

    std::string kind() const override { return spec_.kind == PenaltySpec::Kind::l1 ? "l1" : "l21"; }
    FactorRole role() const override { return FactorRole::penalty; }
    Index dim(int) const override { return spec_.kind == PenaltySpec::Kind::l1 ? spec_.n : spec_.d * spec_.n; }
    const PenaltySpec &spec() const { return spec_; }

    FactorPosterior posterior(std::span<const Message> in) const override;
    bool has_map() const override { return true; }
    FactorPosterior map_posterior(std::span<const Message> in) const override;

private:
    PenaltySpec spec_;
};

std::shared_ptr<PenaltyFactor> make_l1(double strength, Index n);
std::shared_ptr<PenaltyFactor> make_l21(double strength, Index d, Index n);

} // namespace treeamp

#endif
