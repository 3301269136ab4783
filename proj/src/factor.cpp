#include "treeamp/factor.hpp"

namespace treeamp {

FactorPosterior Factor::map_posterior(std::span<const Message>) const
{
    throw DomainError(kind() + ": no MAP module");
}

Vec Factor::sample(const Vec *, Rng &) const
{
    throw UnsamplableFactor(kind() + " cannot be sampled");
}

std::shared_ptr<Factor> Factor::with_observation(const Vec &) const
{
    throw DomainError(kind() + ": not a likelihood");
}

TeacherMoment Factor::teacher_moment(std::span<const double>) const
{
    throw DomainError(kind() + ": no teacher moment");
}

RSPotential Factor::rs_potential(std::span<const SEHat>, const Factor &, std::span<const double>,
                                 const QuadratureOptions &) const
{
    throw DomainError(kind() + ": no RS potential");
}

BOPotential Factor::bo_potential(std::span<const double>, std::span<const double>,
                                 const QuadratureOptions &) const
{
    throw DomainError(kind() + ": no BO potential");
}

void Factor::check_inputs(std::span<const Message> in) const
{
    if (int(in.size()) != arity())
        throw ShapeMismatch(kind() + ": expected " + std::to_string(arity()) + " messages");
    for (int s = 0; s < arity(); ++s)
        if (in[s].b.size() != dim(s))
            throw ShapeMismatch(kind() + ": message size " + std::to_string(in[s].b.size()) +
                                " on slot " + std::to_string(s) + ", expected " +
                                std::to_string(dim(s)));
}

Vec standard_normal(Index n, Rng &rng)
{
    std::normal_distribution<double> nd;
    Vec x(n);
    for (Index i = 0; i < n; ++i) x(i) = nd(rng);
    return x;
}

} // namespace treeamp
