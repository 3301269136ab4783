#include "treeamp/ep_engine.hpp"
#include "treeamp/exp_family.hpp"

namespace treeamp {

double gaussian_log_partition(double a, const Vec &b)
{
    return 0.5 * b.squaredNorm() / a + 0.5 * double(b.size()) * (kLn2Pi - std::log(a));
}

namespace {

// precision given to inputs that carry no information yet, when the factor
// cannot form a proper belief without one
constexpr double kUninformedPrecision = 1e-8;

double map_log_partition(double a, const Vec &b)
{
    return 0.5 * b.squaredNorm() / a;
}

bool finite(const Message &m)
{
    return std::isfinite(m.a) && m.b.allFinite();
}

} // namespace

EPEngine::EPEngine(const FactorGraph &graph, EPSettings settings) : g_(graph), s_(settings)
{
    if (!(s_.tol > 0)) throw DomainError("EP tolerance must be positive");
    if (!(s_.damping >= 0 && s_.damping < 1)) throw DomainError("EP damping must lie in [0, 1)");
    for (const auto &f : g_.factors()) {
        if (s_.map && !f.factor->has_map())
            throw DomainError("factor '" + f.name + "' has no MAP module");
        if (!s_.map && f.factor->role() == FactorRole::penalty)
            throw DomainError("factor '" + f.name + "' is a penalty; use MAP mode");
    }
    init();
}

void EPEngine::init()
{
    size_t ne = g_.edges().size();
    to_var_.assign(ne, Message{});
    to_factor_.assign(ne, Message{});
    visited_.assign(ne, 0);
    Rng rng(s_.seed);
    for (size_t e = 0; e < ne; ++e) {
        Index n = g_.variable(g_.edge(int(e)).var).dim;
        to_var_[e].b = s_.init_b_std > 0 ? Vec(s_.init_b_std * standard_normal(n, rng)) : Vec::Zero(n);
    }
    for (size_t e = 0; e < ne; ++e) update_to_factor(int(e));
    post_.clear();
    diag_.clear();
    sweeps_ = 0;
}

FactorPosterior EPEngine::factor_posterior(int k) const { return factor_posterior(k, 0.0); }

FactorPosterior EPEngine::factor_posterior(int k, double uninformed) const
{
    const FactorNode &f = g_.factor(k);
    std::vector<Message> in;
    in.reserve(f.edges.size());
    for (int e : f.edges) {
        in.push_back(to_factor_[e]);
        if (in.back().a == 0) in.back().a = uninformed;
    }
    return s_.map ? f.factor->map_posterior(in) : f.factor->posterior(in);
}

void EPEngine::update_to_var(int e)
{
    const Edge &ed = g_.edge(e);
    const FactorNode &f = g_.factor(ed.factor);
    auto fail = [&](const std::string &what) {
        return NumericalFailure("factor '" + f.name + "' -> '" + g_.variable(ed.var).name + "': " + what);
    };
    bool uninformed = false;
    for (int e2 : f.edges) uninformed |= to_factor_[e2].a == 0;
    FactorPosterior fp;
    Message in = to_factor_[e];
    try {
        fp = factor_posterior(ed.factor);
    } catch (const Error &err) {
        // an input without information can leave the tilted belief improper
        // (singular channel, penalty at zero curvature); retry at the floor
        if (!uninformed) {
            if (dynamic_cast<const NumericalFailure *>(&err)) throw;
            throw fail(err.what());
        }
        try {
            fp = factor_posterior(ed.factor, kUninformedPrecision);
        } catch (const Error &err2) {
            throw fail(err2.what());
        }
        if (in.a == 0) in.a = kUninformedPrecision;
    }
    Endpoint &end = fp.ends[ed.slot];
    Message m;
    if (end.direct) {
        m = std::move(*end.direct);
    } else {
        double v = end.v;
        v = std::max(v, s_.map ? s_.map_min_variance : s_.min_variance);
        if (!(v > 0) || !std::isfinite(v)) throw fail("variance " + std::to_string(v));
        m.a = 1.0 / v - in.a;
        m.b = end.r / v - in.b;
    }
    if (!finite(m)) throw fail("non-finite message");
    if (s_.damping > 0 && visited_[e]) {
        const Message &old = to_var_[e];
        m.a = (1 - s_.damping) * m.a + s_.damping * old.a;
        m.b = (1 - s_.damping) * m.b + s_.damping * old.b;
    }
    visited_[e] = 1;
    to_var_[e] = std::move(m);
}

void EPEngine::update_to_factor(int e)
{
    const Edge &ed = g_.edge(e);
    const VariableNode &var = g_.variable(ed.var);
    Message &m = to_factor_[e];
    if (var.n_neighbors() == 1) {
        m.a = 0;
        m.b = Vec::Zero(var.dim);
    } else if (int o = g_.passthrough()[e]; o >= 0) {
        m = to_var_[o];
    } else {
        m.a = 0;
        m.b = Vec::Zero(var.dim);
        for (int e2 : var.edges)
            if (e2 != e) {
                m.a += to_var_[e2].a;
                m.b += to_var_[e2].b;
            }
    }
}

void EPEngine::refresh_posteriors()
{
    post_.resize(g_.variables().size());
    for (size_t i = 0; i < post_.size(); ++i) {
        const VariableNode &var = g_.variable(int(i));
        VariablePosterior &p = post_[i];
        p.a = 0;
        p.b = Vec::Zero(var.dim);
        for (int e : var.edges) {
            p.a += to_var_[e].a;
            p.b += to_var_[e].b;
        }
        if (!(p.a > s_.variance_floor))
            throw NegativePosteriorPrecision("variable '" + var.name + "': posterior precision " +
                                             std::to_string(p.a));
        p.r = p.b / p.a;
        p.v = 1.0 / p.a;
    }
}

double EPEngine::sweep()
{
    std::vector<VariablePosterior> old = post_;
    for (const auto *order : {&g_.e_plus(), &g_.e_minus()})
        for (const DirectedEdge &d : *order) {
            if (d.to_factor)
                update_to_factor(d.edge);
            else
                update_to_var(d.edge);
        }
    refresh_posteriors();
    ++sweeps_;
    double change = kInf;
    if (!old.empty()) {
        change = 0;
        for (size_t i = 0; i < post_.size(); ++i) {
            change = std::max(change, (post_[i].r - old[i].r).lpNorm<Eigen::Infinity>());
            change = std::max(change, std::abs(post_[i].v - old[i].v));
        }
    }
    if (s_.record_diagnostics) {
        SweepDiagnostics d;
        d.iteration = sweeps_;
        d.change = change;
        for (const auto &p : post_) d.v.push_back(p.v);
        diag_.push_back(std::move(d));
    }
    return change;
}

const VariablePosterior &EPEngine::posterior(int i) const
{
    return posteriors().at(i);
}

const std::vector<VariablePosterior> &EPEngine::posteriors() const
{
    if (post_.empty()) throw DomainError("posterior undefined before the first sweep");
    return post_;
}

double EPEngine::free_energy() const
{
    auto logz = s_.map ? map_log_partition : gaussian_log_partition;
    double A = 0;
    for (size_t k = 0; k < g_.factors().size(); ++k) A += factor_posterior(int(k)).A;
    for (size_t e = 0; e < g_.edges().size(); ++e) {
        double a = to_var_[e].a + to_factor_[e].a;
        if (!(a > 0)) return kNaN;
        A -= logz(a, to_var_[e].b + to_factor_[e].b);
    }
    for (size_t i = 0; i < g_.variables().size(); ++i) {
        double a = 0;
        Vec b = Vec::Zero(g_.variable(int(i)).dim);
        for (int e : g_.variable(int(i)).edges) {
            a += to_var_[e].a;
            b += to_var_[e].b;
        }
        if (!(a > 0)) return kNaN;
        A += logz(a, b);
    }
    return -A;
}

EPResult EPEngine::run()
{
    EPResult res;
    while (sweeps_ < s_.max_iter) {
        double change = sweep();
        if (change < s_.tol) {
            res.converged = true;
            break;
        }
    }
    res.n_iters = sweeps_;
    if (!post_.empty()) {
        res.posteriors = post_;
        res.free_energy = free_energy();
    }
    res.diagnostics = diag_;
    return res;
}

EPResult run(const FactorGraph &graph, const EPSettings &settings)
{
    EPEngine eng(graph, settings);
    return eng.run();
}

EPResult run_checked(const FactorGraph &graph, const EPSettings &settings)
{
    EPResult res = run(graph, settings);
    if (!res.converged)
        throw NotConverged("EP did not converge in " + std::to_string(res.n_iters) + " sweeps", res);
    return res;
}

MAPResult map_run(const FactorGraph &graph, EPSettings settings)
{
    settings.map = true;
    MAPResult out;
    out.ep = run(graph, settings);
    for (const auto &p : out.ep.posteriors) out.x.push_back(p.r);
    out.objective = out.ep.free_energy;
    return out;
}

} // namespace treeamp
