#include "treeamp/factor_graph.hpp"

#include <numeric>
#include <set>

namespace treeamp {

namespace {

struct UnionFind {
    std::vector<int> p;
    explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
    bool unite(int a, int b)
    {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        p[a] = b;
        return true;
    }
};

} // namespace

FactorGraph FactorGraph::build(const ModelDecl &decl)
{
    FactorGraph g;
    g.decl_ = decl;
    if (decl.factors.empty()) throw Disconnected("model has no factors");

    std::map<std::string, int> var_id;
    for (const auto &v : decl.variables) {
        if (var_id.count(v.name)) throw DuplicateVariable("variable '" + v.name + "' declared twice");
        var_id[v.name] = int(g.vars_.size());
        g.vars_.push_back(VariableNode{v.name, v.dim, {}});
    }

    std::set<std::string> factor_names;
    for (size_t k = 0; k < decl.factors.size(); ++k) {
        const auto &fd = decl.factors[k];
        if (!fd.factor) throw ConfigError("factor '" + fd.name + "' is null");
        if (!factor_names.insert(fd.name).second)
            throw DuplicateVariable("factor '" + fd.name + "' declared twice");
        const Factor &f = *fd.factor;
        if (int(fd.vars.size()) != f.arity())
            throw ShapeMismatch("factor '" + fd.name + "' (" + f.kind() + ") needs " +
                                std::to_string(f.arity()) + " variables");
        std::set<std::string> seen;
        FactorNode node{fd.name, fd.factor, {}};
        for (int s = 0; s < f.arity(); ++s) {
            const std::string &vn = fd.vars[s];
            if (!seen.insert(vn).second)
                throw DuplicateVariable("factor '" + fd.name + "' lists '" + vn + "' twice");
            auto it = var_id.find(vn);
            if (it == var_id.end()) {
                it = var_id.emplace(vn, int(g.vars_.size())).first;
                g.vars_.push_back(VariableNode{vn, f.dim(s), {}});
            }
            VariableNode &var = g.vars_[it->second];
            if (var.dim == 0) var.dim = f.dim(s);
            if (var.dim != f.dim(s))
                throw ShapeMismatch("variable '" + vn + "' has dim " + std::to_string(var.dim) +
                                    " but factor '" + fd.name + "' slot " + std::to_string(s) +
                                    " expects " + std::to_string(f.dim(s)));
            int e = int(g.edges_.size());
            g.edges_.push_back(Edge{it->second, int(k), s});
            var.edges.push_back(e);
            node.edges.push_back(e);
        }
        g.factors_.push_back(std::move(node));
    }

    int nv = int(g.vars_.size()), nf = int(g.factors_.size());
    for (const auto &v : g.vars_)
        if (v.edges.empty()) throw Disconnected("variable '" + v.name + "' has no factor");

    UnionFind uf(nv + nf);
    for (const auto &e : g.edges_)
        if (!uf.unite(e.var, nv + e.factor))
            throw CycleDetected("edge between '" + g.vars_[e.var].name + "' and '" +
                                g.factors_[e.factor].name + "' closes a cycle");
    for (int x = 1; x < nv + nf; ++x)
        if (uf.find(x) != uf.find(0)) throw Disconnected("factor graph is not connected");

    // root: first prior, else first likelihood, else first single-variable
    // factor; a penalty root would start from a zero-precision input
    for (int k = 0; k < nf && g.root_ < 0; ++k)
        if (g.factors_[k].factor->role() == FactorRole::prior) g.root_ = k;
    for (int k = 0; k < nf && g.root_ < 0; ++k)
        if (g.factors_[k].factor->role() == FactorRole::likelihood) g.root_ = k;
    for (int k = 0; k < nf && g.root_ < 0; ++k)
        if (g.factors_[k].factor->arity() == 1) g.root_ = k;
    if (g.root_ < 0) g.root_ = 0;
    g.ref_var_ = g.edges_[g.factors_[g.root_].edges[0]].var;

    // depth-first preorder from the root, emitting parent -> child edges
    struct Frame {
        bool is_factor;
        int node;
        int parent_edge;
    };
    std::vector<Frame> stack{{true, g.root_, -1}};
    while (!stack.empty()) {
        Frame fr = stack.back();
        stack.pop_back();
        const std::vector<int> &es = fr.is_factor ? g.factors_[fr.node].edges : g.vars_[fr.node].edges;
        std::vector<Frame> children;
        for (int e : es) {
            if (e == fr.parent_edge) continue;
            g.e_plus_.push_back(DirectedEdge{e, !fr.is_factor});
            children.push_back(fr.is_factor ? Frame{false, g.edges_[e].var, e}
                                            : Frame{true, g.edges_[e].factor, e});
        }
        // preorder: the first child must be expanded first
        for (auto it = children.rbegin(); it != children.rend(); ++it) stack.push_back(*it);
    }
    for (auto it = g.e_plus_.rbegin(); it != g.e_plus_.rend(); ++it)
        g.e_minus_.push_back(DirectedEdge{it->edge, !it->to_factor});

    g.passthrough_.assign(g.edges_.size(), -1);
    for (const auto &v : g.vars_)
        if (v.edges.size() == 2) {
            g.passthrough_[v.edges[0]] = v.edges[1];
            g.passthrough_[v.edges[1]] = v.edges[0];
        }
    return g;
}

int FactorGraph::variable_index(const std::string &name) const
{
    for (size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i].name == name) return int(i);
    throw ConfigError("unknown variable '" + name + "'");
}

int FactorGraph::factor_index(const std::string &name) const
{
    for (size_t k = 0; k < factors_.size(); ++k)
        if (factors_[k].name == name) return int(k);
    throw ConfigError("unknown factor '" + name + "'");
}

FactorGraph FactorGraph::with_factor(int k, FactorPtr f) const
{
    ModelDecl d = decl_;
    d.factors.at(k).factor = std::move(f);
    return build(d);
}

FactorGraph FactorGraph::bind_observations(const std::map<std::string, Vec> &y) const
{
    ModelDecl d = decl_;
    for (const auto &[name, obs] : y) {
        int k = factor_index(name);
        d.factors[k].factor = d.factors[k].factor->with_observation(obs);
    }
    return build(d);
}

} // namespace treeamp
