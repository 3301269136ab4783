#ifndef TREEAMP_FACTOR_GRAPH_HPP
#define TREEAMP_FACTOR_GRAPH_HPP

#include "treeamp/factor.hpp"

#include <map>

namespace treeamp {

struct VariableDecl {
    std::string name;
    Index dim = 0;
};

struct FactorDecl {
    std::string name;
    FactorPtr factor;
    // one variable per slot, in slot order
    std::vector<std::string> vars;
};

struct ModelDecl {
    std::vector<VariableDecl> variables;  // optional; dims are checked
    std::vector<FactorDecl> factors;
};

struct VariableNode {
    std::string name;
    Index dim = 0;
    std::vector<int> edges;  // in declaration order
    int n_neighbors() const { return int(edges.size()); }
};

struct FactorNode {
    std::string name;
    FactorPtr factor;
    std::vector<int> edges;  // one per slot
};

struct Edge {
    int var = -1;
    int factor = -1;
    int slot = 0;
};

struct DirectedEdge {
    int edge = -1;
    bool to_factor = false;  // i -> k when true, k -> i otherwise
    bool operator==(const DirectedEdge &) const = default;
};

// Immutable validated tree of variables and factors.
class FactorGraph {
public:
    static FactorGraph build(const ModelDecl &decl);

    const std::vector<VariableNode> &variables() const { return vars_; }
    const std::vector<FactorNode> &factors() const { return factors_; }
    const std::vector<Edge> &edges() const { return edges_; }
    const VariableNode &variable(int i) const { return vars_.at(i); }
    const FactorNode &factor(int k) const { return factors_.at(k); }
    const Edge &edge(int e) const { return edges_.at(e); }

    int variable_index(const std::string &name) const;
    int factor_index(const std::string &name) const;

    // forward topological order from the root and its exact reverse
    const std::vector<DirectedEdge> &e_plus() const { return e_plus_; }
    const std::vector<DirectedEdge> &e_minus() const { return e_minus_; }
    int root() const { return root_; }
    // variable carrying the normalization N used for intensive quantities
    int reference_variable() const { return ref_var_; }

    // for each edge (i, k): the opposite edge of i when n_i = 2, else -1
    const std::vector<int> &passthrough() const { return passthrough_; }

    // Copy with factor k replaced by f (same kind of shape contract).
    FactorGraph with_factor(int k, FactorPtr f) const;
    // Bind observations by factor name on likelihood factors.
    FactorGraph bind_observations(const std::map<std::string, Vec> &y) const;

    const ModelDecl &declaration() const { return decl_; }

private:
    ModelDecl decl_;
    std::vector<VariableNode> vars_;
    std::vector<FactorNode> factors_;
    std::vector<Edge> edges_;
    std::vector<DirectedEdge> e_plus_, e_minus_;
    std::vector<int> passthrough_;
    int root_ = -1, ref_var_ = -1;
};

} // namespace treeamp

#endif
