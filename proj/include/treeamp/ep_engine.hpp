#ifndef TREEAMP_EP_ENGINE_HPP
#define TREEAMP_EP_ENGINE_HPP

#include "treeamp/factor_graph.hpp"

#include <cstdint>

namespace treeamp {

struct EPSettings {
    int max_iter = 200;
    double tol = 1e-6;
    double damping = 0;            // on k -> i messages, natural parameters
    double variance_floor = 1e-11; // minimum posterior precision a_i
    // MAP only: lower bound on factor variances, so that a fully inactive
    // penalty does not send an infinite precision
    double map_min_variance = 1e-12;
    // EP: floor on factor variances, reached on exact recovery in
    // noiseless models
    double min_variance = 1e-14;
    double init_b_std = 0;  // random init of k -> i linear parts
    uint64_t seed = 0;
    bool map = false;
    bool record_diagnostics = true;
};

struct VariablePosterior {
    double a = 0;
    Vec b;
    Vec r;
    double v = 0;
};

struct SweepDiagnostics {
    int iteration = 0;
    std::vector<double> v;
    double change = 0;
};

struct EPResult {
    std::vector<VariablePosterior> posteriors;
    int n_iters = 0;
    bool converged = false;
    double free_energy = kNaN;
    std::vector<SweepDiagnostics> diagnostics;
};

struct MAPResult {
    std::vector<Vec> x;  // argmax per variable
    double objective = kNaN;
    EPResult ep;
};

// Expectation propagation with isotropic Gaussian beliefs on a tree.
class EPEngine {
public:
    EPEngine(const FactorGraph &graph, EPSettings settings);

    void init();
    // One E+ then E- pass; returns the sup-change of (r_i, v_i).
    double sweep();
    int sweeps() const { return sweeps_; }

    const Message &to_var(int e) const { return to_var_[e]; }
    const Message &to_factor(int e) const { return to_factor_[e]; }
    const VariablePosterior &posterior(int i) const;
    const std::vector<VariablePosterior> &posteriors() const;
    // moments of factor k's tilted belief at its current inputs
    FactorPosterior factor_posterior(int k) const;

    // -log Z estimate at the current messages (MAP: the objective)
    double free_energy() const;

    EPResult run();

private:
    // inputs with zero precision are raised to `uninformed`
    FactorPosterior factor_posterior(int k, double uninformed) const;
    void update_to_var(int e);
    void update_to_factor(int e);
    void refresh_posteriors();

    const FactorGraph &g_;
    EPSettings s_;
    std::vector<Message> to_var_, to_factor_;
    std::vector<char> visited_;
    std::vector<VariablePosterior> post_;
    std::vector<SweepDiagnostics> diag_;
    int sweeps_ = 0;
};

EPResult run(const FactorGraph &graph, const EPSettings &settings);
// Throws NotConverged holding the EPResult when the tolerance is not met.
EPResult run_checked(const FactorGraph &graph, const EPSettings &settings);
MAPResult map_run(const FactorGraph &graph, EPSettings settings);

// Gaussian log-partition ln int exp(-a|x|^2/2 + b.x) dx over R^n.
double gaussian_log_partition(double a, const Vec &b);

} // namespace treeamp

#endif
