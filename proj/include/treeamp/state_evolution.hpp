#ifndef TREEAMP_STATE_EVOLUTION_HPP
#define TREEAMP_STATE_EVOLUTION_HPP

#include "treeamp/factor_graph.hpp"

namespace treeamp {

struct SESettings {
    int max_iter = 1000;
    double tol = 1e-9;     // relative change of every hat message
    double damping = 0;    // on k -> i messages
    double epsilon = 1e-9; // uninformed start for m-hat (and q-hat)
    // informed start: x -> prior messages begin at this m-hat (and q-hat)
    bool informed = false;
    double informed_value = 1e8;
    // cap on total precisions; exact recovery saturates here instead of
    // overflowing
    double max_hat = 1e10;
    QuadratureOptions quad;
    bool record_trajectory = false;
};

// Teacher second moments (per component) on every edge and variable.
struct TeacherState {
    std::vector<double> to_var, to_factor;  // tau-hat per edge
    std::vector<double> tau, tau_hat;       // per variable
    std::vector<double> alpha;              // N_i / N_ref per variable
    double A0 = 0;                          // scaled log-partition A_N^0
    int n_iters = 0;
    // sweep after which the messages stopped changing
    int fixed_point_sweep = 0;
    bool converged = false;
};

TeacherState teacher_moments(const FactorGraph &teacher, const SESettings &settings = {});

struct SEVariable {
    double mhat = 0, qhat = 0, tauhat = 0;
    double m = 0, q = 0, tau = 0, v = 0, mse = 0;
    double tau0 = 0;
};

struct SEState {
    bool bayes_optimal = true;
    std::vector<SEHat> to_var, to_factor;  // BO uses mhat only
    std::vector<SEVariable> vars;
    double free_entropy = kNaN;
    int n_iters = 0;
    bool converged = false;
    // per iteration: all to_var then all to_factor m-hats
    std::vector<std::vector<double>> trajectory;
};

// Bayes-optimal state evolution (student = teacher).
SEState se_bo_run(const FactorGraph &graph, const TeacherState &teacher,
                  const SESettings &settings = {});
// Mismatched replica-symmetric state evolution; `teacher` has the same
// structure as `student`.
SEState se_rs_run(const FactorGraph &student, const FactorGraph &teacher,
                  const TeacherState &teacher_state, const SESettings &settings = {});
// Checked variants throw NotConverged holding the SEState.
SEState se_bo_run_checked(const FactorGraph &graph, const TeacherState &teacher,
                          const SESettings &settings = {});
SEState se_rs_run_checked(const FactorGraph &student, const FactorGraph &teacher,
                          const TeacherState &teacher_state, const SESettings &settings = {});

// Tree sum of potentials at the state's messages.
double free_entropy_bo(const FactorGraph &graph, const TeacherState &teacher, const SEState &state,
                       const QuadratureOptions &opt = {});
double free_entropy_rs(const FactorGraph &student, const FactorGraph &teacher,
                       const TeacherState &teacher_state, const SEState &state,
                       const QuadratureOptions &opt = {});

struct FactorInformation {
    std::string name;
    double H = 0;
    double I = kNaN;
    bool ill_defined = false;
};

struct MutualInformation {
    std::vector<FactorInformation> factors;
    std::vector<double> variables;  // I_i = ln(a_i tau_i^0)/2
    double H = 0;
    double I = kNaN;
};

MutualInformation mutual_information(const FactorGraph &graph, const TeacherState &teacher,
                                     const SEState &state, const QuadratureOptions &opt = {});

// Per-variable overlaps from aggregated hats.
SEVariable rs_variable(double mhat, double qhat, double tauhat, double tau0);
SEVariable bo_variable(double mhat, double tau0);
double rs_variable_potential(double mhat, double qhat, double tauhat, double tau0);
double bo_variable_potential(double mhat, double tau0);

} // namespace treeamp

#endif
