#ifndef TREEAMP_EXPERIMENTS_HPP
#define TREEAMP_EXPERIMENTS_HPP

#include "treeamp/ep_engine.hpp"
#include "treeamp/factor_graph.hpp"
#include "treeamp/state_evolution.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>

namespace treeamp {

using json = nlohmann::json;

// ------------------------------------------------------------ models

// Factor list from the JSON "model" object. Variable dims are inferred from
// declared sizes, operators and files; random operators draw from rng.
ModelDecl build_declaration(const json &model, Rng &rng, const std::string &base_dir = ".");

struct TeacherSample {
    std::vector<Vec> x;                // per variable
    std::map<std::string, Vec> y;      // per likelihood factor
};

// Ancestral sampling along E+: root prior, channels forward, likelihoods
// last. Raises UnsamplableFactor on non-generative graphs.
TeacherSample sample_teacher(const FactorGraph &graph, Rng &rng);
TeacherSample sample_teacher(const FactorGraph &graph, uint64_t seed);

// ------------------------------------------------------------ plumbing

uint64_t derive_seed(uint64_t seed, uint64_t grid, uint64_t instance);
// Worker count: TREEAMP_THREADS when set, else the hardware concurrency.
int thread_count();
// Runs fn(0..n-1) on the pool; rethrows the first failure by index order.
void parallel_for(int n, const std::function<void(int)> &fn, int threads = 0);

EPSettings ep_settings_from_json(const json &j);
SESettings se_settings_from_json(const json &j);

double mse(const Vec &estimate, const Vec &truth, bool sign_invariant = false);

// ------------------------------------------------------------ configs

struct SweepSpec {
    std::string factor;        // factor name whose field varies
    std::string field;         // JSON pointer inside that factor, e.g. /operator/alpha
    std::vector<double> values;
    int instances = 1;
};

struct ExperimentConfig {
    uint64_t seed = 0;
    json model;
    std::string algo = "ep";
    json settings;  // the algo object
    std::optional<SweepSpec> sweep;
    std::string out_dir = "treeamp_out";
    std::string target;  // variable scored as mse_ep; default root variable
    bool sign_invariant = false;
    std::string base_dir = ".";
};

// Parse errors raise ConfigError with line and column.
ExperimentConfig parse_config(const std::string &text, const std::string &base_dir = ".");
ExperimentConfig load_config(const std::string &path);
// Builds every grid point's model once; raises ConfigError on any problem.
void validate_config(const ExperimentConfig &cfg);

struct SweepRow {
    double param = kNaN;
    int instance = 0;
    uint64_t seed = 0;
    double mse_ep = kNaN;
    double mse_se = kNaN;
    double v = kNaN;
    int iters = 0;
};

void write_sweep_csv(const std::string &path, const std::vector<SweepRow> &rows);
// Checks the header and every field; raises ConfigError on mismatch.
std::vector<SweepRow> read_sweep_csv(const std::string &path);

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitNotConverged = 3, kExitNumerical = 4 };

// Runs and writes summary.json, iterations.csv and sweep.csv into out_dir.
int run_config(const ExperimentConfig &cfg, std::ostream &log);
int run_config_file(const std::string &path, std::ostream &log, const std::string &out_override = "");

// ------------------------------------------------------------ suites

struct BenchOptions {
    Index n = 0;                      // 0: suite default
    std::vector<double> alpha_grid;   // empty: suite default
    int instances = 0;                // 0: suite default
    uint64_t seed = 1;
    std::string out_dir;              // empty: nothing written
    int threads = 0;
};

struct BenchResult {
    std::string name;
    std::vector<SweepRow> rows;
    json summary;
    bool converged = true;
};

std::vector<std::string> benchmark_names();
BenchResult run_benchmark(const std::string &name, const BenchOptions &opt);
void write_benchmark(const BenchResult &res, const std::string &out_dir);

// Toy signals of the denoising suites.
Vec piecewise_constant_signal(Index n, double rho, Rng &rng);
Vec two_tone_signal(Index n);

} // namespace treeamp

#endif
