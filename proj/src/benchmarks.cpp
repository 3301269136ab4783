#include "experiments_internal.hpp"
#include "treeamp/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace treeamp {

Vec piecewise_constant_signal(Index n, double rho, Rng &rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution jump(rho);
    Vec x(n);
    double level = normal(rng);
    for (Index i = 0; i < n; ++i) {
        if (i > 0 && jump(rng)) level = normal(rng);
        x[i] = level;
    }
    return x;
}

Vec two_tone_signal(Index n)
{
    Vec x(n);
    for (Index i = 0; i < n; ++i) {
        double t = 2.0 * M_PI * (-1.0 + 2.0 * double(i) / double(n));
        x[i] = std::cos(t) + std::sin(2.0 * t);
    }
    return x;
}

namespace {

std::vector<double> default_grid(double lo, double hi, double step)
{
    std::vector<double> g;
    for (int k = 0; lo + k * step <= hi + 1e-9; ++k) g.push_back(std::round((lo + k * step) * 1e9) / 1e9);
    return g;
}

double mean_of(const std::vector<double> &v)
{
    double s = 0;
    int n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    return n ? s / n : kNaN;
}

// ------------------------------------------------------------ GLM suites

struct GlmSuite {
    std::string name;
    json prior;       // factor on x
    json likelihood;  // factor on z
    Index n;
    std::vector<double> grid;
    int instances;
    json ep;
    bool sign_invariant = false;
    bool informed_curve = false;
};

json glm_model(const GlmSuite &s, Index n, const json &op)
{
    json prior = s.prior, lik = s.likelihood;
    prior["name"] = "prior";
    prior["vars"] = {"x"};
    prior["size"] = n;
    lik["name"] = "likelihood";
    lik["vars"] = {"z"};
    json lin = {{"name", "linear"}, {"kind", "linear"}, {"in", "x"}, {"out", "z"}, {"operator", op}};
    return {{"factors", json::array({prior, lin, lik})}};
}

// BO state evolution at aspect ratio alpha under the Marchenko-Pastur law.
double glm_se_mse(const GlmSuite &s, Index n, double alpha, bool informed, bool &converged)
{
    Index m = std::max<Index>(1, Index(std::llround(alpha * double(n))));
    json model = glm_model(s, n, {{"kind", "scaling"}, {"rows", m}, {"cols", n}});
    model["factors"][1]["se_spectrum"] = "marchenko_pastur";
    Rng rng(0);
    FactorGraph g = FactorGraph::build(build_declaration(model, rng));
    SESettings ss;
    ss.informed = informed;
    ss.record_trajectory = false;
    TeacherState T = teacher_moments(g, ss);
    SEState se = se_bo_run(g, T, ss);
    converged = se.converged;
    return se.vars[g.reference_variable()].mse;
}

BenchResult run_glm(const GlmSuite &s, const BenchOptions &opt)
{
    Index n = opt.n > 0 ? opt.n : s.n;
    std::vector<double> grid = opt.alpha_grid.empty() ? s.grid : opt.alpha_grid;
    int inst = opt.instances > 0 ? opt.instances : s.instances;

    ExperimentConfig cfg;
    cfg.seed = opt.seed;
    cfg.model = glm_model(s, n, {{"kind", "iid_gaussian"}, {"alpha", 1.0}});
    cfg.algo = "ep";
    cfg.settings = s.ep;
    cfg.settings["compare_se"] = false;
    cfg.sweep = SweepSpec{"linear", "/operator/alpha", grid, inst};
    cfg.target = "x";
    cfg.sign_invariant = s.sign_invariant;

    int ng = int(grid.size());
    std::vector<double> se(ng), se_inf(ng, kNaN);
    std::vector<char> se_conv(ng, 1);
    std::vector<TaskOutput> tasks(size_t(ng * inst));
    parallel_for(
        ng * inst,
        [&](int t) {
            int gi = t / inst, k = t % inst;
            try {
                tasks[t] = run_task(cfg, gi, k);
            } catch (const std::exception &e) {
                if (is_config_error(e)) throw;
                tasks[t].row = SweepRow{grid[gi], k, derive_seed(cfg.seed, uint64_t(gi), uint64_t(k))};
                tasks[t].status = kExitNumerical;
                tasks[t].error = e.what();
            }
        },
        opt.threads);
    parallel_for(
        ng,
        [&](int gi) {
            bool c1 = true, c2 = true;
            se[gi] = glm_se_mse(s, n, grid[gi], false, c1);
            if (s.informed_curve) se_inf[gi] = glm_se_mse(s, n, grid[gi], true, c2);
            se_conv[gi] = c1 && c2;
        },
        opt.threads);

    BenchResult res;
    res.name = s.name;
    json points = json::array();
    for (int gi = 0; gi < ng; ++gi) {
        std::vector<double> m, it;
        int conv = 0, failed = 0;
        for (int k = 0; k < inst; ++k) {
            TaskOutput &t = tasks[size_t(gi * inst + k)];
            t.row.mse_se = se[gi];
            res.rows.push_back(t.row);
            m.push_back(t.row.mse_ep);
            it.push_back(t.row.iters);
            conv += t.status == kExitOk;
            failed += !t.error.empty();
        }
        double mean = mean_of(m);
        json p = {{"alpha", grid[gi]},      {"mse_ep", mean},        {"mse_se", se[gi]},
                  {"rel_error", std::abs(mean - se[gi]) / se[gi]}, {"converged", conv},
                  {"failed", failed},        {"mean_iters", mean_of(it)}, {"se_converged", bool(se_conv[gi])}};
        if (s.informed_curve) p["mse_se_informed"] = se_inf[gi];
        points.push_back(p);
        res.converged = res.converged && conv == inst && se_conv[gi];
    }
    res.summary = {{"suite", s.name}, {"n", n}, {"instances", inst}, {"seed", opt.seed}, {"points", points}};
    return res;
}

// ------------------------------------------------------------ denoising

struct DenoiseSuite {
    std::string name;
    Index n;
    double rho, noise_var, slab_var;
    int instances;
    double damping;
};

BenchResult run_denoise(const DenoiseSuite &s, const BenchOptions &opt)
{
    Index n = opt.n > 0 ? opt.n : s.n;
    int inst = opt.instances > 0 ? opt.instances : s.instances;
    bool gradient = s.name == "sparse_gradient_denoise";
    std::vector<SweepRow> rows(inst);
    std::vector<char> conv(inst, 0);
    parallel_for(
        inst,
        [&](int k) {
            uint64_t seed = derive_seed(opt.seed, 0, uint64_t(k));
            Rng rng(seed);
            Vec x = gradient ? piecewise_constant_signal(n, s.rho, rng) : two_tone_signal(n);
            Vec y = x + std::sqrt(s.noise_var) * standard_normal(n, rng);
            json op = gradient ? json{{"kind", "gradient"}, {"shape", {n}}}
                               : json{{"kind", "dft"}, {"real_input", true}, {"n", n}};
            json model = {{"factors",
                           {{{"name", "likelihood"}, {"kind", "gaussian_likelihood"}, {"vars", {"x"}},
                             {"var", s.noise_var}, {"y", std::vector<double>(y.data(), y.data() + n)}},
                            {{"name", "transform"}, {"kind", "linear"}, {"in", "x"}, {"out", "z"}, {"operator", op}},
                            {{"name", "prior"}, {"kind", "gauss_bernoulli_prior"}, {"vars", {"z"}},
                             {"rho", s.rho}, {"var", s.slab_var}}}}};
            // The periodic gradient has a constant null mode; a unit prior on
            // the levels pins it and, as root, gives x precision first.
            if (gradient)
                model["factors"].insert(model["factors"].begin(),
                                        json{{"name", "level"}, {"kind", "gaussian_prior"}, {"vars", {"x"}}, {"var", 1.0}});
            FactorGraph g = FactorGraph::build(build_declaration(model, rng));
            EPSettings es;
            es.max_iter = 1000;
            es.tol = 1e-8;
            es.damping = s.damping;
            es.seed = seed;
            EPResult r = run(g, es);
            const VariablePosterior &px = r.posteriors[g.variable_index("x")];
            rows[k] = SweepRow{s.rho, k, seed, mse(px.r, x), kNaN, px.v, r.n_iters};
            conv[k] = r.converged;
        },
        opt.threads);
    BenchResult res;
    res.name = s.name;
    res.rows = rows;
    std::vector<double> m;
    int nconv = 0;
    for (int k = 0; k < inst; ++k) {
        m.push_back(rows[k].mse_ep);
        nconv += conv[k];
    }
    res.converged = nconv == inst;
    res.summary = {{"suite", s.name}, {"n", n},         {"rho", s.rho},       {"noise_var", s.noise_var},
                   {"slab_var", s.slab_var}, {"instances", inst}, {"seed", opt.seed}, {"mse_ep", mean_of(m)},
                   {"converged", nconv}};
    return res;
}

} // namespace

std::vector<std::string> benchmark_names()
{
    return {"sparse_regression", "compressed_sensing", "sparse_phase_retrieval", "sparse_gradient_denoise",
            "sparse_dft_denoise"};
}

BenchResult run_benchmark(const std::string &name, const BenchOptions &opt)
{
    if (name == "sparse_regression") {
        GlmSuite s{name,
                   {{"kind", "gauss_bernoulli_prior"}, {"rho", 0.05}, {"var", 1.0}},
                   {{"kind", "gaussian_likelihood"}, {"var", 0.01}},
                   1000,
                   default_grid(0.2, 1.0, 0.1),
                   20,
                   {{"max_iter", 200}, {"tol", 1e-6}, {"damping", 0.3}}};
        return run_glm(s, opt);
    }
    if (name == "compressed_sensing") {
        GlmSuite s{name,
                   {{"kind", "gauss_bernoulli_prior"}, {"rho", 0.5}, {"var", 1.0}},
                   {{"kind", "gaussian_likelihood"}, {"var", 1e-8}},
                   500,
                   default_grid(0.5, 1.4, 0.1),
                   10,
                   {{"max_iter", 500}, {"tol", 1e-6}, {"damping", 0.3}}};
        s.informed_curve = true;
        return run_glm(s, opt);
    }
    if (name == "sparse_phase_retrieval") {
        GlmSuite s{name,
                   {{"kind", "gauss_bernoulli_prior"}, {"rho", 0.6}, {"var", 1.0}},
                   {{"kind", "abs_likelihood"}},
                   500,
                   {0.6, 0.7, 0.8, 0.9, 1.0, 1.2, 1.5, 2.0},
                   10,
                   {{"max_iter", 500}, {"tol", 1e-6}, {"damping", 0.3}, {"init_b_std", 1.0}}};
        s.sign_invariant = true;
        s.informed_curve = true;
        return run_glm(s, opt);
    }
    if (name == "sparse_gradient_denoise") return run_denoise({name, 400, 0.04, 0.01, 2.0, 10, 0.5}, opt);
    if (name == "sparse_dft_denoise") return run_denoise({name, 100, 0.02, 0.1, 25.0, 10, 0.5}, opt);
    throw ConfigError("unknown benchmark '" + name + "'");
}

void write_benchmark(const BenchResult &res, const std::string &out_dir)
{
    std::filesystem::create_directories(out_dir);
    json s = res.summary;
    s["converged"] = res.converged;
    std::ofstream(out_dir + "/summary.json") << s.dump(2) << '\n';
    write_sweep_csv(out_dir + "/sweep.csv", res.rows);
}

} // namespace treeamp
