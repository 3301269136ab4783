#include "treeamp/experiments.hpp"
#include "experiments_internal.hpp"
#include "treeamp/channels_linear.hpp"
#include "treeamp/likelihoods.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <set>
#include <thread>

namespace treeamp {

// ------------------------------------------------------------ plumbing

namespace {

uint64_t splitmix64(uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

uint64_t derive_seed(uint64_t seed, uint64_t grid, uint64_t instance)
{
    return splitmix64(splitmix64(splitmix64(seed) ^ grid) ^ (instance * 0x632be59bd9b4e019ULL));
}

int thread_count()
{
    if (const char *env = std::getenv("TREEAMP_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, const std::function<void(int)> &fn, int threads)
{
    int nt = std::min(threads > 0 ? threads : thread_count(), std::max(n, 1));
    std::vector<std::exception_ptr> errors(n);
    if (nt <= 1) {
        for (int i = 0; i < n; ++i) try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t)
            pool.emplace_back([&] {
                for (int i = next++; i < n; i = next++) try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
            });
        for (auto &th : pool) th.join();
    }
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
}

double mse(const Vec &estimate, const Vec &truth, bool sign_invariant)
{
    if (estimate.size() != truth.size()) throw ShapeMismatch("mse: sizes differ");
    double n = double(truth.size());
    double m = (estimate - truth).squaredNorm() / n;
    if (sign_invariant) m = std::min(m, (estimate + truth).squaredNorm() / n);
    return m;
}

namespace {

// Same graph with every linear channel's SE spectrum replaced by the
// Marchenko-Pastur law of its aspect ratio (no operator work).
} // namespace

FactorGraph with_mp_spectra(const FactorGraph &g)
{
    ModelDecl d = g.declaration();
    for (auto &f : d.factors)
        if (const auto *lc = dynamic_cast<const LinearChannel *>(f.factor.get())) {
            Index M = lc->dim(1), N = lc->dim(0);
            f.factor = std::make_shared<LinearChannel>(make_scaling(Vec::Ones(std::min(M, N)), M, N),
                                                       SpectralMeasure::marchenko_pastur(double(M) / double(N)));
        }
    return FactorGraph::build(d);
}

namespace {

bool needs_teacher(const FactorGraph &g)
{
    for (const auto &f : g.factors())
        if (const auto *l = dynamic_cast<const Likelihood *>(f.factor.get()); l && !l->bound()) return true;
    return false;
}

} // namespace

// ------------------------------------------------------------ configs

namespace {

std::pair<size_t, size_t> line_col(const std::string &text, size_t byte)
{
    size_t line = 1, col = 1;
    for (size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

const std::set<std::string> kAlgos = {"ep", "map", "se_bo", "se_rs", "teacher_moments"};

} // namespace

ExperimentConfig parse_config(const std::string &text, const std::string &base_dir)
{
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error &e) {
        auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError("JSON parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                          ": " + e.what());
    }
    try {
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        ExperimentConfig c;
        c.base_dir = base_dir;
        c.seed = j.value("seed", uint64_t(0));
        if (!j.contains("model")) throw ConfigError("config needs a 'model'");
        c.model = j["model"];
        if (j.contains("algo")) {
            const json &a = j["algo"];
            if (a.is_string()) {
                c.algo = a.get<std::string>();
                c.settings = json::object();
            } else {
                c.algo = a.at("kind").get<std::string>();
                c.settings = a;
            }
        } else {
            c.settings = json::object();
        }
        if (!kAlgos.count(c.algo)) throw ConfigError("unknown algo '" + c.algo + "'");
        if (j.contains("sweep")) {
            const json &s = j["sweep"];
            SweepSpec sw;
            sw.factor = s.at("factor").get<std::string>();
            sw.field = s.at("field").get<std::string>();
            if (sw.field.empty() || sw.field[0] != '/') sw.field = "/" + sw.field;
            sw.values = s.at("values").get<std::vector<double>>();
            sw.instances = s.value("instances", 1);
            if (sw.values.empty()) throw ConfigError("sweep values must be non-empty");
            if (sw.instances < 1) throw ConfigError("sweep instances must be >= 1");
            c.sweep = sw;
        } else if (j.contains("instances")) {
            SweepSpec sw;
            sw.values = {kNaN};
            sw.instances = j["instances"].get<int>();
            if (sw.instances < 1) throw ConfigError("instances must be >= 1");
            c.sweep = sw;
        }
        if (j.contains("output")) {
            const json &o = j["output"];
            c.out_dir = o.is_string() ? o.get<std::string>() : o.value("dir", c.out_dir);
        }
        c.target = j.value("target", std::string());
        c.sign_invariant = j.value("sign_invariant", false);
        return c;
    } catch (const json::exception &e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::string &path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    std::string base = std::filesystem::path(path).parent_path().string();
    return parse_config(ss.str(), base.empty() ? "." : base);
}

namespace {

json model_at(const ExperimentConfig &cfg, double value)
{
    json m = cfg.model;
    if (!cfg.sweep || cfg.sweep->factor.empty()) return m;
    for (auto &f : m["factors"])
        if (f.value("name", std::string()) == cfg.sweep->factor) {
            try {
                f[json::json_pointer(cfg.sweep->field)] = value;
            } catch (const json::exception &e) {
                throw ConfigError("sweep field '" + cfg.sweep->field + "': " + e.what());
            }
            return m;
        }
    throw ConfigError("sweep factor '" + cfg.sweep->factor + "' not found");
}

json student_model(const json &model, const json &overrides)
{
    json m = model;
    if (overrides.is_null()) return m;
    for (auto &[name, patch] : overrides.items()) {
        bool found = false;
        for (auto &f : m["factors"])
            if (f.value("name", std::string()) == name) {
                f.merge_patch(patch);
                found = true;
            }
        if (!found) throw ConfigError("student override for unknown factor '" + name + "'");
    }
    return m;
}

} // namespace

bool is_config_error(const std::exception &e)
{
    return dynamic_cast<const ConfigError *>(&e) || dynamic_cast<const UnknownFactorKind *>(&e) ||
           dynamic_cast<const ShapeMismatch *>(&e) || dynamic_cast<const CycleDetected *>(&e) ||
           dynamic_cast<const Disconnected *>(&e) || dynamic_cast<const DuplicateVariable *>(&e) ||
           dynamic_cast<const UnsamplableFactor *>(&e) || dynamic_cast<const DomainError *>(&e) ||
           dynamic_cast<const json::exception *>(&e);
}

namespace {

int target_index(const FactorGraph &g, const std::string &target)
{
    return target.empty() ? g.reference_variable() : g.variable_index(target);
}

json variables_json(const FactorGraph &g, const std::vector<double> &mses, const std::vector<double> &vs)
{
    json out = json::object();
    for (size_t i = 0; i < g.variables().size(); ++i)
        out[g.variable(int(i)).name] = {{"mse", i < mses.size() ? mses[i] : kNaN}, {"v", vs[i]}};
    return out;
}

} // namespace

TaskOutput run_task(const ExperimentConfig &cfg, int gi, int inst)
{
    TaskOutput out;
    double param = cfg.sweep ? cfg.sweep->values[gi] : kNaN;
    uint64_t seed = derive_seed(cfg.seed, uint64_t(gi), uint64_t(inst));
    out.row.param = param;
    out.row.instance = inst;
    out.row.seed = seed;
    out.detail["param"] = param;
    out.detail["instance"] = inst;
    out.detail["seed"] = seed;
    Rng rng(seed);
    json model = model_at(cfg, param);
    FactorGraph g = FactorGraph::build(build_declaration(model, rng, cfg.base_dir));
    int tgt = target_index(g, cfg.target);
    const json &st = cfg.settings;

    if (cfg.algo == "ep" || cfg.algo == "map") {
        std::optional<TeacherSample> ts;
        FactorGraph gb = g;
        if (needs_teacher(g)) {
            ts = sample_teacher(g, rng);
            gb = g.bind_observations(ts->y);
        }
        EPSettings es = ep_settings_from_json(st);
        if (!st.contains("seed")) es.seed = seed;
        EPResult res;
        if (cfg.algo == "map") {
            MAPResult mr = map_run(gb, es);
            res = mr.ep;
            out.detail["objective"] = mr.objective;
        } else {
            res = run(gb, es);
            out.detail["free_energy"] = res.free_energy;
        }
        out.diag = res.diagnostics;
        std::vector<double> mses, vs;
        for (size_t i = 0; i < res.posteriors.size(); ++i) {
            vs.push_back(res.posteriors[i].v);
            if (ts) mses.push_back(mse(res.posteriors[i].r, ts->x[i], cfg.sign_invariant));
        }
        out.detail["variables"] = variables_json(g, mses, vs);
        out.detail["converged"] = res.converged;
        out.detail["n_iters"] = res.n_iters;
        out.row.iters = res.n_iters;
        if (!vs.empty()) out.row.v = vs[tgt];
        if (!mses.empty()) out.row.mse_ep = mses[tgt];
        if (ts && cfg.algo == "ep" && st.value("compare_se", true)) {
            try {
                json se = st.value("se", json::object());
                FactorGraph sg = se.value("spectrum", std::string("empirical")) == "marchenko_pastur" ? with_mp_spectra(g) : g;
                TeacherState T = teacher_moments(sg, se_settings_from_json(se));
                SEState bo = se_bo_run(sg, T, se_settings_from_json(se));
                out.row.mse_se = bo.vars[tgt].mse;
            } catch (const Error &e) {
                out.detail["se_error"] = e.what();
            }
        }
        if (!res.converged) out.status = kExitNotConverged;
        return out;
    }

    SESettings ss = se_settings_from_json(st);
    if (st.value("spectrum", std::string("empirical")) == "marchenko_pastur") g = with_mp_spectra(g);
    TeacherState T = teacher_moments(g, ss);
    if (cfg.algo == "teacher_moments") {
        json vars = json::object();
        for (size_t i = 0; i < g.variables().size(); ++i) vars[g.variable(int(i)).name] = {{"tau", T.tau[i]}};
        out.detail["variables"] = vars;
        out.detail["A0"] = T.A0;
        out.detail["converged"] = T.converged;
        out.detail["n_iters"] = T.n_iters;
        out.detail["fixed_point_sweep"] = T.fixed_point_sweep;
        out.row.iters = T.n_iters;
        if (!T.converged) out.status = kExitNotConverged;
        return out;
    }
    SEState se;
    if (cfg.algo == "se_bo") {
        se = se_bo_run(g, T, ss);
    } else {
        Rng srng(seed);
        FactorGraph sg = FactorGraph::build(build_declaration(student_model(model, st.value("student", json())), srng, cfg.base_dir));
        if (st.value("spectrum", std::string("empirical")) == "marchenko_pastur") sg = with_mp_spectra(sg);
        se = se_rs_run(sg, g, T, ss);
    }
    json vars = json::object();
    for (size_t i = 0; i < g.variables().size(); ++i) {
        const SEVariable &v = se.vars[i];
        vars[g.variable(int(i)).name] = {{"mse", v.mse}, {"v", v.v}, {"m", v.m}, {"q", v.q}, {"tau0", v.tau0}};
    }
    out.detail["variables"] = vars;
    out.detail["free_entropy"] = se.free_entropy;
    out.detail["converged"] = se.converged;
    out.detail["n_iters"] = se.n_iters;
    out.traj = se.trajectory;
    out.row.mse_se = se.vars[tgt].mse;
    out.row.v = se.vars[tgt].v;
    out.row.iters = se.n_iters;
    if (!se.converged) out.status = kExitNotConverged;
    return out;
}

namespace {

std::string fmt(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_iterations(const std::string &path, const std::vector<TaskOutput> &tasks)
{
    std::ofstream os(path);
    bool se = !tasks.empty() && tasks[0].diag.empty() && !tasks[0].traj.empty();
    if (se) {
        os << "param,instance,iteration,message,mhat\n";
        for (const auto &t : tasks)
            for (size_t it = 0; it < t.traj.size(); ++it)
                for (size_t m = 0; m < t.traj[it].size(); ++m)
                    os << fmt(t.row.param) << ',' << t.row.instance << ',' << it + 1 << ',' << m << ','
                       << fmt(t.traj[it][m]) << '\n';
        return;
    }
    os << "param,instance,iteration,change,variable,v\n";
    for (const auto &t : tasks)
        for (const auto &d : t.diag)
            for (size_t i = 0; i < d.v.size(); ++i)
                os << fmt(t.row.param) << ',' << t.row.instance << ',' << d.iteration << ',' << fmt(d.change) << ','
                   << i << ',' << fmt(d.v[i]) << '\n';
}

} // namespace

void validate_config(const ExperimentConfig &cfg)
{
    try {
        size_t ng = cfg.sweep ? cfg.sweep->values.size() : 1;
        for (size_t gi = 0; gi < ng; ++gi) {
            Rng rng(derive_seed(cfg.seed, gi, 0));
            json model = model_at(cfg, cfg.sweep ? cfg.sweep->values[gi] : kNaN);
            FactorGraph g = FactorGraph::build(build_declaration(model, rng, cfg.base_dir));
            target_index(g, cfg.target);
            if (cfg.algo == "ep" || cfg.algo == "map") {
                EPSettings es = ep_settings_from_json(cfg.settings);
                es.map = cfg.algo == "map";
                EPEngine probe(g, es);
            } else {
                se_settings_from_json(cfg.settings);
            }
            if (cfg.algo == "se_rs") {
                FactorGraph sg = FactorGraph::build(
                    build_declaration(student_model(model, cfg.settings.value("student", json())), rng, cfg.base_dir));
                (void)sg;
            }
        }
    } catch (const ConfigError &) {
        throw;
    } catch (const std::exception &e) {
        if (is_config_error(e)) throw ConfigError(e.what());
        throw;
    }
}

// ------------------------------------------------------------ CSV

namespace {
const char *kSweepHeader = "param,instance,seed,mse_ep,mse_se,v,iters";
}

void write_sweep_csv(const std::string &path, const std::vector<SweepRow> &rows)
{
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write '" + path + "'");
    os << kSweepHeader << '\n';
    for (const auto &r : rows)
        os << fmt(r.param) << ',' << r.instance << ',' << r.seed << ',' << fmt(r.mse_ep) << ',' << fmt(r.mse_se) << ','
           << fmt(r.v) << ',' << r.iters << '\n';
}

std::vector<SweepRow> read_sweep_csv(const std::string &path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line) || line != kSweepHeader) throw ConfigError(path + ": unexpected header");
    std::vector<SweepRow> rows;
    size_t ln = 1;
    while (std::getline(is, line)) {
        ++ln;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (cells.size() != 7) throw ConfigError(path + ": line " + std::to_string(ln) + " has " + std::to_string(cells.size()) + " fields");
        try {
            SweepRow r;
            r.param = std::stod(cells[0]);
            r.instance = std::stoi(cells[1]);
            r.seed = std::stoull(cells[2]);
            r.mse_ep = std::stod(cells[3]);
            r.mse_se = std::stod(cells[4]);
            r.v = std::stod(cells[5]);
            r.iters = std::stoi(cells[6]);
            rows.push_back(r);
        } catch (const std::exception &) {
            throw ConfigError(path + ": malformed value on line " + std::to_string(ln));
        }
    }
    return rows;
}

// ------------------------------------------------------------ run

int run_config(const ExperimentConfig &cfg, std::ostream &log)
{
    try {
        validate_config(cfg);
    } catch (const ConfigError &e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    std::filesystem::create_directories(cfg.out_dir);
    int ng = cfg.sweep ? int(cfg.sweep->values.size()) : 1;
    int ni = cfg.sweep ? cfg.sweep->instances : 1;
    std::vector<TaskOutput> tasks(size_t(ng * ni));
    std::mutex log_mu;
    parallel_for(ng * ni, [&](int t) {
        int gi = t / ni, inst = t % ni;
        TaskOutput &o = tasks[t];
        try {
            o = run_task(cfg, gi, inst);
        } catch (const std::exception &e) {
            o.row.param = cfg.sweep ? cfg.sweep->values[gi] : kNaN;
            o.row.instance = inst;
            o.row.seed = derive_seed(cfg.seed, uint64_t(gi), uint64_t(inst));
            o.status = is_config_error(e) ? kExitConfig : kExitNumerical;
            o.error = e.what();
            o.detail["error"] = e.what();
        }
        std::lock_guard<std::mutex> lk(log_mu);
        log << "task " << t << " (grid " << gi << ", instance " << inst << "): "
            << (o.error.empty() ? (o.status == kExitNotConverged ? "not converged" : "ok") : o.error) << '\n';
    });

    int code = kExitOk;
    for (const auto &t : tasks) code = std::max(code, t.status == kExitConfig ? 5 : t.status);
    if (code == 5) code = kExitConfig;

    json summary;
    summary["algo"] = cfg.algo;
    summary["seed"] = cfg.seed;
    bool all_conv = true;
    int max_iters = 0;
    json jt = json::array();
    std::vector<SweepRow> rows;
    for (const auto &t : tasks) {
        all_conv = all_conv && t.status == kExitOk;
        max_iters = std::max(max_iters, t.row.iters);
        jt.push_back(t.detail);
        rows.push_back(t.row);
    }
    summary["converged"] = all_conv;
    summary["n_iters"] = max_iters;
    summary["exit_code"] = code;
    if (tasks.size() == 1)
        for (const char *k : {"variables", "free_energy", "free_entropy", "objective", "A0"})
            if (tasks[0].detail.contains(k)) summary[k] = tasks[0].detail[k];
    summary["tasks"] = jt;
    std::ofstream(cfg.out_dir + "/summary.json") << summary.dump(2) << '\n';
    write_iterations(cfg.out_dir + "/iterations.csv", tasks);
    if (cfg.sweep) write_sweep_csv(cfg.out_dir + "/sweep.csv", rows);
    return code;
}

int run_config_file(const std::string &path, std::ostream &log, const std::string &out_override)
{
    ExperimentConfig cfg;
    try {
        cfg = load_config(path);
    } catch (const ConfigError &e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    if (!out_override.empty()) cfg.out_dir = out_override;
    return run_config(cfg, log);
}

} // namespace treeamp
