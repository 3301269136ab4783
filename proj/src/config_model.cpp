#include "treeamp/channels_linear.hpp"
#include "treeamp/channels_separable.hpp"
#include "treeamp/experiments.hpp"
#include "treeamp/likelihoods.hpp"
#include "treeamp/map_penalties.hpp"
#include "treeamp/matrix_io.hpp"
#include "treeamp/priors.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>

namespace treeamp {

namespace {

std::string resolve(const std::string &base, const std::string &path)
{
    std::filesystem::path p(path);
    return p.is_absolute() ? path : (std::filesystem::path(base) / p).string();
}

template <class T>
T field(const json &j, const char *key, T fallback)
{
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception &e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

double bound_field(const json &j, const char *key, double fallback)
{
    if (!j.contains(key) || j[key].is_null()) return fallback;
    if (j[key].is_string()) {
        std::string s = j[key].get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
        throw ConfigError(std::string("field '") + key + "': expected a number or \"inf\"");
    }
    return field<double>(j, key, fallback);
}

Vec vector_field(const json &j, const char *key, const std::string &base)
{
    const json &v = j.at(key);
    if (v.is_object()) return read_vector_file(resolve(base, v.at("file").get<std::string>()));
    std::vector<double> d = v.get<std::vector<double>>();
    return Eigen::Map<const Vec>(d.data(), Index(d.size()));
}

Mat matrix_field(const json &op, const std::string &base)
{
    if (op.contains("file")) return read_matrix_file(resolve(base, op["file"].get<std::string>()));
    if (op.contains("matrix")) {
        auto rows = op["matrix"].get<std::vector<std::vector<double>>>();
        if (rows.empty()) throw ConfigError("inline matrix is empty");
        Mat W(Index(rows.size()), Index(rows[0].size()));
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows[0].size()) throw ConfigError("inline matrix is ragged");
            for (size_t j = 0; j < rows[i].size(); ++j) W(Index(i), Index(j)) = rows[i][j];
        }
        return W;
    }
    throw ConfigError("operator needs 'file' or 'matrix'");
}

struct FactorEntry {
    std::string name, kind;
    std::vector<std::string> vars;
    json j;
    Mat loaded;  // dense/rotation matrix read from a file
    bool has_loaded = false;
};

bool is_unary(const std::string &k)
{
    static const std::set<std::string> u = {"gaussian_prior",      "binary_prior",   "gauss_bernoulli_prior",
                                            "interval_prior",      "gaussian_likelihood", "sgn_likelihood",
                                            "abs_likelihood",      "phase_likelihood", "modulus_likelihood",
                                            "l1",                  "l21"};
    return u.count(k) > 0;
}

bool is_separable_channel(const std::string &k)
{
    return k == "gaussian_noise" || k == "piecewise_linear";
}

class DimSolver {
public:
    std::map<std::string, Index> dims;
    bool changed = false;

    std::optional<Index> get(const std::string &v) const
    {
        auto it = dims.find(v);
        if (it == dims.end()) return std::nullopt;
        return it->second;
    }
    void set(const std::string &v, Index d, const std::string &who)
    {
        if (d <= 0) throw ShapeMismatch(who + ": non-positive dimension for '" + v + "'");
        auto it = dims.find(v);
        if (it == dims.end()) {
            dims[v] = d;
            changed = true;
        } else if (it->second != d) {
            throw ShapeMismatch(who + ": variable '" + v + "' has dim " + std::to_string(it->second) +
                                ", factor needs " + std::to_string(d));
        }
    }
};

void infer_linear(FactorEntry &f, DimSolver &ds)
{
    const json &op = f.j.at("operator");
    std::string ok = op.at("kind").get<std::string>();
    const std::string &in = f.vars[0], &out = f.vars[1];
    auto din = ds.get(in), dout = ds.get(out);
    if (ok == "iid_gaussian") {
        if (op.contains("cols")) ds.set(in, op["cols"].get<Index>(), f.name);
        if (op.contains("rows")) ds.set(out, op["rows"].get<Index>(), f.name);
        din = ds.get(in);
        dout = ds.get(out);
        if (op.contains("alpha")) {
            double a = op["alpha"].get<double>();
            if (!(a > 0)) throw ConfigError(f.name + ": alpha must be positive");
            if (din && !dout) ds.set(out, std::max<Index>(1, Index(std::llround(a * double(*din)))), f.name);
            if (dout && !din) ds.set(in, std::max<Index>(1, Index(std::llround(double(*dout) / a))), f.name);
        }
    } else if (ok == "dense") {
        ds.set(in, f.loaded.cols(), f.name);
        ds.set(out, f.loaded.rows(), f.name);
    } else if (ok == "rotation") {
        if (f.has_loaded) {
            ds.set(in, f.loaded.cols(), f.name);
            ds.set(out, f.loaded.rows(), f.name);
        } else {
            if (op.contains("n")) ds.set(in, op["n"].get<Index>(), f.name);
            if (auto d = ds.get(in)) ds.set(out, *d, f.name);
            if (auto d = ds.get(out)) ds.set(in, *d, f.name);
        }
    } else if (ok == "scaling") {
        if (op.contains("cols")) ds.set(in, op["cols"].get<Index>(), f.name);
        if (op.contains("rows")) ds.set(out, op["rows"].get<Index>(), f.name);
        if (!op.contains("cols") && !op.contains("rows")) {
            if (auto d = ds.get(in)) ds.set(out, *d, f.name);
            if (auto d = ds.get(out)) ds.set(in, *d, f.name);
        }
    } else if (ok == "dft") {
        bool real = field<bool>(op, "real_input", false);
        if (op.contains("n")) ds.set(in, (real ? 1 : 2) * op["n"].get<Index>(), f.name);
        if (auto d = ds.get(in)) ds.set(out, real ? 2 * *d : *d, f.name);
        if (auto d = ds.get(out)) {
            if (*d % 2) throw ShapeMismatch(f.name + ": dft output must have even size");
            ds.set(in, real ? *d / 2 : *d, f.name);
        }
    } else if (ok == "convolution") {
        if (op.contains("kernel") && op["kernel"].is_array())
            ds.set(in, Index(op["kernel"].size()), f.name);
        if (auto d = ds.get(in)) ds.set(out, *d, f.name);
        if (auto d = ds.get(out)) ds.set(in, *d, f.name);
    } else if (ok == "gradient") {
        if (op.contains("shape")) {
            auto shape = op["shape"].get<std::vector<Index>>();
            Index n = 1;
            for (Index s : shape) n *= s;
            ds.set(in, n, f.name);
            ds.set(out, Index(shape.size()) * n, f.name);
        } else {
            if (auto d = ds.get(in)) ds.set(out, *d, f.name);
            if (auto d = ds.get(out)) ds.set(in, *d, f.name);
        }
    } else {
        throw UnknownFactorKind(f.name + ": unknown operator kind '" + ok + "'");
    }
}

void infer(FactorEntry &f, DimSolver &ds)
{
    if (is_unary(f.kind)) {
        if (f.kind == "l21" && f.j.contains("groups"))
            ds.set(f.vars[0], field<Index>(f.j, "d", 1) * f.j["groups"].get<Index>(), f.name);
        else if (f.j.contains("size"))
            ds.set(f.vars[0], f.j["size"].get<Index>(), f.name);
        else if (f.j.contains("y") && f.j["y"].is_array() && f.kind != "modulus_likelihood")
            ds.set(f.vars[0], Index(f.j["y"].size()), f.name);
    } else if (is_separable_channel(f.kind)) {
        if (f.j.contains("size")) ds.set(f.vars[0], f.j["size"].get<Index>(), f.name);
        if (auto d = ds.get(f.vars[0])) ds.set(f.vars[1], *d, f.name);
        if (auto d = ds.get(f.vars[1])) ds.set(f.vars[0], *d, f.name);
    } else if (f.kind == "linear") {
        infer_linear(f, ds);
    } else {
        throw UnknownFactorKind("factor '" + f.name + "': unknown kind '" + f.kind + "'");
    }
}

Mat haar_rotation(Index n, Rng &rng)
{
    Mat G = standard_normal(n * n, rng).reshaped(n, n);
    Eigen::HouseholderQR<Mat> qr(G);
    Mat Q = qr.householderQ();
    Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < n; ++j)
        if (R(j, j) < 0) Q.col(j) *= -1;
    return Q;
}

OperatorPtr build_operator(const FactorEntry &f, Index M, Index N, Rng &rng, const std::string &base)
{
    const json &op = f.j.at("operator");
    std::string ok = op.at("kind").get<std::string>();
    if (ok == "iid_gaussian") return make_dense(iid_gaussian_matrix(M, N, rng));
    if (ok == "dense") return make_dense(f.loaded);
    if (ok == "rotation") return make_rotation(f.has_loaded ? f.loaded : haar_rotation(N, rng));
    if (ok == "scaling") {
        Vec s = op.contains("s") ? vector_field(op, "s", base) : Vec::Ones(std::min(M, N));
        return make_scaling(s, M, N);
    }
    if (ok == "dft") return make_dft(field<bool>(op, "real_input", false) ? N : N / 2, field<bool>(op, "real_input", false));
    if (ok == "convolution") {
        bool cplx = field<bool>(op, "complex", false);
        Index n = cplx ? N / 2 : N;
        if (cplx) {
            Eigen::VectorXcd w(n);
            if (op.contains("kernel") && op["kernel"].is_array()) {
                Vec flat = vector_field(op, "kernel", base);
                if (flat.size() != 2 * n) throw ShapeMismatch(f.name + ": complex kernel needs 2n reals");
                for (Index k = 0; k < n; ++k) w(k) = {flat(2 * k), flat(2 * k + 1)};
            } else {
                Vec g = standard_normal(2 * n, rng) / std::sqrt(2.0 * double(n));
                for (Index k = 0; k < n; ++k) w(k) = {g(2 * k), g(2 * k + 1)};
            }
            return make_complex_convolution(w);
        }
        Vec w = op.contains("kernel") && !op["kernel"].is_string() ? vector_field(op, "kernel", base)
                                                                   : Vec(standard_normal(n, rng) / std::sqrt(double(n)));
        return make_convolution(w);
    }
    if (ok == "gradient") {
        std::vector<Index> shape = op.contains("shape") ? op["shape"].get<std::vector<Index>>() : std::vector<Index>{N};
        return make_gradient(shape);
    }
    throw UnknownFactorKind(f.name + ": unknown operator kind '" + ok + "'");
}

FactorPtr build_factor(const FactorEntry &f, const DimSolver &ds, Rng &rng, const std::string &base)
{
    const json &j = f.j;
    Index n = *ds.get(f.vars[0]);
    auto y = [&]() { return j.contains("y") ? vector_field(j, "y", base) : Vec(); };
    const std::string &k = f.kind;
    if (k == "gaussian_prior") return std::make_shared<GaussianPrior>(field(j, "mean", 0.0), field(j, "var", 1.0), n);
    if (k == "binary_prior") return std::make_shared<BinaryPrior>(field(j, "p_plus", 0.5), n);
    if (k == "gauss_bernoulli_prior")
        return std::make_shared<GaussBernoulliPrior>(field(j, "rho", 0.5), field(j, "mean", 0.0), field(j, "var", 1.0), n);
    if (k == "interval_prior")
        return std::make_shared<IntervalPrior>(bound_field(j, "x_min", -kInf), bound_field(j, "x_max", kInf),
                                               field(j, "mean", 0.0), field(j, "var", 1.0), n);
    if (k == "gaussian_likelihood") return std::make_shared<GaussianLikelihood>(field(j, "var", 1.0), n, y());
    if (k == "sgn_likelihood") return std::make_shared<SgnLikelihood>(n, y());
    if (k == "abs_likelihood") return std::make_shared<AbsLikelihood>(n, y());
    if (k == "phase_likelihood") return std::make_shared<PhaseLikelihood>(n, y());
    if (k == "modulus_likelihood") return std::make_shared<ModulusLikelihood>(n, y());
    if (k == "l1") return make_l1(field(j, "strength", 0.0), n);
    if (k == "l21") {
        Index d = field<Index>(j, "d", 1);
        if (n % d) throw ShapeMismatch(f.name + ": size not divisible by d");
        return make_l21(field(j, "strength", 0.0), d, n / d);
    }
    if (k == "gaussian_noise") return std::make_shared<GaussianNoiseChannel>(field(j, "var", 1.0), n);
    if (k == "piecewise_linear") {
        PiecewiseLinearSpec spec;
        if (j.contains("regions")) {
            spec.name = field<std::string>(j, "activation", "piecewise_linear");
            for (const auto &r : j["regions"]) {
                auto v = r.get<std::vector<json>>();
                if (v.size() != 4) throw ConfigError(f.name + ": region needs [lo, hi, x0, slope]");
                auto num = [](const json &x) {
                    if (x.is_string()) return x.get<std::string>() == "-inf" ? -kInf : kInf;
                    return x.get<double>();
                };
                spec.regions.push_back(LinearRegion{num(v[0]), num(v[1]), num(v[2]), num(v[3])});
            }
            spec.validate();
        } else {
            std::string act = field<std::string>(j, "activation", "identity");
            spec = act == "leaky_relu" ? PiecewiseLinearSpec::leaky_relu(field(j, "slope", 0.1))
                                       : PiecewiseLinearSpec::named(act);
        }
        return std::make_shared<PiecewiseLinearChannel>(spec, n);
    }
    if (k == "linear") {
        Index M = *ds.get(f.vars[1]);
        OperatorPtr op = build_operator(f, M, n, rng, base);
        std::optional<SpectralMeasure> measure;
        std::string sp = field<std::string>(j, "se_spectrum", "empirical");
        if (sp == "marchenko_pastur")
            measure = SpectralMeasure::marchenko_pastur(double(M) / double(n), field(j, "se_nodes", 400));
        else if (sp != "empirical")
            throw ConfigError(f.name + ": se_spectrum must be empirical or marchenko_pastur");
        return std::make_shared<LinearChannel>(op, measure);
    }
    throw UnknownFactorKind("factor '" + f.name + "': unknown kind '" + k + "'");
}

} // namespace

ModelDecl build_declaration(const json &model, Rng &rng, const std::string &base_dir)
{
    if (!model.is_object() || !model.contains("factors") || !model["factors"].is_array())
        throw ConfigError("model needs a 'factors' array");
    std::vector<FactorEntry> entries;
    DimSolver ds;
    ModelDecl decl;
    if (model.contains("variables")) {
        for (const auto &v : model["variables"]) {
            VariableDecl vd{v.at("name").get<std::string>(), field<Index>(v, "dim", 0)};
            decl.variables.push_back(vd);
            if (vd.dim > 0) ds.set(vd.name, vd.dim, "variables");
        }
    }
    int idx = 0;
    for (const auto &fj : model["factors"]) {
        FactorEntry f;
        if (!fj.contains("kind")) throw ConfigError("factor " + std::to_string(idx) + " has no 'kind'");
        f.kind = fj["kind"].get<std::string>();
        f.name = field<std::string>(fj, "name", f.kind + "_" + std::to_string(idx));
        if (fj.contains("vars"))
            f.vars = fj["vars"].get<std::vector<std::string>>();
        else if (fj.contains("in") && fj.contains("out"))
            f.vars = {fj["in"].get<std::string>(), fj["out"].get<std::string>()};
        else
            throw ConfigError("factor '" + f.name + "' needs 'vars'");
        bool channel = is_separable_channel(f.kind) || f.kind == "linear";
        if (!channel && !is_unary(f.kind))
            throw UnknownFactorKind("factor '" + f.name + "': unknown kind '" + f.kind + "'");
        if (f.vars.size() != (channel ? 2u : 1u))
            throw ConfigError("factor '" + f.name + "' needs " + std::string(channel ? "2 variables" : "1 variable"));
        f.j = fj;
        if (f.kind == "linear") {
            if (!fj.contains("operator")) throw ConfigError("linear factor '" + f.name + "' needs an 'operator'");
            std::string ok = field<std::string>(fj["operator"], "kind", "");
            if (ok == "dense" || (ok == "rotation" && (fj["operator"].contains("file") || fj["operator"].contains("matrix")))) {
                f.loaded = matrix_field(fj["operator"], base_dir);
                f.has_loaded = true;
            }
        }
        entries.push_back(std::move(f));
        ++idx;
    }
    do {
        ds.changed = false;
        for (auto &f : entries) infer(f, ds);
    } while (ds.changed);
    for (const auto &f : entries)
        for (const auto &v : f.vars)
            if (!ds.get(v)) throw ConfigError("cannot infer the dimension of variable '" + v + "'");

    for (const auto &f : entries) decl.factors.push_back(FactorDecl{f.name, build_factor(f, ds, rng, base_dir), f.vars});
    for (auto &v : decl.variables)
        if (v.dim == 0) v.dim = *ds.get(v.name);
    return decl;
}

// ------------------------------------------------------------ teacher

TeacherSample sample_teacher(const FactorGraph &g, Rng &rng)
{
    const FactorNode &root = g.factor(g.root());
    if (root.factor->role() != FactorRole::prior)
        throw UnsamplableFactor("root factor '" + root.name + "' is not a prior");
    TeacherSample ts;
    ts.x.resize(g.variables().size());
    for (const DirectedEdge &d : g.e_plus()) {
        const Edge &e = g.edge(d.edge);
        const FactorNode &fn = g.factor(e.factor);
        const Factor &f = *fn.factor;
        if (!f.samplable()) throw UnsamplableFactor("factor '" + fn.name + "' (" + f.kind() + ") cannot be sampled");
        if (d.to_factor) {
            if (f.role() == FactorRole::likelihood) {
                ts.y[fn.name] = f.sample(&ts.x[e.var], rng);
            } else if (f.role() == FactorRole::prior) {
                throw UnsamplableFactor("prior '" + fn.name + "' acts on an already generated variable");
            } else if (f.role() == FactorRole::channel && e.slot != 0) {
                throw UnsamplableFactor("channel '" + fn.name + "' is reached from its output");
            }
            continue;
        }
        if (f.role() == FactorRole::prior) {
            ts.x[e.var] = f.sample(nullptr, rng);
        } else if (f.role() == FactorRole::channel && e.slot == 1) {
            ts.x[e.var] = f.sample(&ts.x[g.edge(fn.edges[0]).var], rng);
        } else {
            throw UnsamplableFactor("factor '" + fn.name + "' does not generate '" + g.variable(e.var).name + "'");
        }
    }
    return ts;
}

TeacherSample sample_teacher(const FactorGraph &g, uint64_t seed)
{
    Rng rng(seed);
    return sample_teacher(g, rng);
}

// ------------------------------------------------------------ settings

EPSettings ep_settings_from_json(const json &j)
{
    EPSettings s;
    if (j.is_null()) return s;
    s.max_iter = field(j, "max_iter", s.max_iter);
    s.tol = field(j, "tol", s.tol);
    s.damping = field(j, "damping", s.damping);
    s.variance_floor = field(j, "variance_floor", s.variance_floor);
    s.map_min_variance = field(j, "map_min_variance", s.map_min_variance);
    s.min_variance = field(j, "min_variance", s.min_variance);
    s.init_b_std = field(j, "init_b_std", s.init_b_std);
    s.seed = field<uint64_t>(j, "seed", s.seed);
    s.record_diagnostics = field(j, "record_diagnostics", s.record_diagnostics);
    if (!(s.tol > 0)) throw ConfigError("tol must be positive");
    if (!(s.damping >= 0 && s.damping < 1)) throw ConfigError("damping must lie in [0, 1)");
    if (s.max_iter < 0) throw ConfigError("max_iter must be >= 0");
    return s;
}

SESettings se_settings_from_json(const json &j)
{
    SESettings s;
    if (j.is_null()) return s;
    s.max_iter = field(j, "max_iter", s.max_iter);
    s.tol = field(j, "tol", s.tol);
    s.damping = field(j, "damping", s.damping);
    s.epsilon = field(j, "epsilon", s.epsilon);
    s.informed = field(j, "informed", s.informed);
    s.informed_value = field(j, "informed_value", s.informed_value);
    s.max_hat = field(j, "max_hat", s.max_hat);
    s.record_trajectory = field(j, "record_trajectory", true);
    if (j.contains("quadrature")) {
        const json &q = j["quadrature"];
        s.quad.order = field(q, "order", s.quad.order);
        s.quad.legendre = field(q, "legendre", s.quad.legendre);
        s.quad.max_panels = field(q, "max_panels", s.quad.max_panels);
        s.quad.nested_panels = field(q, "nested_panels", s.quad.nested_panels);
        s.quad.check = field(q, "check", s.quad.check);
        s.quad.tol = field(q, "tol", s.quad.tol);
    }
    if (!(s.tol > 0)) throw ConfigError("tol must be positive");
    if (!(s.damping >= 0 && s.damping < 1)) throw ConfigError("damping must lie in [0, 1)");
    return s;
}

} // namespace treeamp
