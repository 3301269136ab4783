// Acceptance runner: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]  (default: all)

#include "treeamp/channels_linear.hpp"
#include "treeamp/channels_separable.hpp"
#include "treeamp/ep_engine.hpp"
#include "treeamp/exp_family.hpp"
#include "treeamp/experiments.hpp"
#include "treeamp/likelihoods.hpp"
#include "treeamp/map_penalties.hpp"
#include "treeamp/priors.hpp"
#include "treeamp/state_evolution.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

using namespace treeamp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

double log_uniform(Rng &rng, double lo, double hi)
{
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

double normal(Rng &rng)
{
    static thread_local std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

// ------------------------------------------------------------ 1

// Scalar module evaluated at the linear parameter b (other arguments bound).
using ScalarFn = std::function<ScalarMoments(double)>;

struct GradCheck {
    double err_r = 0, err_v = 0;
    bool v_resolved = true; // false when rounding in r swamps v * h
};

// Richardson-extrapolated central difference of g at b with step h.
template <class G>
double derivative(const G &g, double b, double h)
{
    double d1 = (g(b + h) - g(b - h)) / (2 * h);
    double d2 = (g(b + h / 2) - g(b - h / 2)) / h;
    return (4 * d2 - d1) / 3;
}

double fd_step(double v) { return std::min(0.05 / std::sqrt(v), 0.05); }

GradCheck check_gradient(const ScalarFn &f, double b)
{
    ScalarMoments m = f(b);
    double h = fd_step(m.v);
    double r_fd = derivative([&](double t) { return f(t).A; }, b, h);
    double v_fd = derivative([&](double t) { return f(t).r; }, b, h);
    GradCheck g;
    g.err_r = std::abs(r_fd - m.r) / std::max(std::abs(m.r), std::sqrt(m.v));
    g.err_v = std::abs(v_fd - m.v) / m.v;
    if (1e-16 * std::max(std::abs(m.r), 1.0) / h > 1e-6 * m.v) {
        g.v_resolved = false;
        g.err_v = 0;
    }
    if (std::getenv("ACC_DEBUG") && std::max(g.err_r, g.err_v) > 1e-4)
        std::fprintf(stderr, "b=%g A=%g r=%g v=%g rfd=%g vfd=%g h=%g\n", b, m.A, m.r, m.v, r_fd, v_fd, h);
    return g;
}

// Complex modules: r = grad A over (Re b, Im b); v = half the trace of dr/db.
using PhaseFn = std::function<PhaseMoments(std::complex<double>)>;

GradCheck check_gradient_complex(const PhaseFn &f, std::complex<double> b)
{
    PhaseMoments m = f(b);
    double h = fd_step(m.v);
    const std::complex<double> I(0, 1);
    auto along = [&](std::complex<double> dir, auto get) {
        return derivative([&](double t) { return get(f(b + t * dir)); }, 0.0, h);
    };
    std::complex<double> r_fd(along(1.0, [](const PhaseMoments &p) { return p.A; }),
                              along(I, [](const PhaseMoments &p) { return p.A; }));
    double v_fd = 0.5 * (along(1.0, [](const PhaseMoments &p) { return p.r.real(); }) +
                         along(I, [](const PhaseMoments &p) { return p.r.imag(); }));
    GradCheck g;
    g.err_r = std::abs(r_fd - m.r) / std::max(std::abs(m.r), std::sqrt(m.v));
    g.err_v = std::abs(v_fd - m.v) / m.v;
    if (1e-16 * std::max(std::abs(m.r), 1.0) / h > 1e-6 * m.v) {
        g.v_resolved = false;
        g.err_v = 0;
    }
    return g;
}

Outcome criterion_1()
{
    auto t0 = Clock::now();
    const int points = 200;
    const double tol = 1e-4;
    Rng rng(101);
    std::ostringstream bad;
    int n_modules = 0, n_fail = 0, n_unresolved = 0;
    double worst = 0;

    auto run_scalar = [&](const std::string &name, const std::function<ScalarFn(double a)> &make,
                          const std::function<double(double a)> &draw_b) {
        ++n_modules;
        double w = 0;
        for (int i = 0; i < points; ++i) {
            double a = log_uniform(rng, 0.05, 20.0);
            GradCheck g = check_gradient(make(a), draw_b(a));
            n_unresolved += !g.v_resolved;
            w = std::max({w, g.err_r, g.err_v});
        }
        worst = std::max(worst, w);
        if (!(w <= tol)) {
            ++n_fail;
            bad << ' ' << name << '=' << w;
        }
    };
    auto b_wide = [&](double a) { return std::sqrt(a) * 3.0 * normal(rng); };

    // beliefs
    run_scalar("real_belief", [](double a) { return [a](double b) { return real_belief(a, b); }; }, b_wide);
    run_scalar("binary_belief", [](double) { return [](double b) { return binary_belief(b); }; },
               [&](double) { return 3.0 * normal(rng); });
    for (double eta : {-3.0, 0.0, 2.0})
        run_scalar("sparse_belief(eta=" + std::to_string(eta) + ")",
                   [eta](double a) { return [a, eta](double b) { return sparse_belief(a, b, eta); }; }, b_wide);
    run_scalar("interval_belief[-1,2]",
               [](double a) { return [a](double b) { return interval_belief(a, b, -1.0, 2.0); }; }, b_wide);
    run_scalar("interval_belief[0,inf)",
               [](double a) { return [a](double b) { return interval_belief(a, b, 0.0, kInf); }; }, b_wide);

    // priors
    std::vector<std::pair<std::string, std::shared_ptr<Prior>>> priors = {
        {"gaussian_prior", std::make_shared<GaussianPrior>(0.3, 2.0, 1)},
        {"binary_prior", std::make_shared<BinaryPrior>(0.3, 1)},
        {"gauss_bernoulli_prior", std::make_shared<GaussBernoulliPrior>(0.2, 0.5, 1.5, 1)},
        {"interval_prior[-1,2]", std::make_shared<IntervalPrior>(-1.0, 2.0, 0.0, 1.0, 1)},
        {"interval_prior[0,inf)", std::make_shared<IntervalPrior>(0.0, kInf, 0.5, 2.0, 1)},
    };
    for (auto &[name, p] : priors)
        run_scalar(name, [p = p](double a) { return [p, a](double b) { return p->scalar(a, b); }; }, b_wide);

    // real likelihoods; y drawn per point
    {
        auto lik = std::make_shared<GaussianLikelihood>(0.5, 1);
        double y = 0;
        run_scalar("gaussian_likelihood",
                   [&](double a) {
                       y = 1.5 * normal(rng);
                       return [lik, a, y](double b) { return lik->scalar(a, b, y); };
                   },
                   b_wide);
    }
    std::vector<std::pair<std::string, std::shared_ptr<DeterministicLikelihood>>> det = {
        {"sgn_likelihood", std::make_shared<SgnLikelihood>(1)},
        {"abs_likelihood", std::make_shared<AbsLikelihood>(1)},
    };
    for (auto &[name, lik] : det) {
        bool sgn = name == "sgn_likelihood";
        run_scalar(name,
                   [&, lik = lik](double a) {
                       double y = sgn ? (normal(rng) > 0 ? 1.0 : -1.0) : std::abs(1.5 * normal(rng)) + 0.05;
                       return [lik, a, y](double b) { return lik->scalar(a, b, y); };
                   },
                   b_wide);
    }

    // complex modules
    auto run_complex = [&](const std::string &name, const std::function<PhaseFn(double a)> &make) {
        ++n_modules;
        double w = 0;
        for (int i = 0; i < points; ++i) {
            double a = log_uniform(rng, 0.05, 20.0);
            std::complex<double> b(2.0 * std::sqrt(a) * normal(rng), 2.0 * std::sqrt(a) * normal(rng));
            GradCheck g = check_gradient_complex(make(a), b);
            n_unresolved += !g.v_resolved;
            w = std::max({w, g.err_r, g.err_v});
        }
        worst = std::max(worst, w);
        if (!(w <= tol)) {
            ++n_fail;
            bad << ' ' << name << '=' << w;
        }
    };
    run_complex("phase_belief", [](double) { return [](std::complex<double> b) { return phase_belief(b); }; });
    run_complex("phase_likelihood", [&](double a) {
        std::complex<double> y = std::polar(1.0, 2.0 * M_PI * std::uniform_real_distribution<double>()(rng));
        return [a, y](std::complex<double> b) { return PhaseLikelihood::moments(a, b, y); };
    });
    run_complex("modulus_likelihood", [&](double a) {
        double y = std::abs(1.5 * normal(rng)) + 0.05;
        return [a, y](std::complex<double> b) { return ModulusLikelihood::moments(a, b, y); };
    });

    // separable channels: finite differences in bz and in bx
    auto run_channel = [&](const std::string &name,
                           const std::function<ChannelMoments(double, double, double, double)> &f) {
        ++n_modules;
        double w = 0;
        for (int i = 0; i < points; ++i) {
            double az = log_uniform(rng, 0.05, 20.0), ax = log_uniform(rng, 0.05, 20.0);
            double bz = 2.0 * std::sqrt(az) * normal(rng), bx = 2.0 * std::sqrt(ax) * normal(rng);
            ScalarFn fz = [&](double b) {
                ChannelMoments c = f(az, b, ax, bx);
                return ScalarMoments{c.A, c.rz, c.vz};
            };
            ScalarFn fx = [&](double b) {
                ChannelMoments c = f(az, bz, ax, b);
                return ScalarMoments{c.A, c.rx, c.vx};
            };
            GradCheck gz = check_gradient(fz, bz);
            n_unresolved += !gz.v_resolved;
            w = std::max({w, gz.err_r, gz.err_v});
            // x is deterministic on flat regions; skip the x check when it carries no spread
            if (fx(bx).v > 1e-10) {
                GradCheck gx = check_gradient(fx, bx);
                n_unresolved += !gx.v_resolved;
                w = std::max({w, gx.err_r, gx.err_v});
            }
        }
        worst = std::max(worst, w);
        if (!(w <= tol)) {
            ++n_fail;
            bad << ' ' << name << '=' << w;
        }
    };
    GaussianNoiseChannel noise(0.3, 1);
    run_channel("gaussian_noise", [&](double az, double bz, double ax, double bx) { return noise.scalar(az, bz, ax, bx); });
    for (const char *act : {"identity", "relu", "leaky_relu", "hard_tanh", "hard_sigmoid", "abs", "sgn"}) {
        auto spec = std::string(act) == "leaky_relu" ? PiecewiseLinearSpec::leaky_relu(0.1)
                                                    : PiecewiseLinearSpec::named(act);
        auto ch = std::make_shared<PiecewiseLinearChannel>(spec, 1);
        run_channel(act, [ch](double az, double bz, double ax, double bx) { return ch->scalar(az, bz, ax, bx); });
    }

    double dt = seconds_since(t0);
    std::ostringstream os;
    os << n_modules << " modules x " << points << " points, worst rel err " << worst << ", " << dt << " s";
    os << ", " << n_unresolved << " points with v below finite-difference resolution";
    if (n_fail) os << "; failing:" << bad.str();
    if (dt >= 10.0) os << "; runtime over 10 s";
    return {n_fail == 0 && dt < 10.0, os.str()};
}

// ------------------------------------------------------------ 2

Outcome criterion_2()
{
    const Index N = 50, M = 30;
    const double prior_mean = 0.3, prior_var = 1.5, noise = 0.1;
    Rng rng(202);
    Mat W = standard_normal(M * N, rng).reshaped(M, N) / std::sqrt(double(N));
    Vec y = standard_normal(M, rng);

    ModelDecl d;
    d.factors.push_back({"prior", std::make_shared<GaussianPrior>(prior_mean, prior_var, N), {"x"}});
    d.factors.push_back({"linear", std::make_shared<LinearChannel>(make_dense(W)), {"x", "z"}});
    d.factors.push_back({"likelihood", std::make_shared<GaussianLikelihood>(noise, M, y), {"z"}});
    FactorGraph g = FactorGraph::build(d);

    // dense joint Gaussian oracle
    Mat P = Mat::Identity(N, N) / prior_var + W.transpose() * W / noise;
    Mat S = P.inverse();
    Vec mx = S * (Vec::Constant(N, prior_mean / prior_var) + W.transpose() * y / noise);
    double vx = S.trace() / double(N);
    Vec mz = W * mx;
    double vz = (W * S * W.transpose()).trace() / double(M);
    Mat C = prior_var * W * W.transpose() + noise * Mat::Identity(M, M);
    Vec resid = y - W * Vec::Constant(N, prior_mean);
    Eigen::LLT<Mat> llt(C);
    double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    double fe_oracle = 0.5 * resid.dot(llt.solve(resid)) + 0.5 * logdet + 0.5 * double(M) * kLn2Pi;

    EPEngine ep(g, EPSettings{});
    ep.init();
    ep.sweep();
    int ix = g.variable_index("x"), iz = g.variable_index("z");
    const VariablePosterior &px = ep.posterior(ix);
    double err_x = std::max((px.r - mx).cwiseAbs().maxCoeff(), std::abs(px.v - vx));
    // after one pass the channel's tilted belief holds both endpoints
    FactorPosterior fp = ep.factor_posterior(g.factor_index("linear"));
    double err_z = std::max((fp.ends[1].r - mz).cwiseAbs().maxCoeff(), std::abs(fp.ends[1].v - vz));
    double err_x_fac = std::max((fp.ends[0].r - mx).cwiseAbs().maxCoeff(), std::abs(fp.ends[0].v - vx));

    EPResult res = run(g, EPSettings{});
    const VariablePosterior &pz = res.posteriors[iz];
    double err_z_var = std::max((pz.r - mz).cwiseAbs().maxCoeff(), std::abs(pz.v - vz));
    double err_fe = std::abs(res.free_energy - fe_oracle);

    std::ostringstream os;
    os << "one pass: x err " << err_x << ", channel x/z err " << err_x_fac << '/' << err_z
       << "; converged (" << res.n_iters << " sweeps) z err " << err_z_var << ", free energy err " << err_fe;
    bool ok = err_x <= 1e-8 && err_z <= 1e-8 && err_x_fac <= 1e-8 && err_z_var <= 1e-8 && err_fe <= 1e-8;
    return {ok, os.str()};
}

// ------------------------------------------------------------ 3

Outcome criterion_3()
{
    Rng rng(303);
    std::uniform_int_distribution<int> size(4, 40);
    double worst = 0;
    int count = 0;
    for (int k = 0; k < 100; ++k) {
        OperatorPtr op;
        switch (k % 5) {
        case 0: {
            Index M = size(rng), N = size(rng);
            op = make_dense(standard_normal(M * N, rng).reshaped(M, N) / std::sqrt(double(N)));
            break;
        }
        case 1: {
            Index n = size(rng);
            Eigen::HouseholderQR<Mat> qr(Mat(standard_normal(n * n, rng).reshaped(n, n)));
            op = make_rotation(Mat(qr.householderQ()));
            break;
        }
        case 2: {
            Index M = size(rng), N = size(rng);
            op = make_scaling(standard_normal(std::min(M, N), rng), M, N);
            break;
        }
        case 3:
            op = make_dft(size(rng), k % 2 == 0);
            break;
        default: {
            Index n = size(rng);
            if (k % 2)
                op = make_convolution(standard_normal(n, rng));
            else
                op = make_complex_convolution(
                    (standard_normal(n, rng) + std::complex<double>(0, 1) * standard_normal(n, rng)).eval());
        }
        }
        LinearChannel ch(op);
        Message in[2];
        in[0].a = log_uniform(rng, 0.01, 100.0);
        in[0].b = standard_normal(op->cols(), rng);
        in[1].a = log_uniform(rng, 0.01, 100.0);
        in[1].b = standard_normal(op->rows(), rng);
        FactorPosterior fp = ch.posterior(in);
        double alpha = double(op->rows()) / double(op->cols());
        double id = in[0].a * fp.ends[0].v + alpha * in[1].a * fp.ends[1].v;
        worst = std::max(worst, std::abs(id - 1.0));
        ++count;
    }
    std::ostringstream os;
    os << count << " operators (dense, rotation, scaling, dft, convolution), max |identity - 1| = " << worst;
    return {worst <= 1e-10, os.str()};
}

// ------------------------------------------------------------ 4

Outcome criterion_4()
{
    auto t0 = Clock::now();
    BenchOptions opt;
    opt.threads = 1;
    BenchResult r = run_benchmark("sparse_regression", opt);
    double dt = seconds_since(t0);
    bool ok = dt < 300.0;
    std::ostringstream os;
    os << std::setprecision(3);
    for (const auto &p : r.summary["points"]) {
        double rel = p["rel_error"].is_number() ? p["rel_error"].get<double>() : kNaN;
        ok = ok && rel <= 0.10;
        os << "a=" << p["alpha"].get<double>() << ":" << rel * 100 << "% ";
    }
    os << "(rel err of mean EP MSE vs SE); " << dt << " s single-threaded";
    return {ok, os.str()};
}

// ------------------------------------------------------------ 5

Outcome criterion_5()
{
    BenchResult r = run_benchmark("sparse_phase_retrieval", BenchOptions{});
    std::ostringstream os;
    os << std::setprecision(3);
    std::vector<double> window;
    bool large_ok = true;
    double last_window = -kInf;
    for (const auto &p : r.summary["points"]) {
        double a = p["alpha"], se = p["mse_se"], inf = p["mse_se_informed"];
        if (se >= 10.0 * inf) last_window = a;
    }
    if (!std::isfinite(last_window)) return {false, "no alpha with an uninformed/informed SE gap of 10x"};
    for (const auto &p : r.summary["points"]) {
        double a = p["alpha"], se = p["mse_se"], inf = p["mse_se_informed"];
        double ep = p["mse_ep"].is_number() ? p["mse_ep"].get<double>() : kNaN;
        bool gap = se >= 10.0 * inf;
        double rel = std::abs(ep - se) / se;
        if (gap && rel <= 0.15) window.push_back(a);
        os << "a=" << a << ":ep " << ep << "/se " << se << "/inf " << inf << ' ';
        // large alpha: past the threshold point that follows the window
        if (a > last_window + 0.15) large_ok = large_ok && ep < 1e-3;
    }
    std::ostringstream head;
    head << "tracking window {";
    for (size_t i = 0; i < window.size(); ++i) head << (i ? "," : "") << window[i];
    head << "}; large alpha EP < 1e-3: " << (large_ok ? "yes" : "no") << "; " << os.str();
    return {!window.empty() && large_ok, head.str()};
}

// ------------------------------------------------------------ 6

Outcome criterion_6()
{
    std::ostringstream os;
    bool ok = true;
    for (const char *lik : {"gaussian_likelihood", "sgn_likelihood"}) {
        bool gauss = std::string(lik) == "gaussian_likelihood";
        Index n = 1000, m = gauss ? 600 : 2000;
        json like = {{"name", "likelihood"}, {"kind", lik}, {"vars", {"z"}}};
        if (gauss) like["var"] = 0.01;
        json model = {{"factors",
                       {{{"name", "prior"}, {"kind", "gauss_bernoulli_prior"}, {"vars", {"x"}}, {"rho", 0.2}, {"size", n}},
                        {{"name", "linear"}, {"kind", "linear"}, {"in", "x"}, {"out", "z"},
                         {"operator", {{"kind", "scaling"}, {"rows", m}, {"cols", n}}},
                         {"se_spectrum", "marchenko_pastur"}},
                        like}}};
        Rng rng(606);
        FactorGraph g = FactorGraph::build(build_declaration(model, rng));
        SESettings s;
        s.max_iter = 100;
        s.tol = 0;
        s.record_trajectory = true;
        TeacherState T = teacher_moments(g, s);
        SEState bo = se_bo_run(g, T, s);
        SEState rs = se_rs_run(g, g, T, s);
        double dev = 0;
        size_t iters = std::min(bo.trajectory.size(), rs.trajectory.size());
        for (size_t it = 0; it < iters; ++it)
            for (size_t j = 0; j < bo.trajectory[it].size(); ++j) {
                double x = bo.trajectory[it][j], y = rs.trajectory[it][j];
                dev = std::max(dev, std::abs(x - y) / std::max(1.0, std::abs(x)));
            }
        // q-hat = m-hat on the RS side
        for (size_t e = 0; e < rs.to_var.size(); ++e)
            dev = std::max(dev, std::abs(rs.to_var[e].qhat - rs.to_var[e].mhat) /
                                    std::max(1.0, std::abs(rs.to_var[e].mhat)));
        ok = ok && iters == 100 && dev <= 1e-8;
        os << lik << ": " << iters << " iterations, max deviation " << dev << ", mse " << bo.vars[0].mse << "; ";
    }
    return {ok, os.str()};
}

// ------------------------------------------------------------ 7

Outcome criterion_7()
{
    std::ostringstream os;
    bool ok = true;
    auto check_bn = [&](const std::string &name, const json &model) {
        Rng rng(707);
        FactorGraph g = FactorGraph::build(build_declaration(model, rng));
        TeacherState T = teacher_moments(g);
        bool pass = T.converged && T.fixed_point_sweep == 1 && std::abs(T.A0) <= 1e-10;
        ok = ok && pass;
        os << name << ": sweep " << T.fixed_point_sweep << ", A0 " << T.A0 << "; ";
        return std::pair{g, T};
    };
    for (double rho : {0.05, 0.2}) {
        json glm = {{"factors",
                     {{{"name", "prior"}, {"kind", "gauss_bernoulli_prior"}, {"vars", {"x"}}, {"rho", rho}, {"var", 1.0},
                       {"size", 1000}},
                      {{"name", "linear"}, {"kind", "linear"}, {"in", "x"}, {"out", "z"},
                       {"operator", {{"kind", "iid_gaussian"}, {"alpha", 1.0}}}},
                      {{"name", "likelihood"}, {"kind", "gaussian_likelihood"}, {"vars", {"z"}}, {"var", 0.01}}}}};
        auto [g, T] = check_bn("GB GLM rho=" + std::to_string(rho).substr(0, 4), glm);
        double tx = T.tau[g.variable_index("x")], tz = T.tau[g.variable_index("z")];
        bool pass = std::abs(tx - rho) <= 1e-3 && std::abs(tz - rho) <= 1e-3;
        ok = ok && pass;
        os << "tau_x " << tx << ", tau_z " << tz << "; ";
    }
    json deep = {{"factors",
                  {{{"name", "prior"}, {"kind", "gaussian_prior"}, {"vars", {"x0"}}, {"size", 300}},
                   {{"name", "w1"}, {"kind", "linear"}, {"in", "x0"}, {"out", "z1"},
                    {"operator", {{"kind", "iid_gaussian"}, {"alpha", 1.5}}}},
                   {{"name", "relu"}, {"kind", "piecewise_linear"}, {"activation", "relu"}, {"in", "z1"}, {"out", "x1"}},
                   {{"name", "w2"}, {"kind", "linear"}, {"in", "x1"}, {"out", "z2"},
                    {"operator", {{"kind", "iid_gaussian"}, {"alpha", 0.8}}}},
                   {{"name", "likelihood"}, {"kind", "sgn_likelihood"}, {"vars", {"z2"}}}}}};
    check_bn("two-layer relu/sgn", deep);
    json noisy = {{"factors",
                   {{{"name", "prior"}, {"kind", "binary_prior"}, {"vars", {"x"}}, {"size", 200}},
                    {{"name", "noise"}, {"kind", "gaussian_noise"}, {"var", 0.5}, {"in", "x"}, {"out", "u"}},
                    {{"name", "likelihood"}, {"kind", "abs_likelihood"}, {"vars", {"u"}}}}}};
    check_bn("binary/noise/abs", noisy);
    return {ok, os.str()};
}

// ------------------------------------------------------------ 8

// Dual projected gradient (FISTA) for min_x |x-y|^2/(2 dv) + lam |D x|_1.
double tv_oracle(const Mat &D, const Vec &y, double dv, double lam, Vec &x)
{
    Vec u = Vec::Zero(D.rows()), w = u, prev = u;
    Vec Dy = D * y;
    double L = dv * 4.0, t = 1;
    for (int it = 0; it < 200000; ++it) {
        Vec grad = dv * (D * (D.transpose() * w)) - Dy;
        prev = u;
        u = (w - grad / L).cwiseMax(-lam).cwiseMin(lam);
        double tn = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
        w = u + ((t - 1) / tn) * (u - prev);
        t = tn;
        if (it % 1000 == 999) {
            x = y - dv * D.transpose() * u;
            double primal = (y - x).squaredNorm() / (2 * dv) + lam * (D * x).lpNorm<1>();
            double dual = u.dot(Dy) - 0.5 * dv * (D.transpose() * u).squaredNorm();
            if (primal - dual < 1e-11) break;
        }
    }
    x = y - dv * D.transpose() * u;
    return (y - x).squaredNorm() / (2 * dv) + lam * (D * x).lpNorm<1>();
}

Outcome criterion_8()
{
    std::ostringstream os;
    bool ok = true;
    const Index n = 200;
    const double dv = 0.01;
    Rng rng(808);
    Mat D = make_gradient({n})->to_dense();
    double worst = 0;
    for (double lam : {0.05, 0.5, 2.0}) {
        Vec x0 = piecewise_constant_signal(n, 0.04, rng);
        Vec y = x0 + std::sqrt(dv) * standard_normal(n, rng);
        ModelDecl d;
        d.factors.push_back({"likelihood", std::make_shared<GaussianLikelihood>(dv, n, y), {"x"}});
        d.factors.push_back({"gradient", std::make_shared<LinearChannel>(make_gradient({n})), {"x", "z"}});
        d.factors.push_back({"tv", make_l1(lam, n), {"z"}});
        FactorGraph g = FactorGraph::build(d);
        EPSettings es;
        es.max_iter = 5000;
        es.tol = 1e-12;
        MAPResult r = map_run(g, es);
        Vec xo;
        double oracle = tv_oracle(D, y, dv, lam, xo);
        double err = std::abs(r.objective - oracle);
        worst = std::max(worst, err);
        ok = ok && r.ep.converged && err <= 1e-4;
        os << "lam=" << lam << ": |obj - oracle| " << err << " (" << r.ep.n_iters << " sweeps); ";
    }
    // unit cases
    Vec u(5);
    u << 3.0, -0.5, 1.0, -2.5, 0.0;
    Vec st = soft_threshold(u, 1.0), st_ref(5);
    st_ref << 2.0, 0.0, 0.0, -1.5, 0.0;
    Vec gu(6);  // d = 2 components, n = 3 groups {0,3}, {1,4}, {2,5}
    gu << 3.0, 0.5, 0.0, 4.0, 0.5, 0.0;
    Vec gst = group_soft_threshold(gu, 2.5, 2, 3), gst_ref(6);
    gst_ref << 1.5, 0.0, 0.0, 2.0, 0.0, 0.0;
    bool unit = st == st_ref && gst == gst_ref;
    ok = ok && unit;
    os << "soft/group thresholds exact: " << (unit ? "yes" : "no");
    return {ok, os.str()};
}

// ------------------------------------------------------------ 9

Outcome criterion_9()
{
    Rng rng(909);
    const int samples = 1000000;
    double worst = 0;
    int over = 0;
    for (int k = 0; k < 100; ++k) {
        auto spec = k % 2 ? PiecewiseLinearSpec::hard_tanh() : PiecewiseLinearSpec::relu();
        PiecewiseLinearChannel ch(spec, 1);
        double az = log_uniform(rng, 0.2, 5.0), ax = log_uniform(rng, 0.2, 5.0);
        double bz = std::sqrt(az) * normal(rng), bx = std::sqrt(ax) * normal(rng);
        ChannelMoments m = ch.scalar(az, bz, ax, bx);

        // proposal: the z message N(bz/az, 1/az); weight: the x message at f(z)
        std::vector<double> zs(samples), xs(samples), ws(samples);
        double mu = bz / az, sd = 1 / std::sqrt(az), wmax = -kInf;
        for (int i = 0; i < samples; ++i) {
            zs[i] = mu + sd * normal(rng);
            xs[i] = spec(zs[i]);
            ws[i] = -0.5 * ax * xs[i] * xs[i] + bx * xs[i];
            wmax = std::max(wmax, ws[i]);
        }
        double W = 0, W2 = 0;
        for (int i = 0; i < samples; ++i) {
            ws[i] = std::exp(ws[i] - wmax);
            W += ws[i];
            W2 += ws[i] * ws[i];
        }
        auto mean_of = [&](const std::vector<double> &g) {
            double s = 0;
            for (int i = 0; i < samples; ++i) s += ws[i] * g[i];
            return s / W;
        };
        // self-normalized estimate and its delta-method standard error
        auto se_of = [&](const std::function<double(int)> &g, double est) {
            double s = 0;
            for (int i = 0; i < samples; ++i) {
                double d = g(i) - est;
                s += ws[i] * ws[i] * d * d;
            }
            return std::sqrt(s) / W;
        };
        double ez = mean_of(zs), ex = mean_of(xs);
        double vz = 0, vx = 0;
        for (int i = 0; i < samples; ++i) {
            vz += ws[i] * (zs[i] - ez) * (zs[i] - ez);
            vx += ws[i] * (xs[i] - ex) * (xs[i] - ex);
        }
        vz /= W;
        vx /= W;
        double se_rz = se_of([&](int i) { return zs[i]; }, ez);
        double se_rx = se_of([&](int i) { return xs[i]; }, ex);
        double se_vz = se_of([&](int i) { return (zs[i] - ez) * (zs[i] - ez); }, vz);
        double se_vx = se_of([&](int i) { return (xs[i] - ex) * (xs[i] - ex); }, vx);
        auto z_score = [](double a, double b, double se) { return se > 0 ? std::abs(a - b) / se : (a == b ? 0 : kInf); };
        double zs_max = std::max({z_score(m.rz, ez, se_rz), z_score(m.vz, vz, se_vz), z_score(m.rx, ex, se_rx),
                                  z_score(m.vx, vx, se_vx)});
        worst = std::max(worst, zs_max);
        over += zs_max > 3.0;
    }
    std::ostringstream os;
    os << "100 relu/hard_tanh instances x 1e6 samples: max |z-score| " << worst << ", instances beyond 3 SE: "
       << over;
    return {over == 0, os.str()};
}

// ------------------------------------------------------------ 10

Outcome criterion_10()
{
    BenchResult grad = run_benchmark("sparse_gradient_denoise", BenchOptions{});
    BenchResult dft = run_benchmark("sparse_dft_denoise", BenchOptions{});
    double mg = grad.summary["mse_ep"], md = dft.summary["mse_ep"];
    std::ostringstream os;
    os << "sparse gradient MSE " << mg << " (<= 1e-2), sparse DFT MSE " << md << " (<= 5e-2), 10 seeds each";
    return {mg <= 1e-2 && md <= 5e-2, os.str()};
}

} // namespace

int main(int argc, char **argv)
{
    const std::vector<std::pair<std::string, Outcome (*)()>> criteria = {
        {"module gradient suite", criterion_1},
        {"conjugate exactness", criterion_2},
        {"linear-channel identity", criterion_3},
        {"sparse linear regression EP vs SE", criterion_4},
        {"phase-retrieval hard phase", criterion_5},
        {"Nishimori reduction RS -> BO", criterion_6},
        {"teacher moments", criterion_7},
        {"MAP/TV vs proximal oracle", criterion_8},
        {"piecewise-linear vs importance sampling", criterion_9},
        {"denoising demos", criterion_10},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    int failed = 0;
    for (size_t c = 0; c < criteria.size(); ++c) {
        if (!wanted.empty() && !wanted.count(int(c) + 1)) continue;
        auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[c].second();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("[%s] criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c + 1,
                    criteria[c].first.c_str(), o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
