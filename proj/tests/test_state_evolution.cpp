#include "treeamp/channels_linear.hpp"
#include "treeamp/channels_separable.hpp"
#include "treeamp/likelihoods.hpp"
#include "treeamp/priors.hpp"
#include "treeamp/state_evolution.hpp"

#include <doctest.h>

using namespace treeamp;

namespace {

FactorPtr mp_channel(Index M, Index N)
{
    double alpha = double(M) / double(N);
    return std::make_shared<LinearChannel>(make_scaling(Vec::Ones(std::min(M, N)), M, N),
                                           SpectralMeasure::marchenko_pastur(alpha));
}

} // namespace

TEST_CASE("scalar Gaussian denoising has the conjugate MSE and information")
{
    double v0 = 2.0, noise = 0.5;
    Index n = 10;
    ModelDecl d;
    d.factors = {{"p", std::make_shared<GaussianPrior>(0.0, v0, n), {"x"}},
                 {"y", std::make_shared<GaussianLikelihood>(noise, n), {"x"}}};
    FactorGraph g = FactorGraph::build(d);
    TeacherState t = teacher_moments(g);
    CHECK(t.tau[0] == doctest::Approx(v0));
    SEState s = se_bo_run_checked(g, t);
    CHECK(s.vars[0].mse == doctest::Approx(v0 * noise / (v0 + noise)).epsilon(1e-9));
    MutualInformation mi = mutual_information(g, t, s);
    CHECK(mi.I == doctest::Approx(0.5 * std::log1p(v0 / noise)).epsilon(1e-8));
}

TEST_CASE("Gaussian GLM: SE MSE is the spectral average of the posterior variance")
{
    double v0 = 1.0, noise = 0.1;
    for (double alpha : {0.5, 1.0, 2.0}) {
        CAPTURE(alpha);
        Index N = 1000, M = Index(alpha * double(N));
        ModelDecl d;
        d.factors = {{"p", std::make_shared<GaussianPrior>(0.0, v0, N), {"x"}},
                     {"W", mp_channel(M, N), {"x", "z"}},
                     {"y", std::make_shared<GaussianLikelihood>(noise, M), {"z"}}};
        FactorGraph g = FactorGraph::build(d);
        TeacherState t = teacher_moments(g);
        CHECK(t.tau[g.variable_index("z")] == doctest::Approx(v0).epsilon(1e-12));
        SEState s = se_bo_run_checked(g, t);
        auto mp = SpectralMeasure::marchenko_pastur(alpha);
        double want = mp.expect([&](double l) { return 1.0 / (1.0 / v0 + l / noise); });
        CHECK(s.vars[g.variable_index("x")].mse == doctest::Approx(want).epsilon(1e-8));
    }
}

TEST_CASE("teacher second moments propagate through channels")
{
    Index N = 400;
    ModelDecl d;
    d.factors = {{"p", std::make_shared<GaussBernoulliPrior>(0.3, 0.0, 2.0, N), {"x"}},
                 {"W", mp_channel(2 * N, N), {"x", "z"}},
                 {"c", std::make_shared<GaussianNoiseChannel>(0.25, 2 * N), {"z", "u"}},
                 {"y", std::make_shared<SgnLikelihood>(2 * N), {"u"}}};
    FactorGraph g = FactorGraph::build(d);
    TeacherState t = teacher_moments(g);
    CHECK(t.converged);
    CHECK(t.tau[g.variable_index("x")] == doctest::Approx(0.6).epsilon(1e-12));
    // W^T W has mean eigenvalue alpha: |z|^2 / M = tau_x
    CHECK(t.tau[g.variable_index("z")] == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(t.tau[g.variable_index("u")] == doctest::Approx(0.85).epsilon(1e-9));
    CHECK(t.alpha[g.variable_index("u")] == doctest::Approx(2.0));
    CHECK(std::abs(t.A0) < 1e-10);
}

TEST_CASE("matched RS state evolution reproduces BO (Nishimori)")
{
    Index N = 500, M = 900;
    ModelDecl d;
    d.factors = {{"p", std::make_shared<GaussBernoulliPrior>(0.25, 0.0, 1.0, N), {"x"}},
                 {"W", mp_channel(M, N), {"x", "z"}},
                 {"y", std::make_shared<GaussianLikelihood>(0.05, M), {"z"}}};
    FactorGraph g = FactorGraph::build(d);
    TeacherState t = teacher_moments(g);
    SEState bo = se_bo_run_checked(g, t);
    SEState rs = se_rs_run_checked(g, g, t);
    for (size_t i = 0; i < bo.vars.size(); ++i) {
        CHECK(rs.vars[i].mse == doctest::Approx(bo.vars[i].mse).epsilon(1e-7));
        CHECK(rs.vars[i].m == doctest::Approx(rs.vars[i].q).epsilon(1e-7));
    }
}

TEST_CASE("mismatched student does no better than the Bayes-optimal one")
{
    Index N = 500, M = 800;
    auto build = [&](double prior_var, double noise) {
        ModelDecl d;
        d.factors = {{"p", std::make_shared<GaussBernoulliPrior>(0.25, 0.0, prior_var, N), {"x"}},
                     {"W", mp_channel(M, N), {"x", "z"}},
                     {"y", std::make_shared<GaussianLikelihood>(noise, M), {"z"}}};
        return FactorGraph::build(d);
    };
    FactorGraph teacher = build(1.0, 0.05), student = build(3.0, 0.2);
    TeacherState t = teacher_moments(teacher);
    SEState bo = se_bo_run_checked(teacher, t);
    SEState rs = se_rs_run_checked(student, teacher, t);
    CHECK(rs.vars[0].mse >= bo.vars[0].mse * (1 - 1e-9));
}

TEST_CASE("checked runner throws with the partial state")
{
    Index N = 200;
    ModelDecl d;
    d.factors = {{"p", std::make_shared<GaussBernoulliPrior>(0.2, 0.0, 1.0, N), {"x"}},
                 {"W", mp_channel(N, N), {"x", "z"}},
                 {"y", std::make_shared<SgnLikelihood>(N), {"z"}}};
    FactorGraph g = FactorGraph::build(d);
    TeacherState t = teacher_moments(g);
    SESettings s;
    s.max_iter = 2;
    try {
        se_bo_run_checked(g, t, s);
        FAIL("expected NotConverged");
    } catch (const NotConverged &e) {
        auto st = std::any_cast<SEState>(e.result);
        CHECK(st.n_iters == 2);
        CHECK_FALSE(st.converged);
    }
}

TEST_CASE("variable overlaps")
{
    // Gaussian aggregation: v = 1/(mhat + 1/tau0) in the BO case
    SEVariable b = bo_variable(3.0, 2.0);
    CHECK(b.v == doctest::Approx(1.0 / 3.5));
    CHECK(b.mse == doctest::Approx(b.v));
    CHECK(b.m == doctest::Approx(2.0 - b.v));
    // matched RS: qhat = mhat and tauhat = 1/tau0
    SEVariable r = rs_variable(3.0, 3.0, 0.5, 2.0);
    CHECK(r.m == doctest::Approx(b.m));
    CHECK(r.q == doctest::Approx(b.m));
    CHECK(r.mse == doctest::Approx(b.mse));
}
