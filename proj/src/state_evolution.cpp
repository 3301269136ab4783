#include "treeamp/state_evolution.hpp"
#include "treeamp/exp_family.hpp"

namespace treeamp {

namespace {

double rel_change(double now, double before, double floor = 1.0, double noise = 0.0)
{
    if (std::max(std::abs(now), std::abs(before)) <= noise) return 0.0;
    return std::abs(now - before) / std::max({floor, std::abs(now), std::abs(before)});
}

double alpha_of(const FactorGraph &g, Index n)
{
    return double(n) / double(g.variable(g.reference_variable()).dim);
}

double factor_alpha(const FactorGraph &g, int k)
{
    return alpha_of(g, g.factor(k).factor->se_dim());
}

double variable_alpha(const FactorGraph &g, int i)
{
    return alpha_of(g, g.variable(i).dim);
}

double teacher_var_potential(double tau_hat)
{
    return 0.5 * (kLn2Pi - std::log(tau_hat));
}

std::string edge_label(const FactorGraph &g, int e)
{
    const Edge &ed = g.edge(e);
    return "'" + g.factor(ed.factor).name + "' -> '" + g.variable(ed.var).name + "'";
}

// Sum of the other incoming k -> i messages of e's variable.
template <class T, class Add>
T sum_others(const FactorGraph &g, const std::vector<T> &to_var, int e, T zero, Add add)
{
    const VariableNode &var = g.variable(g.edge(e).var);
    if (int o = g.passthrough()[e]; o >= 0) return to_var[o];
    T s = zero;
    if (var.n_neighbors() == 1) return s;
    for (int e2 : var.edges)
        if (e2 != e) s = add(s, to_var[e2]);
    return s;
}

SEHat add_hat(const SEHat &x, const SEHat &y)
{
    return SEHat{x.mhat + y.mhat, x.qhat + y.qhat, x.tauhat + y.tauhat};
}

std::vector<double> teacher_inputs(const FactorGraph &g, const TeacherState &t, int k)
{
    std::vector<double> th;
    for (int e : g.factor(k).edges) th.push_back(t.to_factor[e]);
    return th;
}

void check_structure(const FactorGraph &student, const FactorGraph &teacher)
{
    if (student.factors().size() != teacher.factors().size() ||
        student.variables().size() != teacher.variables().size())
        throw ShapeMismatch("teacher and student graphs differ in structure");
    for (size_t k = 0; k < student.factors().size(); ++k) {
        const FactorNode &a = student.factor(int(k)), &b = teacher.factor(int(k));
        if (a.edges != b.edges) throw ShapeMismatch("teacher and student factor '" + a.name + "' differ");
        for (size_t s = 0; s < a.edges.size(); ++s)
            if (a.factor->dim(int(s)) != b.factor->dim(int(s)))
                throw ShapeMismatch("teacher and student factor '" + a.name + "' differ in shape");
    }
}

std::vector<char> prior_edges(const FactorGraph &g)
{
    std::vector<char> mark(g.edges().size(), 0);
    for (size_t e = 0; e < g.edges().size(); ++e)
        mark[e] = g.factor(g.edge(int(e)).factor).factor->role() == FactorRole::prior;
    return mark;
}

} // namespace

// ------------------------------------------------------------- teacher

TeacherState teacher_moments(const FactorGraph &g, const SESettings &s)
{
    size_t ne = g.edges().size();
    TeacherState t;
    t.to_var.assign(ne, 0.0);
    t.to_factor.assign(ne, 0.0);
    auto plus = [](double x, double y) { return x + y; };
    std::vector<double> prev_v, prev_f;
    for (int it = 1; it <= s.max_iter; ++it) {
        for (const auto *order : {&g.e_plus(), &g.e_minus()})
            for (const DirectedEdge &d : *order) {
                int e = d.edge;
                if (d.to_factor) {
                    t.to_factor[e] = sum_others(g, t.to_var, e, 0.0, plus);
                    continue;
                }
                const Edge &ed = g.edge(e);
                std::vector<double> th = teacher_inputs(g, t, ed.factor);
                TeacherMoment tm = g.factor(ed.factor).factor->teacher_moment(th);
                double tau = tm.tau[ed.slot];
                if (!(tau > 0) || !std::isfinite(tau))
                    throw NonPositiveTilt("teacher moment on " + edge_label(g, e) + " is " +
                                          std::to_string(tau));
                double m = 1.0 / tau - t.to_factor[e];
                t.to_var[e] = s.damping > 0 && it > 1 ? (1 - s.damping) * m + s.damping * t.to_var[e] : m;
            }
        t.n_iters = it;
        if (!prev_v.empty()) {
            double c = 0;
            for (size_t e = 0; e < ne; ++e) {
                c = std::max(c, rel_change(t.to_var[e], prev_v[e]));
                c = std::max(c, rel_change(t.to_factor[e], prev_f[e]));
            }
            if (c < s.tol) {
                t.converged = true;
                t.fixed_point_sweep = it - 1;
                break;
            }
        }
        prev_v = t.to_var;
        prev_f = t.to_factor;
    }

    size_t nv = g.variables().size();
    t.tau.resize(nv);
    t.tau_hat.resize(nv);
    t.alpha.resize(nv);
    for (size_t i = 0; i < nv; ++i) {
        double th = 0;
        for (int e : g.variable(int(i)).edges) th += t.to_var[e];
        if (!(th > 0))
            throw NonPositiveTilt("teacher precision of '" + g.variable(int(i)).name + "' is " +
                                  std::to_string(th));
        t.tau_hat[i] = th;
        t.tau[i] = 1.0 / th;
        t.alpha[i] = variable_alpha(g, int(i));
    }

    double A = 0;
    for (size_t k = 0; k < g.factors().size(); ++k)
        A += factor_alpha(g, int(k)) *
             g.factor(int(k)).factor->teacher_moment(teacher_inputs(g, t, int(k))).A;
    for (size_t e = 0; e < ne; ++e) {
        double th = t.to_var[e] + t.to_factor[e];
        A -= t.alpha[g.edge(int(e)).var] * (th > 0 ? teacher_var_potential(th) : kNaN);
    }
    for (size_t i = 0; i < nv; ++i) A += t.alpha[i] * teacher_var_potential(t.tau_hat[i]);
    t.A0 = A;
    return t;
}

// --------------------------------------------------------- variables

SEVariable rs_variable(double mhat, double qhat, double tauhat, double tau0)
{
    SEVariable v;
    v.mhat = mhat;
    v.qhat = qhat;
    v.tauhat = tauhat;
    v.tau0 = tau0;
    double a = tauhat + qhat;
    v.m = mhat * tau0 / a;
    v.q = (mhat * mhat * tau0 + qhat) / (a * a);
    v.v = 1.0 / a;
    v.tau = v.q + v.v;
    v.mse = tau0 - 2 * v.m + v.q;
    return v;
}

SEVariable bo_variable(double mhat, double tau0)
{
    SEVariable v;
    v.mhat = v.qhat = mhat;
    v.tauhat = 1.0 / tau0;
    v.tau0 = tau0;
    double a = 1.0 / tau0 + mhat;
    v.v = 1.0 / a;
    v.m = v.q = tau0 - v.v;
    v.tau = tau0;
    v.mse = v.v;
    return v;
}

double rs_variable_potential(double mhat, double qhat, double tauhat, double tau0)
{
    double a = tauhat + qhat;
    if (!(a > 0)) return kNaN;
    return 0.5 * (mhat * mhat * tau0 + qhat) / a + 0.5 * (kLn2Pi - std::log(a));
}

double bo_variable_potential(double mhat, double tau0)
{
    double a = 1.0 / tau0 + mhat;
    if (!(a > 0)) return kNaN;
    return 0.5 * mhat * tau0 + 0.5 * (kLn2Pi - std::log(a));
}

// ------------------------------------------------------------------ BO

namespace {

std::vector<double> mhat_inputs(const FactorGraph &g, const std::vector<SEHat> &to_factor, int k)
{
    std::vector<double> mh;
    for (int e : g.factor(k).edges) mh.push_back(to_factor[e].mhat);
    return mh;
}

std::vector<SEHat> hat_inputs(const FactorGraph &g, const std::vector<SEHat> &to_factor, int k)
{
    std::vector<SEHat> h;
    for (int e : g.factor(k).edges) h.push_back(to_factor[e]);
    return h;
}

template <class Update>
void se_iterate(const FactorGraph &g, const TeacherState &t, SEState &st, const SESettings &s, bool rs,
                Update &&update_to_var)
{
    size_t ne = g.edges().size();
    std::vector<SEHat> prev_v, prev_f;
    SEHat zero{};
    for (int it = 1; it <= s.max_iter; ++it) {
        for (const auto *order : {&g.e_plus(), &g.e_minus()})
            for (const DirectedEdge &d : *order) {
                if (d.to_factor)
                    st.to_factor[d.edge] = sum_others(g, st.to_var, d.edge, zero, add_hat);
                else
                    update_to_var(d.edge, it);
            }
        st.n_iters = it;
        if (s.record_trajectory) {
            std::vector<double> row;
            for (const auto &h : st.to_var) row.push_back(h.mhat);
            for (const auto &h : st.to_factor) row.push_back(h.mhat);
            st.trajectory.push_back(std::move(row));
        }
        if (!prev_v.empty()) {
            double c = 0;
            // small floor so that an epsilon start is not mistaken for a fixed
            // point; values at rounding level of the edge precision count as 0
            const double floor = 1e-3 * s.epsilon;
            for (size_t e = 0; e < ne; ++e) {
                const double noise = 1e-12 * std::abs(t.to_var[e] + t.to_factor[e]);
                c = std::max(c, rel_change(st.to_var[e].mhat, prev_v[e].mhat, floor, noise));
                c = std::max(c, rel_change(st.to_factor[e].mhat, prev_f[e].mhat, floor, noise));
                if (rs) {
                    c = std::max(c, rel_change(st.to_var[e].qhat, prev_v[e].qhat, floor, noise));
                    c = std::max(c, rel_change(st.to_var[e].tauhat, prev_v[e].tauhat, floor, noise));
                    c = std::max(c, rel_change(st.to_factor[e].qhat, prev_f[e].qhat, floor, noise));
                    c = std::max(c, rel_change(st.to_factor[e].tauhat, prev_f[e].tauhat, floor, noise));
                }
            }
            if (!std::isfinite(c)) throw NumericalFailure("state evolution produced non-finite messages");
            if (c < s.tol) {
                st.converged = true;
                break;
            }
        }
        prev_v = st.to_var;
        prev_f = st.to_factor;
    }
}

SEHat damp(const SEHat &now, const SEHat &old, double d, int it)
{
    if (d <= 0 || it == 1) return now;
    return SEHat{(1 - d) * now.mhat + d * old.mhat, (1 - d) * now.qhat + d * old.qhat,
                 (1 - d) * now.tauhat + d * old.tauhat};
}

} // namespace

SEState se_bo_run(const FactorGraph &g, const TeacherState &t, const SESettings &s)
{
    size_t ne = g.edges().size();
    if (t.to_var.size() != ne) throw ShapeMismatch("teacher state does not match the graph");
    SEState st;
    st.bayes_optimal = true;
    st.to_var.assign(ne, SEHat{s.epsilon, s.epsilon, 0});
    st.to_factor.assign(ne, SEHat{s.epsilon, s.epsilon, 0});
    if (s.informed) {
        auto mark = prior_edges(g);
        for (size_t e = 0; e < ne; ++e)
            if (mark[e]) st.to_factor[e] = SEHat{s.informed_value, s.informed_value, 0};
    }
    auto update = [&](int e, int it) {
        const Edge &ed = g.edge(e);
        const Factor &f = *g.factor(ed.factor).factor;
        BOPotential bo = f.bo_potential(mhat_inputs(g, st.to_factor, ed.factor),
                                        teacher_inputs(g, t, ed.factor), s.quad);
        double v = bo.v[ed.slot];
        if (!(v >= 0) || !std::isfinite(v))
            throw NumericalFailure("BO variance on " + edge_label(g, e) + " is " + std::to_string(v));
        double total = std::min(v > 0 ? 1.0 / v : kInf, s.max_hat) - (t.to_var[e] + t.to_factor[e]);
        double m = total - st.to_factor[e].mhat;
        SEHat h{m, m, 0};
        st.to_var[e] = damp(h, st.to_var[e], s.damping, it);
    };
    se_iterate(g, t, st, s, false, update);

    st.vars.resize(g.variables().size());
    for (size_t i = 0; i < st.vars.size(); ++i) {
        double mh = 0;
        for (int e : g.variable(int(i)).edges) mh += st.to_var[e].mhat;
        st.vars[i] = bo_variable(mh, t.tau[i]);
    }
    st.free_entropy = free_entropy_bo(g, t, st, s.quad);
    return st;
}

SEState se_rs_run(const FactorGraph &g, const FactorGraph &teacher, const TeacherState &t,
                  const SESettings &s)
{
    check_structure(g, teacher);
    size_t ne = g.edges().size();
    if (t.to_var.size() != ne) throw ShapeMismatch("teacher state does not match the graph");
    SEState st;
    st.bayes_optimal = false;
    st.to_var.resize(ne);
    st.to_factor.resize(ne);
    auto mark = prior_edges(g);
    for (size_t e = 0; e < ne; ++e) {
        st.to_var[e] = SEHat{s.epsilon, s.epsilon, t.to_var[e]};
        double init = s.informed && mark[e] ? s.informed_value : s.epsilon;
        st.to_factor[e] = SEHat{init, init, t.to_factor[e]};
    }
    auto update = [&](int e, int it) {
        const Edge &ed = g.edge(e);
        const Factor &f = *g.factor(ed.factor).factor;
        std::vector<SEHat> hats = hat_inputs(g, st.to_factor, ed.factor);
        RSPotential rs = f.rs_potential(hats, *teacher.factor(ed.factor).factor,
                                        teacher_inputs(g, t, ed.factor), s.quad);
        const SEOverlap &ov = rs.ends[ed.slot];
        if (!(ov.v >= 0) || !std::isfinite(ov.v))
            throw NumericalFailure("RS variance on " + edge_label(g, e) + " is " + std::to_string(ov.v));
        double tau0 = t.tau[ed.var];
        double a = std::min(ov.v > 0 ? 1.0 / ov.v : kInf, s.max_hat);
        double mh = a * ov.m / tau0;
        double qh = a * a * ov.q - mh * mh * tau0;
        double th = a - qh;
        const SEHat &in = st.to_factor[e];
        SEHat h{mh - in.mhat, qh - in.qhat, th - in.tauhat};
        st.to_var[e] = damp(h, st.to_var[e], s.damping, it);
    };
    se_iterate(g, t, st, s, true, update);

    st.vars.resize(g.variables().size());
    for (size_t i = 0; i < st.vars.size(); ++i) {
        SEHat h{};
        for (int e : g.variable(int(i)).edges) h = add_hat(h, st.to_var[e]);
        st.vars[i] = rs_variable(h.mhat, h.qhat, h.tauhat, t.tau[i]);
    }
    st.free_entropy = free_entropy_rs(g, teacher, t, st, s.quad);
    return st;
}

SEState se_bo_run_checked(const FactorGraph &g, const TeacherState &t, const SESettings &s)
{
    SEState st = se_bo_run(g, t, s);
    if (!st.converged)
        throw NotConverged("BO state evolution did not converge in " + std::to_string(st.n_iters) +
                               " iterations",
                           st);
    return st;
}

SEState se_rs_run_checked(const FactorGraph &g, const FactorGraph &teacher, const TeacherState &t,
                          const SESettings &s)
{
    SEState st = se_rs_run(g, teacher, t, s);
    if (!st.converged)
        throw NotConverged("RS state evolution did not converge in " + std::to_string(st.n_iters) +
                               " iterations",
                           st);
    return st;
}

// -------------------------------------------------------- free entropy

double free_entropy_bo(const FactorGraph &g, const TeacherState &t, const SEState &st,
                       const QuadratureOptions &opt)
{
    double A = 0;
    for (size_t k = 0; k < g.factors().size(); ++k)
        A += factor_alpha(g, int(k)) *
             g.factor(int(k))
                 .factor->bo_potential(mhat_inputs(g, st.to_factor, int(k)), teacher_inputs(g, t, int(k)), opt)
                 .A;
    for (size_t e = 0; e < g.edges().size(); ++e) {
        int i = g.edge(int(e)).var;
        A -= t.alpha[i] * bo_variable_potential(st.to_var[e].mhat + st.to_factor[e].mhat, t.tau[i]);
    }
    for (size_t i = 0; i < g.variables().size(); ++i) {
        double mh = 0;
        for (int e : g.variable(int(i)).edges) mh += st.to_var[e].mhat;
        A += t.alpha[i] * bo_variable_potential(mh, t.tau[i]);
    }
    return A;
}

double free_entropy_rs(const FactorGraph &g, const FactorGraph &teacher, const TeacherState &t,
                       const SEState &st, const QuadratureOptions &opt)
{
    double A = 0;
    for (size_t k = 0; k < g.factors().size(); ++k)
        A += factor_alpha(g, int(k)) *
             g.factor(int(k))
                 .factor->rs_potential(hat_inputs(g, st.to_factor, int(k)), *teacher.factor(int(k)).factor,
                                       teacher_inputs(g, t, int(k)), opt)
                 .A;
    for (size_t e = 0; e < g.edges().size(); ++e) {
        int i = g.edge(int(e)).var;
        SEHat h = add_hat(st.to_var[e], st.to_factor[e]);
        A -= t.alpha[i] * rs_variable_potential(h.mhat, h.qhat, h.tauhat, t.tau[i]);
    }
    for (size_t i = 0; i < g.variables().size(); ++i) {
        SEHat h{};
        for (int e : g.variable(int(i)).edges) h = add_hat(h, st.to_var[e]);
        A += t.alpha[i] * rs_variable_potential(h.mhat, h.qhat, h.tauhat, t.tau[i]);
    }
    return A;
}

// -------------------------------------------------- mutual information

MutualInformation mutual_information(const FactorGraph &g, const TeacherState &t, const SEState &st,
                                     const QuadratureOptions &opt)
{
    MutualInformation mi;
    bool ill = false;
    double H = 0, I = 0;
    auto var_info = [&](int i, double mh) { return 0.5 * std::log((1.0 / t.tau[i] + mh) * t.tau[i]); };
    for (size_t k = 0; k < g.factors().size(); ++k) {
        const FactorNode &fn = g.factor(int(k));
        const Factor &f = *fn.factor;
        std::vector<double> mh = mhat_inputs(g, st.to_factor, int(k));
        std::vector<double> th0 = teacher_inputs(g, t, int(k));
        double Nk = double(f.se_dim());
        double lin = 0;
        for (size_t s = 0; s < fn.edges.size(); ++s) {
            int i = g.edge(fn.edges[s]).var;
            lin += double(f.dim(int(s))) / Nk * mh[s] * t.tau[i];
        }
        FactorInformation fi;
        fi.name = fn.name;
        fi.H = 0.5 * lin - f.bo_potential(mh, th0, opt).A + f.teacher_moment(th0).A;
        double E = f.entropy_constant();
        fi.ill_defined = std::isnan(E);
        fi.I = fi.ill_defined ? kNaN : fi.H - E;
        ill = ill || fi.ill_defined;
        double ak = factor_alpha(g, int(k));
        H += ak * fi.H;
        I += ak * fi.I;
        mi.factors.push_back(fi);
    }
    for (size_t e = 0; e < g.edges().size(); ++e) {
        int i = g.edge(int(e)).var;
        double x = t.alpha[i] * var_info(i, st.to_var[e].mhat + st.to_factor[e].mhat);
        H -= x;
        I -= x;
    }
    for (size_t i = 0; i < g.variables().size(); ++i) {
        double mh = 0;
        for (int e : g.variable(int(i)).edges) mh += st.to_var[e].mhat;
        double x = var_info(int(i), mh);
        mi.variables.push_back(x);
        H += t.alpha[i] * x;
        I += t.alpha[i] * x;
    }
    mi.H = H;
    mi.I = ill ? kNaN : I;
    return mi;
}

} // namespace treeamp
