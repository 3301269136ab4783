#include "treeamp/channels_linear.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>

using namespace treeamp;

namespace {

std::vector<OperatorPtr> operator_zoo(Rng &rng)
{
    std::vector<OperatorPtr> ops;
    ops.push_back(make_dense(iid_gaussian_matrix(7, 11, rng)));
    ops.push_back(make_dense(iid_gaussian_matrix(13, 6, rng)));
    Mat Q = Eigen::HouseholderQR<Mat>(iid_gaussian_matrix(9, 9, rng)).householderQ();
    ops.push_back(make_rotation(Q));
    ops.push_back(make_scaling(Vec::LinSpaced(5, 0.5, 2.0), 8, 5));
    ops.push_back(make_scaling(Vec::LinSpaced(4, 0.1, 1.0), 4, 7));
    ops.push_back(make_dft(8, true));
    ops.push_back(make_dft(6, false));
    ops.push_back(make_convolution(standard_normal(10, rng)));
    Eigen::VectorXcd w(6);
    for (Index i = 0; i < 6; ++i) w(i) = {std::normal_distribution<>()(rng), std::normal_distribution<>()(rng)};
    ops.push_back(make_complex_convolution(w));
    ops.push_back(make_gradient({12}));
    ops.push_back(make_gradient({4, 5}));
    return ops;
}

Vec sorted(Vec v)
{
    std::sort(v.data(), v.data() + v.size());
    return v;
}

} // namespace

TEST_CASE("operators: dense form, adjoint, spectrum and solve")
{
    Rng rng(5);
    for (const auto &op : operator_zoo(rng)) {
        CAPTURE(op->kind());
        Mat W = op->to_dense();
        REQUIRE(W.rows() == op->rows());
        REQUIRE(W.cols() == op->cols());
        Vec z = standard_normal(op->cols(), rng), x = standard_normal(op->rows(), rng);
        CHECK((op->apply(z) - W * z).norm() < 1e-12 * (1 + z.norm()));
        CHECK(std::abs(op->apply(z).dot(x) - z.dot(op->apply_t(x))) < 1e-12 * (1 + z.norm() * x.norm()));

        Eigen::SelfAdjointEigenSolver<Mat> es(W.transpose() * W);
        CHECK((sorted(op->spectrum()) - es.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);

        double az = 0.7, ax = 1.9;
        Mat P = az * Mat::Identity(W.cols(), W.cols()) + ax * W.transpose() * W;
        Vec b = standard_normal(op->cols(), rng);
        CHECK((op->solve(az, ax, b) - P.ldlt().solve(b)).norm() < 1e-11 * (1 + b.norm()));
        if (op->unitary()) CHECK((W.transpose() * W - Mat::Identity(W.cols(), W.cols())).norm() < 1e-12);
    }
}

TEST_CASE("linear posterior matches the dense Gaussian integral")
{
    Rng rng(6);
    for (const auto &op : operator_zoo(rng)) {
        CAPTURE(op->kind());
        Mat W = op->to_dense();
        Index N = W.cols(), M = W.rows();
        double az = 0.8, ax = 1.3;
        Vec bz = standard_normal(N, rng), bx = standard_normal(M, rng);
        LinearMoments lm = linear_posterior(*op, az, bz, ax, bx);

        Mat P = az * Mat::Identity(N, N) + ax * W.transpose() * W;
        Mat C = P.inverse();
        Vec h = bz + W.transpose() * bx;
        Vec rz = C * h;
        CHECK((lm.rz - rz).norm() < 1e-10);
        CHECK((lm.rx - W * rz).norm() < 1e-10);
        CHECK(lm.vz == doctest::Approx(C.trace() / double(N)).epsilon(1e-10));
        CHECK(lm.vx == doctest::Approx((W * C * W.transpose()).trace() / double(M)).epsilon(1e-10));
        double A = 0.5 * h.dot(rz) + 0.5 * double(N) * kLn2Pi - 0.5 * std::log(P.determinant());
        CHECK(lm.A == doctest::Approx(A).epsilon(1e-10));
    }
}

TEST_CASE("operator constructors reject bad shapes")
{
    CHECK_THROWS(make_rotation(Mat::Ones(3, 4)));
    CHECK_THROWS(make_rotation(Mat::Ones(3, 3)));
    CHECK_THROWS(make_gradient({}));
}

TEST_CASE("Marchenko-Pastur measure: moments and transforms")
{
    for (double alpha : {0.3, 1.0, 2.5}) {
        CAPTURE(alpha);
        auto mp = SpectralMeasure::marchenko_pastur(alpha);
        double w = mp.expect([](double) { return 1.0; });
        CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(mp.expect([](double l) { return l; }) == doctest::Approx(alpha).epsilon(1e-10));
        CHECK(mp.expect([](double l) { return l * l; }) == doctest::Approx(alpha * (1 + alpha)).epsilon(1e-10));
        CHECK(mp.expect([](double l) { return l * l * l; }) ==
              doctest::Approx(alpha * (1 + 3 * alpha + alpha * alpha)).epsilon(1e-10));
        // closed-form Stieltjes root against the quadrature
        for (double z : {-0.1, -1.0, -7.0}) {
            double q = mp.expect([&](double l) { return 1.0 / (l - z); });
            CHECK(mp.stieltjes(z) == doctest::Approx(q).epsilon(1e-8));
        }
        // R(S(z)) - 1/S(z) = z, with R at -S
        double z = -0.6, S = mp.stieltjes(z);
        CHECK(mp.r_transform(-S) - 1 / S == doctest::Approx(z).epsilon(1e-10));
        // j is the integral of R(-z)/2 and j* its Legendre conjugate
        double t = 0.8;
        CHECK(mp.j(t) == doctest::Approx(0.5 * alpha * std::log1p(t)).epsilon(1e-12));
        double u = 0.5 * alpha;
        double sup = -1e300;
        for (int i = 1; i < 200000; ++i) {
            double tt = i * 1e-4;
            sup = std::max(sup, mp.j(tt) - 0.5 * u * tt);
        }
        CHECK(mp.j_star(u) == doctest::Approx(sup).epsilon(1e-6));
    }
}

TEST_CASE("empirical spectra of iid matrices approach Marchenko-Pastur")
{
    Rng rng(8);
    Index N = 400, M = 600;
    OperatorPtr op = make_dense(iid_gaussian_matrix(M, N, rng));
    auto emp = SpectralMeasure::empirical(op->spectrum(), double(M) / double(N));
    auto mp = SpectralMeasure::marchenko_pastur(1.5);
    for (double g : {0.1, 1.0, 10.0}) CHECK(emp.shannon(g) == doctest::Approx(mp.shannon(g)).epsilon(0.02));
    CHECK(emp.eta(1.0) == doctest::Approx(mp.eta(1.0)).epsilon(0.02));
    // empirical R-transform inverts the empirical Stieltjes transform
    double S = emp.stieltjes(-0.5);
    CHECK(emp.r_transform(-S) - 1 / S == doctest::Approx(-0.5).epsilon(1e-8));
}

TEST_CASE("spectral measure domain errors")
{
    CHECK_THROWS_AS(SpectralMeasure::marchenko_pastur(0.0), DomainError);
    auto mp = SpectralMeasure::marchenko_pastur(0.5);
    CHECK_THROWS_AS(mp.shannon(-1.0), DomainError);
    CHECK_THROWS_AS(mp.j_star(0.0), DomainError);
    Vec neg(2);
    neg << 1.0, -1.0;
    CHECK_THROWS_AS(SpectralMeasure::empirical(neg, 1.0), DomainError);
}

TEST_CASE("full-covariance channel matches the dense joint Gaussian")
{
    Rng rng(21);
    Index M = 6, N = 4;
    Mat W = iid_gaussian_matrix(M, N, rng);
    Mat Lz = iid_gaussian_matrix(N, N, rng), Lx = iid_gaussian_matrix(M, M, rng);
    Mat Az = Lz * Lz.transpose() + 0.5 * Mat::Identity(N, N);
    Mat Ax = Lx * Lx.transpose();
    Vec bz = standard_normal(N, rng), bx = standard_normal(M, rng);
    FullCovMoments m = linear_posterior_fullcov(W, Az, bz, Ax, bx);
    Mat S = (Az + W.transpose() * Ax * W).inverse();
    Vec rz = S * (bz + W.transpose() * bx);
    CHECK((m.rz - rz).norm() < 1e-10);
    CHECK((m.Sz - S).norm() < 1e-10);
    CHECK((m.rx - W * rz).norm() < 1e-10);
    CHECK((m.Sx - W * S * W.transpose()).norm() < 1e-10);

    // forward message: pushforward of the z input; backward: pullback of the x input
    FullCovMessages msg = linear_messages_fullcov(W, Az, bz, Ax, bx);
    Mat Azi = Az.inverse();
    CHECK((msg.x_mean - W * Azi * bz).norm() < 1e-10);
    CHECK((msg.x_cov - W * Azi * W.transpose()).norm() < 1e-10);
    CHECK((msg.z_precision - W.transpose() * Ax * W).norm() < 1e-10);
    CHECK((msg.z_linear - W.transpose() * bx).norm() < 1e-10);
}

TEST_CASE("full-covariance channel: special cases")
{
    Rng rng(22);
    Index N = 5;
    Vec bz = standard_normal(N, rng), bx = standard_normal(N, rng);
    // identity operator with scalar precisions reduces to the isotropic case
    FullCovMoments m = linear_posterior_fullcov(Mat::Identity(N, N), 0.7, bz, 1.1, bx);
    CHECK((m.rz - (bz + bx) / 1.8).norm() < 1e-12);
    CHECK((m.Sz - Mat::Identity(N, N) / 1.8).norm() < 1e-12);

    // total-variation form: z the signal with data precision A^T A / noise,
    // x = K z its periodic gradient with isotropic precision a
    Index n = 8;
    Mat A = iid_gaussian_matrix(n, n, rng), K = make_gradient({n})->to_dense();
    double noise = 0.3, a = 2.0;
    Mat Az = A.transpose() * A / noise;
    FullCovMoments tv = linear_posterior_fullcov(K, Az, Vec::Zero(n), a * Mat::Identity(n, n), Vec::Zero(n));
    Mat want = (Az + a * K.transpose() * K).inverse();
    CHECK((tv.Sz - want).norm() < 1e-10 * want.norm());

    // singular combined precision
    CHECK_THROWS_AS(linear_posterior_fullcov(Mat::Ones(2, 3), 0.0, Vec::Zero(3), 1.0, Vec::Zero(2)), SingularPrecision);
}

TEST_CASE("orthogonal operator: a_z v_z + alpha a_x v_x = 1")
{
    Rng rng(23);
    Index N = 9;
    Mat Q = Eigen::HouseholderQR<Mat>(iid_gaussian_matrix(N, N, rng)).householderQ();
    OperatorPtr op = make_rotation(Q);
    for (double az : {0.3, 1.0}) {
        double ax = 1.0;
        LinearMoments lm = linear_posterior(*op, az, standard_normal(N, rng), ax, standard_normal(N, rng));
        CHECK(lm.vz == doctest::Approx(1 / (az + ax)));
        CHECK(lm.vx == doctest::Approx(1 / (az + ax)));
        CHECK(az * lm.vz + ax * lm.vx == doctest::Approx(1.0));
    }
}
