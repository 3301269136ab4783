#include "treeamp/channels_linear.hpp"
#include "treeamp/exp_family.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <numeric>

namespace treeamp {

using cd = std::complex<double>;
using CVec = std::vector<cd>;

namespace {

// Eigen's FFT caches plans per object; one per thread keeps shared
// operators safe.
Eigen::FFT<double> &fft_engine()
{
    static thread_local Eigen::FFT<double> fft;
    return fft;
}

CVec fwd(const CVec &in)
{
    CVec out;
    fft_engine().fwd(out, in);
    return out;
}

// inverse, scaled by 1/n
CVec inv(const CVec &in)
{
    CVec out;
    fft_engine().inv(out, in);
    return out;
}

CVec to_complex(const Vec &v)
{
    CVec c(v.size() / 2);
    for (size_t k = 0; k < c.size(); ++k) c[k] = cd(v(2 * k), v(2 * k + 1));
    return c;
}

CVec real_to_complex(const Vec &v)
{
    CVec c(v.size());
    for (size_t k = 0; k < c.size(); ++k) c[k] = v(k);
    return c;
}

Vec interleave(const CVec &c)
{
    Vec v(2 * c.size());
    for (size_t k = 0; k < c.size(); ++k) {
        v(2 * k) = c[k].real();
        v(2 * k + 1) = c[k].imag();
    }
    return v;
}

Vec real_part(const CVec &c)
{
    Vec v(c.size());
    for (size_t k = 0; k < c.size(); ++k) v(k) = c[k].real();
    return v;
}

} // namespace

Mat LinearOperator::to_dense() const
{
    Mat W(m_, n_);
    Vec e = Vec::Zero(n_);
    for (Index j = 0; j < n_; ++j) {
        e(j) = 1;
        W.col(j) = apply(e);
        e(j) = 0;
    }
    return W;
}

// ------------------------------------------------------------------- dense

DenseOperator::DenseOperator(Mat W) : W_(std::move(W))
{
    m_ = W_.rows();
    n_ = W_.cols();
    if (m_ == 0 || n_ == 0) throw ShapeMismatch("dense operator: empty matrix");
    Eigen::BDCSVD<Mat> svd(W_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    U_ = svd.matrixU();
    V_ = svd.matrixV();
    s_ = svd.singularValues();
    spectrum_ = Vec::Zero(n_);
    spectrum_.head(s_.size()) = s_.array().square();
}

Vec DenseOperator::solve(double az, double ax, const Vec &b) const
{
    Vec c = V_.transpose() * b;
    Vec d = (az + ax * s_.array().square()).inverse();
    if (V_.cols() == n_) return V_ * (d.array() * c.array()).matrix();
    // null space of W: precision az alone
    return b / az + V_ * ((d.array() - 1.0 / az) * c.array()).matrix();
}

OperatorPtr make_dense(Mat W)
{
    return std::make_shared<DenseOperator>(std::move(W));
}

Mat iid_gaussian_matrix(Index M, Index N, Rng &rng)
{
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(double(N)));
    Mat W(M, N);
    for (Index j = 0; j < N; ++j)
        for (Index i = 0; i < M; ++i) W(i, j) = nd(rng);
    return W;
}

// ---------------------------------------------------------------- rotation

namespace {

class RotationOperator : public LinearOperator {
public:
    explicit RotationOperator(Mat R) : R_(std::move(R))
    {
        if (R_.rows() != R_.cols()) throw ShapeMismatch("rotation: matrix must be square");
        Mat I = Mat::Identity(R_.rows(), R_.cols());
        if ((R_.transpose() * R_ - I).norm() > 1e-8 * std::sqrt(double(R_.rows())))
            throw DomainError("rotation: matrix is not orthogonal");
        m_ = n_ = R_.rows();
        spectrum_ = Vec::Ones(n_);
    }
    std::string kind() const override { return "rotation"; }
    bool unitary() const override { return true; }
    Vec apply(const Vec &z) const override { return R_ * z; }
    Vec apply_t(const Vec &x) const override { return R_.transpose() * x; }
    Vec solve(double az, double ax, const Vec &b) const override { return b / (az + ax); }

private:
    Mat R_;
};

class ScalingOperator : public LinearOperator {
public:
    ScalingOperator(Vec s, Index M, Index N) : s_(std::move(s))
    {
        if (s_.size() != std::min(M, N)) throw ShapeMismatch("scaling: need min(M, N) scales");
        m_ = M;
        n_ = N;
        spectrum_ = Vec::Zero(N);
        spectrum_.head(s_.size()) = s_.array().square();
    }
    std::string kind() const override { return "scaling"; }
    Vec apply(const Vec &z) const override
    {
        Vec x = Vec::Zero(m_);
        x.head(s_.size()) = s_.array() * z.head(s_.size()).array();
        return x;
    }
    Vec apply_t(const Vec &x) const override
    {
        Vec z = Vec::Zero(n_);
        z.head(s_.size()) = s_.array() * x.head(s_.size()).array();
        return z;
    }
    Vec solve(double az, double ax, const Vec &b) const override
    {
        return (b.array() / (az + ax * spectrum_.array())).matrix();
    }

private:
    Vec s_;
};

class DftOperator : public LinearOperator {
public:
    DftOperator(Index n, bool real_input) : n0_(n), real_(real_input)
    {
        if (n < 1) throw ShapeMismatch("dft: size must be positive");
        m_ = 2 * n;
        n_ = real_input ? n : 2 * n;
        spectrum_ = Vec::Ones(n_);
    }
    std::string kind() const override { return "dft"; }
    bool unitary() const override { return !real_; }
    Vec apply(const Vec &z) const override
    {
        CVec c = fwd(real_ ? real_to_complex(z) : to_complex(z));
        return interleave(c) / std::sqrt(double(n0_));
    }
    Vec apply_t(const Vec &x) const override
    {
        CVec c = inv(to_complex(x));
        double s = std::sqrt(double(n0_));
        return real_ ? Vec(real_part(c) * s) : Vec(interleave(c) * s);
    }
    Vec solve(double az, double ax, const Vec &b) const override { return b / (az + ax); }

private:
    Index n0_;
    bool real_;
};

class ConvolutionOperator : public LinearOperator {
public:
    ConvolutionOperator(CVec w, bool complex_input) : complex_(complex_input)
    {
        Index n = Index(w.size());
        if (n < 1) throw ShapeMismatch("convolution: empty kernel");
        what_ = fwd(w);
        m_ = n_ = complex_input ? 2 * n : n;
        spectrum_.resize(n_);
        for (Index k = 0; k < n; ++k) {
            double l = std::norm(what_[k]);
            if (complex_input) {
                spectrum_(2 * k) = l;
                spectrum_(2 * k + 1) = l;
            } else {
                spectrum_(k) = l;
            }
        }
    }
    std::string kind() const override { return "convolution"; }
    Vec apply(const Vec &z) const override
    {
        return filter(z, [&](size_t k) { return what_[k]; });
    }
    Vec apply_t(const Vec &x) const override
    {
        return filter(x, [&](size_t k) { return std::conj(what_[k]); });
    }
    Vec solve(double az, double ax, const Vec &b) const override
    {
        return filter(b, [&](size_t k) { return cd(1.0 / (az + ax * std::norm(what_[k])), 0.0); });
    }

private:
    template <class G>
    Vec filter(const Vec &v, G &&g) const
    {
        CVec c = fwd(complex_ ? to_complex(v) : real_to_complex(v));
        for (size_t k = 0; k < c.size(); ++k) c[k] *= g(k);
        CVec out = inv(c);
        return complex_ ? interleave(out) : real_part(out);
    }

    bool complex_;
    CVec what_;
};

class GradientOperator : public LinearOperator {
public:
    explicit GradientOperator(std::vector<Index> shape) : shape_(std::move(shape))
    {
        if (shape_.empty()) throw ShapeMismatch("gradient: empty shape");
        Index N = 1;
        for (Index s : shape_) {
            if (s < 1) throw ShapeMismatch("gradient: non-positive extent");
            N *= s;
        }
        d_ = Index(shape_.size());
        n_ = N;
        m_ = d_ * N;
        stride_.assign(d_, 1);
        for (Index j = d_ - 2; j >= 0; --j) stride_[j] = stride_[j + 1] * shape_[j + 1];
        spectrum_.resize(N);
        for (Index idx = 0; idx < N; ++idx) {
            double l = 0;
            for (Index j = 0; j < d_; ++j) {
                Index k = (idx / stride_[j]) % shape_[j];
                l += 2.0 - 2.0 * std::cos(2.0 * M_PI * double(k) / double(shape_[j]));
            }
            spectrum_(idx) = l;
        }
    }
    std::string kind() const override { return "gradient"; }
    Vec apply(const Vec &z) const override
    {
        Vec x(m_);
        for (Index j = 0; j < d_; ++j)
            for (Index idx = 0; idx < n_; ++idx) x(j * n_ + idx) = z(shift(idx, j, +1)) - z(idx);
        return x;
    }
    Vec apply_t(const Vec &x) const override
    {
        Vec z = Vec::Zero(n_);
        for (Index j = 0; j < d_; ++j)
            for (Index idx = 0; idx < n_; ++idx)
                z(idx) += x(j * n_ + shift(idx, j, -1)) - x(j * n_ + idx);
        return z;
    }
    Vec solve(double az, double ax, const Vec &b) const override
    {
        CVec c = real_to_complex(b);
        fftn(c, false);
        for (Index idx = 0; idx < n_; ++idx) c[idx] /= az + ax * spectrum_(idx);
        fftn(c, true);
        return real_part(c);
    }

private:
    Index shift(Index idx, Index j, int step) const
    {
        Index k = (idx / stride_[j]) % shape_[j];
        Index kn = (k + step + shape_[j]) % shape_[j];
        return idx + (kn - k) * stride_[j];
    }

    void fftn(CVec &c, bool inverse) const
    {
        for (Index j = 0; j < d_; ++j) {
            Index n = shape_[j], st = stride_[j];
            CVec line(n);
            for (Index base = 0; base < n_; ++base) {
                if ((base / st) % n != 0) continue;
                for (Index k = 0; k < n; ++k) line[k] = c[base + k * st];
                CVec out = inverse ? inv(line) : fwd(line);
                for (Index k = 0; k < n; ++k) c[base + k * st] = out[k];
            }
        }
    }

    std::vector<Index> shape_, stride_;
    Index d_;
};

} // namespace

OperatorPtr make_rotation(Mat R)
{
    return std::make_shared<RotationOperator>(std::move(R));
}

OperatorPtr make_scaling(Vec s, Index M, Index N)
{
    return std::make_shared<ScalingOperator>(std::move(s), M, N);
}

OperatorPtr make_dft(Index n, bool real_input)
{
    return std::make_shared<DftOperator>(n, real_input);
}

OperatorPtr make_convolution(Vec w)
{
    return std::make_shared<ConvolutionOperator>(real_to_complex(w), false);
}

OperatorPtr make_complex_convolution(Eigen::VectorXcd w)
{
    return std::make_shared<ConvolutionOperator>(CVec(w.data(), w.data() + w.size()), true);
}

OperatorPtr make_gradient(std::vector<Index> shape)
{
    return std::make_shared<GradientOperator>(std::move(shape));
}

// -------------------------------------------------------- spectral measure

SpectralMeasure SpectralMeasure::empirical(const Vec &lambda, double alpha)
{
    if (lambda.size() == 0) throw DomainError("empirical spectrum is empty");
    SpectralMeasure m;
    m.alpha_ = alpha;
    m.lambda_.assign(lambda.data(), lambda.data() + lambda.size());
    for (double &l : m.lambda_) {
        if (l < -1e-10) throw DomainError("negative eigenvalue in spectrum");
        l = std::max(l, 0.0);
    }
    m.weight_.assign(m.lambda_.size(), 1.0 / double(m.lambda_.size()));
    m.lo_ = *std::min_element(m.lambda_.begin(), m.lambda_.end());
    m.hi_ = *std::max_element(m.lambda_.begin(), m.lambda_.end());
    return m;
}

SpectralMeasure SpectralMeasure::marchenko_pastur(double alpha, int nodes)
{
    if (!(alpha > 0)) throw DomainError("marchenko_pastur: alpha must be positive");
    SpectralMeasure m;
    m.alpha_ = alpha;
    m.analytic_ = true;
    double lm = std::pow(1 - std::sqrt(alpha), 2), lp = std::pow(1 + std::sqrt(alpha), 2);
    if (alpha < 1) {
        m.lambda_.push_back(0.0);
        m.weight_.push_back(1 - alpha);
    }
    // lambda = c + h cos(theta): the square-root edges become smooth
    double c = 0.5 * (lp + lm), h = 0.5 * (lp - lm);
    const auto &gl = gauss_legendre(nodes);
    for (int i = 0; i < nodes; ++i) {
        double th = 0.5 * M_PI * (gl.x[i] + 1);
        double ch = std::cos(0.5 * th);
        double l = lm + 2 * h * ch * ch;  // c + h cos(th), without cancellation near 0
        double s = std::sin(th);
        m.lambda_.push_back(l);
        m.weight_.push_back(0.5 * M_PI * gl.w[i] * h * h * s * s / (2 * M_PI * l));
    }
    m.lo_ = alpha < 1 ? 0.0 : lm;
    m.hi_ = lp;
    return m;
}

double SpectralMeasure::shannon(double gamma) const
{
    if (!(gamma >= 0)) throw DomainError("shannon transform: gamma < 0");
    return expect([&](double l) { return std::log1p(gamma * l); });
}

double SpectralMeasure::eta(double gamma) const
{
    if (!(gamma >= 0)) throw DomainError("eta transform: gamma < 0");
    return expect([&](double l) { return 1.0 / (1.0 + gamma * l); });
}

double SpectralMeasure::stieltjes(double z) const
{
    if (!(z < lo_)) throw DomainError("stieltjes: z must lie below the spectrum");
    if (analytic_ && z < 0) {
        // positive root of z S^2 + (z - alpha + 1) S + 1 = 0
        double B = z - alpha_ + 1;
        double disc = std::sqrt(B * B - 4 * z);
        double r1 = (-B + disc) / (2 * z), r2 = (-B - disc) / (2 * z);
        return r1 > 0 ? r1 : r2;
    }
    return expect([&](double l) { return 1.0 / (l - z); });
}

double SpectralMeasure::r_transform(double s) const
{
    if (analytic_) {
        if (!(s < 1)) throw DomainError("r_transform: s >= 1");
        return alpha_ / (1 - s);
    }
    if (s == 0) return expect([](double l) { return l; });
    if (!(s < 0)) throw DomainError("r_transform: empirical inverse needs s < 0");
    double target = -s;
    // S is increasing on z < lo; search z = lo - exp(t), with the smallest
    // offset still representable below lo
    auto S = [&](double t) { return stieltjes(lo_ - std::exp(t)); };
    double t_lo = std::log(std::max(std::abs(lo_), 1e-280) * 1e-14), t_hi = 60;
    if (!(S(t_lo) > target) || !(S(t_hi) < target))
        throw DomainError("r_transform: s outside the invertible range");
    for (int it = 0; it < 200; ++it) {
        double t = 0.5 * (t_lo + t_hi);
        (S(t) > target ? t_lo : t_hi) = t;
    }
    double z = lo_ - std::exp(0.5 * (t_lo + t_hi));
    return z - 1.0 / s;
}

double SpectralMeasure::j(double t) const
{
    if (!(t >= 0)) throw DomainError("j: t < 0");
    if (analytic_) return 0.5 * alpha_ * std::log1p(t);
    const auto &gl = gauss_legendre(64);
    double s = 0;
    for (size_t i = 0; i < gl.x.size(); ++i) {
        double z = 0.5 * t * (gl.x[i] + 1);
        s += gl.w[i] * r_transform(-z);
    }
    return 0.25 * t * s;
}

double SpectralMeasure::j_star(double u) const
{
    if (!(u > 0)) throw DomainError("j_star: u must be positive");
    if (analytic_) return 0.5 * alpha_ * (std::log(alpha_ / u) + u / alpha_ - 1);
    double mean = expect([](double l) { return l; });
    if (u > mean * (1 + 1e-12)) throw DomainError("j_star: u above the spectral mean");
    if (u >= mean) return 0.0;
    // u(gamma) = (1 - eta)/(gamma eta) decreases from the mean as gamma grows
    auto ug = [&](double lg) {
        double g = std::exp(lg), e = eta(g);
        return (1 - e) / (g * e);
    };
    double lo = -40, hi = 40;
    if (!(ug(hi) < u)) throw DomainError("j_star: u below the attainable range");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (ug(mid) > u ? lo : hi) = mid;
    }
    double g = std::exp(0.5 * (lo + hi));
    double e = eta(g);
    return 0.5 * expect([&](double l) { return std::log((1 + g * l) * e); });
}

// --------------------------------------------------------- linear channel

LinearMoments linear_posterior(const LinearOperator &op, double az, const Vec &bz, double ax,
                               const Vec &bx)
{
    const Vec &lam = op.spectrum();
    double lmin = lam.minCoeff(), lmax = lam.maxCoeff();
    if (!(az + ax * lmin > kMinPrecision) || !(az + ax * lmax > kMinPrecision))
        throw NonPositiveEffectivePrecision("linear: az + ax lambda <= 0 (az=" + std::to_string(az) +
                                            ", ax=" + std::to_string(ax) + ")");
    LinearMoments m;
    Vec b = bz + op.apply_t(bx);
    m.rz = op.solve(az, ax, b);
    m.rx = op.apply(m.rz);
    Eigen::ArrayXd den = az + ax * lam.array();
    m.vz = den.inverse().mean();
    m.vx = (lam.array() / den).sum() / double(op.rows());
    m.A = 0.5 * b.dot(m.rz) + 0.5 * (kLn2Pi - den.log()).sum();
    return m;
}

LinearChannel::LinearChannel(OperatorPtr op, std::optional<SpectralMeasure> se_spectrum)
    : op_(std::move(op))
{
    double alpha = double(op_->rows()) / double(op_->cols());
    measure_ = se_spectrum ? *se_spectrum : SpectralMeasure::empirical(op_->spectrum(), alpha);
}

FactorPosterior LinearChannel::posterior(std::span<const Message> in) const
{
    check_inputs(in);
    LinearMoments m = linear_posterior(*op_, in[0].a, in[0].b, in[1].a, in[1].b);
    FactorPosterior out;
    out.A = m.A;
    out.ends.push_back(Endpoint{std::move(m.rz), m.vz, {}});
    out.ends.push_back(Endpoint{std::move(m.rx), m.vx, {}});
    return out;
}

FactorPosterior LinearChannel::map_posterior(std::span<const Message> in) const
{
    FactorPosterior out = posterior(in);
    Vec b = in[0].b + op_->apply_t(in[1].b);
    out.A = 0.5 * b.dot(out.ends[0].r);
    return out;
}

TeacherMoment LinearChannel::teacher_moment(std::span<const double> tau_hat) const
{
    double tz = tau_hat[0], tx = tau_hat[1];
    TeacherMoment t;
    double A = 0, sz = 0, sx = 0;
    for (size_t i = 0; i < measure_.nodes().size(); ++i) {
        double l = measure_.nodes()[i], w = measure_.weights()[i];
        double th = tz + l * tx;
        if (w > 0 && !(th > 0)) throw NonPositiveTilt("linear: teacher tilt <= 0 on the spectrum");
        A += w * 0.5 * (kLn2Pi - std::log(th));
        sz += w / th;
        sx += w * l / th;
    }
    t.A = A;
    t.tau = {sz, sx / measure_.alpha()};
    return t;
}

RSPotential LinearChannel::rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                                        std::span<const double> tau_hat0,
                                        const QuadratureOptions &) const
{
    if (teacher.kind() != kind()) throw DomainError("linear: teacher must be a linear channel");
    const SEHat &z = hat[0], &x = hat[1];
    double A = 0, mz = 0, qz = 0, vz = 0, mx = 0, qx = 0, vx = 0;
    for (size_t i = 0; i < measure_.nodes().size(); ++i) {
        double l = measure_.nodes()[i], w = measure_.weights()[i];
        double th0 = tau_hat0[0] + l * tau_hat0[1];
        if (!(th0 > 0)) throw NonPositiveTilt("linear rs: teacher tilt <= 0");
        double t0 = 1.0 / th0;
        double mh = z.mhat + l * x.mhat, qh = z.qhat + l * x.qhat;
        double a = z.tauhat + l * x.tauhat + qh;
        if (!(a > 0)) throw NonPositiveEffectivePrecision("linear rs: a_lambda <= 0");
        double num = mh * mh * t0 + qh;
        A += w * (0.5 * num / a + 0.5 * (kLn2Pi - std::log(a)));
        double m = mh * t0 / a, q = num / (a * a), v = 1.0 / a;
        mz += w * m;
        qz += w * q;
        vz += w * v;
        mx += w * l * m;
        qx += w * l * q;
        vx += w * l * v;
    }
    double al = measure_.alpha();
    RSPotential p;
    p.A = A;
    p.ends = {SEOverlap{mz, qz, vz, qz + vz}, SEOverlap{mx / al, qx / al, vx / al, (qx + vx) / al}};
    return p;
}

BOPotential LinearChannel::bo_potential(std::span<const double> mhat, std::span<const double> tau_hat0,
                                        const QuadratureOptions &) const
{
    double A = 0, vz = 0, vx = 0, tz = 0, tx = 0;
    for (size_t i = 0; i < measure_.nodes().size(); ++i) {
        double l = measure_.nodes()[i], w = measure_.weights()[i];
        double th0 = tau_hat0[0] + l * tau_hat0[1];
        if (!(th0 > 0)) throw NonPositiveTilt("linear bo: teacher tilt <= 0");
        double t0 = 1.0 / th0;
        double mh = mhat[0] + l * mhat[1];
        double a = th0 + mh;
        if (!(a > 0)) throw NonPositiveEffectivePrecision("linear bo: a_lambda <= 0");
        A += w * (0.5 * mh * t0 + 0.5 * (kLn2Pi - std::log(a)));
        vz += w / a;
        vx += w * l / a;
        tz += w * t0;
        tx += w * l * t0;
    }
    double al = measure_.alpha();
    BOPotential bo;
    bo.A = A;
    bo.v = {vz, vx / al};
    bo.m = {tz - vz, (tx - vx) / al};
    return bo;
}

// --------------------------------------------------------- full covariance

FullCovMoments linear_posterior_fullcov(const Mat &W, const Mat &Az, const Vec &bz, const Mat &Ax,
                                        const Vec &bx)
{
    if (Az.rows() != W.cols() || Az.cols() != W.cols() || Ax.rows() != W.rows() ||
        Ax.cols() != W.rows() || bz.size() != W.cols() || bx.size() != W.rows())
        throw ShapeMismatch("linear_posterior_fullcov: shapes disagree");
    Mat P = Az + W.transpose() * Ax * W;
    Eigen::LLT<Mat> llt(P);
    if (llt.info() != Eigen::Success) throw SingularPrecision("full-covariance precision not positive definite");
    FullCovMoments m;
    m.Sz = llt.solve(Mat::Identity(P.rows(), P.cols()));
    m.rz = llt.solve(bz + W.transpose() * bx);
    m.rx = W * m.rz;
    m.Sx = W * m.Sz * W.transpose();
    return m;
}

FullCovMoments linear_posterior_fullcov(const Mat &W, double az, const Vec &bz, double ax,
                                        const Vec &bx)
{
    return linear_posterior_fullcov(W, az * Mat::Identity(W.cols(), W.cols()), bz,
                                    ax * Mat::Identity(W.rows(), W.rows()), bx);
}

FullCovMessages linear_messages_fullcov(const Mat &W, const Mat &Az, const Vec &bz, const Mat &Ax,
                                        const Vec &bx)
{
    Eigen::LLT<Mat> llt(Az);
    if (llt.info() != Eigen::Success) throw SingularPrecision("z precision not positive definite");
    FullCovMessages out;
    out.x_mean = W * llt.solve(bz);
    out.x_cov = W * llt.solve(W.transpose());
    out.z_precision = W.transpose() * Ax * W;
    out.z_linear = W.transpose() * bx;
    return out;
}

} // namespace treeamp
