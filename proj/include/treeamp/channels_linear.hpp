#ifndef TREEAMP_CHANNELS_LINEAR_HPP
#define TREEAMP_CHANNELS_LINEAR_HPP

#include "treeamp/factor.hpp"

#include <functional>

namespace treeamp {

// Linear map W: R^N -> R^M on real coordinates. Complex operators act on
// interleaved (re, im) pairs.
class LinearOperator {
public:
    virtual ~LinearOperator() = default;

    virtual std::string kind() const = 0;
    Index rows() const { return m_; }
    Index cols() const { return n_; }
    virtual bool unitary() const { return false; }

    virtual Vec apply(const Vec &z) const = 0;
    virtual Vec apply_t(const Vec &x) const = 0;
    // (az I + ax W^T W)^{-1} b, assuming az + ax lambda > 0 on the spectrum
    virtual Vec solve(double az, double ax, const Vec &b) const = 0;
    // N eigenvalues of W^T W
    const Vec &spectrum() const { return spectrum_; }

    Mat to_dense() const;

protected:
    Index m_ = 0, n_ = 0;
    Vec spectrum_;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

// Dense W with a thin SVD W = U diag(s) V^T computed at build.
class DenseOperator : public LinearOperator {
public:
    explicit DenseOperator(Mat W);
    std::string kind() const override { return "dense"; }
    Vec apply(const Vec &z) const override { return W_ * z; }
    Vec apply_t(const Vec &x) const override { return W_.transpose() * x; }
    Vec solve(double az, double ax, const Vec &b) const override;

    const Mat &matrix() const { return W_; }
    const Mat &U() const { return U_; }
    const Vec &singular_values() const { return s_; }
    const Mat &V() const { return V_; }

private:
    Mat W_, U_, V_;
    Vec s_;
};

OperatorPtr make_dense(Mat W);
OperatorPtr make_rotation(Mat R);
// x_i = s_i z_i for i < min(M, N), zero rows beyond
OperatorPtr make_scaling(Vec s, Index M, Index N);
// unitary DFT; real_input maps N reals to N complex (2N reals)
OperatorPtr make_dft(Index n, bool real_input);
// circular convolution x = w (*) z
OperatorPtr make_convolution(Vec w);
OperatorPtr make_complex_convolution(Eigen::VectorXcd w);
// periodic forward differences along each axis of a row-major grid;
// output is direction-major (d blocks of N)
OperatorPtr make_gradient(std::vector<Index> shape);
// W with iid N(0, 1/N) entries
Mat iid_gaussian_matrix(Index M, Index N, Rng &rng);

// Eigenvalue distribution of W^T W as a discrete measure: either the
// operator's empirical spectrum or a quadrature of the Marchenko-Pastur law.
class SpectralMeasure {
public:
    static SpectralMeasure empirical(const Vec &lambda, double alpha);
    static SpectralMeasure marchenko_pastur(double alpha, int nodes = 400);

    double alpha() const { return alpha_; }
    bool analytic() const { return analytic_; }
    const std::vector<double> &nodes() const { return lambda_; }
    const std::vector<double> &weights() const { return weight_; }
    double min() const { return lo_; }
    double max() const { return hi_; }

    template <class F>
    double expect(F &&f) const
    {
        double s = 0;
        for (size_t i = 0; i < lambda_.size(); ++i) s += weight_[i] * f(lambda_[i]);
        return s;
    }

    double shannon(double gamma) const;
    double eta(double gamma) const;
    double stieltjes(double z) const;
    double r_transform(double s) const;
    double j(double t) const;
    double j_star(double u) const;

private:
    double alpha_ = 1;
    bool analytic_ = false;
    double lo_ = 0, hi_ = 0;
    std::vector<double> lambda_, weight_;
};

struct LinearMoments {
    double A = 0;
    Vec rz, rx;
    double vz = 0, vx = 0;
};

LinearMoments linear_posterior(const LinearOperator &op, double az, const Vec &bz, double ax,
                               const Vec &bx);

class LinearChannel : public Factor {
public:
    explicit LinearChannel(OperatorPtr op, std::optional<SpectralMeasure> se_spectrum = {});

    std::string kind() const override { return "linear"; }
    FactorRole role() const override { return FactorRole::channel; }
    Index dim(int slot) const override { return slot == 0 ? op_->cols() : op_->rows(); }
    const LinearOperator &op() const { return *op_; }
    OperatorPtr op_ptr() const { return op_; }
    const SpectralMeasure &measure() const { return measure_; }
    double alpha() const { return measure_.alpha(); }

    FactorPosterior posterior(std::span<const Message> in) const override;
    bool has_map() const override { return true; }
    FactorPosterior map_posterior(std::span<const Message> in) const override;
    bool samplable() const override { return true; }
    Vec sample(const Vec *z, Rng &rng) const override { return op_->apply(*z); }

    TeacherMoment teacher_moment(std::span<const double> tau_hat) const override;
    RSPotential rs_potential(std::span<const SEHat> hat, const Factor &teacher,
                             std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;
    BOPotential bo_potential(std::span<const double> mhat, std::span<const double> tau_hat0,
                             const QuadratureOptions &opt) const override;

private:
    OperatorPtr op_;
    SpectralMeasure measure_;
};

// Full-covariance linear channel: precisions given as matrices.
struct FullCovMoments {
    Vec rz, rx;
    Mat Sz, Sx;
};

FullCovMoments linear_posterior_fullcov(const Mat &W, const Mat &Az, const Vec &bz, const Mat &Ax,
                                        const Vec &bx);
FullCovMoments linear_posterior_fullcov(const Mat &W, double az, const Vec &bz, double ax,
                                        const Vec &bx);

// Messages from the channel: f->x is the pushforward of the z belief,
// f->z the pullback of the x belief. Returned as (mean, covariance) for
// f->x and natural (precision, linear) for f->z.
struct FullCovMessages {
    Vec x_mean;
    Mat x_cov;
    Mat z_precision;
    Vec z_linear;
};

FullCovMessages linear_messages_fullcov(const Mat &W, const Mat &Az, const Vec &bz, const Mat &Ax,
                                        const Vec &bx);

} // namespace treeamp

#endif
