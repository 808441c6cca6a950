#ifndef OFFDAE_LEAST_SQUARES_HPP
#define OFFDAE_LEAST_SQUARES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "offdae/errors.hpp"

namespace offdae {

/// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kPinvRelativeThreshold = 1e-10;

/// Normal-equation solves square the condition number, so their cutoff is
/// applied to eigenvalues and cannot go below the rounding floor of the
/// Gram matrix.
inline constexpr double kGramRelativeThreshold = 1e-13;

struct LeastSquaresSolution {
  Eigen::VectorXd x;             // minimum-norm minimiser
  int rank = 0;                  // numerical rank of the weighted design
  int touched = 0;               // columns with at least one nonzero entry
  std::vector<bool> column_touched;
  std::vector<bool> identified;  // e_j lies in the row space: x_j is pinned by the data
  double weighted_sse = 0.0;     // sum_i w_i (y_i - x_i . beta)^2
  double total_weight = 0.0;

  double objective() const { return total_weight > 0.0 ? weighted_sse / total_weight : 0.0; }
  bool unique() const { return rank == touched; }
};

using SparseRow = std::vector<std::pair<int, double>>;

/// Weighted linear least squares with a minimum-norm pseudoinverse solve.
///
/// Rows are folded into an n x n triangular factor block by block
/// (Householder QR of [R; block]), so memory stays O(n^2) and the singular
/// values of R are exactly those of the full weighted design.  The final
/// solve is an SVD of R.
class LeastSquares {
 public:
  explicit LeastSquares(int num_params, int block_rows = 0)
      : n_(num_params),
        block_(block_rows > 0 ? block_rows : std::max(64, 4 * num_params)),
        R_(Eigen::MatrixXd::Zero(num_params, num_params)),
        c_(Eigen::VectorXd::Zero(num_params)),
        buf_(Eigen::MatrixXd::Zero(block_, num_params)),
        buf_y_(Eigen::VectorXd::Zero(block_)),
        touched_(static_cast<std::size_t>(num_params), false) {}

  int num_params() const { return n_; }

  void add_row(const SparseRow& row, double target, double weight = 1.0) {
    if (!(weight >= 0.0) || !std::isfinite(target)) throw FitError("least squares: invalid row weight or target");
    if (weight == 0.0) return;
    const double sw = std::sqrt(weight);
    total_weight_ += weight;
    if (n_ == 0) {
      rss_ += weight * target * target;
      return;
    }
    buf_.row(fill_).setZero();
    for (const auto& [j, v] : row) {
      if (v == 0.0) continue;
      buf_(fill_, j) += sw * v;
      touched_[static_cast<std::size_t>(j)] = true;
    }
    buf_y_(fill_) = sw * target;
    if (++fill_ == block_) flush();
  }

  LeastSquaresSolution solve(double relative_threshold = kPinvRelativeThreshold) {
    flush();
    LeastSquaresSolution out;
    out.total_weight = total_weight_;
    out.column_touched = touched_;
    for (bool t : touched_) out.touched += t ? 1 : 0;
    if (n_ == 0) {
      out.weighted_sse = rss_;
      return out;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(R_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    finish(svd.singularValues(), svd.matrixU(), svd.matrixV(), relative_threshold, out);
    out.weighted_sse = rss_ + (c_ - R_ * out.x).squaredNorm();
    return out;
  }

  /// Same contract from precomputed moments: G = sum w x x^T, b = sum w x y,
  /// yy = sum w y^2.  Used where rows cannot be enumerated.
  static LeastSquaresSolution solve_gram(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, double yy,
                                         double total_weight, double relative_threshold = kGramRelativeThreshold) {
    const auto n = G.rows();
    LeastSquaresSolution out;
    out.total_weight = total_weight;
    out.column_touched.assign(static_cast<std::size_t>(n), false);
    for (Eigen::Index j = 0; j < n; ++j) {
      out.column_touched[static_cast<std::size_t>(j)] = G(j, j) > 0.0;
      out.touched += G(j, j) > 0.0 ? 1 : 0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (G + G.transpose()));
    // Reorder to descending so the shared tail matches the SVD path.
    const Eigen::VectorXd lam = eig.eigenvalues().reverse();
    const Eigen::MatrixXd Q = eig.eigenvectors().rowwise().reverse();
    const double lmax = n > 0 ? std::max(lam(0), 0.0) : 0.0;
    out.x = Eigen::VectorXd::Zero(n);
    out.identified.assign(static_cast<std::size_t>(n), false);
    Eigen::VectorXd proj = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(lam(i) > relative_threshold * lmax) || lmax == 0.0) break;
      ++out.rank;
      out.x += Q.col(i) * (Q.col(i).dot(b) / lam(i));
      proj += Q.col(i).cwiseAbs2();
    }
    for (Eigen::Index j = 0; j < n; ++j) out.identified[static_cast<std::size_t>(j)] = proj(j) > 1.0 - 1e-8;
    out.weighted_sse = std::max(0.0, yy - 2.0 * out.x.dot(b) + out.x.dot(G * out.x));
    return out;
  }

 private:
  void flush() {
    if (fill_ == 0) return;
    Eigen::MatrixXd M(n_ + fill_, n_);
    M.topRows(n_) = R_;
    M.bottomRows(fill_) = buf_.topRows(fill_);
    Eigen::VectorXd rhs(n_ + fill_);
    rhs.head(n_) = c_;
    rhs.tail(fill_) = buf_y_.head(fill_);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    R_ = qr.matrixQR().topRows(n_).triangularView<Eigen::Upper>();
    const Eigen::VectorXd qtb = qr.householderQ().transpose() * rhs;
    c_ = qtb.head(n_);
    rss_ += qtb.tail(fill_).squaredNorm();
    fill_ = 0;
  }

  void finish(const Eigen::VectorXd& sigma, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
              double relative_threshold, LeastSquaresSolution& out) const {
    const auto n = static_cast<Eigen::Index>(n_);
    const double smax = sigma.size() > 0 ? sigma(0) : 0.0;
    out.x = Eigen::VectorXd::Zero(n);
    out.identified.assign(static_cast<std::size_t>(n), false);
    Eigen::VectorXd proj = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
      if (smax == 0.0 || !(sigma(i) > relative_threshold * smax)) break;
      ++out.rank;
      out.x += V.col(i) * (U.col(i).dot(c_) / sigma(i));
      proj += V.col(i).cwiseAbs2();
    }
    for (Eigen::Index j = 0; j < n; ++j) out.identified[static_cast<std::size_t>(j)] = proj(j) > 1.0 - 1e-8;
  }

  int n_;
  int block_;
  Eigen::MatrixXd R_;
  Eigen::VectorXd c_;
  Eigen::MatrixXd buf_;
  Eigen::VectorXd buf_y_;
  int fill_ = 0;
  double rss_ = 0.0;
  double total_weight_ = 0.0;
  std::vector<bool> touched_;
};

}  // namespace offdae

#endif  // OFFDAE_LEAST_SQUARES_HPP
