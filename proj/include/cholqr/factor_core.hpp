#ifndef CHOLQR_FACTOR_CORE_HPP_
#define CHOLQR_FACTOR_CORE_HPP_

#include "cholqr/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace cholqr {

/// Relative threshold below which a residual variance marks a pivot as
/// numerically dependent on the current inducing set.
inline constexpr double kPivotRelTol = 1e-10;

/// Minimum Gram-Schmidt norm for an accepted append.
inline constexpr double kMinOrthoNorm = 1e-12;

namespace detail {
inline std::uint64_t next_model_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}
} // namespace detail

/// Partial Cholesky factor L of the Nystrom approximation K_hat = L L^T,
/// together with a thin QR of the augmented factor
///
///     L_aug = [ L          ]   (n rows)
///             [ sigma I_k  ]   (k rows, one per pivot position)
///
/// and the caches needed to read the objective in O(n + k):
/// c = Q^T [y; 0], d = diag(K - L L^T).
///
/// Column p of L belongs to pivot inducing()[p]; row inducing()[p] of L is
/// zero beyond column p and strictly positive at column p. diag(R) > 0.
///
/// Storage is allocated with spare capacity so appends do not reallocate.
/// Entries outside the active block are kept at zero.
class FactoredModel {
public:
  struct BuildResult;

  FactoredModel() = default;

  /// Pivots I0 in order. Numerically dependent pivots are skipped and
  /// listed in BuildResult::skipped.
  static BuildResult build(const KernelMatrix &K, double sigma2,
                           const Vector &y, const std::vector<Index> &I0,
                           Index capacity = 0);

  Index n() const { return y_.size(); }
  Index k() const { return static_cast<Index>(inducing_.size()); }
  const std::vector<Index> &inducing() const { return inducing_; }
  double sigma2() const { return sigma2_; }
  double trace_k() const { return trace_k_; }
  double max_diag() const { return max_diag_; }
  double pivot_tol() const { return kPivotRelTol * max_diag_; }
  const Vector &y() const { return y_; }
  double y_norm2() const { return y_norm2_; }
  std::uint64_t id() const { return id_; }
  std::uint64_t generation() const { return generation_; }

  auto L() const { return L_.leftCols(k()); }
  /// Full (n + k) x k orthonormal factor.
  auto Q() const { return Q_.topLeftCorner(n() + k(), k()); }
  /// Q[1:n, :], the part that multiplies real data.
  auto Q_top() const { return Q_.topLeftCorner(n(), k()); }
  auto R() const { return R_.topLeftCorner(k(), k()); }
  auto c() const { return c_.head(k()); }
  const Vector &residual_diag() const { return d_; }

  bool contains(Index j) const {
    return std::find(inducing_.begin(), inducing_.end(), j) != inducing_.end();
  }

  /// Position of j in inducing(), or -1.
  Index position(Index j) const {
    const auto it = std::find(inducing_.begin(), inducing_.end(), j);
    return it == inducing_.end() ? -1
                                 : static_cast<Index>(it - inducing_.begin());
  }

  /// (K - L L^T)[:, j] / sqrt(d[j]); nullopt when d[j] is below pivot_tol.
  std::optional<Vector> residual_column(const KernelMatrix &K, Index j) const {
    check_index(j);
    if (contains(j) || !(d_[j] > pivot_tol())) {
      return std::nullopt;
    }
    Vector ell = K.column(j);
    if (k() > 0) {
      ell.noalias() -= L() * L().row(j).transpose();
    }
    ell /= std::sqrt(d_[j]);
    ell[j] = std::sqrt(d_[j]);
    return ell;
  }

  /// One Cholesky step plus one Gram-Schmidt column (with a single
  /// re-orthogonalization pass). Returns false, leaving the model unchanged,
  /// when the new direction is numerically dependent.
  bool append_pivot(Index j, const Vector &ell);

  /// Moves pivot i to the last position by adjacent transpositions. L L^T,
  /// Q R = L_aug and diag(R) > 0 are preserved. O(k (n + k)).
  void permute_to_end(Index i);

  /// Removes the last pivot and returns its column of L.
  Vector downdate();

  /// Rebuilds every factor from scratch on the current inducing order.
  BuildResult rebuilt(const KernelMatrix &K) const;

  /// ||Q R - L_aug||_F / ||L_aug||_F. O(n k^2).
  double qr_residual() const {
    if (k() == 0) {
      return 0.0;
    }
    const Matrix aug = augmented();
    const double scale = aug.norm();
    return (Matrix(Q()) * R() - aug).norm() / (scale > 0.0 ? scale : 1.0);
  }

  /// max |Q^T Q - I|.
  double orthogonality_error() const {
    if (k() == 0) {
      return 0.0;
    }
    return (Q().transpose() * Q() - Matrix::Identity(k(), k()))
        .cwiseAbs()
        .maxCoeff();
  }

  Matrix augmented() const {
    Matrix aug = Matrix::Zero(n() + k(), k());
    aug.topRows(n()) = L();
    aug.bottomRows(k()).diagonal().setConstant(std::sqrt(sigma2_));
    return aug;
  }

  double log_det_R() const {
    return R().diagonal().array().log().sum();
  }

private:
  void check_index(Index j) const {
    if (j < 0 || j >= n()) {
      throw std::out_of_range("pivot index " + std::to_string(j) +
                              " outside [0, " + std::to_string(n()) + ")");
    }
  }

  void reserve(Index capacity);
  void swap_adjacent(Index p);
  void repair_orthogonality();

  std::vector<Index> inducing_;
  Matrix L_;
  Matrix Q_;
  Matrix R_;
  Vector c_;
  Vector d_;
  Vector y_;
  double y_norm2_ = 0.0;
  double sigma2_ = 1.0;
  double trace_k_ = 0.0;
  double max_diag_ = 0.0;
  std::uint64_t id_ = 0;
  std::uint64_t generation_ = 0;
};

struct FactoredModel::BuildResult {
  FactoredModel model;
  std::vector<Index> skipped;
};

inline FactoredModel::BuildResult
FactoredModel::build(const KernelMatrix &K, double sigma2, const Vector &y,
                     const std::vector<Index> &I0, Index capacity) {
  if (y.size() != K.size()) {
    throw ConfigError("factor build: targets have length " +
                      std::to_string(y.size()) + ", kernel has " +
                      std::to_string(K.size()) + " points");
  }
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw ConfigError("factor build: noise variance must be positive");
  }
  BuildResult result;
  FactoredModel &m = result.model;
  m.y_ = y;
  m.y_norm2_ = y.squaredNorm();
  m.sigma2_ = sigma2;
  m.d_ = K.diag();
  m.trace_k_ = m.d_.sum();
  m.max_diag_ = m.d_.size() > 0 ? m.d_.maxCoeff() : 0.0;
  m.id_ = detail::next_model_id();
  m.reserve(std::max<Index>({capacity, static_cast<Index>(I0.size()), 1}));

  std::vector<char> seen(static_cast<std::size_t>(K.size()), 0);
  for (Index j : I0) {
    m.check_index(j);
    if (seen[static_cast<std::size_t>(j)]) {
      throw ConfigError("factor build: duplicate inducing index " +
                        std::to_string(j));
    }
    seen[static_cast<std::size_t>(j)] = 1;
    auto ell = m.residual_column(K, j);
    if (!ell || !m.append_pivot(j, *ell)) {
      result.skipped.push_back(j);
    }
  }
  return result;
}

inline void FactoredModel::reserve(Index capacity) {
  const Index old_cap = L_.cols();
  if (capacity <= old_cap) {
    return;
  }
  const Index rows = n();
  Matrix L = Matrix::Zero(rows, capacity);
  Matrix Q = Matrix::Zero(rows + capacity, capacity);
  Matrix R = Matrix::Zero(capacity, capacity);
  Vector c = Vector::Zero(capacity);
  if (old_cap > 0) {
    L.leftCols(old_cap) = L_;
    Q.topLeftCorner(rows + old_cap, old_cap) = Q_;
    R.topLeftCorner(old_cap, old_cap) = R_;
    c.head(old_cap) = c_;
  }
  L_ = std::move(L);
  Q_ = std::move(Q);
  R_ = std::move(R);
  c_ = std::move(c);
}

inline bool FactoredModel::append_pivot(Index j, const Vector &ell) {
  check_index(j);
  if (ell.size() != n()) {
    throw std::invalid_argument("append_pivot: column has wrong length");
  }
  if (contains(j)) {
    throw std::logic_error("append_pivot: index already inducing");
  }
  const Index kk = k();
  const Index rows = n() + kk;
  const double sigma = std::sqrt(sigma2_);

  // v = (I - Q Q^T) [ell; 0_k; sigma]. The old columns are zero on the new
  // augmentation row, so only the first n + k entries interact with Q.
  Vector v = Vector::Zero(rows + 1);
  v.head(n()) = ell;
  v[rows] = sigma;
  Vector r = Vector::Zero(kk);
  if (kk > 0) {
    const auto Qa = Q_.topLeftCorner(rows, kk);
    for (int pass = 0; pass < 2; ++pass) {
      const Vector proj = Qa.transpose() * v.head(rows);
      v.head(rows).noalias() -= Qa * proj;
      r += proj;
    }
  }
  const double norm = v.norm();
  if (!(norm > kMinOrthoNorm)) {
    return false;
  }

  if (kk + 1 > L_.cols()) {
    reserve(2 * (kk + 1));
  }
  Q_.col(kk).head(rows + 1) = v / norm;
  R_.col(kk).head(kk) = r;
  R_(kk, kk) = norm;
  c_[kk] = Q_.col(kk).head(n()).dot(y_);
  L_.col(kk) = ell;
  d_.array() -= ell.array().square();
  d_[j] = 0.0;
  inducing_.push_back(j);
  ++generation_;
  return true;
}

inline void FactoredModel::swap_adjacent(Index p) {
  const Index b = inducing_[static_cast<std::size_t>(p + 1)];
  const Index kk = k();
  const Index rows = n() + kk;

  // Reflection T on columns (p, p+1) of L that zeroes row b at column p+1
  // and keeps both new pivot entries positive. T = T^T = T^{-1}.
  const double beta = L_(b, p);
  const double gamma = L_(b, p + 1);
  const double rho = std::hypot(beta, gamma);
  const double t0 = beta / rho;
  const double t1 = gamma / rho;
  auto reflect_cols = [&](auto &&M) {
    for (Index i = 0; i < M.rows(); ++i) {
      const double x = M(i, p);
      const double z = M(i, p + 1);
      M(i, p) = t0 * x + t1 * z;
      M(i, p + 1) = t1 * x - t0 * z;
    }
  };
  reflect_cols(L_.leftCols(kk));
  L_(b, p) = rho;
  L_(b, p + 1) = 0.0;

  // [L T; sigma I] = diag(I, T^T) L_aug T, so the augmentation rows of Q
  // take T^T = T and R takes T from the right.
  for (Index col = 0; col < kk; ++col) {
    const double x = Q_(n() + p, col);
    const double z = Q_(n() + p + 1, col);
    Q_(n() + p, col) = t0 * x + t1 * z;
    Q_(n() + p + 1, col) = t1 * x - t0 * z;
  }
  reflect_cols(R_.topLeftCorner(kk, kk));

  // Givens rotation W on rows (p, p+1) of R to clear R(p+1, p); Q absorbs
  // W^T on its columns and c = Q^T y_aug takes W.
  const double x = R_(p, p);
  const double z = R_(p + 1, p);
  const double h = std::hypot(x, z);
  const double gc = x / h;
  const double gs = z / h;
  for (Index col = p; col < kk; ++col) {
    const double r0 = R_(p, col);
    const double r1 = R_(p + 1, col);
    R_(p, col) = gc * r0 + gs * r1;
    R_(p + 1, col) = -gs * r0 + gc * r1;
  }
  R_(p + 1, p) = 0.0;
  for (Index i = 0; i < rows; ++i) {
    const double q0 = Q_(i, p);
    const double q1 = Q_(i, p + 1);
    Q_(i, p) = gc * q0 + gs * q1;
    Q_(i, p + 1) = -gs * q0 + gc * q1;
  }
  {
    const double c0 = c_[p];
    const double c1 = c_[p + 1];
    c_[p] = gc * c0 + gs * c1;
    c_[p + 1] = -gs * c0 + gc * c1;
  }
  for (Index q : {p, p + 1}) {
    if (R_(q, q) < 0.0) {
      R_.row(q).head(kk) *= -1.0;
      Q_.col(q).head(rows) *= -1.0;
      c_[q] = -c_[q];
    }
  }
  std::swap(inducing_[static_cast<std::size_t>(p)],
            inducing_[static_cast<std::size_t>(p + 1)]);
}

inline void FactoredModel::permute_to_end(Index i) {
  const Index pos = position(i);
  if (pos < 0) {
    throw std::logic_error("permute_to_end: index " + std::to_string(i) +
                           " is not an inducing point");
  }
  for (Index p = pos; p + 1 < k(); ++p) {
    swap_adjacent(p);
  }
  ++generation_;
}

inline Vector FactoredModel::downdate() {
  const Index kk = k();
  if (kk == 0) {
    throw std::logic_error("downdate: model has no inducing points");
  }
  const Index last = kk - 1;
  const Index rows = n() + kk;
  Vector ell = L_.col(last);
  d_.array() += ell.array().square();

  // The dropped augmentation row is zero on the remaining columns in exact
  // arithmetic (the first k-1 columns of L_aug vanish there).
  const double stray = Q_.row(rows - 1).head(last).norm();
  L_.col(last).setZero();
  Q_.col(last).head(rows).setZero();
  Q_.row(rows - 1).head(last).setZero();
  R_.col(last).head(kk).setZero();
  R_.row(last).head(kk).setZero();
  c_[last] = 0.0;
  inducing_.pop_back();
  if (stray > 1e-10) {
    repair_orthogonality();
  }
  ++generation_;
  return ell;
}

inline void FactoredModel::repair_orthogonality() {
  // Cholesky-QR pass: Q^T Q = U^T U, Q <- Q U^{-1}, R <- U R.
  const Index kk = k();
  if (kk == 0) {
    return;
  }
  const Index rows = n() + kk;
  auto Qa = Q_.topLeftCorner(rows, kk);
  const Matrix gram = Qa.transpose() * Qa;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    return;
  }
  const Matrix U = llt.matrixU();
  Qa = llt.matrixU().solve<Eigen::OnTheRight>(Matrix(Qa));
  R_.topLeftCorner(kk, kk) = (U * R_.topLeftCorner(kk, kk)).eval();
  c_.head(kk) = Q_top().transpose() * y_;
}

inline FactoredModel::BuildResult
FactoredModel::rebuilt(const KernelMatrix &K) const {
  return build(K, sigma2_, y_, inducing_, L_.cols());
}

} // namespace cholqr

#endif // CHOLQR_FACTOR_CORE_HPP_
