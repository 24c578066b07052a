#ifndef CHOLQR_KERNELS_HPP_
#define CHOLQR_KERNELS_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cholqr {

using Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Invalid user configuration: wrong dimensions, missing files, bad schema.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure could not produce a usable result.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Training points stored one per row, plus real-valued targets.
struct Dataset {
  Matrix inputs;
  Vector targets;

  Index size() const { return targets.size(); }
  Index dim() const { return inputs.cols(); }

  void validate() const {
    if (inputs.rows() != targets.size()) {
      throw ConfigError("dataset: " + std::to_string(inputs.rows()) +
                        " input rows but " + std::to_string(targets.size()) +
                        " targets");
    }
  }

  Dataset subset(const std::vector<Index> &rows) const {
    Dataset out;
    out.inputs.resize(static_cast<Index>(rows.size()), inputs.cols());
    out.targets.resize(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.inputs.row(static_cast<Index>(r)) = inputs.row(rows[r]);
      out.targets[static_cast<Index>(r)] = targets[rows[r]];
    }
    return out;
  }
};

/// Log-space hyperparameters. Every positive quantity is exp() of an entry,
/// so the optimizer works unconstrained.
struct Hyperparameters {
  double log_noise_var = 0.0;
  Vector kernel_params;

  double noise_var() const { return std::exp(log_noise_var); }
  Index size() const { return 1 + kernel_params.size(); }

  bool finite() const {
    return std::isfinite(log_noise_var) && kernel_params.allFinite();
  }

  /// [log sigma^2, kernel params...]
  Vector flatten() const {
    Vector out(size());
    out[0] = log_noise_var;
    out.tail(kernel_params.size()) = kernel_params;
    return out;
  }

  static Hyperparameters unflatten(const Vector &flat) {
    Hyperparameters h;
    h.log_noise_var = flat[0];
    h.kernel_params = flat.tail(flat.size() - 1);
    return h;
  }
};

using Point = Eigen::Ref<const Vector>;

namespace detail {

inline double population_variance(const Vector &y) {
  if (y.size() == 0) {
    return 1.0;
  }
  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  return var > 0.0 ? var : 1.0;
}

} // namespace detail

/// A covariance function over points, parameterized in log space.
///
/// Points are columns of a (dim x n) matrix. Implementations must be pure:
/// the same (params, a, b) always yields the same value.
class Kernel {
public:
  virtual ~Kernel() = default;

  virtual std::string name() const = 0;
  virtual Index num_params() const = 0;
  virtual std::vector<std::string> param_names() const = 0;

  /// Throws ConfigError when the inputs cannot be used with this kernel.
  virtual void validate_inputs(const Matrix &inputs) const = 0;

  virtual double eval(const Vector &params, Point a, Point b) const = 0;

  /// Value plus derivatives with respect to each log-space parameter.
  virtual double eval_with_grad(const Vector &params, Point a, Point b,
                                Eigen::Ref<Vector> grad) const = 0;

  /// Scale-aware starting point for the kernel parameters.
  virtual Vector initial_params(const Matrix &inputs,
                                const Vector &targets) const = 0;

  void check_params(const Vector &params) const {
    if (params.size() != num_params()) {
      throw ConfigError(name() + ": expected " + std::to_string(num_params()) +
                        " kernel parameters, got " +
                        std::to_string(params.size()));
    }
  }
};

/// c * exp(-0.5 * sum_t b_t (a_t - b_t)^2) with params [log c, log b_1..].
class RbfArdKernel final : public Kernel {
public:
  explicit RbfArdKernel(Index dim) : dim_(dim) {
    if (dim < 1) {
      throw ConfigError("rbf_ard: input dimension must be positive");
    }
  }

  std::string name() const override { return "rbf_ard"; }
  Index num_params() const override { return dim_ + 1; }
  Index dim() const { return dim_; }

  std::vector<std::string> param_names() const override {
    std::vector<std::string> names{"log_c"};
    for (Index t = 0; t < dim_; ++t) {
      names.push_back("log_b" + std::to_string(t));
    }
    return names;
  }

  void validate_inputs(const Matrix &inputs) const override {
    if (inputs.cols() != dim_) {
      throw ConfigError("rbf_ard: kernel dimension " + std::to_string(dim_) +
                        " does not match input dimension " +
                        std::to_string(inputs.cols()));
    }
    if (!inputs.allFinite()) {
      throw ConfigError("rbf_ard: inputs must be finite");
    }
  }

  double eval(const Vector &params, Point a, Point b) const override {
    double acc = 0.0;
    for (Index t = 0; t < dim_; ++t) {
      const double diff = a[t] - b[t];
      acc += std::exp(params[t + 1]) * diff * diff;
    }
    return std::exp(params[0] - 0.5 * acc);
  }

  double eval_with_grad(const Vector &params, Point a, Point b,
                        Eigen::Ref<Vector> grad) const override {
    const double value = eval(params, a, b);
    grad[0] = value;
    for (Index t = 0; t < dim_; ++t) {
      const double diff = a[t] - b[t];
      grad[t + 1] = -0.5 * value * std::exp(params[t + 1]) * diff * diff;
    }
    return value;
  }

  Vector initial_params(const Matrix &inputs,
                        const Vector &targets) const override {
    Vector params(num_params());
    params[0] = std::log(detail::population_variance(targets));
    for (Index t = 0; t < dim_; ++t) {
      double range = 1.0;
      if (inputs.rows() > 0) {
        range = inputs.col(t).maxCoeff() - inputs.col(t).minCoeff();
      }
      params[t + 1] = -2.0 * std::log(range > 0.0 ? range : 1.0);
    }
    return params;
  }

private:
  Index dim_;
};

/// Half-open range of histogram bins sharing one weight.
struct ChannelGroup {
  Index begin = 0;
  Index end = 0;
};

/// sum_g w_g * sum_{u in g} min(a_u, b_u) with params [log w_g].
class HistogramIntersectionKernel final : public Kernel {
public:
  HistogramIntersectionKernel(Index bins, std::vector<ChannelGroup> groups)
      : bins_(bins), groups_(std::move(groups)) {
    if (groups_.empty()) {
      groups_.push_back({0, bins_});
    }
    Index expected = 0;
    for (const auto &g : groups_) {
      if (g.begin != expected || g.end <= g.begin) {
        throw ConfigError(
            "histogram_intersection: channel groups must be contiguous, "
            "non-empty and start at bin 0");
      }
      expected = g.end;
    }
    if (expected != bins_) {
      throw ConfigError("histogram_intersection: channel groups cover " +
                        std::to_string(expected) + " bins, inputs have " +
                        std::to_string(bins_));
    }
  }

  std::string name() const override { return "histogram_intersection"; }
  Index num_params() const override {
    return static_cast<Index>(groups_.size());
  }
  const std::vector<ChannelGroup> &groups() const { return groups_; }

  std::vector<std::string> param_names() const override {
    std::vector<std::string> names;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      names.push_back("log_w" + std::to_string(g));
    }
    return names;
  }

  void validate_inputs(const Matrix &inputs) const override {
    if (inputs.cols() != bins_) {
      throw ConfigError("histogram_intersection: expected " +
                        std::to_string(bins_) + " bins, inputs have " +
                        std::to_string(inputs.cols()));
    }
    if (!inputs.allFinite() || (inputs.array() < 0.0).any()) {
      throw ConfigError(
          "histogram_intersection: histogram entries must be non-negative");
    }
  }

  double eval(const Vector &params, Point a, Point b) const override {
    double value = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      value += std::exp(params[static_cast<Index>(g)]) *
               group_intersection(groups_[g], a, b);
    }
    return value;
  }

  double eval_with_grad(const Vector &params, Point a, Point b,
                        Eigen::Ref<Vector> grad) const override {
    double value = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const auto p = static_cast<Index>(g);
      grad[p] = std::exp(params[p]) * group_intersection(groups_[g], a, b);
      value += grad[p];
    }
    return value;
  }

  Vector initial_params(const Matrix &,
                        const Vector &targets) const override {
    return Vector::Constant(
        num_params(), std::log(detail::population_variance(targets) /
                               static_cast<double>(groups_.size())));
  }

private:
  static double group_intersection(const ChannelGroup &g, Point a, Point b) {
    double acc = 0.0;
    for (Index u = g.begin; u < g.end; ++u) {
      acc += std::min(a[u], b[u]);
    }
    return acc;
  }

  Index bins_;
  std::vector<ChannelGroup> groups_;
};

/// sum_q v_q * K_q[a, b] over memory-resident base matrices, where each
/// point is a single coordinate holding its row index into the matrices.
class PrecomputedCompoundKernel final : public Kernel {
public:
  explicit PrecomputedCompoundKernel(std::vector<Matrix> bases)
      : bases_(std::make_shared<const std::vector<Matrix>>(std::move(bases))) {
    if (bases_->empty()) {
      throw ConfigError("precomputed: at least one base matrix is required");
    }
    const Index n = bases_->front().rows();
    for (std::size_t q = 0; q < bases_->size(); ++q) {
      const Matrix &K = (*bases_)[q];
      const std::string tag = "precomputed: base matrix " + std::to_string(q);
      if (K.rows() != K.cols()) {
        throw ConfigError(tag + " is not square");
      }
      if (K.rows() != n) {
        throw ConfigError(tag + " has dimension " + std::to_string(K.rows()) +
                          ", expected " + std::to_string(n));
      }
      if (!K.allFinite()) {
        throw ConfigError(tag + " has non-finite entries");
      }
      if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw ConfigError(tag + " is not symmetric within 1e-10");
      }
    }
  }

  std::string name() const override { return "precomputed"; }
  Index num_params() const override {
    return static_cast<Index>(bases_->size());
  }
  Index matrix_size() const { return bases_->front().rows(); }
  const std::vector<Matrix> &bases() const { return *bases_; }

  std::vector<std::string> param_names() const override {
    std::vector<std::string> names;
    for (std::size_t q = 0; q < bases_->size(); ++q) {
      names.push_back("log_v" + std::to_string(q));
    }
    return names;
  }

  void validate_inputs(const Matrix &inputs) const override {
    if (inputs.cols() != 1) {
      throw ConfigError("precomputed: inputs must be a single index column");
    }
    for (Index r = 0; r < inputs.rows(); ++r) {
      const double v = inputs(r, 0);
      if (!(v >= 0.0) || v != std::floor(v) ||
          v >= static_cast<double>(matrix_size())) {
        throw ConfigError("precomputed: row " + std::to_string(r) +
                          " index out of range");
      }
    }
  }

  double eval(const Vector &params, Point a, Point b) const override {
    const auto ia = static_cast<Index>(a[0]);
    const auto ib = static_cast<Index>(b[0]);
    double value = 0.0;
    for (std::size_t q = 0; q < bases_->size(); ++q) {
      value += std::exp(params[static_cast<Index>(q)]) * (*bases_)[q](ia, ib);
    }
    return value;
  }

  double eval_with_grad(const Vector &params, Point a, Point b,
                        Eigen::Ref<Vector> grad) const override {
    const auto ia = static_cast<Index>(a[0]);
    const auto ib = static_cast<Index>(b[0]);
    double value = 0.0;
    for (std::size_t q = 0; q < bases_->size(); ++q) {
      const auto p = static_cast<Index>(q);
      grad[p] = std::exp(params[p]) * (*bases_)[q](ia, ib);
      value += grad[p];
    }
    return value;
  }

  Vector initial_params(const Matrix &,
                        const Vector &targets) const override {
    return Vector::Constant(
        num_params(), std::log(detail::population_variance(targets) /
                               static_cast<double>(bases_->size())));
  }

private:
  std::shared_ptr<const std::vector<Matrix>> bases_;
};

/// A kernel bound to a training set and a parameter vector: the implicit
/// n x n matrix K, evaluated on demand. Copies share the kernel and the
/// point storage.
class KernelMatrix {
public:
  KernelMatrix(std::shared_ptr<const Kernel> kernel, const Matrix &inputs,
               Vector params)
      : kernel_(std::move(kernel)),
        points_(std::make_shared<const Matrix>(inputs.transpose())),
        params_(std::move(params)) {
    kernel_->validate_inputs(inputs);
    kernel_->check_params(params_);
    if (!params_.allFinite()) {
      throw ConfigError(kernel_->name() + ": kernel parameters must be finite");
    }
  }

  KernelMatrix with_params(Vector params) const {
    kernel_->check_params(params);
    KernelMatrix out = *this;
    out.params_ = std::move(params);
    return out;
  }

  Index size() const { return points_->cols(); }
  Index num_params() const { return params_.size(); }
  const Vector &params() const { return params_; }
  const Kernel &kernel() const { return *kernel_; }
  std::shared_ptr<const Kernel> kernel_ptr() const { return kernel_; }
  Point point(Index i) const { return points_->col(i); }

  double operator()(Index i, Index j) const {
    return kernel_->eval(params_, points_->col(i), points_->col(j));
  }

  Vector column(Index j) const {
    Vector out(size());
    const auto pj = points_->col(j);
    for (Index i = 0; i < size(); ++i) {
      out[i] = kernel_->eval(params_, points_->col(i), pj);
    }
    return out;
  }

  Vector diag() const {
    Vector out(size());
    for (Index i = 0; i < size(); ++i) {
      out[i] = (*this)(i, i);
    }
    return out;
  }

  /// Column j of dK/dparams[p] for every p, as an (n x num_params) matrix.
  Matrix column_grad(Index j) const {
    Matrix out(size(), num_params());
    Vector grad(num_params());
    const auto pj = points_->col(j);
    for (Index i = 0; i < size(); ++i) {
      kernel_->eval_with_grad(params_, points_->col(i), pj, grad);
      out.row(i) = grad.transpose();
    }
    return out;
  }

  /// d tr(K) / d params[p].
  Vector trace_grad() const {
    Vector total = Vector::Zero(num_params());
    Vector grad(num_params());
    for (Index i = 0; i < size(); ++i) {
      kernel_->eval_with_grad(params_, points_->col(i), points_->col(i), grad);
      total += grad;
    }
    return total;
  }

  /// k(x, x_i) for each listed training index i.
  Vector cross(Point x, const std::vector<Index> &train_indices) const {
    Vector out(static_cast<Index>(train_indices.size()));
    for (std::size_t a = 0; a < train_indices.size(); ++a) {
      out[static_cast<Index>(a)] =
          kernel_->eval(params_, x, points_->col(train_indices[a]));
    }
    return out;
  }

  double self(Point x) const { return kernel_->eval(params_, x, x); }

  /// Dense K. Only for small problems and tests.
  Matrix dense() const {
    Matrix out(size(), size());
    for (Index j = 0; j < size(); ++j) {
      out.col(j) = column(j);
    }
    return out;
  }

private:
  std::shared_ptr<const Kernel> kernel_;
  std::shared_ptr<const Matrix> points_;
  Vector params_;
};

} // namespace cholqr

#endif // CHOLQR_KERNELS_HPP_
