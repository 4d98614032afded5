#pragma once

#include "isarah/oracle.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace isarah {

/// F(w) = (1/n) sum_i 1/2 (w - c_i)^T A_i (w - c_i) with diagonal, non-negative A_i.
///
/// L, mu, w*, F* and sigma*^2 are computed in closed form at construction. When the mean
/// Hessian is positive definite the problem is mu-strongly convex and also satisfies the
/// growth bound with M = 1/(2 mu), N = 0.
class QuadraticFiniteSum final : public StochasticProblem {
 public:
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  /// Row i of `diagonals` holds diag(A_i); row i of `shifts` holds c_i.
  QuadraticFiniteSum(Matrix diagonals, Matrix shifts);

  std::string name() const override { return "quadratic"; }
  Eigen::Index dimension() const override { return diagonals_.cols(); }
  std::optional<std::int64_t> num_components() const override { return diagonals_.rows(); }
  const ProblemConstants& constants() const override { return constants_; }

  const Matrix& diagonals() const { return diagonals_; }
  const Matrix& shifts() const { return shifts_; }

 protected:
  void do_grad_sample(const Vector& w, SampleId xi, Vector& out) const override;
  double do_value_sample(const Vector& w, SampleId xi) const override;

 private:
  Matrix diagonals_;
  Matrix shifts_;
  ProblemConstants constants_;
};

struct QuadraticOptions {
  /// Standard deviation of the random shifts c_i; 0 gives a common minimizer (sigma*^2 = 0).
  double shift_scale = 1.0;
  /// Relative per-component spread of each Hessian diagonal around its mean, in [0, 1].
  double spread = 0.9;
};

/// Random diagonal quadratic whose realized L/mu equals kappa_target (mu = 1, L = kappa).
/// Throws InvalidArgument when kappa_target < 1 or when the target is not realizable
/// (a single component with kappa > 1 in one dimension, or kappa > n when d = 1).
QuadraticFiniteSum make_quadratic(std::int64_t n, Eigen::Index d, double kappa_target, RandomStream& rng,
                                  const QuadraticOptions& options = {});

/// Sparse rows in compressed form with 0-based column indices and labels in {-1, +1}.
struct LabeledDataset {
  std::vector<std::int64_t> row_offsets{0};
  std::vector<std::int32_t> columns;
  std::vector<double> values;
  std::vector<double> labels;
  Eigen::Index dimension = 0;

  std::int64_t rows() const { return static_cast<std::int64_t>(labels.size()); }
};

/// f_i(w) = log(1 + exp(-y_i x_i^T w)) + lambda/2 ||w||^2.
///
/// L = max_i ||x_i||^2 / 4 + lambda and mu = lambda when lambda > 0. w*, F* and sigma*^2
/// are only known after set_reference_solution().
class LogisticProblem final : public StochasticProblem {
 public:
  LogisticProblem(LabeledDataset data, double lambda);

  std::string name() const override { return "logistic"; }
  Eigen::Index dimension() const override { return data_.dimension; }
  std::optional<std::int64_t> num_components() const override { return data_.rows(); }
  const ProblemConstants& constants() const override { return constants_; }

  double lambda() const { return lambda_; }
  const LabeledDataset& data() const { return data_; }

  /// Stores w* and derives F* = F(w*) and sigma*^2 = (1/n) sum_i ||grad f_i(w*)||^2.
  void set_reference_solution(const Vector& w_star);
  /// Restores previously computed reference constants without recomputing them.
  void set_reference_constants(const Vector& w_star, double f_star, double sigma_star_sq);

 protected:
  void do_grad_sample(const Vector& w, SampleId xi, Vector& out) const override;
  double do_value_sample(const Vector& w, SampleId xi) const override;

 private:
  double margin(const Vector& w, std::int64_t row) const;

  LabeledDataset data_;
  double lambda_;
  ProblemConstants constants_;
};

/// The 1-D logistic loss with a quadratic penalty to the left of w = -2:
///   F(w) = log(1 + e^{-w})                          for w >= -2
///   F(w) = log(1 + e^{-w}) + lambda/2 (w + 2)^2     for w <  -2
/// Convex, C^1, neither strongly convex nor PL, and bounded on w >= -2. Exposed as a
/// single-component finite sum. F* = 0 is an infimum (no minimizer exists).
class ModifiedLogistic1D final : public StochasticProblem {
 public:
  explicit ModifiedLogistic1D(double lambda);

  std::string name() const override { return "modified_logistic"; }
  Eigen::Index dimension() const override { return 1; }
  std::optional<std::int64_t> num_components() const override { return 1; }
  const ProblemConstants& constants() const override { return constants_; }

  double lambda() const { return lambda_; }
  double value(double w) const;
  double derivative(double w) const;

 protected:
  void do_grad_sample(const Vector& w, SampleId xi, Vector& out) const override;
  double do_value_sample(const Vector& w, SampleId xi) const override;

 private:
  double lambda_;
  ProblemConstants constants_;
};

ModifiedLogistic1D modified_logistic(double lambda);

/// Expectation-form quadratic with multiplicative and additive noise:
///   f(w; xi) = 1/2 sum_j h_j (w_j - c_j - z_j)^2,  h_j = a_j u_j,
///   u_j ~ Uniform[1 - rho, 1 + rho],  z_j ~ N(0, s^2),
/// so F(w) = 1/2 sum_j a_j (w_j - c_j)^2 + s^2/2 sum_j a_j. Every constant is analytic:
/// L = (1 + rho) max a, mu = min a, w* = c, sigma*^2 = s^2 (1 + rho^2/3) sum a_j^2.
/// Exact gradients are deliberately unavailable; analytic_gradient() exists for tests.
class NoisyQuadratic final : public StochasticProblem {
 public:
  NoisyQuadratic(Vector curvature, Vector center, double noise, double rho);

  std::string name() const override { return "noisy_quadratic"; }
  Eigen::Index dimension() const override { return curvature_.size(); }
  std::optional<std::int64_t> num_components() const override { return std::nullopt; }
  const ProblemConstants& constants() const override { return constants_; }

  Vector analytic_gradient(const Vector& w) const;
  double analytic_value(const Vector& w) const;

 protected:
  void do_grad_sample(const Vector& w, SampleId xi, Vector& out) const override;
  double do_value_sample(const Vector& w, SampleId xi) const override;

 private:
  void realize(SampleId xi, Vector& h, Vector& z) const;

  Vector curvature_;
  Vector center_;
  double noise_;
  double rho_;
  ProblemConstants constants_;
};

/// Full-gradient descent with step 1/L until ||grad F|| <= tol. Used to pin down w* for
/// problems without a closed form. Throws NonConvergence after max_iterations.
Vector solve_reference(const StochasticProblem& problem, Vector w0, double tol = 1e-10,
                       std::int64_t max_iterations = 1'000'000);

/// Writes the reference constants of a logistic problem next to its dataset.
void save_sidecar(const std::filesystem::path& path, const LogisticProblem& problem);
/// Loads constants saved by save_sidecar. Throws DataError when the sidecar does not match
/// the problem (size, dimension or lambda).
void load_sidecar(const std::filesystem::path& path, LogisticProblem& problem);
/// Loads the sidecar when present, otherwise solves for w* and writes it.
void ensure_reference_constants(LogisticProblem& problem, const std::filesystem::path& sidecar);

}  // namespace isarah
