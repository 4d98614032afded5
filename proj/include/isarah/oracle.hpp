#pragma once

#include "isarah/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace isarah {

/// Stochastic objective F(w) = E[f(w; xi)]. Finite sums report their component count
/// and support exact gradients; expectation-form problems only expose per-sample access.
///
/// Implementations are immutable after construction, so every const member is safe to
/// call concurrently.
class StochasticProblem {
 public:
  virtual ~StochasticProblem() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index dimension() const = 0;
  /// Number of components n for finite sums, empty for expectation-form problems.
  virtual std::optional<std::int64_t> num_components() const = 0;
  virtual const ProblemConstants& constants() const = 0;

  bool is_finite_sum() const { return num_components().has_value(); }

  /// Draws one realization. Finite sums draw uniformly from {1..n}; expectation-form
  /// problems draw a 64-bit seed.
  SampleId sample(RandomStream& rng) const;

  /// grad f(w; xi), written into `out` (resized if needed).
  void grad_sample(const Vector& w, SampleId xi, Vector& out) const;
  Vector grad_sample(const Vector& w, SampleId xi) const;
  double value_sample(const Vector& w, SampleId xi) const;

  /// (1/n) sum_i grad f_i(w), reduced over a fixed pairwise tree.
  /// Throws UnsupportedOperation on expectation-form problems.
  Vector grad_full(const Vector& w) const;
  double value_full(const Vector& w) const;

 protected:
  /// `out` already has size dimension(); `w` and `xi` are validated.
  virtual void do_grad_sample(const Vector& w, SampleId xi, Vector& out) const = 0;
  virtual double do_value_sample(const Vector& w, SampleId xi) const = 0;

 private:
  void check_point(const Vector& w) const;
  void check_sample(SampleId xi) const;
};

/// Average of the per-sample gradients at the given ids, summed over a fixed binary tree
/// with sequential leaves of at most eight terms. The order depends only on ids.size().
Vector mean_gradient(const StochasticProblem& problem, const Vector& w, std::span<const SampleId> ids);

/// (1/b) sum_{i=1}^b grad f(w; zeta_i) with zeta_i drawn i.i.d. (with replacement) from rng.
/// Throws InvalidArgument when b < 1.
Vector grad_minibatch(const StochasticProblem& problem, const Vector& w, std::int64_t b, RandomStream& rng);

/// Draws b sample ids from rng.
std::vector<SampleId> draw_samples(const StochasticProblem& problem, std::int64_t b, RandomStream& rng);

/// ||grad F(w)||^2, exact on finite sums. On expectation-form problems it is estimated from
/// a held-out sample of `probe_samples` draws taken from `probe`.
double grad_norm_sq(const StochasticProblem& problem, const Vector& w, RandomStream& probe,
                    std::int64_t probe_samples = 10000);

/// E||grad f(w; xi)||^2: exact on finite sums, Monte-Carlo with `probe_samples` draws otherwise.
double second_moment(const StochasticProblem& problem, const Vector& w, RandomStream& probe,
                     std::int64_t probe_samples = 10000);

/// Plug-in sigma*^2 when it is unknown: mean of ||grad f(w_hat; xi)||^2 over `samples` fresh
/// draws from rng at the best available iterate w_hat.
double estimate_sigma_star_sq(const StochasticProblem& problem, const Vector& w_hat, RandomStream& rng,
                              std::int64_t samples = 1000);

}  // namespace isarah
