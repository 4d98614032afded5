#pragma once

#include "isarah/oracle.hpp"
#include "isarah/schedules.hpp"
#include "isarah/solvers.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace isarah {

/// Sample mean of per-replication values with its standard error sample_std / sqrt(R).
struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t replications = 0;
  std::uint64_t seed_base = 0;

  /// Values are summed in index (seed) order. Throws InvalidArgument for fewer than 2 samples.
  static MonteCarloEstimate from_samples(std::span<const double> samples, std::uint64_t seed_base);

  /// std_error / |mean|, or 0 when the mean is 0.
  double relative_error() const;
};

enum class Verdict { Pass, Fail };
std::string_view to_string(Verdict verdict);

/// One-sided comparison of a Monte-Carlo mean against a closed-form upper bound.
struct BoundCheck {
  MonteCarloEstimate measured;
  double bound = 0.0;
  double margin_sigmas = 4.0;
  Verdict verdict = Verdict::Fail;
  std::string provenance;

  /// verdict = Pass iff measured.mean <= bound + margin_sigmas * measured.std_error.
  static BoundCheck evaluate(const MonteCarloEstimate& measured, double bound, double margin_sigmas,
                             std::string provenance);

  bool passed() const { return verdict == Verdict::Pass; }
};

bool all_passed(std::span<const BoundCheck> checks);

struct MonteCarloOptions {
  std::int64_t replications = 1000;
  std::uint64_t seed_base = 0;
  double margin_sigmas = 4.0;
  int workers = 0;  // 0 = default_workers()
  /// Held-out sample size for ||grad F||^2 on expectation-form problems.
  std::int64_t probe_samples = 10000;
};

struct VarianceIdentity {
  double lhs = 0.0;  // E||(1/b) sum_i grad f(w; zeta_i) - grad F(w)||^2 by enumeration
  double rhs = 0.0;  // (E||grad f(w; xi)||^2 - ||grad F(w)||^2) / b
};

/// Enumerates all n^b equiprobable index tuples. Needs a finite sum with n <= 6 and
/// 1 <= b <= 6; larger cases throw ResourceError.
VarianceIdentity minibatch_variance_identity(const StochasticProblem& problem, const Vector& w, std::int64_t b);

/// Monte-Carlo E||v_t||^2 for t = 0..m-1 of one inner loop started at w0. The mini-batch
/// stream is pinned to seed_base, so v_0 is the same in every replication and only the
/// inner draws vary; replication r uses inner seed seed_base + r.
std::vector<MonteCarloEstimate> variance_profile(const StochasticProblem& problem, const Vector& w0, double eta,
                                                 const V0Source& v0, std::int64_t m, Recursion recursion,
                                                 const MonteCarloOptions& mc);

/// Checks E||v_t||^2 <= q^t ||v_0||^2 for every t, q = 1 - (2/(eta L) - 1) mu^2 eta^2.
/// Requires L and mu, and eta < 2/L.
std::vector<BoundCheck> variance_decay_check(const StochasticProblem& problem, const Vector& w0, double eta,
                                             const V0Source& v0, std::int64_t m, const MonteCarloOptions& mc);

/// Per-step factor q of variance_decay_check.
double variance_decay_factor(double eta, const ProblemConstants& constants);

/// E||grad F(w~)||^2 after one inner loop of the one_loop_convex(m) schedule against
/// (6 L [F(w_0) - F*] + 2 sigma*^2) / sqrt(m+1). Needs L, sigma*^2 and F*. `f0` overrides
/// F(w_0), which is required on expectation-form problems.
BoundCheck theorem1_bound_check(const StochasticProblem& problem, const Vector& w0, std::int64_t m,
                                const MonteCarloOptions& mc, std::optional<double> f0 = {});

/// E||grad F(w~)||^2 after one inner loop of the one_loop_nonconvex(m) schedule against
/// 2/(eta (m+1)) [F(w_0) - F*] + E||grad f(w_0; xi)||^2 / sqrt(m+1), with F* any lower bound.
BoundCheck theorem2_bound_check(const StochasticProblem& problem, const Vector& w0, std::int64_t m,
                                const MonteCarloOptions& mc, std::optional<double> f0 = {});

/// (6 L [F(w_0) - F*] + 2 sigma*^2) / sqrt(m+1), the gap clamped at 0.
double theorem1_bound(const ProblemConstants& constants, double f0, std::int64_t m);
/// 2/(eta (m+1)) [F(w_0) - F*] + moment / sqrt(m+1), with moment = E||grad f(w_0; xi)||^2.
double theorem2_bound(const ProblemConstants& constants, double f0, double eta, std::int64_t m, double moment);

enum class Envelope {
  Auto,       // Halving when the schedule carries epsilon, else Geometric
  Halving,    // ||grad F(w~_0)||^2 / 2^s + eps/4
  Geometric,  // Delta + alpha^s (||grad F(w~_0)||^2 - Delta)
};

struct ContractionEnvelope {
  Envelope kind = Envelope::Halving;
  ContractionRate rate;
  std::vector<double> bounds;  // s = 0..S
  std::string provenance;
};

/// Bounds on E||grad F(w~_s)||^2 for s = 0..S given g0 = ||grad F(w~_0)||^2. Needs a
/// multi-loop schedule; alpha >= 1 throws ScheduleInvalid.
ContractionEnvelope contraction_envelope(const Schedule& schedule, const ProblemConstants& constants, double g0,
                                         std::int64_t S, Envelope envelope = Envelope::Auto);

/// Per-stage E||grad F(w~_s)||^2 for s = 0..S against the chosen envelope. Needs a
/// multi-loop schedule; alpha >= 1 throws ScheduleInvalid.
std::vector<BoundCheck> contraction_check(const StochasticProblem& problem, const Schedule& schedule, std::int64_t S,
                                          const Vector& w0, const MonteCarloOptions& mc,
                                          Envelope envelope = Envelope::Auto);

struct SlopeOptions {
  std::int64_t replications = 8;
  std::uint64_t seed_base = 0;
  int workers = 0;
  /// Give up when an escalated schedule costs more than this multiple of the original.
  double budget_factor = 100.0;
  std::int64_t probe_samples = 10000;
};

struct SlopePoint {
  double epsilon = 0.0;
  Schedule schedule;            // the schedule that reached the target
  double work = 0.0;            // gradient evaluations per run
  MonteCarloEstimate achieved;  // E||grad F(w~)||^2
  int escalations = 0;
};

struct SlopeFit {
  double slope = 0.0;  // d log(work) / d log(1/eps), least squares
  double intercept = 0.0;
  std::vector<SlopePoint> points;
};

/// Runs the epsilon-driven schedule of `regime` at each target. When the Monte-Carlo mean
/// of ||grad F(w~)||^2 misses eps, the schedule is escalated (m+1 doubled for one-loop,
/// one more stage for multi-loop) until it succeeds or exceeds the budget, which throws
/// NonConvergence. Needs at least 3 targets spanning 2 decades.
SlopeFit complexity_slope(const StochasticProblem& problem, const Vector& w0, Regime regime,
                          std::span<const double> epsilons, const SlopeOptions& options = {});

/// Worst relative error between central differences of f(.; xi) (step 1e-6 (1 + |w_j|))
/// and grad f(.; xi) over `num_points` random (w, xi) pairs. The error at a point is
/// ||fd - g|| / max(||g||, 1e-12). Points are N(0, scale^2) per coordinate.
double grad_fd_check(const StochasticProblem& problem, std::int64_t num_points, std::uint64_t seed = 0,
                     double scale = 1.0);

/// f_i(w) = sigmoid(w + c_i)^2 in one dimension: smooth, non-convex, bounded below by F* = 0
/// (an infimum). L is certified by a grid search of |f''| with a 1% safety margin.
class SigmoidSquared final : public StochasticProblem {
 public:
  explicit SigmoidSquared(std::vector<double> offsets);

  std::string name() const override { return "sigmoid_squared"; }
  Eigen::Index dimension() const override { return 1; }
  std::optional<std::int64_t> num_components() const override {
    return static_cast<std::int64_t>(offsets_.size());
  }
  const ProblemConstants& constants() const override { return constants_; }

  const std::vector<double>& offsets() const { return offsets_; }

  /// max |d^2/dx^2 sigmoid(x)^2| over a fine grid, times 1.01.
  static double certified_smoothness();

 protected:
  void do_grad_sample(const Vector& w, SampleId xi, Vector& out) const override;
  double do_value_sample(const Vector& w, SampleId xi) const override;

 private:
  std::vector<double> offsets_;
  ProblemConstants constants_;
};

}  // namespace isarah
