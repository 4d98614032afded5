#pragma once

#include "isarah/errors.hpp"
#include "isarah/oracle.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace isarah {

/// How the output iterate of an inner loop is chosen.
enum class IterateSelection {
  Uniform,  // t drawn uniformly from {0, ..., m} using the select stream
  Last,     // always w_m; pins the draw for exact trajectory checks
};

/// Recursive estimator used in the inner loop.
enum class Recursion {
  Sarah,  // v_t = grad f(w_t; xi_t) - grad f(w_{t-1}; xi_t) + v_{t-1}
  Svrg,   // v_t = grad f(w_t; xi_t) - grad f(w_0; xi_t) + v_0
};

/// Source of the initial estimate v_0.
struct V0Source {
  enum class Kind { MiniBatch, Exact };
  Kind kind = Kind::MiniBatch;
  std::int64_t batch = 1;

  static V0Source mini_batch(std::int64_t b) { return {Kind::MiniBatch, b}; }
  static V0Source exact() { return {Kind::Exact, 0}; }
};

struct TraceOptions {
  /// Record ||grad F(w_t)||^2 per step and at every stage output. Exact on finite sums;
  /// expectation-form problems use a Monte-Carlo probe of `probe_samples` draws.
  bool grad_norms = false;
  bool values = false;  // record F(w_t); finite sums only
  bool states = false;  // record (w_t, v_t, xi_t) for replay checks
  std::int64_t probe_samples = 10000;
  std::uint64_t probe_seed = 0;
  /// Keep every stride-th step plus the first and last of each loop.
  std::int64_t stride = 1;
  bool timing = false;  // record wall-clock seconds since the run started
};

struct SolverOptions {
  TraceOptions trace;
  IterateSelection selection = IterateSelection::Uniform;
};

struct StepRecord {
  std::int64_t stage = 1;
  std::int64_t t = 0;
  double v_norm_sq = 0.0;
  std::optional<double> grad_norm_sq;
  std::optional<double> value;
  std::int64_t grad_evals = 0;  // cumulative, after forming v_t
  std::optional<double> wall_time;
};

struct StateRecord {
  std::int64_t stage = 1;
  std::int64_t t = 0;
  Vector w;                        // w_t
  Vector v;                        // v_t
  std::optional<SampleId> sample;  // xi_t, absent for t = 0
};

struct StageRecord {
  std::int64_t stage = 1;
  std::int64_t selected_t = 0;
  Vector output;          // w~_s = w_{selected_t}
  Vector last_iterate;    // w_m
  std::optional<double> output_grad_norm_sq;
  std::int64_t grad_evals = 0;  // cumulative at the end of the stage
};

struct RunTrace {
  std::vector<StepRecord> steps;
  std::vector<StateRecord> states;
  std::vector<StageRecord> stages;
  std::int64_t grad_evals = 0;
  std::optional<std::chrono::steady_clock::time_point> started;
};

struct SolverResult {
  Vector w;
  RunTrace trace;
};

/// A non-finite iterate or estimate appeared. Carries the trace recorded so far.
class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t stage, std::int64_t t, RunTrace partial);
  std::int64_t stage() const noexcept { return stage_; }
  std::int64_t step() const noexcept { return step_; }
  const RunTrace& partial_trace() const noexcept { return partial_; }

 private:
  std::int64_t stage_;
  std::int64_t step_;
  RunTrace partial_;
};

struct InnerLoopParams {
  double eta = 0.0;
  std::int64_t m = 1;
  V0Source v0 = V0Source::mini_batch(1);
  Recursion recursion = Recursion::Sarah;
};

/// One inner loop: forms v_0, sets w_1 = w_0 - eta v_0, runs the recursion for t = 1..m-1
/// and returns w_{t~}. Steps are appended to `trace` under the given stage index.
Vector run_inner_loop(const StochasticProblem& problem, const Vector& w0, const InnerLoopParams& params,
                      RngStreams& streams, const SolverOptions& options, std::int64_t stage, RunTrace& trace);

/// T chained inner loops, each started from the previous output.
SolverResult run_outer_loop(const StochasticProblem& problem, const Vector& w0, const InnerLoopParams& params,
                            std::int64_t T, RngStreams& streams, const SolverOptions& options = {});

/// Inexact SARAH inner loop: v_0 is a size-b mini-batch gradient.
SolverResult isarah_inner(const StochasticProblem& problem, const Vector& w0, double eta, std::int64_t m,
                          std::int64_t b, RngStreams& streams, const SolverOptions& options = {});

/// Inexact SARAH with T outer iterations.
SolverResult isarah_outer(const StochasticProblem& problem, const Vector& w0, double eta, std::int64_t m,
                          std::int64_t b, std::int64_t T, RngStreams& streams, const SolverOptions& options = {});

/// SARAH with the exact gradient as v_0 (finite sums only; costs n evaluations).
SolverResult sarah_exact_inner(const StochasticProblem& problem, const Vector& w0, double eta, std::int64_t m,
                               RngStreams& streams, const SolverOptions& options = {});

/// SVRG inner loop anchored at w_0 with a size-b mini-batch v_0.
SolverResult svrg_inner(const StochasticProblem& problem, const Vector& w0, double eta, std::int64_t m,
                        std::int64_t b, RngStreams& streams, const SolverOptions& options = {});

/// Step size as a function of the iteration counter k = 0, 1, ...
using StepSizeRule = std::function<double(std::int64_t)>;

StepSizeRule constant_step(double eta);
/// eta_k = eta0 / (1 + decay k)
StepSizeRule inverse_time_step(double eta0, double decay);

/// Mini-batch SGD: w_{k+1} = w_k - eta_k grad_minibatch(w_k, b). Mini-batches come from the
/// batch stream. Returns the final iterate.
SolverResult sgd(const StochasticProblem& problem, const Vector& w0, const StepSizeRule& step, std::int64_t num_steps,
                 std::int64_t b, RngStreams& streams, const SolverOptions& options = {});

}  // namespace isarah
