#include "isarah/solvers.hpp"

#include <cmath>
#include <string>

namespace isarah {

DivergenceError::DivergenceError(std::int64_t stage, std::int64_t t, RunTrace partial)
    : Error("non-finite iterate at stage " + std::to_string(stage) + ", step " + std::to_string(t)),
      stage_(stage),
      step_(t),
      partial_(std::move(partial)) {}

namespace {

class Recorder {
 public:
  Recorder(const StochasticProblem& problem, const TraceOptions& options, std::int64_t stage, RunTrace& trace)
      : problem_(problem),
        options_(options),
        stage_(stage),
        trace_(trace),
        probe_(make_stream(options.probe_seed + static_cast<std::uint64_t>(stage), StreamRole::Probe)) {
    if (options.stride < 1) throw InvalidArgument("trace stride must be >= 1");
    if (options.timing && !trace.started) trace.started = std::chrono::steady_clock::now();
  }

  /// Records step t of a loop whose last step is `last`, subject to the stride.
  void step(std::int64_t t, std::int64_t last, const Vector& w, const Vector& v, std::optional<SampleId> xi) {
    if (t != 0 && t != last && t % options_.stride != 0) return;
    StepRecord rec;
    rec.stage = stage_;
    rec.t = t;
    rec.v_norm_sq = v.squaredNorm();
    rec.grad_evals = trace_.grad_evals;
    if (options_.grad_norms && w.allFinite()) rec.grad_norm_sq = grad_norm(w);
    if (options_.values && problem_.is_finite_sum() && w.allFinite()) rec.value = problem_.value_full(w);
    if (trace_.started)
      rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - *trace_.started).count();
    trace_.steps.push_back(rec);
    if (options_.states) trace_.states.push_back(StateRecord{stage_, t, w, v, xi});
  }

  std::optional<double> output_norm(const Vector& w) {
    if (!options_.grad_norms) return std::nullopt;
    return grad_norm(w);
  }

  [[noreturn]] void diverge(std::int64_t t) const { throw DivergenceError(stage_, t, trace_); }

 private:
  double grad_norm(const Vector& w) { return grad_norm_sq(problem_, w, probe_, options_.probe_samples); }

  const StochasticProblem& problem_;
  const TraceOptions& options_;
  std::int64_t stage_;
  RunTrace& trace_;
  RandomStream probe_;
};

void check_step_size(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidArgument("step size must be finite and > 0");
}

}  // namespace

Vector run_inner_loop(const StochasticProblem& problem, const Vector& w0, const InnerLoopParams& params,
                      RngStreams& streams, const SolverOptions& options, std::int64_t stage, RunTrace& trace) {
  check_step_size(params.eta);
  if (params.m < 1) throw InvalidArgument("inner loop size m must be >= 1");
  if (w0.size() != problem.dimension()) throw ContractViolation("starting point has the wrong dimension");
  if (params.v0.kind == V0Source::Kind::MiniBatch && params.v0.batch < 1)
    throw InvalidArgument("mini-batch size b must be >= 1");
  if (params.v0.kind == V0Source::Kind::Exact && !problem.is_finite_sum())
    throw UnsupportedOperation(problem.name() + ": exact v0 requires a finite-sum problem");

  const double eta = params.eta;
  const std::int64_t m = params.m;
  Recorder recorder(problem, options.trace, stage, trace);

  // The output index has its own stream, so drawing it up front leaves the path unchanged
  // and avoids storing every iterate.
  const std::int64_t selected =
      options.selection == IterateSelection::Uniform ? uniform_int(streams.select, 0, m) : m;

  Vector v0;
  if (params.v0.kind == V0Source::Kind::Exact) {
    v0 = problem.grad_full(w0);
    trace.grad_evals += *problem.num_components();
  } else {
    v0 = grad_minibatch(problem, w0, params.v0.batch, streams.batch);
    trace.grad_evals += params.v0.batch;
  }
  recorder.step(0, m - 1, w0, v0, std::nullopt);
  if (!v0.allFinite()) recorder.diverge(0);

  Vector output;
  if (selected == 0) output = w0;

  Vector w_prev = w0;
  Vector w = w0 - eta * v0;
  Vector v = v0;
  if (!w.allFinite()) recorder.diverge(1);
  if (selected == 1) output = w;

  Vector g_new(problem.dimension());
  Vector g_old(problem.dimension());
  for (std::int64_t t = 1; t < m; ++t) {
    const SampleId xi = problem.sample(streams.inner);
    problem.grad_sample(w, xi, g_new);
    problem.grad_sample(params.recursion == Recursion::Sarah ? w_prev : w0, xi, g_old);
    trace.grad_evals += 2;
    if (params.recursion == Recursion::Sarah) {
      v = g_new - g_old + v;
    } else {
      v = g_new - g_old + v0;
    }
    recorder.step(t, m - 1, w, v, xi);
    if (!v.allFinite()) recorder.diverge(t);

    w_prev.swap(w);
    w = w_prev - eta * v;
    if (!w.allFinite()) recorder.diverge(t + 1);
    if (selected == t + 1) output = w;
  }

  StageRecord rec;
  rec.stage = stage;
  rec.selected_t = selected;
  rec.output = output;
  rec.last_iterate = w;
  rec.output_grad_norm_sq = recorder.output_norm(output);
  rec.grad_evals = trace.grad_evals;
  trace.stages.push_back(std::move(rec));
  return output;
}

SolverResult run_outer_loop(const StochasticProblem& problem, const Vector& w0, const InnerLoopParams& params,
                            std::int64_t T, RngStreams& streams, const SolverOptions& options) {
  if (T < 1) throw InvalidArgument("number of outer iterations T must be >= 1");
  SolverResult result{w0, {}};
  for (std::int64_t s = 1; s <= T; ++s)
    result.w = run_inner_loop(problem, result.w, params, streams, options, s, result.trace);
  return result;
}

SolverResult isarah_inner(const StochasticProblem& problem, const Vector& w0, double eta, std::int64_t m,
                          std::int64_t b, RngStreams& streams, const SolverOptions& options) {
  return run_outer_loop(problem, w0, {eta, m, V0Source::mini_batch(b), Recursion::Sarah}, 1, streams, options);
}

SolverResult isarah_outer(const StochasticProblem& problem, const Vector& w0, double eta, std::int64_t m,
                          std::int64_t b, std::int64_t T, RngStreams& streams, const SolverOptions& options) {
  return run_outer_loop(problem, w0, {eta, m, V0Source::mini_batch(b), Recursion::Sarah}, T, streams, options);
}

SolverResult sarah_exact_inner(const StochasticProblem& problem, const Vector& w0, double eta, std::int64_t m,
                               RngStreams& streams, const SolverOptions& options) {
  return run_outer_loop(problem, w0, {eta, m, V0Source::exact(), Recursion::Sarah}, 1, streams, options);
}

SolverResult svrg_inner(const StochasticProblem& problem, const Vector& w0, double eta, std::int64_t m,
                        std::int64_t b, RngStreams& streams, const SolverOptions& options) {
  return run_outer_loop(problem, w0, {eta, m, V0Source::mini_batch(b), Recursion::Svrg}, 1, streams, options);
}

StepSizeRule constant_step(double eta) {
  return [eta](std::int64_t) { return eta; };
}

StepSizeRule inverse_time_step(double eta0, double decay) {
  return [eta0, decay](std::int64_t k) { return eta0 / (1.0 + decay * static_cast<double>(k)); };
}

SolverResult sgd(const StochasticProblem& problem, const Vector& w0, const StepSizeRule& step, std::int64_t num_steps,
                 std::int64_t b, RngStreams& streams, const SolverOptions& options) {
  if (num_steps < 1) throw InvalidArgument("sgd: num_steps must be >= 1");
  if (b < 1) throw InvalidArgument("sgd: mini-batch size must be >= 1");
  if (w0.size() != problem.dimension()) throw ContractViolation("starting point has the wrong dimension");

  SolverResult result{w0, {}};
  Recorder recorder(problem, options.trace, 1, result.trace);
  Vector& w = result.w;
  for (std::int64_t k = 0; k < num_steps; ++k) {
    const double eta = step(k);
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("sgd: step sizes must be finite and >= 0");
    const Vector g = grad_minibatch(problem, w, b, streams.batch);
    result.trace.grad_evals += b;
    recorder.step(k, num_steps - 1, w, g, std::nullopt);
    if (!g.allFinite()) recorder.diverge(k);
    w = w - eta * g;
    if (!w.allFinite()) recorder.diverge(k + 1);
  }

  StageRecord rec;
  rec.stage = 1;
  rec.selected_t = num_steps;
  rec.output = w;
  rec.last_iterate = w;
  rec.output_grad_norm_sq = recorder.output_norm(w);
  rec.grad_evals = result.trace.grad_evals;
  result.trace.stages.push_back(std::move(rec));
  return result;
}

}  // namespace isarah
