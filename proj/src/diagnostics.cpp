#include "isarah/diagnostics.hpp"

#include "isarah/errors.hpp"
#include "isarah/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace isarah {

MonteCarloEstimate MonteCarloEstimate::from_samples(std::span<const double> samples, std::uint64_t seed_base) {
  if (samples.size() < 2) throw InvalidArgument("a Monte-Carlo estimate needs at least 2 replications");
  const auto count = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double x : samples) sum += x;
  const double mean = sum / count;
  double sq = 0.0;
  for (double x : samples) sq += (x - mean) * (x - mean);
  MonteCarloEstimate est;
  est.mean = mean;
  est.std_error = std::sqrt(sq / (count - 1.0) / count);
  est.replications = static_cast<std::int64_t>(samples.size());
  est.seed_base = seed_base;
  return est;
}

double MonteCarloEstimate::relative_error() const { return mean == 0.0 ? 0.0 : std_error / std::abs(mean); }

std::string_view to_string(Verdict verdict) { return verdict == Verdict::Pass ? "pass" : "fail"; }

BoundCheck BoundCheck::evaluate(const MonteCarloEstimate& measured, double bound, double margin_sigmas,
                                std::string provenance) {
  BoundCheck check;
  check.measured = measured;
  check.bound = bound;
  check.margin_sigmas = margin_sigmas;
  check.verdict = measured.mean <= bound + margin_sigmas * measured.std_error ? Verdict::Pass : Verdict::Fail;
  check.provenance = std::move(provenance);
  return check;
}

bool all_passed(std::span<const BoundCheck> checks) {
  return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.passed(); });
}

namespace {

double require(const std::optional<double>& value, const char* name) {
  if (!value) throw MissingConstant(name);
  return *value;
}

void check_replications(std::int64_t replications) {
  if (replications < 2) throw InvalidArgument("Monte-Carlo checks need at least 2 replications");
}

double probe_norm(const StochasticProblem& problem, const Vector& w, std::uint64_t seed, std::int64_t samples) {
  RandomStream probe = make_stream(seed, StreamRole::Probe);
  return grad_norm_sq(problem, w, probe, samples);
}

double start_value(const StochasticProblem& problem, const Vector& w0, std::optional<double> f0) {
  if (f0) return *f0;
  if (!problem.is_finite_sum()) throw MissingConstant("F(w0)");
  return problem.value_full(w0);
}

std::string format_number(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

VarianceIdentity minibatch_variance_identity(const StochasticProblem& problem, const Vector& w, std::int64_t b) {
  if (!problem.is_finite_sum()) throw UnsupportedOperation(problem.name() + ": enumeration needs a finite sum");
  const std::int64_t n = *problem.num_components();
  if (b < 1) throw InvalidArgument("mini-batch size b must be >= 1");
  if (n > 6 || b > 6)
    throw ResourceError("enumerating n^b tuples needs n <= 6 and b <= 6, got n = " + std::to_string(n) +
                        ", b = " + std::to_string(b));

  std::vector<Vector> grads;
  grads.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 1; i <= n; ++i) grads.push_back(problem.grad_sample(w, SampleId{static_cast<std::uint64_t>(i)}));
  const Vector full = problem.grad_full(w);

  double second = 0.0;
  for (const auto& g : grads) second += g.squaredNorm();
  second /= static_cast<double>(n);

  // Odometer over all n^b tuples; each is equally likely under sampling with replacement.
  std::vector<std::int64_t> tuple(static_cast<std::size_t>(b), 0);
  std::int64_t total = 1;
  for (std::int64_t k = 0; k < b; ++k) total *= n;
  double lhs = 0.0;
  Vector mean(w.size());
  for (std::int64_t count = 0; count < total; ++count) {
    mean.setZero();
    for (auto i : tuple) mean += grads[static_cast<std::size_t>(i)];
    mean /= static_cast<double>(b);
    lhs += (mean - full).squaredNorm();
    for (std::size_t k = 0; k < tuple.size(); ++k) {
      if (++tuple[k] < n) break;
      tuple[k] = 0;
    }
  }
  lhs /= static_cast<double>(total);
  return {lhs, (second - full.squaredNorm()) / static_cast<double>(b)};
}

std::vector<MonteCarloEstimate> variance_profile(const StochasticProblem& problem, const Vector& w0, double eta,
                                                 const V0Source& v0, std::int64_t m, Recursion recursion,
                                                 const MonteCarloOptions& mc) {
  check_replications(mc.replications);
  const InnerLoopParams params{eta, m, v0, recursion};
  SolverOptions options;
  options.selection = IterateSelection::Last;

  auto runs = parallel_map(mc.replications, mc.workers, [&](std::int64_t r) {
    RngStreams streams = RngStreams::from_seed(mc.seed_base + static_cast<std::uint64_t>(r));
    streams.batch = make_stream(mc.seed_base, StreamRole::Batch);
    RunTrace trace;
    run_inner_loop(problem, w0, params, streams, options, 1, trace);
    std::vector<double> norms;
    norms.reserve(trace.steps.size());
    for (const auto& step : trace.steps) norms.push_back(step.v_norm_sq);
    return norms;
  });

  std::vector<MonteCarloEstimate> profile;
  profile.reserve(static_cast<std::size_t>(m));
  std::vector<double> column(runs.size());
  for (std::size_t t = 0; t < static_cast<std::size_t>(m); ++t) {
    for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r][t];
    profile.push_back(MonteCarloEstimate::from_samples(column, mc.seed_base));
  }
  return profile;
}

double variance_decay_factor(double eta, const ProblemConstants& constants) {
  const double L = require(constants.L, "L");
  const double mu = require(constants.mu, "mu");
  if (!(eta > 0.0) || !(eta * L < 2.0)) throw InvalidArgument("variance decay needs 0 < eta < 2/L");
  return 1.0 - (2.0 / (eta * L) - 1.0) * mu * mu * eta * eta;
}

std::vector<BoundCheck> variance_decay_check(const StochasticProblem& problem, const Vector& w0, double eta,
                                             const V0Source& v0, std::int64_t m, const MonteCarloOptions& mc) {
  const double q = variance_decay_factor(eta, problem.constants());
  const auto profile = variance_profile(problem, w0, eta, v0, m, Recursion::Sarah, mc);
  const double v0_sq = profile.front().mean;  // identical in every replication
  const std::string provenance =
      "SARAH variance decay: E||v_t||^2 <= q^t ||v_0||^2, q = 1 - (2/(eta L) - 1) mu^2 eta^2 = " + format_number(q);

  std::vector<BoundCheck> checks;
  checks.reserve(profile.size());
  for (std::size_t t = 0; t < profile.size(); ++t)
    checks.push_back(BoundCheck::evaluate(profile[t], std::pow(q, static_cast<double>(t)) * v0_sq, mc.margin_sigmas,
                                          provenance));
  return checks;
}

namespace {

MonteCarloEstimate one_loop_output_norms(const StochasticProblem& problem, const Vector& w0, const Schedule& s,
                                         const MonteCarloOptions& mc) {
  auto samples = parallel_map(mc.replications, mc.workers, [&](std::int64_t r) {
    const std::uint64_t seed = mc.seed_base + static_cast<std::uint64_t>(r);
    RngStreams streams = RngStreams::from_seed(seed);
    const auto result = isarah_inner(problem, w0, s.eta, s.m, s.b, streams);
    return probe_norm(problem, result.w, seed, mc.probe_samples);
  });
  return MonteCarloEstimate::from_samples(samples, mc.seed_base);
}

}  // namespace

double theorem1_bound(const ProblemConstants& constants, double f0, std::int64_t m) {
  const double L = require(constants.L, "L");
  const double sigma = require(constants.sigma_star_sq, "sigma_star_sq");
  const double f_star = require(constants.f_star, "f_star");
  const double gap = std::max(0.0, f0 - f_star);
  return (6.0 * L * gap + 2.0 * sigma) / std::sqrt(static_cast<double>(m) + 1.0);
}

double theorem2_bound(const ProblemConstants& constants, double f0, double eta, std::int64_t m, double moment) {
  const double f_star = require(constants.f_star, "f_star");
  const double gap = std::max(0.0, f0 - f_star);
  const double count = static_cast<double>(m) + 1.0;
  return 2.0 / (eta * count) * gap + moment / std::sqrt(count);
}

BoundCheck theorem1_bound_check(const StochasticProblem& problem, const Vector& w0, std::int64_t m,
                                const MonteCarloOptions& mc, std::optional<double> f0) {
  check_replications(mc.replications);
  const auto& c = problem.constants();
  const double bound = theorem1_bound(c, start_value(problem, w0, f0), m);
  const Schedule s = one_loop_convex(c, m);
  return BoundCheck::evaluate(one_loop_output_norms(problem, w0, s, mc), bound, mc.margin_sigmas,
                              "one-loop convex: E||grad F(w~)||^2 <= (6 L [F(w0) - F*] + 2 sigma*^2) / sqrt(m+1)");
}

BoundCheck theorem2_bound_check(const StochasticProblem& problem, const Vector& w0, std::int64_t m,
                                const MonteCarloOptions& mc, std::optional<double> f0) {
  check_replications(mc.replications);
  const auto& c = problem.constants();
  if (!c.f_star) throw MissingConstant("f_star");
  const Schedule s = one_loop_nonconvex(c, m);
  RandomStream probe = make_stream(mc.seed_base, StreamRole::Probe);
  const double moment = second_moment(problem, w0, probe, mc.probe_samples);
  const double bound = theorem2_bound(c, start_value(problem, w0, f0), s.eta, m, moment);
  return BoundCheck::evaluate(one_loop_output_norms(problem, w0, s, mc), bound, mc.margin_sigmas,
                              "one-loop nonconvex: E||grad F(w~)||^2 <= 2/(eta (m+1)) [F(w0) - F*] + "
                              "E||grad f(w0; xi)||^2 / sqrt(m+1)");
}

ContractionEnvelope contraction_envelope(const Schedule& schedule, const ProblemConstants& constants, double g0,
                                         std::int64_t S, Envelope envelope) {
  if (S < 0) throw InvalidArgument("number of stages S must be >= 0");
  if (schedule.regime != Regime::MultiLoopStronglyConvex && schedule.regime != Regime::MultiLoopConvexMN)
    throw InvalidArgument("contraction checks need a multi-loop schedule");
  ContractionEnvelope out;
  out.rate = contraction_rate(schedule, constants);
  if (!out.rate.contracts())
    throw ScheduleInvalid("schedule does not contract: alpha = " + format_number(out.rate.alpha) + " >= 1");

  if (envelope == Envelope::Auto) envelope = schedule.epsilon ? Envelope::Halving : Envelope::Geometric;
  if (envelope == Envelope::Halving && !schedule.epsilon)
    throw InvalidArgument("the halving envelope needs the schedule's epsilon");
  if (envelope == Envelope::Geometric && !out.rate.Delta) throw MissingConstant("sigma_star_sq");
  out.kind = envelope;

  const double Delta = out.rate.Delta.value_or(0.0);
  for (std::int64_t s = 0; s <= S; ++s) {
    const double sd = static_cast<double>(s);
    if (envelope == Envelope::Halving) {
      out.bounds.push_back(g0 / std::exp2(sd) + *schedule.epsilon / 4.0);
    } else {
      out.bounds.push_back(s == 0 ? g0 : Delta + std::pow(out.rate.alpha, sd) * (g0 - Delta));
    }
  }
  if (envelope == Envelope::Halving) {
    out.provenance = "halving: E||grad F(w~_s)||^2 <= ||grad F(w~_0)||^2 / 2^s + eps/4";
  } else {
    out.provenance = "geometric: E||grad F(w~_s)||^2 <= Delta + alpha^s (||grad F(w~_0)||^2 - Delta), alpha = " +
                     format_number(out.rate.alpha);
  }
  return out;
}

std::vector<BoundCheck> contraction_check(const StochasticProblem& problem, const Schedule& schedule, std::int64_t S,
                                          const Vector& w0, const MonteCarloOptions& mc, Envelope envelope) {
  check_replications(mc.replications);
  const double g0 = probe_norm(problem, w0, mc.seed_base, mc.probe_samples);
  const ContractionEnvelope env = contraction_envelope(schedule, problem.constants(), g0, S, envelope);
  const InnerLoopParams params{schedule.eta, schedule.m, V0Source::mini_batch(schedule.b), Recursion::Sarah};

  auto runs = parallel_map(mc.replications, mc.workers, [&](std::int64_t r) {
    const std::uint64_t seed = mc.seed_base + static_cast<std::uint64_t>(r);
    RngStreams streams = RngStreams::from_seed(seed);
    RandomStream probe = make_stream(seed, StreamRole::Probe);
    std::vector<double> norms{g0};
    Vector w = w0;
    RunTrace trace;
    for (std::int64_t s = 1; s <= S; ++s) {
      w = run_inner_loop(problem, w, params, streams, {}, s, trace);
      trace.steps.clear();
      norms.push_back(grad_norm_sq(problem, w, probe, mc.probe_samples));
    }
    return norms;
  });

  std::vector<BoundCheck> checks;
  std::vector<double> column(runs.size());
  for (std::size_t s = 0; s < env.bounds.size(); ++s) {
    for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r][s];
    checks.push_back(BoundCheck::evaluate(MonteCarloEstimate::from_samples(column, mc.seed_base), env.bounds[s],
                                          mc.margin_sigmas, env.provenance));
  }
  return checks;
}

namespace {

double scheduled_work(const Schedule& s) {
  return static_cast<double>(s.T) * static_cast<double>(s.b + 2 * (s.m - 1));
}

Schedule escalate(const Schedule& s, const ProblemConstants& c) {
  if (s.regime == Regime::OneLoopConvex) {
    Schedule next = one_loop_convex(c, 2 * (s.m + 1) - 1);
    next.epsilon = s.epsilon;
    next.provenance = s.provenance + " (m+1 doubled)";
    return next;
  }
  Schedule next = s;
  next.T += 1;
  return next;
}

}  // namespace

SlopeFit complexity_slope(const StochasticProblem& problem, const Vector& w0, Regime regime,
                          std::span<const double> epsilons, const SlopeOptions& options) {
  check_replications(options.replications);
  if (epsilons.size() < 3) throw InvalidArgument("complexity_slope needs at least 3 targets");
  for (double eps : epsilons)
    if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidArgument("targets must be finite and > 0");
  const auto [lo, hi] = std::minmax_element(epsilons.begin(), epsilons.end());
  if (*hi / *lo < 100.0 * (1.0 - 1e-12)) throw InvalidArgument("targets must span at least two decades");

  const auto& c = problem.constants();
  StartInfo start;
  if (problem.is_finite_sum()) start.value = problem.value_full(w0);
  start.grad_norm_sq = probe_norm(problem, w0, options.seed_base, options.probe_samples);

  SlopeFit fit;
  for (double eps : epsilons) {
    Schedule s = schedule_for_epsilon(regime, c, eps, start);
    const double budget = options.budget_factor * scheduled_work(s);
    for (int escalations = 0;; ++escalations) {
      if (scheduled_work(s) > budget)
        throw NonConvergence("target " + format_number(eps) + " not reached within " +
                             format_number(options.budget_factor) + "x the scheduled work");
      const InnerLoopParams params{s.eta, s.m, V0Source::mini_batch(s.b), Recursion::Sarah};
      auto runs = parallel_map(options.replications, options.workers, [&](std::int64_t r) {
        const std::uint64_t seed = options.seed_base + static_cast<std::uint64_t>(r);
        RngStreams streams = RngStreams::from_seed(seed);
        const auto result = run_outer_loop(problem, w0, params, s.T, streams);
        return std::pair<double, double>(probe_norm(problem, result.w, seed, options.probe_samples),
                                         static_cast<double>(result.trace.grad_evals));
      });
      std::vector<double> norms;
      double work = 0.0;
      for (const auto& [norm, evals] : runs) {
        norms.push_back(norm);
        work += evals;
      }
      const auto achieved = MonteCarloEstimate::from_samples(norms, options.seed_base);
      if (achieved.mean <= eps) {
        fit.points.push_back({eps, s, work / static_cast<double>(runs.size()), achieved, escalations});
        break;
      }
      s = escalate(s, c);
    }
  }

  double mx = 0.0, my = 0.0;
  for (const auto& p : fit.points) {
    mx += std::log(1.0 / p.epsilon);
    my += std::log(p.work);
  }
  const auto k = static_cast<double>(fit.points.size());
  mx /= k;
  my /= k;
  double sxy = 0.0, sxx = 0.0;
  for (const auto& p : fit.points) {
    const double dx = std::log(1.0 / p.epsilon) - mx;
    sxy += dx * (std::log(p.work) - my);
    sxx += dx * dx;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

double grad_fd_check(const StochasticProblem& problem, std::int64_t num_points, std::uint64_t seed, double scale) {
  if (num_points < 1) throw InvalidArgument("grad_fd_check needs at least one point");
  RandomStream rng = make_stream(seed, StreamRole::Probe);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = problem.dimension();

  double worst = 0.0;
  Vector w(d), fd(d), g(d);
  for (std::int64_t p = 0; p < num_points; ++p) {
    for (Eigen::Index j = 0; j < d; ++j) w[j] = scale * normal(rng);
    const SampleId xi = problem.sample(rng);
    problem.grad_sample(w, xi, g);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(w[j]));
      Vector plus = w, minus = w;
      plus[j] += h;
      minus[j] -= h;
      fd[j] = (problem.value_sample(plus, xi) - problem.value_sample(minus, xi)) / (plus[j] - minus[j]);
    }
    worst = std::max(worst, (fd - g).norm() / std::max(g.norm(), 1e-12));
  }
  return worst;
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

SigmoidSquared::SigmoidSquared(std::vector<double> offsets) : offsets_(std::move(offsets)) {
  if (offsets_.empty()) throw InvalidArgument("sigmoid_squared needs at least one component");
  constants_.L = certified_smoothness();
  constants_.f_star = 0.0;
  constants_.n_components = static_cast<std::int64_t>(offsets_.size());
}

double SigmoidSquared::certified_smoothness() {
  static const double value = [] {
    double worst = 0.0;
    for (int k = -400000; k <= 400000; ++k) {
      const double s = sigmoid(1e-4 * k);
      worst = std::max(worst, std::abs(2.0 * s * s * (1.0 - s) * (2.0 - 3.0 * s)));
    }
    return 1.01 * worst;
  }();
  return value;
}

void SigmoidSquared::do_grad_sample(const Vector& w, SampleId xi, Vector& out) const {
  const double s = sigmoid(w[0] + offsets_[xi.value - 1]);
  out[0] = 2.0 * s * s * (1.0 - s);
}

double SigmoidSquared::do_value_sample(const Vector& w, SampleId xi) const {
  const double s = sigmoid(w[0] + offsets_[xi.value - 1]);
  return s * s;
}

}  // namespace isarah
