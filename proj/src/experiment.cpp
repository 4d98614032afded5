#include "isarah/experiment.hpp"

#include "isarah/errors.hpp"
#include "isarah/libsvm.hpp"
#include "isarah/parallel.hpp"
#include "isarah/problems.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace isarah {

using nlohmann::json;

std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Isarah:
      return "isarah";
    case SolverKind::Sarah:
      return "sarah";
    case SolverKind::Svrg:
      return "svrg";
    case SolverKind::Sgd:
      return "sgd";
  }
  return "unknown";
}

SolverKind parse_solver(std::string_view name) {
  for (SolverKind k : {SolverKind::Isarah, SolverKind::Sarah, SolverKind::Svrg, SolverKind::Sgd})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown solver '" + std::string(name) + "' (expected isarah, sarah, svrg or sgd)");
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------------------
// Config parsing

namespace {

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw ConfigError("unknown key '" + item.key() + "' in " + std::string(where));
  }
}

template <class T>
T get(const json& j, const char* key, std::string_view where) {
  if (!j.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + std::string(where));
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + std::string(key) + "' in " + std::string(where) + " has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, std::string_view where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

Vector vector_from(const json& j, const char* key, std::string_view where) {
  const auto values = get<std::vector<double>>(j, key, where);
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

QuadraticFiniteSum::Matrix matrix_from(const json& j, const char* key, std::string_view where) {
  const auto rows = get<std::vector<std::vector<double>>>(j, key, where);
  if (rows.empty() || rows.front().empty()) throw ConfigError(std::string(key) + " in " + std::string(where) + " is empty");
  QuadraticFiniteSum::Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw ConfigError(std::string(key) + " rows differ in length");
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

std::unique_ptr<StochasticProblem> build_problem(const json& spec, const std::filesystem::path& base_dir) {
  constexpr std::string_view where = "problem";
  const auto type = get<std::string>(spec, "type", where);
  if (type == "quadratic") {
    check_keys(spec, where, {"type", "n", "d", "kappa", "seed", "shift_scale", "spread"});
    QuadraticOptions options;
    options.shift_scale = get_or(spec, "shift_scale", options.shift_scale, where);
    options.spread = get_or(spec, "spread", options.spread, where);
    RandomStream rng(get_or<std::uint64_t>(spec, "seed", 0, where));
    return std::make_unique<QuadraticFiniteSum>(make_quadratic(get<std::int64_t>(spec, "n", where),
                                                               get<std::int64_t>(spec, "d", where),
                                                               get<double>(spec, "kappa", where), rng, options));
  }
  if (type == "quadratic_explicit") {
    check_keys(spec, where, {"type", "diagonals", "shifts"});
    return std::make_unique<QuadraticFiniteSum>(matrix_from(spec, "diagonals", where), matrix_from(spec, "shifts", where));
  }
  if (type == "libsvm") {
    check_keys(spec, where, {"type", "path", "lambda", "sidecar"});
    std::filesystem::path path = get<std::string>(spec, "path", where);
    if (path.is_relative()) path = base_dir / path;
    auto problem = std::make_unique<LogisticProblem>(load_libsvm(path, get<double>(spec, "lambda", where)));
    std::filesystem::path sidecar = get_or<std::string>(spec, "sidecar", path.string() + ".constants.json", where);
    if (sidecar.is_relative()) sidecar = base_dir / sidecar;
    ensure_reference_constants(*problem, sidecar);
    return problem;
  }
  if (type == "modified_logistic") {
    check_keys(spec, where, {"type", "lambda"});
    return std::make_unique<ModifiedLogistic1D>(get<double>(spec, "lambda", where));
  }
  if (type == "noisy_quadratic") {
    check_keys(spec, where, {"type", "curvature", "center", "noise", "rho"});
    const Vector a = vector_from(spec, "curvature", where);
    const Vector c = spec.contains("center") ? vector_from(spec, "center", where) : Vector::Zero(a.size());
    return std::make_unique<NoisyQuadratic>(a, c, get<double>(spec, "noise", where), get_or(spec, "rho", 0.0, where));
  }
  if (type == "sigmoid_squared") {
    check_keys(spec, where, {"type", "offsets"});
    return std::make_unique<SigmoidSquared>(get_or(spec, "offsets", std::vector<double>{-1.0, 0.0, 1.0}, where));
  }
  throw ConfigError("unknown problem type '" + type + "'");
}

}  // namespace

std::unique_ptr<StochasticProblem> make_problem(const json& spec, const std::filesystem::path& base_dir) {
  if (!spec.is_object()) throw ConfigError("problem must be an object");
  try {
    auto problem = build_problem(spec, base_dir);
    problem->constants().validate();
    return problem;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  constexpr std::string_view where = "config";
  check_keys(j, where,
             {"problem", "w0", "solver", "schedule", "regime", "epsilon", "m", "step_decay", "replications",
              "seed_base", "trace", "output", "diagnostics", "workers"});
  ExperimentConfig c;
  c.base_dir = base_dir;
  if (!j.contains("problem")) throw ConfigError("missing key 'problem' in config");
  c.problem = j.at("problem");
  if (!c.problem.is_object() || !c.problem.contains("type")) throw ConfigError("problem needs a 'type'");
  if (j.contains("w0")) {
    c.w0 = j.at("w0");
    const bool ok = c.w0.is_number() ||
                    (c.w0.is_array() && std::all_of(c.w0.begin(), c.w0.end(), [](const json& x) { return x.is_number(); }));
    if (!ok) throw ConfigError("w0 must be a number or an array of numbers");
  }
  c.solver = parse_solver(get_or<std::string>(j, "solver", "isarah", where));

  const bool explicit_schedule = j.contains("schedule");
  const bool derived = j.contains("regime");
  if (explicit_schedule == derived) throw ConfigError("exactly one of 'schedule' or 'regime' must be given");
  if (explicit_schedule) {
    if (j.contains("epsilon") || j.contains("m")) throw ConfigError("'epsilon' and 'm' go with 'regime', not 'schedule'");
    try {
      c.schedule = j.at("schedule").get<Schedule>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("schedule: ") + e.what());
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("schedule: ") + e.what());
    }
    const auto& s = *c.schedule;
    if (!(s.eta > 0.0) || !std::isfinite(s.eta) || s.m < 1 || s.b < 1 || s.T < 1)
      throw ConfigError("schedule needs eta > 0, m >= 1, b >= 1 and T >= 1");
  } else {
    if (c.solver == SolverKind::Sgd) throw ConfigError("sgd takes an explicit schedule, not a regime");
    try {
      c.regime = parse_regime(get<std::string>(j, "regime", where));
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    if (j.contains("epsilon")) c.epsilon = get<double>(j, "epsilon", where);
    if (j.contains("m")) c.m = get<std::int64_t>(j, "m", where);
    if (c.epsilon && !(*c.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (c.m && *c.m < 1) throw ConfigError("m must be >= 1");
    if (!c.epsilon && !c.m) throw ConfigError("'regime' needs 'epsilon' or 'm'");
    if (c.epsilon && c.m) c.m.reset();  // epsilon determines m

    const bool one_loop = *c.regime == Regime::OneLoopConvex || *c.regime == Regime::OneLoopNonConvex;
    if (c.m && !one_loop) throw ConfigError("'m' only parameterizes one-loop regimes");
    if (c.epsilon && *c.regime == Regime::OneLoopNonConvex)
      throw ConfigError("one_loop_nonconvex is parameterized by 'm', not 'epsilon'");
  }
  if (j.contains("step_decay")) {
    if (c.solver != SolverKind::Sgd) throw ConfigError("step_decay applies to sgd only");
    c.step_decay = get<double>(j, "step_decay", where);
    if (!(*c.step_decay >= 0.0)) throw ConfigError("step_decay must be >= 0");
  }

  c.replications = get_or<std::int64_t>(j, "replications", 1, where);
  if (c.replications < 1) throw ConfigError("replications must be >= 1");
  const auto seed = get_or<std::int64_t>(j, "seed_base", 0, where);
  if (seed < 0) throw ConfigError("seed_base must be >= 0");
  c.seed_base = static_cast<std::uint64_t>(seed);
  c.workers = get_or<int>(j, "workers", 0, where);
  if (c.workers < 0) throw ConfigError("workers must be >= 0");

  if (j.contains("trace")) {
    const auto& t = j.at("trace");
    check_keys(t, "trace", {"grad_norms", "values"});
    c.grad_norms = get_or(t, "grad_norms", c.grad_norms, "trace");
    c.values = get_or(t, "values", c.values, "trace");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    check_keys(o, "output", {"trace_dir", "summary", "full_trace", "timing"});
    auto path = [&](const char* key) -> std::filesystem::path {
      if (!o.contains(key)) return {};
      std::filesystem::path p = get<std::string>(o, key, "output");
      return p.is_relative() ? base_dir / p : p;
    };
    c.output.trace_dir = path("trace_dir");
    c.output.summary = path("summary");
    c.output.full_trace = get_or(o, "full_trace", false, "output");
    c.output.timing = get_or(o, "timing", false, "output");
  }
  if (j.contains("diagnostics")) {
    const auto& d = j.at("diagnostics");
    check_keys(d, "diagnostics", {"target", "contraction", "theorem1", "theorem2", "margin_sigmas"});
    c.diagnostics.target = get_or(d, "target", false, "diagnostics");
    c.diagnostics.contraction = get_or(d, "contraction", false, "diagnostics");
    c.diagnostics.theorem1 = get_or(d, "theorem1", false, "diagnostics");
    c.diagnostics.theorem2 = get_or(d, "theorem2", false, "diagnostics");
    c.diagnostics.margin_sigmas = get_or(d, "margin_sigmas", 4.0, "diagnostics");
    if (!(c.diagnostics.margin_sigmas >= 0.0)) throw ConfigError("margin_sigmas must be >= 0");
  }
  const auto& d = c.diagnostics;
  if ((d.target || d.contraction || d.theorem1 || d.theorem2) && c.replications < 2)
    throw ConfigError("diagnostic checks need replications >= 2");
  if ((d.contraction || d.theorem1 || d.theorem2) && c.solver != SolverKind::Isarah)
    throw ConfigError("contraction and one-loop bound checks apply to the isarah solver");
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

Vector starting_point(const ExperimentConfig& config, Eigen::Index dimension) {
  if (config.w0.is_number()) return Vector::Constant(dimension, config.w0.get<double>());
  const auto values = config.w0.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != dimension)
    throw ConfigError("w0 has " + std::to_string(values.size()) + " entries, problem dimension is " +
                      std::to_string(dimension));
  return Eigen::Map<const Vector>(values.data(), dimension);
}

StartInfo start_info(const StochasticProblem& problem, const Vector& w0, std::uint64_t seed_base,
                     std::int64_t probe_samples) {
  StartInfo start;
  if (problem.is_finite_sum()) start.value = problem.value_full(w0);
  RandomStream probe = make_stream(seed_base, StreamRole::Probe);
  start.grad_norm_sq = grad_norm_sq(problem, w0, probe, probe_samples);
  return start;
}

Schedule resolve_schedule(const ExperimentConfig& config, const StochasticProblem& problem, const Vector& w0) {
  if (config.schedule) return *config.schedule;
  const auto& c = problem.constants();
  if (config.m) {
    return *config.regime == Regime::OneLoopConvex ? one_loop_convex(c, *config.m) : one_loop_nonconvex(c, *config.m);
  }
  return schedule_for_epsilon(*config.regime, c, *config.epsilon, start_info(problem, w0, config.seed_base));
}

// ---------------------------------------------------------------------------------------
// Running

bool ExperimentResult::diverged() const {
  return std::any_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.diverged; });
}

bool ExperimentResult::checks_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const NamedCheck& c) { return c.check.passed(); });
}

int ExperimentResult::exit_code() const {
  if (diverged()) return 3;
  return checks_passed() ? 0 : 1;
}

namespace {

double probe_norm(const StochasticProblem& problem, const Vector& w, std::uint64_t seed) {
  RandomStream probe = make_stream(seed, StreamRole::Probe);
  return grad_norm_sq(problem, w, probe);
}

SolverResult run_solver(const ExperimentConfig& config, const StochasticProblem& problem, const Vector& w0,
                        const Schedule& s, RngStreams& streams, const SolverOptions& options) {
  switch (config.solver) {
    case SolverKind::Isarah:
      return run_outer_loop(problem, w0, {s.eta, s.m, V0Source::mini_batch(s.b), Recursion::Sarah}, s.T, streams,
                            options);
    case SolverKind::Sarah:
      return run_outer_loop(problem, w0, {s.eta, s.m, V0Source::exact(), Recursion::Sarah}, s.T, streams, options);
    case SolverKind::Svrg:
      return run_outer_loop(problem, w0, {s.eta, s.m, V0Source::mini_batch(s.b), Recursion::Svrg}, s.T, streams,
                            options);
    case SolverKind::Sgd: {
      const StepSizeRule step = config.step_decay ? inverse_time_step(s.eta, *config.step_decay) : constant_step(s.eta);
      return sgd(problem, w0, step, s.m * s.T, s.b, streams, options);
    }
  }
  throw InvalidArgument("unknown solver");
}

MonteCarloEstimate estimate(const std::vector<double>& samples, std::uint64_t seed_base) {
  return MonteCarloEstimate::from_samples(samples, seed_base);
}

void add_checks(const ExperimentConfig& config, const StochasticProblem& problem, const Vector& w0,
                ExperimentResult& result) {
  const auto& d = config.diagnostics;
  const auto& s = result.schedule;
  const auto& c = problem.constants();

  std::vector<double> finals;
  for (const auto& run : result.runs) finals.push_back(*run.final_grad_norm_sq);

  if (d.target) {
    const auto eps = s.epsilon ? s.epsilon : config.epsilon;
    if (!eps) throw ConfigError("the target check needs an epsilon");
    result.checks.push_back({"target", s.T,
                             BoundCheck::evaluate(estimate(finals, config.seed_base), *eps, d.margin_sigmas,
                                                  "target: E||grad F(w_out)||^2 <= eps")});
  }
  if (d.contraction) {
    const double g0 = probe_norm(problem, w0, config.seed_base);
    const auto env = contraction_envelope(s, c, g0, s.T);
    for (std::int64_t stage = 0; stage <= s.T; ++stage) {
      std::vector<double> column;
      for (const auto& run : result.runs) {
        column.push_back(stage == 0 ? g0
                                    : probe_norm(problem, run.trace.stages[static_cast<std::size_t>(stage - 1)].output,
                                                 run.seed + static_cast<std::uint64_t>(stage)));
      }
      result.checks.push_back({"contraction", stage,
                               BoundCheck::evaluate(estimate(column, config.seed_base),
                                                    env.bounds[static_cast<std::size_t>(stage)], d.margin_sigmas,
                                                    env.provenance)});
    }
  }
  if (d.theorem1 || d.theorem2) {
    if (s.T != 1) throw ConfigError("one-loop bound checks need T = 1");
    if (!problem.is_finite_sum()) throw ConfigError("one-loop bound checks from a config need a finite-sum problem");
    const double f0 = problem.value_full(w0);
    if (d.theorem1) {
      if (s.regime != Regime::OneLoopConvex) throw ConfigError("theorem1 needs a one_loop_convex schedule");
      result.checks.push_back(
          {"theorem1", 1,
           BoundCheck::evaluate(estimate(finals, config.seed_base), theorem1_bound(c, f0, s.m), d.margin_sigmas,
                                "one-loop convex: E||grad F(w~)||^2 <= (6 L [F(w0) - F*] + 2 sigma*^2) / sqrt(m+1)")});
    }
    if (d.theorem2) {
      if (s.regime != Regime::OneLoopNonConvex) throw ConfigError("theorem2 needs a one_loop_nonconvex schedule");
      RandomStream probe = make_stream(config.seed_base, StreamRole::Probe);
      const double moment = second_moment(problem, w0, probe);
      result.checks.push_back({"theorem2", 1,
                               BoundCheck::evaluate(estimate(finals, config.seed_base),
                                                    theorem2_bound(c, f0, s.eta, s.m, moment), d.margin_sigmas,
                                                    "one-loop nonconvex: E||grad F(w~)||^2 <= 2/(eta (m+1)) [F(w0) - F*] "
                                                    "+ E||grad f(w0; xi)||^2 / sqrt(m+1)")});
    }
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto problem = make_problem(config.problem, config.base_dir);
  const Vector w0 = starting_point(config, problem->dimension());

  ExperimentResult result;
  result.schedule = resolve_schedule(config, *problem, w0);
  const Schedule& s = result.schedule;

  // Thin long loops to about 10^4 rows each unless a full trace is requested.
  const std::int64_t loop_length = config.solver == SolverKind::Sgd ? s.m * s.T : s.m;
  SolverOptions options;
  options.trace.grad_norms = config.grad_norms;
  options.trace.values = config.values;
  options.trace.timing = config.output.timing;
  options.trace.stride = config.output.full_trace ? 1 : std::max<std::int64_t>(1, (loop_length + 9999) / 10000);

  result.runs = parallel_map(config.replications, config.workers, [&](std::int64_t r) {
    RunRecord run;
    run.run_id = r;
    run.seed = config.seed_base + static_cast<std::uint64_t>(r);
    SolverOptions opts = options;
    opts.trace.probe_seed = run.seed;
    RngStreams streams = RngStreams::from_seed(run.seed);
    try {
      auto solved = run_solver(config, *problem, w0, s, streams, opts);
      run.trace = std::move(solved.trace);
      run.w = std::move(solved.w);
      run.final_grad_norm_sq = probe_norm(*problem, run.w, run.seed);
    } catch (const DivergenceError& e) {
      run.trace = e.partial_trace();
      run.diverged = true;
      run.error = e.what();
    }
    return run;
  });

  if (!result.diverged()) add_checks(config, *problem, w0, result);
  return result;
}

// ---------------------------------------------------------------------------------------
// Output

void write_trace_csv(std::ostream& out, const RunRecord& run, SolverKind solver) {
  out << kTraceColumns << '\n';
  auto optional = [](const std::optional<double>& x) { return x ? format_double(*x) : std::string(); };
  for (const auto& step : run.trace.steps) {
    out << run.run_id << ',' << run.seed << ',' << to_string(solver) << ',' << step.stage << ',' << step.t << ','
        << step.grad_evals << ',' << format_double(step.v_norm_sq) << ',' << optional(step.grad_norm_sq) << ','
        << optional(step.value) << ',' << optional(step.wall_time) << '\n';
  }
}

namespace {

json estimate_json(const MonteCarloEstimate& e) {
  return json{{"mean", e.mean}, {"std_error", e.std_error}, {"replications", e.replications}, {"seed_base", e.seed_base}};
}

std::string_view status_name(const ExperimentResult& result) {
  if (result.diverged()) return "diverged";
  return result.checks_passed() ? "pass" : "fail";
}

}  // namespace

json summary_json(const ExperimentConfig& config, const ExperimentResult& result) {
  json j;
  j["schema"] = "isarah-summary";
  j["version"] = 1;
  j["solver"] = std::string(to_string(config.solver));
  j["problem"] = config.problem;
  j["schedule"] = result.schedule;
  j["replications"] = config.replications;
  j["seed_base"] = config.seed_base;

  json runs = json::array();
  std::vector<double> finals;
  for (const auto& run : result.runs) {
    json r{{"run_id", run.run_id}, {"seed", run.seed}, {"grad_evals", run.trace.grad_evals}, {"diverged", run.diverged}};
    if (run.final_grad_norm_sq) {
      r["final_grad_norm_sq"] = *run.final_grad_norm_sq;
      finals.push_back(*run.final_grad_norm_sq);
    }
    if (!run.error.empty()) r["error"] = run.error;
    runs.push_back(std::move(r));
  }
  j["runs"] = std::move(runs);
  if (finals.size() >= 2) j["final_grad_norm_sq"] = estimate_json(MonteCarloEstimate::from_samples(finals, config.seed_base));

  json checks = json::array();
  for (const auto& named : result.checks) {
    checks.push_back(json{{"name", named.name},
                          {"stage", named.stage},
                          {"measured", estimate_json(named.check.measured)},
                          {"bound", named.check.bound},
                          {"margin_sigmas", named.check.margin_sigmas},
                          {"verdict", std::string(to_string(named.check.verdict))},
                          {"provenance", named.check.provenance}});
  }
  j["checks"] = std::move(checks);
  j["status"] = std::string(status_name(result));
  j["exit_code"] = result.exit_code();
  return j;
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
  if (!config.output.trace_dir.empty()) {
    std::filesystem::create_directories(config.output.trace_dir);
    for (const auto& run : result.runs) {
      std::ostringstream name;
      name << "run_" << std::setw(4) << std::setfill('0') << run.run_id << ".csv";
      std::ofstream out(config.output.trace_dir / name.str(), std::ios::binary);
      if (!out) throw ResourceError("cannot write " + (config.output.trace_dir / name.str()).string());
      write_trace_csv(out, run, config.solver);
    }
  }
  if (!config.output.summary.empty()) {
    if (config.output.summary.has_parent_path()) std::filesystem::create_directories(config.output.summary.parent_path());
    std::ofstream out(config.output.summary, std::ios::binary);
    if (!out) throw ResourceError("cannot write " + config.output.summary.string());
    out << summary_json(config, result).dump(2) << '\n';
  }
}

// ---------------------------------------------------------------------------------------
// Canned verification suites

namespace {

struct SuiteContext {
  const VerifyOptions& options;
  std::ostream& out;
  bool ok = true;

  void report(const std::string& suite, const std::string& label, bool passed, const std::string& detail) {
    out << suite << ' ' << label << ": " << (passed ? "pass" : "fail") << " (" << detail << ")\n";
    ok = ok && passed;
  }

  void report(const std::string& suite, const std::string& label, const BoundCheck& check) {
    std::ostringstream detail;
    detail << "mean " << check.measured.mean << " +- " << check.measured.std_error << ", bound " << check.bound;
    report(suite, label, check.passed(), detail.str());
  }

  MonteCarloOptions mc(std::int64_t replications) const {
    MonteCarloOptions m;
    m.replications = replications;
    m.seed_base = options.seed_base;
    m.workers = options.workers;
    return m;
  }
};

QuadraticFiniteSum random_small_quadratic(std::int64_t n, Eigen::Index d, RandomStream& rng) {
  std::uniform_real_distribution<double> curvature(0.5, 2.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  QuadraticFiniteSum::Matrix A(n, d), C(n, d);
  for (std::int64_t i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      A(i, j) = curvature(rng);
      C(i, j) = normal(rng);
    }
  return QuadraticFiniteSum(A, C);
}

QuadraticFiniteSum quadratic_1d(std::vector<double> a, std::vector<double> c) {
  QuadraticFiniteSum::Matrix A(static_cast<Eigen::Index>(a.size()), 1), C(static_cast<Eigen::Index>(c.size()), 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    A(static_cast<Eigen::Index>(i), 0) = a[i];
    C(static_cast<Eigen::Index>(i), 0) = c[i];
  }
  return QuadraticFiniteSum(A, C);
}

void suite_identity(SuiteContext& ctx) {
  RandomStream rng(ctx.options.seed_base + 101);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (std::int64_t n = 1; n <= 4; ++n) {
    const auto problem = random_small_quadratic(n, 3, rng);
    for (int point = 0; point < 5; ++point) {
      Vector w(3);
      for (auto& x : w) x = normal(rng);
      for (std::int64_t b = 1; b <= 4; ++b) {
        const auto id = minibatch_variance_identity(problem, w, b);
        worst = std::max(worst, std::abs(id.lhs - id.rhs));
      }
    }
  }
  std::ostringstream detail;
  detail << "max |lhs - rhs| = " << worst << " over n, b in 1..4, 5 points each";
  ctx.report("identity", "mini-batch variance", worst < 1e-12, detail.str());
}

void suite_prop1(SuiteContext& ctx) {
  for (double kappa : {2.0, 10.0}) {
    RandomStream rng(7);
    const auto problem = make_quadratic(50, 5, kappa, rng);
    const Vector w0 = Vector::Constant(5, 2.0);
    const double eta = 1.0 / *problem.constants().L;
    const auto checks = variance_decay_check(problem, w0, eta, V0Source::mini_batch(10), 20, ctx.mc(1000));
    std::size_t failed = 0;
    for (const auto& c : checks) failed += c.passed() ? 0 : 1;
    std::ostringstream detail;
    detail << checks.size() - failed << "/" << checks.size() << " steps within bound, final mean "
           << checks.back().measured.mean << " vs " << checks.back().bound;
    ctx.report("prop1", "kappa=" + format_double(kappa), failed == 0, detail.str());
  }
}

void suite_thm1(SuiteContext& ctx) {
  const auto problem = quadratic_1d({1.0, 1.0}, {-1.0, 1.0});
  ctx.report("thm1", "two-point quadratic m+1=64",
             theorem1_bound_check(problem, Vector::Constant(1, 3.0), 63, ctx.mc(500)));
}

void suite_thm2(SuiteContext& ctx) {
  const SigmoidSquared problem({-2.0, -0.5, 0.5, 2.0});
  ctx.report("thm2", "sigmoid-squared m=99", theorem2_bound_check(problem, Vector::Constant(1, 1.0), 99, ctx.mc(1000)));
}

void suite_contraction(SuiteContext& ctx) {
  RandomStream rng(5);
  QuadraticOptions q;
  q.shift_scale = 0.3;
  const auto problem = make_quadratic(20, 5, 5.0, rng, q);
  const Vector w0 = Vector::Constant(5, 3.0);
  const double eps = 1e-2;
  const Schedule s = multi_loop_strongly_convex(problem.constants(), eps, start_info(problem, w0, ctx.options.seed_base));
  const auto checks = contraction_check(problem, s, 5, w0, ctx.mc(200), Envelope::Halving);
  for (std::size_t stage = 0; stage < checks.size(); ++stage)
    ctx.report("contraction", "kappa=5 stage " + std::to_string(stage), checks[stage]);
}

void suite_slope(SuiteContext& ctx) {
  const std::vector<double> eps{1e-1, 1e-2, 1e-3};
  SlopeOptions options;
  options.seed_base = ctx.options.seed_base;
  options.workers = ctx.options.workers;

  const auto one_loop = quadratic_1d({1.0, 1.0}, {-0.2, 0.2});
  const auto convex = complexity_slope(one_loop, Vector::Constant(1, 0.3), Regime::OneLoopConvex, eps, options);
  ctx.report("slope", "one-loop convex", convex.slope >= 1.7 && convex.slope <= 2.3,
             "slope " + format_double(convex.slope) + ", expected in [1.7, 2.3]");

  const double t = 2.5;
  const auto multi = quadratic_1d({2.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0}, {t, -t, t, -t});
  const auto strongly = complexity_slope(multi, Vector::Constant(1, 100.0), Regime::MultiLoopStronglyConvex, eps, options);
  ctx.report("slope", "multi-loop strongly convex", strongly.slope >= 0.7 && strongly.slope <= 1.3,
             "slope " + format_double(strongly.slope) + ", expected in [0.7, 1.3]");
}

}  // namespace

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names{"identity", "prop1", "thm1", "thm2", "contraction", "slope", "all"};
  return names;
}

bool run_verify_suite(const std::string& name, const VerifyOptions& options, std::ostream& out) {
  const auto& names = verify_suite_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw InvalidArgument("unknown verify suite '" + name + "'");
  SuiteContext ctx{options, out};
  const bool all = name == "all";
  if (all || name == "identity") suite_identity(ctx);
  if (all || name == "prop1") suite_prop1(ctx);
  if (all || name == "thm1") suite_thm1(ctx);
  if (all || name == "thm2") suite_thm2(ctx);
  if (all || name == "contraction") suite_contraction(ctx);
  if (all || name == "slope") suite_slope(ctx);
  return ctx.ok;
}

}  // namespace isarah
