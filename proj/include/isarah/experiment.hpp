#pragma once

#include "isarah/diagnostics.hpp"
#include "isarah/schedules.hpp"
#include "isarah/solvers.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace isarah {

enum class SolverKind { Isarah, Sarah, Svrg, Sgd };
std::string_view to_string(SolverKind kind);
SolverKind parse_solver(std::string_view name);

/// Builds a problem from its config object, e.g. {"type": "quadratic", "n": 50, "d": 5,
/// "kappa": 10, "seed": 1}. Relative paths resolve against base_dir. Throws ConfigError.
std::unique_ptr<StochasticProblem> make_problem(const nlohmann::json& spec, const std::filesystem::path& base_dir);

struct OutputOptions {
  std::filesystem::path trace_dir;  // one CSV per run; empty disables traces
  std::filesystem::path summary;    // JSON summary; empty disables it
  bool full_trace = false;          // keep every step even when m > 10^4
  bool timing = false;              // fill the wall_time column
};

struct DiagnosticsToggles {
  bool target = false;       // E||grad F(w_final)||^2 <= eps
  bool contraction = false;  // per-stage envelope for multi-loop schedules
  bool theorem1 = false;     // one-loop convex bound
  bool theorem2 = false;     // one-loop nonconvex bound
  double margin_sigmas = 4.0;
};

struct ExperimentConfig {
  nlohmann::json problem;
  nlohmann::json w0 = 0.0;  // scalar fill or explicit array
  SolverKind solver = SolverKind::Isarah;
  std::optional<Schedule> schedule;  // explicit (eta, m, b, T)
  std::optional<Regime> regime;      // derived schedule: regime + epsilon, or regime + m for one-loop regimes
  std::optional<double> epsilon;
  std::optional<std::int64_t> m;
  std::optional<double> step_decay;  // sgd: eta_k = eta / (1 + decay k)
  std::int64_t replications = 1;
  std::uint64_t seed_base = 0;
  bool grad_norms = true;  // trace ||grad F(w_t)||^2
  bool values = false;     // trace F(w_t)
  OutputOptions output;
  DiagnosticsToggles diagnostics;
  int workers = 0;
  std::filesystem::path base_dir;

  /// Validates and converts a parsed config. Throws ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Starting point of the config for a problem of the given dimension.
Vector starting_point(const ExperimentConfig& config, Eigen::Index dimension);

/// F(w_0) (finite sums) and ||grad F(w_0)||^2 (probe seeded with seed_base elsewhere).
StartInfo start_info(const StochasticProblem& problem, const Vector& w0, std::uint64_t seed_base,
                     std::int64_t probe_samples = 10000);

/// The schedule a config runs with: explicit, or derived from its regime.
Schedule resolve_schedule(const ExperimentConfig& config, const StochasticProblem& problem, const Vector& w0);

struct RunRecord {
  std::int64_t run_id = 0;
  std::uint64_t seed = 0;
  RunTrace trace;
  Vector w;
  std::optional<double> final_grad_norm_sq;
  bool diverged = false;
  std::string error;
};

struct NamedCheck {
  std::string name;
  std::int64_t stage = 0;
  BoundCheck check;
};

struct ExperimentResult {
  Schedule schedule;
  std::vector<RunRecord> runs;
  std::vector<NamedCheck> checks;

  bool diverged() const;
  bool checks_passed() const;
  /// 0 pass, 1 check failure, 3 divergence.
  int exit_code() const;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Fixed column order of the trace CSV.
inline constexpr const char* kTraceColumns =
    "run_id,seed,solver,stage,t,grad_evals,v_norm_sq,grad_norm_sq,value,wall_time";

void write_trace_csv(std::ostream& out, const RunRecord& run, SolverKind solver);
nlohmann::json summary_json(const ExperimentConfig& config, const ExperimentResult& result);
/// Writes traces and summary as configured.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

struct VerifyOptions {
  std::uint64_t seed_base = 0;
  int workers = 0;
};

/// Suite names accepted by run_verify_suite.
const std::vector<std::string>& verify_suite_names();

/// Runs a canned diagnostic bundle (identity, prop1, thm1, thm2, contraction, slope, all),
/// printing one line per check. Returns true iff everything passed. Unknown names throw
/// InvalidArgument.
bool run_verify_suite(const std::string& name, const VerifyOptions& options, std::ostream& out);

}  // namespace isarah
