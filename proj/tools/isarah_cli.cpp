// isarah: run seeded solver ensembles, canned verification suites and schedule derivation.
//
//   isarah run CONFIG [--workers N]
//   isarah verify SUITE [--seed S] [--workers N]
//   isarah schedule --regime R [--L ...] [--eps E | --m M]
//
// Exit codes: 0 pass, 1 check failure, 2 usage or configuration error, 3 divergence.
// ISARAH_WORKERS sets the default worker count.

#include "isarah/errors.hpp"
#include "isarah/experiment.hpp"
#include "isarah/problems.hpp"
#include "isarah/schedules.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

int run_command(const std::string& config_path, std::optional<int> workers) {
  auto config = isarah::ExperimentConfig::load(config_path);
  if (workers) config.workers = *workers;
  const auto result = isarah::run_experiment(config);
  isarah::write_outputs(config, result);

  for (const auto& named : result.checks) {
    const auto& c = named.check;
    std::cout << named.name << " stage " << named.stage << ": " << isarah::to_string(c.verdict) << " (mean "
              << c.measured.mean << " +- " << c.measured.std_error << ", bound " << c.bound << ")\n";
  }
  for (const auto& run : result.runs)
    if (run.diverged) std::cerr << "run " << run.run_id << " (seed " << run.seed << "): " << run.error << '\n';

  const int code = result.exit_code();
  std::cout << "status: " << (code == 0 ? "pass" : code == 3 ? "diverged" : "fail") << " (" << result.runs.size()
            << " runs, " << result.checks.size() << " checks)\n";
  return code;
}

int verify_command(const std::string& suite, std::uint64_t seed, std::optional<int> workers) {
  isarah::VerifyOptions options;
  options.seed_base = seed;
  if (workers) options.workers = *workers;
  const bool ok = isarah::run_verify_suite(suite, options, std::cout);
  std::cout << "verify " << suite << ": " << (ok ? "pass" : "fail") << '\n';
  return ok ? kExitPass : kExitCheckFailed;
}

struct ScheduleFlags {
  std::string regime;
  std::string config;
  std::optional<double> L, mu, sigma_star_sq, M, N, f_star, f0, grad0_sq, eps;
  std::optional<std::int64_t> m;
};

int schedule_command(const ScheduleFlags& f) {
  isarah::Schedule schedule;
  if (!f.config.empty()) {
    const auto config = isarah::ExperimentConfig::load(f.config);
    const auto problem = isarah::make_problem(config.problem, config.base_dir);
    const isarah::Vector w0 = isarah::starting_point(config, problem->dimension());
    schedule = isarah::resolve_schedule(config, *problem, w0);
  } else {
    if (f.regime.empty()) throw isarah::ConfigError("--regime or --config is required");
    const isarah::Regime regime = isarah::parse_regime(f.regime);
    isarah::ProblemConstants c;
    c.L = f.L;
    c.mu = f.mu;
    c.sigma_star_sq = f.sigma_star_sq;
    c.M = f.M;
    c.N = f.N;
    c.f_star = f.f_star;
    c.validate();
    if (!f.eps && !f.m) throw isarah::ConfigError("give --eps or --m");
    if (f.m && !f.eps) {
      if (regime == isarah::Regime::OneLoopConvex) {
        schedule = isarah::one_loop_convex(c, *f.m);
      } else if (regime == isarah::Regime::OneLoopNonConvex) {
        schedule = isarah::one_loop_nonconvex(c, *f.m);
      } else {
        throw isarah::ConfigError("--m only parameterizes one-loop regimes");
      }
    } else {
      schedule = isarah::schedule_for_epsilon(regime, c, *f.eps, isarah::StartInfo{f.f0, f.grad0_sq});
    }
  }
  std::cout << nlohmann::json(schedule).dump(2) << '\n';
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inexact SARAH solvers, schedules and diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "isarah 0.1.0");

  std::optional<int> workers;

  auto* run = app.add_subcommand("run", "Run the experiment declared in a JSON config");
  std::string config_path;
  run->add_option("config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  run->add_option("--workers", workers, "Worker threads (default: ISARAH_WORKERS or all cores)")
      ->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Run a canned diagnostic suite");
  std::string suite;
  std::uint64_t seed = 0;
  verify->add_option("suite", suite, "identity, prop1, thm1, thm2, contraction, slope or all")->required();
  verify->add_option("--seed", seed, "Seed base for the Monte-Carlo ensembles");
  verify->add_option("--workers", workers, "Worker threads (default: ISARAH_WORKERS or all cores)")
      ->check(CLI::PositiveNumber);

  auto* sched = app.add_subcommand("schedule", "Print the (eta, m, b, T) schedule for a regime as JSON");
  ScheduleFlags flags;
  sched->add_option("--regime", flags.regime,
                    "one_loop_convex, one_loop_nonconvex, multi_loop_strongly_convex or multi_loop_convex_mn");
  sched->add_option("--config", flags.config, "Derive the schedule of an experiment config instead")
      ->check(CLI::ExistingFile);
  sched->add_option("--L", flags.L, "Smoothness constant");
  sched->add_option("--mu", flags.mu, "Strong convexity modulus");
  sched->add_option("--sigma-star-sq", flags.sigma_star_sq, "E||grad f(w*; xi)||^2");
  sched->add_option("--M", flags.M, "Growth bound M");
  sched->add_option("--N", flags.N, "Growth bound N");
  sched->add_option("--f-star", flags.f_star, "Optimal value or lower bound F*");
  sched->add_option("--f0", flags.f0, "F(w0)");
  sched->add_option("--grad0-sq", flags.grad0_sq, "||grad F(w0)||^2, sets the number of stages T");
  sched->add_option("--eps", flags.eps, "Target accuracy");
  sched->add_option("--m", flags.m, "Inner loop size (one-loop regimes); --eps takes precedence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (*run) return run_command(config_path, workers);
    if (*verify) return verify_command(suite, seed, workers);
    return schedule_command(flags);
  } catch (const isarah::NonConvergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
