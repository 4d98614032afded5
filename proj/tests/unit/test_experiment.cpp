#include "isarah/errors.hpp"
#include "isarah/experiment.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace isarah;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("isarah_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

json quadratic_config() {
  return json{{"problem", {{"type", "quadratic"}, {"n", 20}, {"d", 3}, {"kappa", 4.0}, {"seed", 3}}},
              {"w0", 1.0},
              {"solver", "isarah"},
              {"schedule", {{"eta", 0.05}, {"m", 30}, {"b", 4}, {"T", 2}, {"regime", "multi_loop_strongly_convex"}}},
              {"replications", 3},
              {"seed_base", 11},
              {"workers", 1}};
}

#ifdef ISARAH_CLI_PATH
int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ISARAH_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

TEST_CASE("format_double round-trips") {
  for (double x : {0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5}) CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("config validation") {
  SUBCASE("valid config parses") { CHECK_NOTHROW(ExperimentConfig::from_json(quadratic_config())); }
  SUBCASE("schedule and regime together") {
    auto j = quadratic_config();
    j["regime"] = "one_loop_convex";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("neither schedule nor regime") {
    auto j = quadratic_config();
    j.erase("schedule");
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("unknown key") {
    auto j = quadratic_config();
    j["replicatons"] = 4;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("bad solver") {
    auto j = quadratic_config();
    j["solver"] = "adam";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("non-positive schedule entries") {
    auto j = quadratic_config();
    j["schedule"]["b"] = 0;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("regime without epsilon or m") {
    auto j = quadratic_config();
    j.erase("schedule");
    j["regime"] = "one_loop_convex";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("epsilon takes precedence over m") {
    auto j = quadratic_config();
    j.erase("schedule");
    j["regime"] = "one_loop_convex";
    j["epsilon"] = 0.5;
    j["m"] = 7;
    const auto c = ExperimentConfig::from_json(j);
    CHECK(c.epsilon.has_value());
    CHECK_FALSE(c.m.has_value());
  }
  SUBCASE("diagnostics need two replications") {
    auto j = quadratic_config();
    j["replications"] = 1;
    j["diagnostics"] = {{"contraction", true}};
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("w0 of the wrong dimension") {
    auto j = quadratic_config();
    j["w0"] = {1.0, 2.0};
    const auto c = ExperimentConfig::from_json(j);
    CHECK_THROWS_AS(run_experiment(c), ConfigError);
  }
  SUBCASE("unknown problem type") {
    auto j = quadratic_config();
    j["problem"] = {{"type", "rosenbrock"}};
    const auto c = ExperimentConfig::from_json(j);
    CHECK_THROWS_AS(run_experiment(c), ConfigError);
  }
}

TEST_CASE("shipped configs validate") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(ISARAH_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(ExperimentConfig::load(entry.path()));
    ++count;
  }
  CHECK(count >= 4);
}

TEST_CASE("traces are identical across reruns and worker counts") {
  auto j = quadratic_config();
  const auto a = run_experiment(ExperimentConfig::from_json(j));
  j["workers"] = 3;
  const auto b = run_experiment(ExperimentConfig::from_json(j));
  REQUIRE(a.runs.size() == b.runs.size());
  for (std::size_t r = 0; r < a.runs.size(); ++r) {
    std::ostringstream x, y;
    write_trace_csv(x, a.runs[r], SolverKind::Isarah);
    write_trace_csv(y, b.runs[r], SolverKind::Isarah);
    CHECK(x.str() == y.str());
    CHECK(a.runs[r].seed == 11 + r);
  }
}

TEST_CASE("trace CSV layout") {
  const auto result = run_experiment(ExperimentConfig::from_json(quadratic_config()));
  std::ostringstream out;
  write_trace_csv(out, result.runs[0], SolverKind::Isarah);
  std::istringstream lines(out.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK(header == kTraceColumns);
  CHECK(first.rfind("0,11,isarah,1,0,", 0) == 0);
  // Two stages of m = 30 steps each.
  CHECK(result.runs[0].trace.steps.size() == 60);
  CHECK(result.runs[0].trace.grad_evals == 2 * (4 + 2 * 29));
}

TEST_CASE("summary JSON") {
  auto j = quadratic_config();
  j["schedule"]["epsilon"] = 1e3;
  j["diagnostics"] = {{"target", true}};
  const auto config = ExperimentConfig::from_json(j);
  const auto result = run_experiment(config);
  const json s = summary_json(config, result);
  CHECK(s["schema"] == "isarah-summary");
  CHECK(s["runs"].size() == 3);
  CHECK(s["checks"].size() == 1);
  CHECK(s["checks"][0]["name"] == "target");
  CHECK(s["status"] == "pass");
  CHECK(s["exit_code"] == 0);
  CHECK(s["schedule"]["m"] == 30);
  CHECK(s["final_grad_norm_sq"]["replications"] == 3);
}

TEST_CASE("a missed target fails with exit code 1") {
  auto j = quadratic_config();
  j["schedule"]["epsilon"] = 1e-30;
  j["schedule"]["m"] = 2;
  j["replications"] = 10;
  j["diagnostics"] = {{"target", true}};
  const auto result = run_experiment(ExperimentConfig::from_json(j));
  CHECK_FALSE(result.checks_passed());
  CHECK(result.exit_code() == 1);
}

TEST_CASE("divergence gives exit code 3 and keeps the partial trace") {
  auto j = quadratic_config();
  j["schedule"]["eta"] = 1e160;
  const auto result = run_experiment(ExperimentConfig::from_json(j));
  CHECK(result.diverged());
  CHECK(result.exit_code() == 3);
  CHECK_FALSE(result.runs[0].error.empty());
  CHECK_FALSE(result.runs[0].trace.steps.empty());
}

TEST_CASE("derived schedules") {
  auto j = quadratic_config();
  j.erase("schedule");
  j["regime"] = "one_loop_convex";
  j["m"] = 15;
  const auto config = ExperimentConfig::from_json(j);
  const auto problem = make_problem(config.problem, {});
  const auto s = resolve_schedule(config, *problem, starting_point(config, 3));
  CHECK(s.m == 15);
  CHECK(s.b == 8);  // ceil(2 sqrt(16))
  CHECK(s.eta == doctest::Approx(1.0 / (*problem->constants().L * 4.0)));
}

#ifdef ISARAH_CLI_PATH

TEST_CASE("cli: run writes byte-identical traces on rerun") {
  TempDir dir("cli_rerun");
  auto j = quadratic_config();
  j["output"] = {{"trace_dir", "traces"}, {"summary", "summary.json"}};
  write_json(dir.path / "exp.json", j);
  REQUIRE(cli("run " + (dir.path / "exp.json").string(), dir.path / "log1") == 0);
  const std::string first = slurp(dir.path / "traces" / "run_0002.csv");
  const std::string summary = slurp(dir.path / "summary.json");
  REQUIRE_FALSE(first.empty());
  REQUIRE(cli("run " + (dir.path / "exp.json").string() + " --workers 2", dir.path / "log2") == 0);
  CHECK(slurp(dir.path / "traces" / "run_0002.csv") == first);
  CHECK(slurp(dir.path / "summary.json") == summary);
}

TEST_CASE("cli: exit codes") {
  TempDir dir("cli_exit");
  auto j = quadratic_config();

  auto both = j;
  both["regime"] = "one_loop_convex";
  write_json(dir.path / "both.json", both);
  CHECK(cli("run " + (dir.path / "both.json").string(), dir.path / "log") == 2);

  auto diverge = j;
  diverge["schedule"]["eta"] = 1e160;
  write_json(dir.path / "diverge.json", diverge);
  CHECK(cli("run " + (dir.path / "diverge.json").string(), dir.path / "log") == 3);

  auto miss = j;
  miss["schedule"]["epsilon"] = 1e-30;
  miss["schedule"]["m"] = 2;
  miss["replications"] = 10;
  miss["diagnostics"] = {{"target", true}};
  write_json(dir.path / "miss.json", miss);
  CHECK(cli("run " + (dir.path / "miss.json").string(), dir.path / "log") == 1);

  CHECK(cli("verify nonsense", dir.path / "log") == 2);
  CHECK(cli("frobnicate", dir.path / "log") == 2);
  CHECK(cli("run " + (dir.path / "missing.json").string(), dir.path / "log") == 2);
  CHECK(cli("schedule --regime one_loop_convex --L 1", dir.path / "log") == 2);
  CHECK(cli("verify identity", dir.path / "log") == 0);
}

TEST_CASE("cli: schedule output pastes into a config") {
  TempDir dir("cli_schedule");
  REQUIRE(cli("schedule --regime one_loop_convex --L 2 --m 24", dir.path / "sched.json") == 0);
  const json printed = json::parse(slurp(dir.path / "sched.json"));
  CHECK(printed["m"] == 24);
  CHECK(printed["b"] == 10);
  CHECK(printed["eta"].get<double>() == doctest::Approx(0.1));

  auto derived = quadratic_config();
  derived.erase("schedule");
  derived["regime"] = "one_loop_convex";
  derived["m"] = 24;
  derived["output"] = {{"trace_dir", "derived"}};
  write_json(dir.path / "derived.json", derived);
  REQUIRE(cli("schedule --config " + (dir.path / "derived.json").string(), dir.path / "derived_sched.json") == 0);

  auto pasted = quadratic_config();
  pasted["schedule"] = json::parse(slurp(dir.path / "derived_sched.json"));
  pasted["output"] = {{"trace_dir", "pasted"}};
  write_json(dir.path / "pasted.json", pasted);

  REQUIRE(cli("run " + (dir.path / "derived.json").string(), dir.path / "log") == 0);
  REQUIRE(cli("run " + (dir.path / "pasted.json").string(), dir.path / "log") == 0);
  for (const char* name : {"run_0000.csv", "run_0001.csv", "run_0002.csv"})
    CHECK(slurp(dir.path / "derived" / name) == slurp(dir.path / "pasted" / name));
}

TEST_CASE("cli: eps takes precedence over m") {
  TempDir dir("cli_precedence");
  REQUIRE(cli("schedule --regime one_loop_convex --L 1 --sigma-star-sq 0.5 --f-star 0 --f0 1 --eps 0.5 --m 3",
              dir.path / "a.json") == 0);
  REQUIRE(cli("schedule --regime one_loop_convex --L 1 --sigma-star-sq 0.5 --f-star 0 --f0 1 --eps 0.5",
              dir.path / "b.json") == 0);
  CHECK(slurp(dir.path / "a.json") == slurp(dir.path / "b.json"));
  // m + 1 = ceil((6 + 1)^2 / 0.25) = 196
  CHECK(json::parse(slurp(dir.path / "a.json"))["m"] == 195);
}

TEST_CASE("cli: strongly convex multi-loop run passes its contraction checks") {
  TempDir dir("cli_msc");
  const json j{{"problem", {{"type", "quadratic"}, {"n", 50}, {"d", 5}, {"kappa", 10.0}, {"seed", 1}}},
               {"w0", 1.0},
               {"regime", "multi_loop_strongly_convex"},
               {"epsilon", 1e-2},
               {"replications", 100},
               {"seed_base", 0},
               {"diagnostics", {{"contraction", true}, {"target", true}}},
               {"output", {{"summary", "summary.json"}}}};
  write_json(dir.path / "msc.json", j);
  CHECK(cli("run " + (dir.path / "msc.json").string(), dir.path / "log") == 0);
  const json s = json::parse(slurp(dir.path / "summary.json"));
  CHECK(s["status"] == "pass");
  CHECK(s["schedule"]["m"] == 199);
}

#endif
