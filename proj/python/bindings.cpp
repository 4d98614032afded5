#include "isarah/diagnostics.hpp"
#include "isarah/errors.hpp"
#include "isarah/experiment.hpp"
#include "isarah/libsvm.hpp"
#include "isarah/problems.hpp"
#include "isarah/schedules.hpp"
#include "isarah/solvers.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace isarah;

namespace {

py::dict constants_dict(const ProblemConstants& c) {
  py::dict d;
  d["L"] = c.L;
  d["mu"] = c.mu;
  d["sigma_star_sq"] = c.sigma_star_sq;
  d["M"] = c.M;
  d["N"] = c.N;
  d["n_components"] = c.n_components;
  d["f_star"] = c.f_star;
  d["w_star"] = c.w_star;
  d["kappa"] = c.kappa();
  return d;
}

ProblemConstants constants_from(const py::dict& d) {
  ProblemConstants c;
  auto get = [&](const char* key) -> std::optional<double> {
    if (!d.contains(key) || d[key].is_none()) return std::nullopt;
    return d[key].cast<double>();
  };
  c.L = get("L");
  c.mu = get("mu");
  c.sigma_star_sq = get("sigma_star_sq");
  c.M = get("M");
  c.N = get("N");
  c.f_star = get("f_star");
  c.validate();
  return c;
}

py::dict trace_dict(const SolverResult& r) {
  py::list t, v_norm_sq, grad_norm_sq, evals, stage;
  for (const auto& s : r.trace.steps) {
    stage.append(s.stage);
    t.append(s.t);
    v_norm_sq.append(s.v_norm_sq);
    grad_norm_sq.append(s.grad_norm_sq ? py::cast(*s.grad_norm_sq) : py::none());
    evals.append(s.grad_evals);
  }
  py::list selected;
  for (const auto& s : r.trace.stages) selected.append(s.selected_t);
  py::dict d;
  d["w"] = r.w;
  d["stage"] = stage;
  d["t"] = t;
  d["v_norm_sq"] = v_norm_sq;
  d["grad_norm_sq"] = grad_norm_sq;
  d["grad_evals"] = evals;
  d["selected_t"] = selected;
  d["total_grad_evals"] = r.trace.grad_evals;
  return d;
}

SolverOptions options(bool grad_norms, std::int64_t stride) {
  SolverOptions o;
  o.trace.grad_norms = grad_norms;
  o.trace.stride = stride;
  return o;
}

py::dict check_dict(const BoundCheck& c) {
  py::dict d;
  d["mean"] = c.measured.mean;
  d["std_error"] = c.measured.std_error;
  d["replications"] = c.measured.replications;
  d["bound"] = c.bound;
  d["margin_sigmas"] = c.margin_sigmas;
  d["passed"] = c.passed();
  d["provenance"] = c.provenance;
  return d;
}

MonteCarloOptions mc(std::int64_t replications, std::uint64_t seed, double margin, int workers) {
  MonteCarloOptions o;
  o.replications = replications;
  o.seed_base = seed;
  o.margin_sigmas = margin;
  o.workers = workers;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Inexact SARAH and variance-reduced baselines";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<MissingConstant>(m, "MissingConstant", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ScheduleInvalid>(m, "ScheduleInvalid", base.ptr());
  py::register_exception<NonConvergence>(m, "NonConvergence", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  py::class_<StochasticProblem>(m, "Problem")
      .def_property_readonly("name", &StochasticProblem::name)
      .def_property_readonly("dimension", &StochasticProblem::dimension)
      .def_property_readonly("num_components", &StochasticProblem::num_components)
      .def_property_readonly("constants", [](const StochasticProblem& p) { return constants_dict(p.constants()); })
      .def("grad_sample", [](const StochasticProblem& p, const Vector& w,
                             std::uint64_t xi) { return p.grad_sample(w, SampleId{xi}); })
      .def("value_sample", [](const StochasticProblem& p, const Vector& w,
                              std::uint64_t xi) { return p.value_sample(w, SampleId{xi}); })
      .def("grad_full", &StochasticProblem::grad_full)
      .def("value_full", &StochasticProblem::value_full);

  py::class_<QuadraticFiniteSum, StochasticProblem>(m, "Quadratic")
      .def(py::init<QuadraticFiniteSum::Matrix, QuadraticFiniteSum::Matrix>(), py::arg("diagonals"), py::arg("shifts"));
  m.def(
      "make_quadratic",
      [](std::int64_t n, Eigen::Index d, double kappa, std::uint64_t seed, double shift_scale) {
        RandomStream rng(seed);
        QuadraticOptions o;
        o.shift_scale = shift_scale;
        return make_quadratic(n, d, kappa, rng, o);
      },
      py::arg("n"), py::arg("d"), py::arg("kappa"), py::arg("seed") = 0, py::arg("shift_scale") = 1.0);

  py::class_<LogisticProblem, StochasticProblem>(m, "Logistic")
      .def("set_reference_solution", &LogisticProblem::set_reference_solution);
  m.def(
      "load_libsvm",
      [](const std::filesystem::path& path, double lambda, bool solve) {
        auto p = std::make_unique<LogisticProblem>(load_libsvm(path, lambda));
        if (solve) p->set_reference_solution(solve_reference(*p, Vector::Zero(p->dimension()), 1e-10));
        return p;
      },
      py::arg("path"), py::arg("lam"), py::arg("solve_reference") = true);

  py::class_<ModifiedLogistic1D, StochasticProblem>(m, "ModifiedLogistic").def(py::init<double>(), py::arg("lam"));
  py::class_<NoisyQuadratic, StochasticProblem>(m, "NoisyQuadratic")
      .def(py::init<Vector, Vector, double, double>(), py::arg("curvature"), py::arg("center"), py::arg("noise"),
           py::arg("rho") = 0.0);
  py::class_<SigmoidSquared, StochasticProblem>(m, "SigmoidSquared")
      .def(py::init<std::vector<double>>(), py::arg("offsets"));

  // Solvers. Each returns a dict with the final iterate and the per-step trace.
  m.def(
      "isarah",
      [](const StochasticProblem& p, const Vector& w0, double eta, std::int64_t m_, std::int64_t b, std::int64_t T,
         std::uint64_t seed, bool grad_norms, std::int64_t stride) {
        auto streams = RngStreams::from_seed(seed);
        return trace_dict(isarah_outer(p, w0, eta, m_, b, T, streams, options(grad_norms, stride)));
      },
      py::arg("problem"), py::arg("w0"), py::arg("eta"), py::arg("m"), py::arg("b"), py::arg("T") = 1,
      py::arg("seed") = 0, py::arg("grad_norms") = false, py::arg("stride") = 1);
  m.def(
      "sarah",
      [](const StochasticProblem& p, const Vector& w0, double eta, std::int64_t m_, std::uint64_t seed,
         bool grad_norms) {
        auto streams = RngStreams::from_seed(seed);
        return trace_dict(sarah_exact_inner(p, w0, eta, m_, streams, options(grad_norms, 1)));
      },
      py::arg("problem"), py::arg("w0"), py::arg("eta"), py::arg("m"), py::arg("seed") = 0,
      py::arg("grad_norms") = false);
  m.def(
      "svrg",
      [](const StochasticProblem& p, const Vector& w0, double eta, std::int64_t m_, std::int64_t b, std::uint64_t seed,
         bool grad_norms) {
        auto streams = RngStreams::from_seed(seed);
        return trace_dict(svrg_inner(p, w0, eta, m_, b, streams, options(grad_norms, 1)));
      },
      py::arg("problem"), py::arg("w0"), py::arg("eta"), py::arg("m"), py::arg("b"), py::arg("seed") = 0,
      py::arg("grad_norms") = false);
  m.def(
      "sgd",
      [](const StochasticProblem& p, const Vector& w0, double eta, std::int64_t steps, std::int64_t b, double decay,
         std::uint64_t seed, bool grad_norms) {
        auto streams = RngStreams::from_seed(seed);
        const auto rule = decay > 0.0 ? inverse_time_step(eta, decay) : constant_step(eta);
        return trace_dict(sgd(p, w0, rule, steps, b, streams, options(grad_norms, 1)));
      },
      py::arg("problem"), py::arg("w0"), py::arg("eta"), py::arg("steps"), py::arg("b") = 1, py::arg("decay") = 0.0,
      py::arg("seed") = 0, py::arg("grad_norms") = false);

  // Schedules are exchanged as JSON-compatible dicts.
  auto to_py = [](const Schedule& s) { return py::module_::import("json").attr("loads")(nlohmann::json(s).dump()); };
  m.def(
      "schedule",
      [to_py](const std::string& regime, const py::dict& constants, std::optional<double> eps,
              std::optional<std::int64_t> m_, std::optional<double> f0, std::optional<double> grad0_sq) {
        const Regime r = parse_regime(regime);
        const ProblemConstants c = constants_from(constants);
        if (eps) return to_py(schedule_for_epsilon(r, c, *eps, StartInfo{f0, grad0_sq}));
        if (!m_) throw InvalidArgument("give eps or m");
        if (r == Regime::OneLoopConvex) return to_py(one_loop_convex(c, *m_));
        if (r == Regime::OneLoopNonConvex) return to_py(one_loop_nonconvex(c, *m_));
        throw InvalidArgument("m only parameterizes one-loop regimes");
      },
      py::arg("regime"), py::arg("constants"), py::arg("eps") = py::none(), py::arg("m") = py::none(),
      py::arg("f0") = py::none(), py::arg("grad0_sq") = py::none());
  m.def(
      "theorem3_alpha",
      [](double eta, double m_, double b, const py::dict& c) { return theorem3_alpha(eta, m_, b, constants_from(c)).alpha; },
      py::arg("eta"), py::arg("m"), py::arg("b"), py::arg("constants"));
  m.def(
      "theorem4_alpha_c",
      [](double eta, double m_, double b, const py::dict& c) {
        return theorem4_alpha_c(eta, m_, b, constants_from(c)).alpha;
      },
      py::arg("eta"), py::arg("m"), py::arg("b"), py::arg("constants"));

  // Diagnostics.
  m.def(
      "minibatch_variance_identity",
      [](const StochasticProblem& p, const Vector& w, std::int64_t b) {
        const auto id = minibatch_variance_identity(p, w, b);
        return py::make_tuple(id.lhs, id.rhs);
      },
      py::arg("problem"), py::arg("w"), py::arg("b"));
  m.def(
      "theorem1_bound_check",
      [](const StochasticProblem& p, const Vector& w0, std::int64_t m_, std::int64_t reps, std::uint64_t seed,
         double margin, int workers) { return check_dict(theorem1_bound_check(p, w0, m_, mc(reps, seed, margin, workers))); },
      py::arg("problem"), py::arg("w0"), py::arg("m"), py::arg("replications") = 1000, py::arg("seed") = 0,
      py::arg("margin_sigmas") = 4.0, py::arg("workers") = 0);
  m.def(
      "theorem2_bound_check",
      [](const StochasticProblem& p, const Vector& w0, std::int64_t m_, std::int64_t reps, std::uint64_t seed,
         double margin, int workers) { return check_dict(theorem2_bound_check(p, w0, m_, mc(reps, seed, margin, workers))); },
      py::arg("problem"), py::arg("w0"), py::arg("m"), py::arg("replications") = 1000, py::arg("seed") = 0,
      py::arg("margin_sigmas") = 4.0, py::arg("workers") = 0);
  m.def(
      "grad_fd_check", &grad_fd_check, py::arg("problem"), py::arg("num_points"), py::arg("seed") = 0,
      py::arg("scale") = 1.0);

  // Experiments from a JSON config string; returns the summary as a dict.
  m.def(
      "run_experiment",
      [](const std::string& config_json, const std::filesystem::path& base_dir) {
        const auto config = ExperimentConfig::from_json(nlohmann::json::parse(config_json), base_dir);
        ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = run_experiment(config);
        }
        write_outputs(config, result);
        return py::module_::import("json").attr("loads")(summary_json(config, result).dump());
      },
      py::arg("config_json"), py::arg("base_dir") = std::filesystem::path("."));
  m.def(
      "verify",
      [](const std::string& suite, std::uint64_t seed, int workers) {
        VerifyOptions o;
        o.seed_base = seed;
        o.workers = workers;
        std::ostringstream out;
        bool ok = false;
        {
          py::gil_scoped_release release;
          ok = run_verify_suite(suite, o, out);
        }
        return py::make_tuple(ok, out.str());
      },
      py::arg("suite"), py::arg("seed") = 0, py::arg("workers") = 0);
}
