#include "isarah/diagnostics.hpp"
#include "isarah/errors.hpp"
#include "isarah/problems.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

using namespace isarah;
using isarah::test::id;
using isarah::test::quad_1d;
using isarah::test::vec;

namespace {

Vector random_point(RandomStream& rng, Eigen::Index d, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector w(d);
  for (auto& x : w) x = normal(rng);
  return w;
}

LabeledDataset small_dataset() {
  // Four rows in R^3, not linearly separable, so the unregularized optimum is finite too.
  LabeledDataset data;
  data.row_offsets = {0, 2, 4, 6, 8};
  data.columns = {0, 1, 1, 2, 0, 2, 0, 1};
  data.values = {1.0, 0.5, -1.0, 2.0, 0.3, -0.7, -1.2, 0.4};
  data.labels = {1, -1, 1, -1};
  data.dimension = 3;
  return data;
}

std::vector<std::unique_ptr<StochasticProblem>> builtin_problems() {
  std::vector<std::unique_ptr<StochasticProblem>> out;
  auto rng = make_stream(21, StreamRole::Probe);
  out.push_back(std::make_unique<QuadraticFiniteSum>(make_quadratic(30, 4, 10.0, rng)));
  auto logistic = std::make_unique<LogisticProblem>(small_dataset(), 0.05);
  logistic->set_reference_solution(solve_reference(*logistic, Vector::Zero(3), 1e-12));
  out.push_back(std::move(logistic));
  out.push_back(std::make_unique<ModifiedLogistic1D>(0.3));
  out.push_back(std::make_unique<NoisyQuadratic>(vec({1.0, 4.0}), vec({0.5, -1.0}), 0.6, 0.25));
  out.push_back(std::make_unique<SigmoidSquared>(std::vector<double>{-1.0, 0.0, 2.0}));
  return out;
}

}  // namespace

TEST_CASE("quadratic constants in closed form") {
  SUBCASE("single identity component") {
    QuadraticFiniteSum::Matrix A(1, 2), C(1, 2);
    A << 1, 1;
    C << 0.5, -2;
    const QuadraticFiniteSum p(A, C);
    const auto& c = p.constants();
    CHECK(*c.kappa() == 1.0);
    CHECK(*c.sigma_star_sq == 0.0);
    CHECK((*c.w_star - vec({0.5, -2})).norm() == 0.0);
  }
  SUBCASE("a = (1, 3), common center") {
    const auto p = quad_1d({1, 3});
    const auto& c = p.constants();
    CHECK(*c.L == 3.0);
    CHECK(*c.mu == 2.0);
    CHECK((*c.w_star)(0) == 0.0);
    CHECK(*c.sigma_star_sq == 0.0);
  }
  SUBCASE("a = (1, 1), centers -1 and +1") {
    const auto p = quad_1d({1, 1}, {-1, 1});
    const auto& c = p.constants();
    CHECK((*c.w_star)(0) == 0.0);
    CHECK(p.grad_sample(vec({0}), id(1))(0) == 1.0);
    CHECK(p.grad_sample(vec({0}), id(2))(0) == -1.0);
    CHECK(*c.sigma_star_sq == 1.0);
    CHECK(*c.f_star == doctest::Approx(0.5));
  }
}

TEST_CASE("make_quadratic hits the target condition number") {
  auto rng = make_stream(5, StreamRole::Probe);
  for (double kappa : {1.0, 2.0, 5.0, 10.0, 100.0}) {
    const auto p = make_quadratic(40, 5, kappa, rng);
    CHECK(std::abs(*p.constants().kappa() / kappa - 1.0) < 0.01);
    // L and mu against a direct scan of the diagonals.
    const auto& A = p.diagonals();
    CHECK(*p.constants().L == doctest::Approx(A.maxCoeff()));
    CHECK(*p.constants().mu == doctest::Approx(A.colwise().mean().minCoeff()));
  }
  CHECK_THROWS_AS(make_quadratic(10, 2, 0.5, rng), InvalidArgument);
}

TEST_CASE("quadratic sigma*^2 and w* against direct summation") {
  auto rng = make_stream(6, StreamRole::Probe);
  const auto p = make_quadratic(25, 3, 7.0, rng);
  const auto& c = p.constants();
  double sum = 0.0;
  for (std::uint64_t i = 1; i <= 25; ++i) sum += p.grad_sample(*c.w_star, id(i)).squaredNorm();
  CHECK(std::abs(sum / 25.0 - *c.sigma_star_sq) < 1e-12 * std::max(1.0, sum / 25.0));
  CHECK(p.grad_full(*c.w_star).norm() < 1e-8);
  CHECK(p.value_full(*c.w_star) == doctest::Approx(*c.f_star));
}

TEST_CASE("stored w* is stationary for every problem that stores one") {
  for (const auto& p : builtin_problems()) {
    const auto& c = p->constants();
    if (!c.w_star) continue;
    CAPTURE(p->name());
    if (const auto* noisy = dynamic_cast<const NoisyQuadratic*>(p.get())) {
      CHECK(noisy->analytic_gradient(*c.w_star).norm() < 1e-8);
    } else {
      CHECK(p->grad_full(*c.w_star).norm() < 1e-8);
    }
  }
}

TEST_CASE("stored L certifies per-sample smoothness") {
  auto rng = make_stream(8, StreamRole::Probe);
  for (const auto& p : builtin_problems()) {
    CAPTURE(p->name());
    const double L = *p->constants().L;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const Vector w = random_point(rng, p->dimension(), 3.0);
      const Vector u = random_point(rng, p->dimension(), 3.0);
      const SampleId xi = p->sample(rng);
      const double ratio = (p->grad_sample(w, xi) - p->grad_sample(u, xi)).norm() / (w - u).norm();
      worst = std::max(worst, ratio);
    }
    CHECK(worst <= L * (1.0 + 1e-12));
  }
}

TEST_CASE("stored mu certifies the gradient-dominance inequality") {
  auto rng = make_stream(9, StreamRole::Probe);
  for (const auto& p : builtin_problems()) {
    const auto& c = p->constants();
    if (!c.mu || !p->is_finite_sum() || !c.f_star) continue;
    CAPTURE(p->name());
    for (int k = 0; k < 1000; ++k) {
      const Vector w = random_point(rng, p->dimension(), 3.0);
      const double lhs = 2.0 * *c.mu * (p->value_full(w) - *c.f_star);
      CHECK(lhs <= p->grad_full(w).squaredNorm() * (1.0 + 1e-10) + 1e-12);
    }
  }
  const NoisyQuadratic noisy(vec({1.0, 4.0}), vec({0.5, -1.0}), 0.6, 0.25);
  for (int k = 0; k < 1000; ++k) {
    const Vector w = random_point(rng, 2, 3.0);
    const double lhs = 2.0 * *noisy.constants().mu * (noisy.analytic_value(w) - *noisy.constants().f_star);
    CHECK(lhs <= noisy.analytic_gradient(w).squaredNorm() * (1.0 + 1e-12) + 1e-12);
  }
}

TEST_CASE("logistic sigma*^2 equals the component mean at w*") {
  LogisticProblem p(small_dataset(), 0.05);
  p.set_reference_solution(solve_reference(p, Vector::Zero(3), 1e-12));
  const auto& c = p.constants();
  double sum = 0.0;
  for (std::uint64_t i = 1; i <= 4; ++i) sum += p.grad_sample(*c.w_star, id(i)).squaredNorm();
  CHECK(std::abs(sum / 4.0 - *c.sigma_star_sq) < 1e-12);
  CHECK(*c.mu == 0.05);
  CHECK(*c.L == doctest::Approx((1.0 + 4.0) / 4.0 + 0.05));  // max row norm^2 is 5
}

TEST_CASE("noisy quadratic constants match a Monte-Carlo estimate") {
  const NoisyQuadratic p(vec({1.0, 4.0}), vec({0.5, -1.0}), 0.6, 0.25);
  auto rng = make_stream(10, StreamRole::Probe);
  const Vector w = vec({1.0, 1.0});
  Vector mean = Vector::Zero(2);
  double second = 0.0;
  constexpr int draws = 200000;
  for (int k = 0; k < draws; ++k) {
    const SampleId xi = p.sample(rng);
    mean += p.grad_sample(w, xi);
    second += p.grad_sample(*p.constants().w_star, xi).squaredNorm();
  }
  mean /= draws;
  CHECK((mean - p.analytic_gradient(w)).norm() < 0.02);
  CHECK(second / draws == doctest::Approx(*p.constants().sigma_star_sq).epsilon(0.02));
}

TEST_CASE("modified logistic") {
  const auto p = modified_logistic(0.4);

  SUBCASE("value and derivative are continuous at -2") {
    const double left = std::nextafter(-2.0, -3.0);
    CHECK(p.value(left) == doctest::Approx(p.value(-2.0)).epsilon(1e-15));
    CHECK(p.derivative(left) == doctest::Approx(p.derivative(-2.0)).epsilon(1e-15));
    const double e2 = std::exp(2.0);
    CHECK(p.derivative(-2.0) == doctest::Approx(-e2 / (1.0 + e2)).epsilon(1e-15));
  }

  SUBCASE("finite difference at -3 includes the penalty term") {
    const double h = 1e-6;
    const double fd = (p.value(-3.0 + h) - p.value(-3.0 - h)) / (2.0 * h);
    const double analytic = -1.0 / (1.0 + std::exp(-3.0)) + 0.4 * (-1.0);
    CHECK(p.derivative(-3.0) == doctest::Approx(analytic).epsilon(1e-14));
    CHECK(std::abs(fd - p.derivative(-3.0)) < 1e-6);
  }

  SUBCASE("growth pair") {
    CHECK(*p.constants().M == doctest::Approx(1.25));
    CHECK(*p.constants().N == doctest::Approx(std::log1p(std::exp(2.0))));
  }

  SUBCASE("lambda must be positive") {
    CHECK_THROWS_AS(modified_logistic(0.0), InvalidArgument);
    CHECK_THROWS_AS(modified_logistic(-1.0), InvalidArgument);
  }
}

TEST_CASE("sidecar round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "isarah_sidecar_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "small.constants.json";
  std::filesystem::remove(path);

  LogisticProblem solved(small_dataset(), 0.05);
  ensure_reference_constants(solved, path);
  REQUIRE(std::filesystem::exists(path));

  LogisticProblem restored(small_dataset(), 0.05);
  load_sidecar(path, restored);
  CHECK(*restored.constants().f_star == *solved.constants().f_star);
  CHECK(*restored.constants().sigma_star_sq == *solved.constants().sigma_star_sq);
  CHECK((*restored.constants().w_star - *solved.constants().w_star).norm() == 0.0);

  LogisticProblem other_lambda(small_dataset(), 0.1);
  CHECK_THROWS_AS(load_sidecar(path, other_lambda), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("constants validation") {
  ProblemConstants c;
  c.L = 1.0;
  c.mu = 2.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.mu = 0.5;
  CHECK_NOTHROW(c.validate());
  c.sigma_star_sq = -1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.sigma_star_sq = 0.0;
  c.M = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}
