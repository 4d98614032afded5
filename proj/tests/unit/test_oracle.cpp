#include "isarah/errors.hpp"
#include "isarah/oracle.hpp"
#include "isarah/problems.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <map>

using namespace isarah;
using isarah::test::id;
using isarah::test::quad_1d;
using isarah::test::vec;

TEST_CASE("sampling is deterministic per seed") {
  const auto p = quad_1d({1, 2, 3, 4});
  auto a = make_stream(7, StreamRole::Inner);
  auto b = make_stream(7, StreamRole::Inner);
  for (int k = 0; k < 100; ++k) {
    const SampleId x = p.sample(a);
    CHECK(x == p.sample(b));
    CHECK(x.value >= 1);
    CHECK(x.value <= 4);
  }
}

TEST_CASE("single component always samples index 1") {
  const auto p = quad_1d({2});
  auto rng = make_stream(3, StreamRole::Inner);
  for (int k = 0; k < 50; ++k) CHECK(p.sample(rng).value == 1);
}

TEST_CASE("streams of different roles differ") {
  auto a = make_stream(11, StreamRole::Batch);
  auto b = make_stream(11, StreamRole::Inner);
  CHECK(a() != b());
}

TEST_CASE("sampling is uniform over components") {
  const auto p = quad_1d({1, 1, 1, 1});
  auto rng = make_stream(7, StreamRole::Inner);
  constexpr int draws = 100000;
  std::array<int, 4> counts{};
  for (int k = 0; k < draws; ++k) ++counts[p.sample(rng).value - 1];
  const double expected = 0.25 * draws;
  const double sd = std::sqrt(draws * 0.25 * 0.75);
  for (int c : counts) CHECK(std::abs(c - expected) < 4.0 * sd);
}

TEST_CASE("quadratic gradients and values") {
  const auto p = quad_1d({1, 3});
  const Vector w = vec({2});
  CHECK(p.grad_sample(w, id(1))(0) == doctest::Approx(2.0));
  CHECK(p.grad_sample(w, id(2))(0) == doctest::Approx(6.0));
  CHECK(p.grad_full(w)(0) == doctest::Approx(4.0));
  CHECK(p.value_full(w) == doctest::Approx(4.0));
  CHECK(p.value_full(vec({0})) == 0.0);
}

TEST_CASE("symmetric components give a zero full gradient at 0") {
  const auto p = quad_1d({1, 1}, {-1, 1});
  CHECK(p.grad_full(vec({0}))(0) == 0.0);
}

TEST_CASE("logistic component at w = 0") {
  LabeledDataset data;
  data.row_offsets = {0, 2};
  data.columns = {0, 2};
  data.values = {1.5, -4.0};
  data.labels = {1.0};
  data.dimension = 3;
  const LogisticProblem p(data, 0.0);
  const Vector g = p.grad_sample(Vector::Zero(3), id(1));
  CHECK(g(0) == doctest::Approx(-0.75));
  CHECK(g(1) == 0.0);
  CHECK(g(2) == doctest::Approx(2.0));
}

TEST_CASE("modified logistic at 0") {
  const auto p = modified_logistic(0.5);
  CHECK(p.value_full(vec({0})) == doctest::Approx(std::log(2.0)));
  CHECK(p.grad_full(vec({0}))(0) == doctest::Approx(-0.5));
}

TEST_CASE("finite sums: component average equals grad_full") {
  auto rng = make_stream(1, StreamRole::Probe);
  const auto p = make_quadratic(37, 6, 8.0, rng);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 20; ++k) {
    Vector w(6);
    for (auto& x : w) x = 3.0 * normal(rng);
    Vector sum = Vector::Zero(6);
    for (std::int64_t i = 1; i <= 37; ++i) sum += p.grad_sample(w, id(static_cast<std::uint64_t>(i)));
    sum /= 37.0;
    CHECK((sum - p.grad_full(w)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("grad_minibatch") {
  const auto p = quad_1d({1, 3});
  const Vector w = vec({1});

  SUBCASE("b = 1 equals the single draw") {
    auto a = make_stream(5, StreamRole::Batch);
    auto b = make_stream(5, StreamRole::Batch);
    const Vector g = grad_minibatch(p, w, 1, a);
    CHECK(g(0) == p.grad_sample(w, p.sample(b))(0));
  }

  SUBCASE("b = n draws with replacement") {
    // With two components and b = 2 the two draws coincide half of the time, so some seed
    // in a short range produces a batch mean different from the exact gradient.
    bool differs = false;
    for (std::uint64_t s = 0; s < 20 && !differs; ++s) {
      auto rng = make_stream(s, StreamRole::Batch);
      differs = grad_minibatch(p, w, 2, rng)(0) != p.grad_full(w)(0);
    }
    CHECK(differs);
  }

  SUBCASE("b = 0 is rejected") {
    auto rng = make_stream(0, StreamRole::Batch);
    CHECK_THROWS_AS(grad_minibatch(p, w, 0, rng), InvalidArgument);
  }

  SUBCASE("draws come from the stream in order") {
    auto a = make_stream(9, StreamRole::Batch);
    auto b = make_stream(9, StreamRole::Batch);
    const auto ids = draw_samples(p, 5, a);
    REQUIRE(ids.size() == 5);
    for (const auto& x : ids) CHECK(x == p.sample(b));
  }
}

TEST_CASE("enumerated mini-batch means equal the full gradient") {
  // grads (1, 3): all 4 equiprobable pairs average to 2.
  const auto p = quad_1d({1, 3});
  const Vector w = vec({1});
  double total = 0.0;
  for (std::uint64_t i = 1; i <= 2; ++i)
    for (std::uint64_t j = 1; j <= 2; ++j) {
      const std::array<SampleId, 2> ids{id(i), id(j)};
      total += mean_gradient(p, w, ids)(0);
    }
  CHECK(total / 4.0 == 2.0);

  auto rng = make_stream(2, StreamRole::Probe);
  const auto q = make_quadratic(3, 2, 3.0, rng);
  const Vector u = vec({0.3, -1.7});
  Vector sum = Vector::Zero(2);
  for (std::uint64_t i = 1; i <= 3; ++i)
    for (std::uint64_t j = 1; j <= 3; ++j)
      for (std::uint64_t k = 1; k <= 3; ++k) {
        const std::array<SampleId, 3> ids{id(i), id(j), id(k)};
        sum += mean_gradient(q, u, ids);
      }
  CHECK(((sum / 27.0) - q.grad_full(u)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mean_gradient reduces in a fixed order") {
  auto rng = make_stream(4, StreamRole::Probe);
  const auto p = make_quadratic(50, 4, 5.0, rng);
  const Vector w = vec({1, 2, 3, 4});
  auto a = make_stream(10, StreamRole::Batch);
  const auto ids = draw_samples(p, 1000, a);
  const Vector g1 = mean_gradient(p, w, ids);
  const Vector g2 = mean_gradient(p, w, ids);
  CHECK((g1.array() == g2.array()).all());
}

TEST_CASE("contract violations") {
  const auto p = quad_1d({1, 3});
  CHECK_THROWS_AS(p.grad_sample(vec({1, 2}), id(1)), ContractViolation);
  CHECK_THROWS_AS(p.grad_sample(vec({1}), id(0)), ContractViolation);
  CHECK_THROWS_AS(p.grad_sample(vec({1}), id(3)), ContractViolation);
  CHECK_THROWS_AS(p.value_sample(vec({1, 2}), id(1)), ContractViolation);

  const NoisyQuadratic noisy(vec({1, 2}), vec({0, 0}), 0.5, 0.1);
  CHECK_THROWS_AS(noisy.grad_full(vec({0, 0})), UnsupportedOperation);
  CHECK_THROWS_AS(noisy.value_full(vec({0, 0})), UnsupportedOperation);
}

TEST_CASE("identical sample ids give bit-identical gradients") {
  const NoisyQuadratic noisy(vec({1, 2, 3}), vec({1, 0, -1}), 0.7, 0.3);
  auto rng = make_stream(12, StreamRole::Inner);
  const Vector w = vec({0.1, 0.2, 0.3});
  for (int k = 0; k < 20; ++k) {
    const SampleId x = noisy.sample(rng);
    CHECK((noisy.grad_sample(w, x).array() == noisy.grad_sample(w, x).array()).all());
  }
}

TEST_CASE("grad_norm_sq and second_moment") {
  const auto p = quad_1d({1, 3});
  auto probe = make_stream(0, StreamRole::Probe);
  CHECK(grad_norm_sq(p, vec({2}), probe) == doctest::Approx(16.0));
  CHECK(second_moment(p, vec({2}), probe) == doctest::Approx(20.0));

  const NoisyQuadratic noisy(vec({2}), vec({0}), 0.0, 0.0);
  CHECK(grad_norm_sq(noisy, vec({1.5}), probe, 100) == doctest::Approx(9.0));
}

TEST_CASE("plug-in sigma*^2 estimate") {
  const NoisyQuadratic noisy(vec({1, 2}), vec({0.5, -0.5}), 0.4, 0.2);
  auto rng = make_stream(3, StreamRole::Probe);
  const double estimate = estimate_sigma_star_sq(noisy, vec({0.5, -0.5}), rng, 20000);
  CHECK(estimate == doctest::Approx(*noisy.constants().sigma_star_sq).epsilon(0.05));
  CHECK_THROWS_AS(estimate_sigma_star_sq(noisy, vec({0, 0}), rng, 0), InvalidArgument);
}
