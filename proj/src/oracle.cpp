#include "isarah/oracle.hpp"

#include "isarah/errors.hpp"

#include <vector>

namespace isarah {

namespace {

constexpr std::size_t kLeafSize = 8;

// Sums grad f(w; id_at(k)) for k in [begin, end). Left half goes into `out`, right half into
// levels[depth]; recursion below `depth` only touches deeper levels, and `levels` is sized
// up front for the tree height.
template <class IdAt>
void tree_sum(const StochasticProblem& problem, const Vector& w, IdAt&& id_at, std::size_t begin,
              std::size_t end, Vector& out, std::vector<Vector>& levels, Vector& term, std::size_t depth) {
  if (end - begin <= kLeafSize) {
    out.setZero(w.size());
    for (std::size_t k = begin; k < end; ++k) {
      problem.grad_sample(w, id_at(k), term);
      out += term;
    }
    return;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  tree_sum(problem, w, id_at, begin, mid, out, levels, term, depth + 1);
  tree_sum(problem, w, id_at, mid, end, levels[depth], levels, term, depth + 1);
  out += levels[depth];
}

template <class IdAt>
Vector tree_mean(const StochasticProblem& problem, const Vector& w, IdAt&& id_at, std::size_t count) {
  Vector out(w.size());
  Vector term(w.size());
  std::size_t depth = 0;
  for (std::size_t len = count; len > kLeafSize; len = (len + 1) / 2) ++depth;
  std::vector<Vector> levels(depth, Vector(w.size()));
  tree_sum(problem, w, id_at, 0, count, out, levels, term, 0);
  out /= static_cast<double>(count);
  return out;
}

}  // namespace

SampleId StochasticProblem::sample(RandomStream& rng) const {
  if (auto n = num_components()) return SampleId{static_cast<std::uint64_t>(uniform_int(rng, 1, *n))};
  return SampleId{rng()};
}

void StochasticProblem::check_point(const Vector& w) const {
  if (w.size() != dimension())
    throw ContractViolation(name() + ": point has dimension " + std::to_string(w.size()) + ", expected " +
                            std::to_string(dimension()));
}

void StochasticProblem::check_sample(SampleId xi) const {
  if (auto n = num_components()) {
    if (xi.value < 1 || xi.value > static_cast<std::uint64_t>(*n))
      throw ContractViolation(name() + ": sample index " + std::to_string(xi.value) + " outside [1, " +
                              std::to_string(*n) + "]");
  }
}

void StochasticProblem::grad_sample(const Vector& w, SampleId xi, Vector& out) const {
  check_point(w);
  check_sample(xi);
  out.resize(dimension());
  do_grad_sample(w, xi, out);
}

Vector StochasticProblem::grad_sample(const Vector& w, SampleId xi) const {
  Vector out(dimension());
  grad_sample(w, xi, out);
  return out;
}

double StochasticProblem::value_sample(const Vector& w, SampleId xi) const {
  check_point(w);
  check_sample(xi);
  return do_value_sample(w, xi);
}

Vector StochasticProblem::grad_full(const Vector& w) const {
  const auto n = num_components();
  if (!n) throw UnsupportedOperation(name() + ": exact gradient requires a finite-sum problem");
  check_point(w);
  return tree_mean(*this, w, [](std::size_t k) { return SampleId{k + 1}; }, static_cast<std::size_t>(*n));
}

double StochasticProblem::value_full(const Vector& w) const {
  const auto n = num_components();
  if (!n) throw UnsupportedOperation(name() + ": exact value requires a finite-sum problem");
  check_point(w);
  double sum = 0.0;
  for (std::int64_t i = 1; i <= *n; ++i) sum += do_value_sample(w, SampleId{static_cast<std::uint64_t>(i)});
  return sum / static_cast<double>(*n);
}

Vector mean_gradient(const StochasticProblem& problem, const Vector& w, std::span<const SampleId> ids) {
  if (ids.empty()) throw InvalidArgument("mean_gradient: empty sample set");
  return tree_mean(problem, w, [&](std::size_t k) { return ids[k]; }, ids.size());
}

std::vector<SampleId> draw_samples(const StochasticProblem& problem, std::int64_t b, RandomStream& rng) {
  if (b < 1) throw InvalidArgument("mini-batch size must be >= 1, got " + std::to_string(b));
  std::vector<SampleId> ids;
  ids.reserve(static_cast<std::size_t>(b));
  for (std::int64_t i = 0; i < b; ++i) ids.push_back(problem.sample(rng));
  return ids;
}

Vector grad_minibatch(const StochasticProblem& problem, const Vector& w, std::int64_t b, RandomStream& rng) {
  const auto ids = draw_samples(problem, b, rng);
  return mean_gradient(problem, w, ids);
}

double grad_norm_sq(const StochasticProblem& problem, const Vector& w, RandomStream& probe,
                    std::int64_t probe_samples) {
  if (problem.is_finite_sum()) return problem.grad_full(w).squaredNorm();
  return grad_minibatch(problem, w, probe_samples, probe).squaredNorm();
}

double second_moment(const StochasticProblem& problem, const Vector& w, RandomStream& probe,
                     std::int64_t probe_samples) {
  Vector g(problem.dimension());
  double sum = 0.0;
  if (auto n = problem.num_components()) {
    for (std::int64_t i = 1; i <= *n; ++i) {
      problem.grad_sample(w, SampleId{static_cast<std::uint64_t>(i)}, g);
      sum += g.squaredNorm();
    }
    return sum / static_cast<double>(*n);
  }
  if (probe_samples < 1) throw InvalidArgument("probe_samples must be >= 1");
  for (std::int64_t i = 0; i < probe_samples; ++i) {
    problem.grad_sample(w, problem.sample(probe), g);
    sum += g.squaredNorm();
  }
  return sum / static_cast<double>(probe_samples);
}

double estimate_sigma_star_sq(const StochasticProblem& problem, const Vector& w_hat, RandomStream& rng,
                              std::int64_t samples) {
  if (samples < 1) throw InvalidArgument("samples must be >= 1");
  Vector g(problem.dimension());
  double sum = 0.0;
  for (std::int64_t i = 0; i < samples; ++i) {
    problem.grad_sample(w_hat, problem.sample(rng), g);
    sum += g.squaredNorm();
  }
  return sum / static_cast<double>(samples);
}

}  // namespace isarah
