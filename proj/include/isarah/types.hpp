#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>

namespace isarah {

/// Dense decision vector w in R^d.
using Vector = Eigen::VectorXd;

/// Opaque token for one realization of the random variable. For finite sums the value
/// is the 1-based component index; for expectation-form problems it is a seed from
/// which the realization is regenerated.
struct SampleId {
  std::uint64_t value = 0;
  friend bool operator==(const SampleId&, const SampleId&) = default;
};

/// Constants describing a problem instance. Every field except the finite-sum size is
/// optional because schedules consume different subsets of them.
struct ProblemConstants {
  std::optional<double> L;              // per-sample gradient Lipschitz constant
  std::optional<double> mu;             // strong convexity modulus of F
  std::optional<double> sigma_star_sq;  // E||grad f(w*; xi)||^2
  std::optional<double> M;              // growth bound F(w) - F* <= M ||grad F||^2 + N
  std::optional<double> N;
  std::optional<std::int64_t> n_components;
  std::optional<double> f_star;  // optimal value or a lower bound on F
  std::optional<Vector> w_star;

  /// L / mu, when both are known.
  std::optional<double> kappa() const;

  /// Throws InvalidArgument when a present field is out of range.
  void validate() const;
};

bool is_finite(const Vector& w);

using RandomStream = std::mt19937_64;

/// Roles of the independent random streams a solver consumes.
enum class StreamRole : std::uint32_t {
  Batch = 1,   // outer mini-batch draws zeta_1..zeta_b
  Inner = 2,   // inner-loop draws xi_t
  Select = 3,  // output index draw
  Probe = 4,   // Monte-Carlo gradient probes used by diagnostics
};

RandomStream make_stream(std::uint64_t seed, StreamRole role);

/// One stream per role, each seeded independently so that changing the inner-loop length
/// leaves the mini-batch draws untouched.
struct RngStreams {
  RandomStream batch;
  RandomStream inner;
  RandomStream select;

  static RngStreams from_seed(std::uint64_t seed);
};

/// Uniform integer in [lo, hi].
std::int64_t uniform_int(RandomStream& rng, std::int64_t lo, std::int64_t hi);

}  // namespace isarah
