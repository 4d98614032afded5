#include "isarah/types.hpp"

#include "isarah/errors.hpp"

#include <cmath>
#include <string>

namespace isarah {

std::optional<double> ProblemConstants::kappa() const {
  if (!L || !mu) return std::nullopt;
  return *L / *mu;
}

void ProblemConstants::validate() const {
  auto positive = [](const std::optional<double>& v, const char* name) {
    if (v && !(*v > 0.0 && std::isfinite(*v)))
      throw InvalidArgument(std::string(name) + " must be a finite positive number");
  };
  positive(L, "L");
  positive(mu, "mu");
  positive(M, "M");
  if (N && !(*N >= 0.0 && std::isfinite(*N))) throw InvalidArgument("N must be >= 0");
  if (sigma_star_sq && !(*sigma_star_sq >= 0.0 && std::isfinite(*sigma_star_sq)))
    throw InvalidArgument("sigma_star_sq must be >= 0");
  if (L && mu && *mu > *L * (1.0 + 1e-12)) throw InvalidArgument("mu must not exceed L");
  if (n_components && *n_components < 1) throw InvalidArgument("n_components must be >= 1");
}

bool is_finite(const Vector& w) { return w.allFinite(); }

RandomStream make_stream(std::uint64_t seed, StreamRole role) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(role), 0x15a7a4u};
  return RandomStream(seq);
}

RngStreams RngStreams::from_seed(std::uint64_t seed) {
  return RngStreams{make_stream(seed, StreamRole::Batch), make_stream(seed, StreamRole::Inner),
                    make_stream(seed, StreamRole::Select)};
}

std::int64_t uniform_int(RandomStream& rng, std::int64_t lo, std::int64_t hi) {
  std::uniform_int_distribution<std::int64_t> dist(lo, hi);
  return dist(rng);
}

}  // namespace isarah
