#include "isarah/schedules.hpp"

#include "isarah/errors.hpp"

#include <algorithm>
#include <cmath>

namespace isarah {

namespace {

double require(const std::optional<double>& value, const char* name) {
  if (!value) throw MissingConstant(name);
  return *value;
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be finite and > 0");
}

void check_m(std::int64_t m) {
  if (m < 1) throw InvalidArgument("inner loop size m must be >= 1, got " + std::to_string(m));
}

// Stages needed by the halving recursion E_s <= E_{s-1}/2 + eps/8 to reach eps.
std::int64_t halving_stages(const StartInfo& start, double epsilon) {
  if (!start.grad_norm_sq) return 1;
  const double ratio = *start.grad_norm_sq / (0.75 * epsilon);
  if (!(ratio > 1.0)) return 1;
  return ceil_count(std::log2(ratio));
}

}  // namespace

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::OneLoopConvex:
      return "one_loop_convex";
    case Regime::OneLoopNonConvex:
      return "one_loop_nonconvex";
    case Regime::MultiLoopStronglyConvex:
      return "multi_loop_strongly_convex";
    case Regime::MultiLoopConvexMN:
      return "multi_loop_convex_mn";
  }
  return "unknown";
}

Regime parse_regime(std::string_view name) {
  for (Regime r : {Regime::OneLoopConvex, Regime::OneLoopNonConvex, Regime::MultiLoopStronglyConvex,
                   Regime::MultiLoopConvexMN})
    if (to_string(r) == name) return r;
  throw InvalidArgument("unknown regime '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const Schedule& s) {
  j = nlohmann::json{{"eta", s.eta}, {"m", s.m}, {"b", s.b}, {"T", s.T}, {"regime", std::string(to_string(s.regime))}};
  if (s.epsilon) j["epsilon"] = *s.epsilon;
  j["provenance"] = s.provenance;
}

void from_json(const nlohmann::json& j, Schedule& s) {
  s.eta = j.at("eta").get<double>();
  s.m = j.at("m").get<std::int64_t>();
  s.b = j.at("b").get<std::int64_t>();
  s.T = j.value("T", std::int64_t{1});
  s.regime = parse_regime(j.at("regime").get<std::string>());
  s.epsilon = j.contains("epsilon") && !j["epsilon"].is_null() ? std::optional<double>(j["epsilon"].get<double>())
                                                                : std::nullopt;
  s.provenance = j.value("provenance", std::string("explicit"));
}

std::int64_t ceil_count(double x, std::int64_t floor_value) {
  if (std::isnan(x)) throw InvalidArgument("ceil_count: NaN");
  if (x > 9.0e18) throw ResourceError("schedule value too large: " + std::to_string(x));
  const double nearest = std::round(x);
  const double rounded = std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x)) ? nearest : std::ceil(x);
  return std::max(floor_value, static_cast<std::int64_t>(rounded));
}

Schedule one_loop_convex(const ProblemConstants& constants, std::int64_t m) {
  const double L = require(constants.L, "L");
  check_m(m);
  const double root = std::sqrt(static_cast<double>(m) + 1.0);
  Schedule s;
  s.eta = 1.0 / (L * root);
  s.m = m;
  s.b = ceil_count(2.0 * root);
  s.T = 1;
  s.regime = Regime::OneLoopConvex;
  s.provenance = "one-loop convex: eta = 1/(L sqrt(m+1)), b = 2 sqrt(m+1)";
  return s;
}

Schedule one_loop_convex_for_epsilon(const ProblemConstants& constants, double epsilon, const StartInfo& start) {
  const double L = require(constants.L, "L");
  const double sigma = require(constants.sigma_star_sq, "sigma_star_sq");
  const double f_star = require(constants.f_star, "f_star");
  const double f0 = require(start.value, "F(w0)");
  check_epsilon(epsilon);
  const double gap = std::max(0.0, f0 - f_star);
  const double scale = 6.0 * L * gap + 2.0 * sigma;
  const std::int64_t m_plus_one = ceil_count(scale * scale / (epsilon * epsilon));
  Schedule s = one_loop_convex(constants, std::max<std::int64_t>(1, m_plus_one - 1));
  s.epsilon = epsilon;
  s.provenance = "one-loop convex for epsilon: m + 1 = (6 L [F(w0) - F*] + 2 sigma*^2)^2 / eps^2, eta = 1/(L sqrt(m+1)), "
                 "b = 2 sqrt(m+1)";
  return s;
}

Schedule one_loop_nonconvex(const ProblemConstants& constants, std::int64_t m) {
  const double L = require(constants.L, "L");
  check_m(m);
  Schedule s;
  s.eta = 2.0 / (L * (std::sqrt(1.0 + 4.0 * static_cast<double>(m)) + 1.0));
  s.m = m;
  s.b = ceil_count(std::sqrt(static_cast<double>(m) + 1.0));
  s.T = 1;
  s.regime = Regime::OneLoopNonConvex;
  s.provenance = "one-loop nonconvex: eta = 2/(L (sqrt(1 + 4m) + 1)), b = sqrt(m+1)";
  return s;
}

Schedule multi_loop_strongly_convex(const ProblemConstants& constants, double epsilon, const StartInfo& start) {
  const double L = require(constants.L, "L");
  const double mu = require(constants.mu, "mu");
  const double sigma = require(constants.sigma_star_sq, "sigma_star_sq");
  check_epsilon(epsilon);
  const double kappa = L / mu;
  Schedule s;
  s.eta = 2.0 / (5.0 * L);
  s.m = ceil_count(20.0 * kappa - 1.0);
  s.b = ceil_count(std::max(20.0 * kappa - 10.0, 20.0 * sigma / epsilon));
  s.T = halving_stages(start, epsilon);
  s.regime = Regime::MultiLoopStronglyConvex;
  s.epsilon = epsilon;
  s.provenance = "multi-loop strongly convex: eta = 2/(5L), m = 20 kappa - 1, b = max{20 kappa - 10, 20 sigma*^2/eps}, "
                 "T = log2(||grad F(w0)||^2 / (3 eps/4))";
  return s;
}

Schedule multi_loop_convex_mn(const ProblemConstants& constants, double epsilon, const StartInfo& start) {
  const double L = require(constants.L, "L");
  const double M = require(constants.M, "M");
  const double N = require(constants.N, "N");
  const double sigma = require(constants.sigma_star_sq, "sigma_star_sq");
  check_epsilon(epsilon);
  Schedule s;
  s.eta = 2.0 / (5.0 * L);
  s.m = ceil_count(std::max(40.0 * L * M - 1.0, 120.0 * L * N / epsilon - 1.0));
  s.b = ceil_count(std::max({40.0 * L * M - 5.0, 120.0 * L * N / epsilon, 60.0 * sigma / epsilon}));
  s.T = halving_stages(start, epsilon);
  s.regime = Regime::MultiLoopConvexMN;
  s.epsilon = epsilon;
  s.provenance = "multi-loop convex (M, N growth): eta = 2/(5L), m = max{40LM - 1, 120LN/eps - 1}, "
                 "b = max{40LM - 5, 120LN/eps, 60 sigma*^2/eps}, T = log2(||grad F(w0)||^2 / (3 eps/4))";
  return s;
}

Schedule schedule_for_epsilon(Regime regime, const ProblemConstants& constants, double epsilon, const StartInfo& start) {
  switch (regime) {
    case Regime::OneLoopConvex:
      return one_loop_convex_for_epsilon(constants, epsilon, start);
    case Regime::MultiLoopStronglyConvex:
      return multi_loop_strongly_convex(constants, epsilon, start);
    case Regime::MultiLoopConvexMN:
      return multi_loop_convex_mn(constants, epsilon, start);
    case Regime::OneLoopNonConvex:
      break;
  }
  throw InvalidArgument("regime one_loop_nonconvex is parameterized by m, not epsilon");
}

namespace {

double stability_gap(double eta, double L) {
  if (!(eta > 0.0) || !(eta * L < 2.0)) throw InvalidArgument("contraction analysis requires 0 < eta < 2/L");
  return 2.0 - eta * L;
}

void finish(ContractionRate& rate) {
  if (rate.delta && rate.contracts()) rate.Delta = *rate.delta / (1.0 - rate.alpha);
}

}  // namespace

ContractionRate theorem3_alpha(double eta, double m, double b, const ProblemConstants& constants) {
  const double L = require(constants.L, "L");
  const double mu = require(constants.mu, "mu");
  if (!(m >= 0.0) || !(b > 0.0)) throw InvalidArgument("theorem3_alpha: need m >= 0 and b > 0");
  const double gap = stability_gap(eta, L);
  const double kappa = L / mu;
  ContractionRate rate;
  rate.alpha = 1.0 / (mu * eta * (m + 1.0)) + eta * L / gap + (4.0 * kappa - 2.0) / (b * gap);
  if (constants.sigma_star_sq) rate.delta = 4.0 * *constants.sigma_star_sq / (b * gap);
  finish(rate);
  return rate;
}

ContractionRate theorem4_alpha_c(double eta, double m, double b, const ProblemConstants& constants) {
  const double L = require(constants.L, "L");
  const double M = require(constants.M, "M");
  const double N = require(constants.N, "N");
  if (!(m >= 0.0) || !(b > 0.0)) throw InvalidArgument("theorem4_alpha_c: need m >= 0 and b > 0");
  const double gap = stability_gap(eta, L);
  ContractionRate rate;
  rate.alpha = 2.0 * M / (eta * (m + 1.0)) + eta * L / gap + (8.0 * L * M - 1.0) / (b * gap);
  if (constants.sigma_star_sq)
    rate.delta = 2.0 * N / (eta * (m + 1.0)) + 8.0 * L * N / (b * gap) + 4.0 * *constants.sigma_star_sq / (b * gap);
  finish(rate);
  return rate;
}

ContractionRate contraction_rate(const Schedule& schedule, const ProblemConstants& constants) {
  const auto m = static_cast<double>(schedule.m);
  const auto b = static_cast<double>(schedule.b);
  switch (schedule.regime) {
    case Regime::MultiLoopStronglyConvex:
      return theorem3_alpha(schedule.eta, m, b, constants);
    case Regime::MultiLoopConvexMN:
      return theorem4_alpha_c(schedule.eta, m, b, constants);
    default:
      throw InvalidArgument("contraction rates exist only for multi-loop regimes");
  }
}

}  // namespace isarah
