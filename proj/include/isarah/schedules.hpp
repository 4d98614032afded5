#pragma once

#include "isarah/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace isarah {

enum class Regime {
  OneLoopConvex,
  OneLoopNonConvex,
  MultiLoopStronglyConvex,
  MultiLoopConvexMN,
};

std::string_view to_string(Regime regime);
/// Accepts the snake_case names produced by to_string. Throws InvalidArgument otherwise.
Regime parse_regime(std::string_view name);

/// Parameters (eta, m, b, T) for one solver run, with the rule that produced them.
struct Schedule {
  double eta = 0.0;
  std::int64_t m = 1;
  std::int64_t b = 1;
  std::int64_t T = 1;
  Regime regime = Regime::OneLoopConvex;
  std::optional<double> epsilon;  // target accuracy; empty when the schedule was built from m
  std::string provenance;

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

void to_json(nlohmann::json& j, const Schedule& schedule);
void from_json(const nlohmann::json& j, Schedule& schedule);

/// Runtime facts about the starting point that some schedules need.
struct StartInfo {
  std::optional<double> value;         // F(w_0)
  std::optional<double> grad_norm_sq;  // ||grad F(w_0)||^2
};

/// Integer count for a formula value: rounds up, except that values within 1e-9 (relative)
/// of an integer are taken as that integer so floating-point noise never adds a step.
/// The result is at least `floor_value`.
std::int64_t ceil_count(double x, std::int64_t floor_value = 1);

/// eta = 1/(L sqrt(m+1)), b = ceil(2 sqrt(m+1)), T = 1.
Schedule one_loop_convex(const ProblemConstants& constants, std::int64_t m);

/// m + 1 = ceil((6 L dF + 2 sigma*^2)^2 / eps^2) with dF = F(w_0) - F*, then one_loop_convex.
/// m is clamped to at least 1.
Schedule one_loop_convex_for_epsilon(const ProblemConstants& constants, double epsilon, const StartInfo& start);

/// eta = 2/(L (sqrt(1 + 4m) + 1)) (the largest admissible value), b = ceil(sqrt(m+1)), T = 1.
Schedule one_loop_nonconvex(const ProblemConstants& constants, std::int64_t m);

/// eta = 2/(5L), m = 20 kappa - 1, b = max{20 kappa - 10, 20 sigma*^2/eps} (rounded up) and
/// T = ceil(log2(||grad F(w~_0)||^2 / (3/4 eps))) when the initial gradient norm is known
/// (T = 1 otherwise).
Schedule multi_loop_strongly_convex(const ProblemConstants& constants, double epsilon, const StartInfo& start = {});

/// eta = 2/(5L), m = max{40LM - 1, 120LN/eps - 1}, b = max{40LM - 5, 120LN/eps, 60 sigma*^2/eps},
/// T as in multi_loop_strongly_convex.
Schedule multi_loop_convex_mn(const ProblemConstants& constants, double epsilon, const StartInfo& start = {});

/// Dispatches to the epsilon-driven schedule of `regime`. OneLoopNonConvex has no
/// epsilon-driven form and throws InvalidArgument.
Schedule schedule_for_epsilon(Regime regime, const ProblemConstants& constants, double epsilon,
                              const StartInfo& start = {});

/// Per-stage contraction factor of a multi-loop schedule and the stationary offset:
/// E||grad F(w~_s)||^2 - Delta <= alpha^s (||grad F(w~_0)||^2 - Delta), Delta = delta/(1 - alpha).
struct ContractionRate {
  double alpha = 0.0;
  std::optional<double> delta;  // needs sigma*^2
  std::optional<double> Delta;  // only when alpha < 1 and delta is known

  bool contracts() const { return alpha < 1.0; }
};

/// alpha = 1/(mu eta (m+1)) + eta L/(2 - eta L) + (4 kappa - 2)/(b (2 - eta L)),
/// delta = 4 sigma*^2 / (b (2 - eta L)). Requires L, mu and eta < 2/L.
ContractionRate theorem3_alpha(double eta, double m, double b, const ProblemConstants& constants);

/// alpha_c = 2M/(eta (m+1)) + eta L/(2 - eta L) + (8LM - 1)/(b (2 - eta L)),
/// delta_c = 2N/(eta (m+1)) + 8LN/(b (2 - eta L)) + 4 sigma*^2/(b (2 - eta L)).
ContractionRate theorem4_alpha_c(double eta, double m, double b, const ProblemConstants& constants);

/// theorem3_alpha or theorem4_alpha_c according to the schedule's regime.
ContractionRate contraction_rate(const Schedule& schedule, const ProblemConstants& constants);

}  // namespace isarah
