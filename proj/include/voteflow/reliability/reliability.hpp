#pragma once

// Closed-form reliability of redundant majority voting, plus brute-force
// enumeration oracles. Everything here is a pure function.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace voteflow::reliability {

/// System error ceiling for Six Sigma operation (3.4 defects per million).
inline constexpr double kSixSigmaTarget = 3.4e-6;

/// Largest agent count min_agents_for_target will consider.
inline constexpr int kMaxAgentSearch = 201;

/// Largest n the enumeration oracle accepts (2^20 outcome vectors).
inline constexpr int kOracleMaxAgents = 20;

struct ReliabilityParams {
  int n = 1;
  double p = 0.0;
  double rho = 0.0;
  double target = kSixSigmaTarget;
  int out_space = 9;  // |Y| - 1, the number of distinct wrong answers

  /// Throws ValidationError when a field is out of range. `require_improvement`
  /// additionally enforces p < 0.5.
  void validate(bool require_improvement = true) const;
};

enum class Method { closed_form, monte_carlo };

[[nodiscard]] std::string to_string(Method method);

struct ReliabilityResult {
  double p_sys = 0.0;
  double dpmo = 0.0;  // always p_sys * 1e6
  Method method = Method::closed_form;
  std::optional<double> ci_halfwidth;  // monte_carlo only
  std::optional<std::int64_t> trials;  // monte_carlo only

  static ReliabilityResult closed_form(double p_sys);
  static ReliabilityResult monte_carlo(double p_sys, double ci_halfwidth, std::int64_t trials);
};

[[nodiscard]] double dpmo(double probability);

/// Smallest number of erring agents that defeats the vote, ceil(n/2).
/// For even n a tie counts as a failure.
[[nodiscard]] constexpr int majority_threshold(int n) noexcept { return (n + 1) / 2; }

/// (1 - p)^m: success probability of m independent steps.
[[nodiscard]] double compound_success(double p, std::int64_t m);

/// P[Binomial(n, p) >= ceil(n/2)], summed in the log domain so that terms
/// near Six Sigma scales do not underflow. Rejects p >= 0.5.
[[nodiscard]] double consensus_error(int n, double p);

/// Same quantity by enumerating all 2^n error/correct vectors. n <= 20.
[[nodiscard]] double consensus_error_oracle(int n, double p);

/// Smallest odd n with consensus_error(n, p) <= target. Returns 1 when
/// target >= p. Throws ExecutionError if no n <= kMaxAgentSearch suffices.
[[nodiscard]] int min_agents_for_target(double p, double target = kSixSigmaTarget);

/// (1 - rho) * consensus_error(n, p) + rho * p
[[nodiscard]] double correlated_error(int n, double p, double rho);

struct CorrelationTolerance {
  double rho_max = 0.0;
  bool saturated = false;  // raw ratio exceeded 1 and was clamped
  double raw = 0.0;        // unclamped ratio
};

/// (p - target) / (p - consensus_error(n, p)), clamped to [0, 1].
[[nodiscard]] CorrelationTolerance max_correlation(int n, double p, double target = kSixSigmaTarget);

struct WorkflowReliability {
  double reliability = 1.0;  // product of (1 - p_i)
  double lower_bound = 1.0;  // (1 - p_max)^m
};

[[nodiscard]] WorkflowReliability workflow_reliability(std::span<const double> action_errors);

/// floor(log(target) / log(1 - p_action))
[[nodiscard]] std::int64_t max_workflow_length(double target_reliability, double p_action);

/// A published figure next to the value the formulas above produce for it.
struct ReferencePoint {
  std::string label;
  std::string source;
  double claimed = 0.0;
  double resolution = 0.0;  // half a unit in the claim's last stated digit
  double computed = 0.0;
  bool discrepant = false;  // |claimed - computed| > resolution
};

/// The plotted scaling-curve point for odd n <= 13 and p in
/// {0.01, 0.02, 0.05, 0.10}, if there is one.
[[nodiscard]] std::optional<ReferencePoint> plotted_point(int n, double p);

/// The published reliability figures this library can recompute: the
/// worked n=5 example, the plotted scaling curve, the tabulated agent
/// requirements, the correlation tolerance and the workflow length bounds.
[[nodiscard]] std::vector<ReferencePoint> reference_points();

}  // namespace voteflow::reliability
