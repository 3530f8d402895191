#include "voteflow/reliability/reliability.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>

#include "voteflow/error.hpp"

namespace voteflow::reliability {
namespace {

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

void require_probability(double p, const char* what) {
  if (!is_probability(p)) throw ValidationError(std::string(what) + " must lie in [0, 1], got " + std::to_string(p));
}

void require_agents(int n) {
  if (n < 1) throw ValidationError("agent count must be >= 1, got " + std::to_string(n));
}

void require_vote_premise(double p) {
  require_probability(p, "error probability");
  if (p >= 0.5) {
    throw ValidationError("majority voting requires p < 0.5, got " + std::to_string(p));
  }
}

// glibc's lgamma() writes the global signgam; the reentrant variant keeps
// these functions safe to call from many threads.
double log_gamma(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

double log_choose(int n, int k) {
  return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(static_cast<double>(n - k) + 1.0);
}

// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace

void ReliabilityParams::validate(bool require_improvement) const {
  require_agents(n);
  require_probability(p, "p");
  if (p >= 1.0) throw ValidationError("p must be < 1");
  if (require_improvement && p >= 0.5) throw ValidationError("p must be < 0.5 for majority voting to help");
  require_probability(rho, "rho");
  if (!(target > 0.0 && target < 1.0)) throw ValidationError("target must lie in (0, 1)");
  if (out_space < 1) throw ValidationError("out_space must be >= 1");
}

std::string to_string(Method method) {
  return method == Method::closed_form ? "closed_form" : "monte_carlo";
}

ReliabilityResult ReliabilityResult::closed_form(double p_sys) {
  require_probability(p_sys, "p_sys");
  return ReliabilityResult{p_sys, reliability::dpmo(p_sys), Method::closed_form, std::nullopt, std::nullopt};
}

ReliabilityResult ReliabilityResult::monte_carlo(double p_sys, double ci_halfwidth, std::int64_t trials) {
  require_probability(p_sys, "p_sys");
  if (trials < 1) throw ValidationError("trials must be >= 1");
  return ReliabilityResult{p_sys, reliability::dpmo(p_sys), Method::monte_carlo, ci_halfwidth, trials};
}

double dpmo(double probability) { return probability * 1e6; }

double compound_success(double p, std::int64_t m) {
  require_probability(p, "error probability");
  if (m < 0) throw ValidationError("step count must be >= 0");
  if (m == 0 || p == 0.0) return 1.0;
  if (p == 1.0) return 0.0;
  return std::exp(static_cast<double>(m) * std::log1p(-p));
}

double consensus_error(int n, double p) {
  require_agents(n);
  require_vote_premise(p);
  if (p == 0.0) return 0.0;

  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  // Terms shrink as k grows when p < 0.5; add the smallest first.
  CompensatedSum sum;
  for (int k = n; k >= majority_threshold(n); --k) {
    sum.add(std::exp(log_choose(n, k) + k * log_p + (n - k) * log_q));
  }
  return std::min(sum.value(), 1.0);
}

double consensus_error_oracle(int n, double p) {
  require_agents(n);
  require_probability(p, "error probability");
  if (n > kOracleMaxAgents) {
    throw ValidationError("enumeration oracle supports n <= " + std::to_string(kOracleMaxAgents));
  }
  const int threshold = majority_threshold(n);
  const std::uint32_t outcomes = 1U << n;
  CompensatedSum sum;
  for (std::uint32_t mask = 0; mask < outcomes; ++mask) {
    if (std::popcount(mask) < threshold) continue;
    double prob = 1.0;
    for (int agent = 0; agent < n; ++agent) {
      prob *= ((mask >> agent) & 1U) ? p : (1.0 - p);
    }
    sum.add(prob);
  }
  return sum.value();
}

int min_agents_for_target(double p, double target) {
  if (!(p > 0.0 && p < 0.5)) throw ValidationError("p must lie in (0, 0.5)");
  if (!(target > 0.0 && target < 1.0)) throw ValidationError("target must lie in (0, 1)");
  if (target >= p) return 1;
  for (int n = 1; n <= kMaxAgentSearch; n += 2) {
    if (consensus_error(n, p) <= target) return n;
  }
  throw ExecutionError("no odd n <= " + std::to_string(kMaxAgentSearch) + " reaches target " +
                       std::to_string(target) + " at p=" + std::to_string(p));
}

double correlated_error(int n, double p, double rho) {
  require_probability(rho, "rho");
  const double independent = consensus_error(n, p);
  if (rho == 0.0) return independent;
  if (rho == 1.0) return p;
  return (1.0 - rho) * independent + rho * p;
}

CorrelationTolerance max_correlation(int n, double p, double target) {
  if (!(target > 0.0 && target < 1.0)) throw ValidationError("target must lie in (0, 1)");
  const double independent = consensus_error(n, p);
  if (!(p > independent)) {
    throw ValidationError("correlation tolerance needs p > consensus_error(n, p)");
  }
  const double raw = (p - target) / (p - independent);
  CorrelationTolerance out;
  out.raw = raw;
  out.rho_max = std::clamp(raw, 0.0, 1.0);
  out.saturated = raw > 1.0;
  return out;
}

WorkflowReliability workflow_reliability(std::span<const double> action_errors) {
  WorkflowReliability out;
  double p_max = 0.0;
  for (double p : action_errors) {
    require_probability(p, "action error");
    out.reliability *= (1.0 - p);
    p_max = std::max(p_max, p);
  }
  // Repeated multiplication rather than pow: rounding is monotone, so each
  // partial bound stays <= the matching partial product.
  for (std::size_t i = 0; i < action_errors.size(); ++i) out.lower_bound *= (1.0 - p_max);
  return out;
}

std::int64_t max_workflow_length(double target_reliability, double p_action) {
  if (!(target_reliability > 0.0 && target_reliability < 1.0)) {
    throw ValidationError("target reliability must lie in (0, 1)");
  }
  if (!(p_action > 0.0 && p_action < 1.0)) throw ValidationError("action error must lie in (0, 1)");
  const double ratio = std::log(target_reliability) / std::log1p(-p_action);
  // Exact-integer ratios such as log(0.5)/log(0.5) must not floor down by an ulp.
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-12 * std::max(1.0, nearest)) return static_cast<std::int64_t>(nearest);
  return static_cast<std::int64_t>(std::floor(ratio));
}

}  // namespace voteflow::reliability
