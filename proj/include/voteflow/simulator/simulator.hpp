#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "voteflow/reliability/reliability.hpp"

namespace voteflow::simulator {

/// Fewest trials the estimators accept.
inline constexpr std::int64_t kMinTrials = 10000;

/// Two-sided 99% normal quantile.
inline constexpr double kZ99 = 2.5758293035489;

/// Band width, in binomial standard deviations of the target, for the
/// estimate-versus-theory checks.
inline constexpr double kBandSigmas = 3.0;

struct TrialOptions {
  std::int64_t trials = 1000000;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Count of trials in which an event happened.
struct Estimate {
  std::int64_t trials = 0;
  std::int64_t hits = 0;

  [[nodiscard]] double rate() const noexcept;
  /// 99% normal-approximation half-width around rate().
  [[nodiscard]] double ci_halfwidth() const noexcept;
  [[nodiscard]] reliability::ReliabilityResult as_result() const;
};

struct BandCheck {
  double target = 0.0;
  double sigma = 0.0;  // sqrt(target (1 - target) / trials)
  double z = 0.0;      // (rate - target) / sigma, 0 when sigma = 0 and equal
  bool within = false;
};

/// |rate - target| <= kBandSigmas * sigma. A zero-variance target must be
/// hit exactly.
[[nodiscard]] BandCheck check_band(const Estimate& estimate, double target);

/// The exact-embedding judge decision over one sample set, given as truth
/// indices (0 = correct answer, j = j-th wrong answer). Identical answers
/// form one cluster; the winner is the largest, ties to the cluster seen
/// first.
struct Tally {
  int winner_truth = 0;
  int winner_size = 0;
  int delivered = 0;
  bool tied = false;

  [[nodiscard]] double confidence() const noexcept {
    return delivered == 0 ? 0.0 : static_cast<double>(winner_size) / delivered;
  }
  /// The verdict is the wrong answer.
  [[nodiscard]] bool wrong() const noexcept { return winner_truth != 0; }
  /// A judged action is defective unless the correct answer holds a strict
  /// majority of the delivered outputs.
  [[nodiscard]] bool defect() const noexcept { return wrong() || 2 * winner_size <= delivered; }
};

[[nodiscard]] Tally tally(std::span<const int> truths);

struct ConsensusReport {
  Estimate defects;        // no correct strict majority
  Estimate wrong_answers;  // plurality verdict wrong
  double closed_form = 0.0;
};

/// n simulated agents per trial, K wrong answers, judge with exact
/// embeddings. Requires trials >= kMinTrials.
[[nodiscard]] ConsensusReport simulate_consensus(int n, double p, int error_space, const TrialOptions& options);

struct CorrelatedReport {
  Estimate defects;
  Estimate wrong_answers;
  Estimate common_cause;  // trials in the shared-draw regime
  double closed_form = 0.0;
};

[[nodiscard]] CorrelatedReport simulate_correlated(int n, double p, double rho, int error_space,
                                                   const TrialOptions& options);

struct WorkflowReport {
  Estimate successes;  // every action of the chain non-defective
  double closed_form = 0.0;
};

[[nodiscard]] WorkflowReport simulate_workflow(int m, int n, double p, int error_space, const TrialOptions& options);

struct DynamicParams {
  int n0 = 5;
  int n_max = 13;
  double theta = 0.6;
  int delta_n = 4;
  double p = 0.05;
  int error_space = 9;
};

struct DynamicReport {
  Estimate defects;
  Estimate wrong_answers;
  Estimate escalated;  // trials with at least one escalation
  Estimate forced;     // decided at n_max without meeting theta
  double mean_samples = 0.0;
  // The first round alone, judged at fixed n0 on the same seeds.
  Estimate fixed_defects;
  Estimate fixed_wrong_answers;
  std::int64_t dominance_violations = 0;  // dynamic defective, fixed not
  double fixed_closed_form = 0.0;
};

/// Full judge loop per trial: n0 samples, then delta_n more while the
/// winner's share is below theta (or tied) and n_max is not reached.
[[nodiscard]] DynamicReport simulate_dynamic(const DynamicParams& params, const TrialOptions& options);

/// Runs `estimate` and checks it against `target`; on a miss, reruns once
/// with twice the trials.
struct BandedEstimate {
  Estimate estimate;
  BandCheck band;
  bool rerun = false;
};

[[nodiscard]] BandedEstimate banded(const std::function<Estimate(std::int64_t trials)>& estimate,
                                    std::int64_t trials, double target);

/// Structured record for an estimate: {estimate fields, rate, ci, target,...}.
[[nodiscard]] nlohmann::json to_json(const Estimate& estimate);

}  // namespace voteflow::simulator
