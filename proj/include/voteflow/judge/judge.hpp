#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "voteflow/backends/embedder.hpp"
#include "voteflow/judge/clustering.hpp"
#include "voteflow/judge/selector.hpp"

namespace voteflow::judge {

struct JudgeParams {
  double theta = 0.6;
  double tau = 0.85;
  int delta_n = 4;  // samples added per escalation
  int n_max = 13;

  void validate() const;
};

struct Verdict {
  std::string answer;
  double confidence = 0.0;
  int total_samples = 0;  // samples requested so far
  int delivered = 0;      // outputs the judge actually saw
  int rounds = 1;
  bool forced = false;  // decided at n_max without reaching theta
  std::string selection_rationale;
  std::vector<std::size_t> winner_members;
};

struct EscalationRequest {
  int delta_n = 0;
};

struct RoundDecision {
  ClusterReport report;
  std::variant<Verdict, EscalationRequest> outcome;

  [[nodiscard]] bool decided() const noexcept { return std::holds_alternative<Verdict>(outcome); }
  [[nodiscard]] const Verdict& verdict() const { return std::get<Verdict>(outcome); }
  [[nodiscard]] const EscalationRequest& escalation() const { return std::get<EscalationRequest>(outcome); }
};

/// One pass of the voting judge over the answers collected so far.
///
/// Embeds and clusters `outputs`. If the largest cluster holds at least
/// theta of them the best member of that cluster is returned. Otherwise,
/// while `requested` is below n_max, asks for min(delta_n, n_max - requested)
/// more samples; at n_max the largest cluster is taken as a forced decision.
/// A tie between largest clusters escalates the same way; at n_max the tied
/// cluster with the lowest member index wins.
///
/// `requested` counts samples asked for, `outputs` only those delivered
/// (failed samples are excluded). `round` is 1-based.
[[nodiscard]] RoundDecision judge_round(std::span<const std::string> outputs, int requested, int round,
                                        std::string_view task_description, const JudgeParams& params,
                                        backends::Embedder& embedder, Selector& selector);

}  // namespace voteflow::judge
