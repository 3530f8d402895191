#include "voteflow/judge/judge.hpp"

#include <algorithm>

#include "voteflow/error.hpp"

namespace voteflow::judge {

void JudgeParams::validate() const {
  if (!(theta > 0.0 && theta <= 1.0)) throw ValidationError("theta must lie in (0, 1]");
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
  if (delta_n < 1) throw ValidationError("delta_n must be >= 1");
  if (n_max < 1) throw ValidationError("n_max must be >= 1");
}

RoundDecision judge_round(std::span<const std::string> outputs, int requested, int round,
                          std::string_view task_description, const JudgeParams& params, backends::Embedder& embedder,
                          Selector& selector) {
  params.validate();
  if (outputs.empty()) throw ValidationError("judge needs at least one delivered output");
  if (requested < static_cast<int>(outputs.size())) {
    throw ValidationError("more outputs than requested samples");
  }
  if (requested > params.n_max) {
    throw ValidationError("requested samples " + std::to_string(requested) + " exceed n_max " +
                          std::to_string(params.n_max));
  }

  const auto vectors = embedder.embed(outputs);
  if (vectors.size() != outputs.size()) throw ExecutionError("embedder returned the wrong number of vectors");

  RoundDecision decision{cluster_outputs(vectors, params.tau), EscalationRequest{}};
  apply_confidence(decision.report, params.theta);

  // A tie between largest clusters is treated like a contested vote.
  const bool undecided = decision.report.contested || decision.report.tied();
  if (undecided && requested < params.n_max) {
    decision.outcome = EscalationRequest{std::min(params.delta_n, params.n_max - requested)};
    return decision;
  }

  const Cluster& winner = decision.report.clusters[decision.report.winner];
  std::vector<std::string> candidates;
  candidates.reserve(winner.members.size());
  for (auto m : winner.members) candidates.push_back(outputs[m]);
  SelectedAnswer chosen = select_best(candidates, task_description, selector);

  Verdict v;
  v.answer = std::move(chosen.answer);
  v.confidence = decision.report.confidence;
  v.total_samples = requested;
  v.delivered = static_cast<int>(outputs.size());
  v.rounds = round;
  v.forced = undecided;
  v.selection_rationale = std::move(chosen.rationale);
  v.winner_members = winner.members;
  decision.outcome = std::move(v);
  return decision;
}

}  // namespace voteflow::judge
