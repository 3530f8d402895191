#include "voteflow/backends/sim_agent.hpp"

#include <thread>

#include "voteflow/hash.hpp"

namespace voteflow::backends {

void SimAgentModel::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("simulated p must lie in [0, 1]");
  if (error_space < 1) throw ValidationError("simulated error_space must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("simulated rho must lie in [0, 1]");
}

const std::string& GroundTruth::canonical(std::string_view task_id) const {
  auto it = answers_.find(task_id);
  if (it == answers_.end()) {
    throw ValidationError("no canonical answer registered for task '" + std::string(task_id) + "'");
  }
  return it->second;
}

std::string wrong_answer_text(std::string_view task_id, int j) {
  std::string out;
  out.reserve(task_id.size() + 12);
  out += "WRONG::";
  out += task_id;
  out += "::";
  out += std::to_string(j);
  return out;
}

namespace {

// Correct with probability 1 - p, else wrong answer j uniform in 1..K.
TruthTag draw_truth(SplitMix64& rng, const SimAgentModel& model) {
  if (rng.uniform() < model.p) {
    return TruthTag{1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(model.error_space)))};
  }
  return TruthTag{0};
}

std::string render(std::string_view task_id, std::string_view canonical, TruthTag truth) {
  return truth.correct() ? std::string(canonical) : wrong_answer_text(task_id, truth.error_index);
}

}  // namespace

TruthTag sim_draw(std::string_view task_id, const SimAgentModel& model, std::uint64_t seed) {
  SplitMix64 rng(stable_hash(seed, task_id));
  return draw_truth(rng, model);
}

AgentOutput sim_execute(std::string_view task_id, std::string_view canonical, const SimAgentModel& model,
                        std::uint64_t seed, const SharedDraw* shared_draw) {
  AgentOutput out;
  out.seed = seed;
  out.backend = model.family;
  if (shared_draw != nullptr) {
    out.text = shared_draw->text;
    out.truth_tag = shared_draw->truth;
    return out;
  }
  const TruthTag truth = sim_draw(task_id, model, seed);
  out.text = render(task_id, canonical, truth);
  out.truth_tag = truth;
  return out;
}

std::optional<SharedDraw> draw_common_cause(std::string_view task_id, std::string_view canonical,
                                            const SimAgentModel& model, std::uint64_t trial_seed) {
  SplitMix64 rng(stable_hash(trial_seed, task_id, "common-cause"));
  if (!(rng.uniform() < model.rho)) return std::nullopt;
  const TruthTag truth = draw_truth(rng, model);
  return SharedDraw{render(task_id, canonical, truth), truth};
}

SimAgent::SimAgent(std::string name, SimAgentModel model, std::shared_ptr<const GroundTruth> truth,
                   std::chrono::milliseconds latency)
    : name_(std::move(name)), model_(std::move(model)), truth_(std::move(truth)), latency_(latency) {
  model_.validate();
  if (!truth_) throw ValidationError("simulated agent '" + name_ + "' has no ground truth");
}

AgentOutput SimAgent::execute(const SampleRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  const std::string& canonical = truth_->canonical(request.task.id);
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
  AgentOutput out = sim_execute(request.task.id, canonical, model_, request.config.seed, request.shared_draw);
  out.backend = name_;
  out.latency = std::chrono::steady_clock::now() - start;
  return out;
}

std::optional<SharedDraw> SimAgent::draw_common_cause(const graph::TaskSpec& task, std::uint64_t trial_seed) const {
  return backends::draw_common_cause(task.id, truth_->canonical(task.id), model_, trial_seed);
}

}  // namespace voteflow::backends
