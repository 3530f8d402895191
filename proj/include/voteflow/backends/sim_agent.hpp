#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "voteflow/backends/agent.hpp"

namespace voteflow::backends {

/// Error model of a simulated agent family.
struct SimAgentModel {
  double p = 0.0;       // per-sample error probability
  int error_space = 9;  // K distinct wrong answers per task
  double rho = 0.0;     // probability a trial falls in the common-cause regime
  std::string family = "sim";

  void validate() const;
};

/// Canonical answer of every task in a simulation scenario.
class GroundTruth {
 public:
  GroundTruth() = default;
  explicit GroundTruth(std::map<std::string, std::string, std::less<>> answers) : answers_(std::move(answers)) {}

  void set(std::string task_id, std::string answer) { answers_.insert_or_assign(std::move(task_id), std::move(answer)); }
  [[nodiscard]] bool contains(std::string_view task_id) const { return answers_.find(task_id) != answers_.end(); }

  /// Throws ValidationError when the task has no registered answer.
  [[nodiscard]] const std::string& canonical(std::string_view task_id) const;

  [[nodiscard]] const std::map<std::string, std::string, std::less<>>& answers() const noexcept { return answers_; }

 private:
  std::map<std::string, std::string, std::less<>> answers_;
};

/// "WRONG::<task>::<j>", j in 1..K.
[[nodiscard]] std::string wrong_answer_text(std::string_view task_id, int j);

/// The truth tag sim_execute would produce without a shared draw.
[[nodiscard]] TruthTag sim_draw(std::string_view task_id, const SimAgentModel& model, std::uint64_t seed);

/// One simulated sample. A shared draw, when supplied, is emitted verbatim;
/// otherwise the canonical answer with probability 1 - p, else a wrong
/// answer uniform over K. Pure in (seed, task_id).
[[nodiscard]] AgentOutput sim_execute(std::string_view task_id, std::string_view canonical, const SimAgentModel& model,
                                      std::uint64_t seed, const SharedDraw* shared_draw = nullptr);

/// With probability rho, one draw (correct w.p. 1 - p, else uniform wrong)
/// that every agent of the trial must emit; otherwise absent.
[[nodiscard]] std::optional<SharedDraw> draw_common_cause(std::string_view task_id, std::string_view canonical,
                                                          const SimAgentModel& model, std::uint64_t trial_seed);

/// Agent backed by the simulation model. Optional fixed latency lets tests
/// observe concurrency.
class SimAgent final : public Agent {
 public:
  SimAgent(std::string name, SimAgentModel model, std::shared_ptr<const GroundTruth> truth,
           std::chrono::milliseconds latency = std::chrono::milliseconds{0});

  [[nodiscard]] const std::string& name() const noexcept override { return name_; }
  [[nodiscard]] std::string family() const override { return model_.family; }
  [[nodiscard]] const SimAgentModel& model() const noexcept { return model_; }

  AgentOutput execute(const SampleRequest& request) override;
  [[nodiscard]] std::optional<SharedDraw> draw_common_cause(const graph::TaskSpec& task,
                                                            std::uint64_t trial_seed) const override;

 private:
  std::string name_;
  SimAgentModel model_;
  std::shared_ptr<const GroundTruth> truth_;
  std::chrono::milliseconds latency_;
};

}  // namespace voteflow::backends
