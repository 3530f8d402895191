#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "voteflow/backends/agent.hpp"

namespace voteflow::backends {

/// Replays fixed responses: sample i of a task gets responses[i % size].
/// Tasks without a script get the fallback, or an error if none is set.
class ScriptedAgent final : public Agent {
 public:
  ScriptedAgent(std::string name, std::map<std::string, std::vector<std::string>, std::less<>> responses,
                std::optional<std::string> fallback = std::nullopt);

  [[nodiscard]] const std::string& name() const noexcept override { return name_; }
  AgentOutput execute(const SampleRequest& request) override;

 private:
  std::string name_;
  std::map<std::string, std::vector<std::string>, std::less<>> responses_;
  std::optional<std::string> fallback_;
};

}  // namespace voteflow::backends
