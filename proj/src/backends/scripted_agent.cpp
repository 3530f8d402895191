#include "voteflow/backends/scripted_agent.hpp"

#include <chrono>

namespace voteflow::backends {

ScriptedAgent::ScriptedAgent(std::string name, std::map<std::string, std::vector<std::string>, std::less<>> responses,
                             std::optional<std::string> fallback)
    : name_(std::move(name)), responses_(std::move(responses)), fallback_(std::move(fallback)) {
  for (const auto& [task, list] : responses_) {
    if (list.empty()) throw ValidationError("scripted agent '" + name_ + "' has an empty script for '" + task + "'");
  }
}

AgentOutput ScriptedAgent::execute(const SampleRequest& request) {
  AgentOutput out;
  out.backend = name_;
  out.seed = request.config.seed;
  auto it = responses_.find(request.task.id);
  if (it != responses_.end()) {
    out.text = it->second[request.sample_index % it->second.size()];
  } else if (fallback_) {
    out.text = *fallback_;
  } else {
    throw ValidationError("scripted agent '" + name_ + "' has no response for task '" + request.task.id + "'");
  }
  return out;
}

}  // namespace voteflow::backends
