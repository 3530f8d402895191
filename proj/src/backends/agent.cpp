#include "voteflow/backends/agent.hpp"

#include <sstream>

namespace voteflow::backends {

std::string TruthTag::str() const { return correct() ? "correct" : "error_" + std::to_string(error_index); }

AgentConfig generate_agent_config(const graph::TaskSpec& task, const graph::SamplingConfig& sampling) {
  AgentConfig config;
  config.temperature = sampling.temperature;
  config.tools = task.tools;
  config.goal = task.description;
  std::ostringstream instructions;
  if (task.action_type == graph::ActionType::tool) {
    config.role = "Tool operator for task " + task.id;
    instructions << "Decide the arguments for a single call to ";
    for (std::size_t i = 0; i < task.tools.size(); ++i) instructions << (i ? ", " : "") << task.tools[i];
    instructions << ". Reply with the call arguments only; the call itself is made once by the orchestrator.";
  } else {
    config.role = "Analyst for task " + task.id;
    instructions << "Solve exactly this task using only the verified inputs provided. "
                    "Reply with the answer only, without commentary.";
  }
  if (task.output_schema) instructions << " Output format: " << task.output_schema->dump() << ".";
  config.instructions = instructions.str();
  return config;
}

std::string_view to_string(BackendFailure failure) {
  switch (failure) {
    case BackendFailure::timeout:
      return "timeout";
    case BackendFailure::transport:
      return "transport";
    case BackendFailure::server:
      return "server";
    case BackendFailure::auth:
      return "auth";
    case BackendFailure::rejected:
      return "rejected";
    case BackendFailure::malformed:
      return "malformed";
  }
  return "unknown";
}

BackendError::BackendError(BackendFailure failure, const std::string& message, std::chrono::duration<double> elapsed,
                           int attempts)
    : Error(std::string(to_string(failure)) + ": " + message),
      failure_(failure),
      elapsed_(elapsed),
      attempts_(attempts) {}

std::vector<ChatMessage> assemble_prompt(const graph::TaskSpec& task, const AgentConfig& config,
                                         std::span<const graph::ContextInput> context) {
  std::ostringstream system;
  system << "Role: " << config.role << "\nGoal: " << config.goal << "\nInstructions: " << config.instructions;
  if (!config.tools.empty()) {
    system << "\nTools:";
    for (const auto& t : config.tools) system << ' ' << t;
  }

  std::ostringstream user;
  user << "Task: " << task.description;
  if (!context.empty()) {
    user << "\n\nVerified inputs:";
    for (const auto& input : context) user << "\n[" << input.task_id << "]: " << input.answer;
  }
  return {{"system", system.str()}, {"user", user.str()}};
}

}  // namespace voteflow::backends
