#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voteflow/error.hpp"
#include "voteflow/graph/workflow_graph.hpp"

namespace voteflow::backends {

/// Micro-agent configuration generated per task; model and seed are filled
/// in per sample.
struct AgentConfig {
  std::string role;
  std::string goal;
  std::string instructions;
  std::vector<std::string> tools;
  std::string model;
  double temperature = 0.7;
  std::uint64_t seed = 0;
};

[[nodiscard]] AgentConfig generate_agent_config(const graph::TaskSpec& task, const graph::SamplingConfig& sampling);

/// Ground-truth label of a simulated output. Measurement only: it never
/// crosses into the judge, which sees answer texts alone.
struct TruthTag {
  int error_index = 0;  // 0 = correct, j >= 1 = the j-th wrong answer
  [[nodiscard]] bool correct() const noexcept { return error_index == 0; }
  [[nodiscard]] std::string str() const;
  friend bool operator==(const TruthTag&, const TruthTag&) = default;
};

struct AgentOutput {
  std::string text;
  std::string backend;
  std::uint64_t seed = 0;
  std::chrono::duration<double> latency{0};
  std::optional<TruthTag> truth_tag;
  int retries = 0;
};

/// One draw shared by every agent of a family in a correlated trial.
struct SharedDraw {
  std::string text;
  TruthTag truth;
};

struct SampleRequest {
  const graph::TaskSpec& task;
  const AgentConfig& config;
  std::span<const graph::ContextInput> context;
  std::size_t sample_index = 0;
  int round = 0;
  const SharedDraw* shared_draw = nullptr;  // set only in the correlated regime
};

/// A backend that can produce one sample for a task. Implementations must
/// be safe to call concurrently.
class Agent {
 public:
  virtual ~Agent() = default;

  [[nodiscard]] virtual const std::string& name() const noexcept = 0;

  /// Correlation group. Agents in one family share common-cause draws.
  [[nodiscard]] virtual std::string family() const { return name(); }

  virtual AgentOutput execute(const SampleRequest& request) = 0;

  /// Common-cause draw for a task trial; absent means independent sampling.
  [[nodiscard]] virtual std::optional<SharedDraw> draw_common_cause(const graph::TaskSpec& /*task*/,
                                                                    std::uint64_t /*trial_seed*/) const {
    return std::nullopt;
  }
};

enum class BackendFailure {
  timeout,    // per-sample deadline exceeded
  transport,  // connection refused/reset, no response
  server,     // 5xx, 408 or 429
  auth,       // 401/403 or missing credential
  rejected,   // any other non-2xx
  malformed,  // 2xx with an unusable body
};

[[nodiscard]] std::string_view to_string(BackendFailure failure);

class BackendError : public Error {
 public:
  BackendError(BackendFailure failure, const std::string& message, std::chrono::duration<double> elapsed = {},
               int attempts = 1);

  [[nodiscard]] BackendFailure failure() const noexcept { return failure_; }
  [[nodiscard]] bool retryable() const noexcept {
    return failure_ == BackendFailure::transport || failure_ == BackendFailure::server;
  }
  [[nodiscard]] std::chrono::duration<double> elapsed() const noexcept { return elapsed_; }
  [[nodiscard]] int attempts() const noexcept { return attempts_; }

 private:
  BackendFailure failure_;
  std::chrono::duration<double> elapsed_;
  int attempts_;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

/// System + user messages for one sample: agent configuration, the task
/// and the verified answers of its dependencies.
[[nodiscard]] std::vector<ChatMessage> assemble_prompt(const graph::TaskSpec& task, const AgentConfig& config,
                                                       std::span<const graph::ContextInput> context);

}  // namespace voteflow::backends
