#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voteflow/backends/embedder.hpp"
#include "voteflow/executor/executor.hpp"
#include "voteflow/executor/tools.hpp"
#include "voteflow/graph/workflow_graph.hpp"
#include "voteflow/judge/selector.hpp"
#include "voteflow/state/event_log.hpp"

namespace voteflow::executor {

struct EngineOptions {
  std::string run_id;
  std::uint64_t seed = 0;
  graph::SamplingConfig defaults;
  int delta_n = 4;
  ExecutorOptions executor;
  nlohmann::json workflow_document;  // recorded in run_started
  nlohmann::json config_document;
  /// Testing hook: stop scheduling after this many task completions in this
  /// invocation, as if the process died right after the last boundary.
  std::optional<std::size_t> halt_after_completions;
};

struct EngineServices {
  const AgentPool& pool;
  backends::Embedder& embedder;
  judge::Selector& selector;
  ToolRegistry& tools;
  state::EventLog& log;
};

enum class RunStatus { completed, halted };

struct TaskTiming {
  std::chrono::steady_clock::time_point started;
  std::chrono::steady_clock::time_point finished;
};

struct RunResult {
  RunStatus status = RunStatus::completed;
  std::optional<graph::VerifiedOutput> final_output;
  std::map<std::string, graph::VerifiedOutput, std::less<>> outputs;
  std::vector<std::vector<std::string>> launch_waves;      // tasks started together
  std::map<std::string, TaskTiming, std::less<>> timings;  // tasks executed here
  bool resumed = false;
};

/// Executes a workflow: ready tasks run concurrently, each through sampling
/// and judge rounds, and every step is written to the event log. Tasks the
/// log already records as completed are not executed again.
///
/// A task failure writes run_aborted and rethrows once in-flight tasks have
/// drained; no new tasks start after the first failure.
class Engine {
 public:
  Engine(EngineServices services, EngineOptions options);

  RunResult run(graph::WorkflowGraph& graph);

 private:
  graph::VerifiedOutput execute_task(const graph::TaskSpec& task, const graph::SamplingConfig& sampling,
                                     const std::vector<graph::ContextInput>& context);

  EngineServices services_;
  EngineOptions options_;
  Executor executor_;
};

}  // namespace voteflow::executor
