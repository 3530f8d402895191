#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "voteflow/backends/embedder.hpp"
#include "voteflow/backends/sim_agent.hpp"
#include "voteflow/executor/executor.hpp"
#include "voteflow/executor/tools.hpp"
#include "voteflow/graph/workflow_graph.hpp"
#include "voteflow/judge/selector.hpp"

namespace voteflow::cli {

/// Everything a run needs, built from a config document:
///
///   seed, log_path, max_concurrency, sample_deadline_s
///   sampling  {n, n_max, temperature, theta, tau, model_pool}
///   judge     {delta_n}
///   backends  [{name, kind: sim|scripted|http_chat, ...}]
///   embedder  {kind: exact|mock|scripted|http, ...}
///   selector  {kind: deterministic|llm, ...}
///   scenario  {answers: {task id: canonical answer}}
///   tools     {name: {kind: record_append|arithmetic|lookup, table}}
struct Runtime {
  std::uint64_t seed = 0;
  std::optional<std::string> log_path;
  graph::SamplingConfig sampling;
  int delta_n = 4;
  executor::ExecutorOptions executor;
  executor::AgentPool pool;
  std::unique_ptr<backends::Embedder> embedder;
  std::unique_ptr<judge::Selector> selector;
  executor::ToolRegistry tools;
  std::shared_ptr<backends::GroundTruth> truth;
  std::map<std::string, std::shared_ptr<executor::RecordAppendTool>, std::less<>> ledgers;
  nlohmann::json document;
};

/// Throws ValidationError on unknown kinds, missing fields or bad ranges.
[[nodiscard]] std::unique_ptr<Runtime> build_runtime(const nlohmann::json& config);

[[nodiscard]] nlohmann::json read_json_file(const std::string& path);

/// Checks that every TOOL task names registered tools and, when simulated
/// backends are present, that every task has a canonical answer.
void check_workflow(const graph::WorkflowGraph& graph, const Runtime& runtime);

}  // namespace voteflow::cli
