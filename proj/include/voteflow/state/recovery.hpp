#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voteflow/executor/tools.hpp"
#include "voteflow/graph/workflow_graph.hpp"
#include "voteflow/state/event_log.hpp"

namespace voteflow::state {

/// What a run_started record pins down.
struct RunInfo {
  std::string run_id;
  std::uint64_t seed = 0;
  nlohmann::json workflow;
  nlohmann::json config;
};

struct RecoveredState {
  std::optional<RunInfo> run;  // from the first run_started
  std::map<std::string, graph::VerifiedOutput, std::less<>> completed;
  std::vector<executor::ToolRecord> tool_records;
  std::vector<std::string> interrupted;  // started, never completed
  std::uint64_t next_seq = 0;
  bool finished = false;                  // a run_completed is present
  std::optional<std::string> abort_cause;  // last run_aborted, if not finished since
};

/// Folds a parsed log into the durable run state.
[[nodiscard]] RecoveredState recover(std::span<const RunEvent> events);

/// Marks every recovered task completed. All other tasks stay pending.
/// Throws StorageError if the log names a task the graph does not have.
void restore_graph(graph::WorkflowGraph& graph, const RecoveredState& state);

}  // namespace voteflow::state
