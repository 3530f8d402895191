#include "voteflow/state/recovery.hpp"

#include <algorithm>
#include <set>

#include "voteflow/error.hpp"

namespace voteflow::state {

using nlohmann::json;

RecoveredState recover(std::span<const RunEvent> events) {
  RecoveredState out;
  std::set<std::string, std::less<>> started;
  std::map<std::string, executor::ToolRecord, std::less<>> tools;
  try {
    for (const auto& e : events) {
      const json& p = e.payload;
      switch (e.kind) {
        case EventKind::run_started:
          if (!out.run) {
            out.run = RunInfo{p.at("run_id").get<std::string>(), p.at("seed").get<std::uint64_t>(),
                              p.value("workflow", json()), p.value("config", json())};
          }
          break;
        case EventKind::task_started:
          started.insert(p.at("task_id").get<std::string>());
          break;
        case EventKind::task_completed: {
          auto v = p.at("verified").get<graph::VerifiedOutput>();
          out.completed.insert_or_assign(v.task_id, std::move(v));
          break;
        }
        case EventKind::tool_invoked: {
          auto r = p.at("record").get<executor::ToolRecord>();
          tools.insert_or_assign(r.key, std::move(r));
          break;
        }
        case EventKind::run_completed:
          out.finished = true;
          out.abort_cause.reset();
          break;
        case EventKind::run_aborted:
          out.abort_cause = p.value("cause", std::string("unknown"));
          break;
        default:
          break;
      }
    }
  } catch (const json::exception& ex) {
    throw StorageError(std::string("event payload is malformed: ") + ex.what());
  }
  for (const auto& id : started) {
    if (!out.completed.contains(id)) out.interrupted.push_back(id);
  }
  for (auto& [k, r] : tools) out.tool_records.push_back(std::move(r));
  out.next_seq = events.size();
  return out;
}

void restore_graph(graph::WorkflowGraph& graph, const RecoveredState& state) {
  graph.reset_in_progress();
  for (const auto& [id, v] : state.completed) {
    if (!graph.tasks().contains(id)) throw StorageError("log completes unknown task '" + id + "'");
  }
  for (const auto& id : graph.topological_order()) {
    auto it = state.completed.find(id);
    if (it == state.completed.end() || graph.status(id) == graph::TaskStatus::completed) continue;
    try {
      graph.start_task(id);
    } catch (const Error& e) {
      throw StorageError("log completes task '" + id + "' before its dependencies: " + e.what());
    }
    graph.complete_task(id, it->second);
  }
}

}  // namespace voteflow::state
