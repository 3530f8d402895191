#include "voteflow/graph/workflow_graph.hpp"

#include <algorithm>
#include <queue>
#include <set>

#include "voteflow/error.hpp"

namespace voteflow::graph {

std::string_view to_string(ActionType type) { return type == ActionType::tool ? "TOOL" : "REASONING"; }

ActionType parse_action_type(std::string_view text) {
  if (text == "REASONING") return ActionType::reasoning;
  if (text == "TOOL") return ActionType::tool;
  throw ValidationError("unknown action type '" + std::string(text) + "' (expected REASONING or TOOL)");
}

std::string_view to_string(TaskStatus status) {
  switch (status) {
    case TaskStatus::pending:
      return "pending";
    case TaskStatus::in_progress:
      return "in_progress";
    case TaskStatus::completed:
      return "completed";
  }
  return "unknown";
}

void SamplingConfig::validate() const {
  if (n < 1 || n > n_max) {
    throw ValidationError("sampling requires 1 <= n <= n_max, got n=" + std::to_string(n) +
                          " n_max=" + std::to_string(n_max));
  }
  if (!(theta > 0.5 && theta <= 1.0)) throw ValidationError("theta must lie in (0.5, 1]");
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
  if (!(temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
}

bool SamplingOverrides::empty() const {
  return !n && !n_max && !temperature && !theta && !tau && !model_pool;
}

SamplingConfig SamplingOverrides::resolve(const SamplingConfig& defaults) const {
  SamplingConfig out = defaults;
  if (n) out.n = *n;
  if (n_max) out.n_max = *n_max;
  if (temperature) out.temperature = *temperature;
  if (theta) out.theta = *theta;
  if (tau) out.tau = *tau;
  if (model_pool) out.model_pool = *model_pool;
  out.validate();
  return out;
}

WorkflowGraph WorkflowGraph::from_tasks(std::vector<TaskSpec> tasks) {
  WorkflowGraph g;
  if (tasks.empty()) throw ValidationError("workflow has no tasks");

  for (auto& t : tasks) {
    if (t.id.empty()) throw ValidationError("task with empty id");
    if (g.tasks_.count(t.id)) throw ValidationError("duplicate task id '" + t.id + "'");
    g.declared_order_.push_back(t.id);
    g.tasks_.emplace(t.id, std::move(t));
  }

  for (const auto& [id, t] : g.tasks_) {
    std::set<std::string_view> seen;
    for (const auto& dep : t.dependencies) {
      if (dep == id) throw ValidationError("task '" + id + "' depends on itself");
      if (!g.tasks_.count(dep)) throw ValidationError("task '" + id + "' depends on unknown task '" + dep + "'");
      if (!seen.insert(dep).second) throw ValidationError("task '" + id + "' lists dependency '" + dep + "' twice");
    }
    if ((t.action_type == ActionType::tool) != !t.tools.empty()) {
      throw ValidationError(t.action_type == ActionType::tool ? "TOOL task '" + id + "' lists no tools"
                                                              : "REASONING task '" + id + "' lists tools");
    }
  }

  // Kahn's algorithm doubles as the cycle check.
  if (g.topological_order().size() != g.tasks_.size()) throw ValidationError("workflow dependencies contain a cycle");

  std::set<std::string> has_dependent;
  for (const auto& [id, t] : g.tasks_) {
    for (const auto& dep : t.dependencies) has_dependent.insert(dep);
  }
  std::vector<std::string> sinks;
  for (const auto& [id, t] : g.tasks_) {
    if (!has_dependent.count(id)) sinks.push_back(id);
  }
  if (sinks.size() != 1) {
    std::string names;
    for (const auto& s : sinks) names += (names.empty() ? "" : ", ") + s;
    throw ValidationError("workflow must have exactly one sink task, found " + std::to_string(sinks.size()) +
                          (names.empty() ? "" : " (" + names + ")"));
  }
  g.sink_ = sinks.front();

  for (const auto& [id, t] : g.tasks_) g.status_.emplace(id, TaskStatus::pending);
  return g;
}

const TaskSpec& WorkflowGraph::task(std::string_view id) const {
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw ValidationError("unknown task '" + std::string(id) + "'");
  return it->second;
}

TaskStatus WorkflowGraph::status(std::string_view id) const {
  auto it = status_.find(id);
  if (it == status_.end()) throw ValidationError("unknown task '" + std::string(id) + "'");
  return it->second;
}

TaskStatus& WorkflowGraph::status_ref(std::string_view id) {
  auto it = status_.find(id);
  if (it == status_.end()) throw ValidationError("unknown task '" + std::string(id) + "'");
  return it->second;
}

const VerifiedOutput* WorkflowGraph::verified(std::string_view id) const {
  auto it = verified_.find(id);
  return it == verified_.end() ? nullptr : &it->second;
}

std::vector<std::string> WorkflowGraph::ready_tasks() const {
  std::vector<std::string> ready;
  for (const auto& [id, t] : tasks_) {
    if (status(id) != TaskStatus::pending) continue;
    const bool deps_done = std::all_of(t.dependencies.begin(), t.dependencies.end(),
                                       [&](const std::string& d) { return status(d) == TaskStatus::completed; });
    if (deps_done) ready.push_back(id);
  }
  return ready;  // std::map iteration is already lexicographic
}

std::vector<std::string> WorkflowGraph::topological_order() const {
  std::map<std::string_view, std::size_t> indegree;
  std::map<std::string_view, std::vector<std::string_view>> dependents;
  for (const auto& [id, t] : tasks_) {
    indegree[id];
    for (const auto& dep : t.dependencies) {
      ++indegree[id];
      dependents[dep].push_back(id);
    }
  }
  std::priority_queue<std::string_view, std::vector<std::string_view>, std::greater<>> frontier;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) frontier.push(id);
  }
  std::vector<std::string> order;
  while (!frontier.empty()) {
    const auto id = frontier.top();
    frontier.pop();
    order.emplace_back(id);
    for (auto next : dependents[id]) {
      if (--indegree[next] == 0) frontier.push(next);
    }
  }
  return order;
}

bool WorkflowGraph::is_complete() const {
  return std::all_of(status_.begin(), status_.end(),
                     [](const auto& kv) { return kv.second == TaskStatus::completed; });
}

void WorkflowGraph::start_task(std::string_view id) {
  TaskStatus& s = status_ref(id);
  if (s != TaskStatus::pending) {
    throw ValidationError("cannot start task '" + std::string(id) + "' in state " + std::string(to_string(s)));
  }
  for (const auto& dep : task(id).dependencies) {
    if (status(dep) != TaskStatus::completed) {
      throw ValidationError("cannot start task '" + std::string(id) + "': dependency '" + dep + "' not completed");
    }
  }
  s = TaskStatus::in_progress;
}

void WorkflowGraph::complete_task(std::string_view id, VerifiedOutput verified) {
  TaskStatus& s = status_ref(id);
  if (s != TaskStatus::in_progress) {
    throw ValidationError("cannot complete task '" + std::string(id) + "' in state " + std::string(to_string(s)));
  }
  if (verified.task_id != id) {
    throw ValidationError("verified output for '" + verified.task_id + "' passed to task '" + std::string(id) + "'");
  }
  s = TaskStatus::completed;
  verified_.insert_or_assign(std::string(id), std::move(verified));
}

void WorkflowGraph::reset_in_progress() {
  for (auto& [id, s] : status_) {
    if (s == TaskStatus::in_progress) s = TaskStatus::pending;
  }
}

std::vector<ContextInput> WorkflowGraph::context_inputs(std::string_view id) const {
  std::vector<ContextInput> inputs;
  for (const auto& dep : task(id).dependencies) {
    const VerifiedOutput* v = verified(dep);
    if (v == nullptr) {
      throw ValidationError("context for '" + std::string(id) + "' requires incomplete dependency '" + dep + "'");
    }
    inputs.push_back({dep, v->answer});
  }
  return inputs;
}

const VerifiedOutput& WorkflowGraph::final_output() const {
  const VerifiedOutput* v = verified(sink_);
  if (v == nullptr) throw ValidationError("workflow has not completed its sink task '" + sink_ + "'");
  return *v;
}

}  // namespace voteflow::graph
