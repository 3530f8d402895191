#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace voteflow::graph {

enum class ActionType { reasoning, tool };

[[nodiscard]] std::string_view to_string(ActionType type);
[[nodiscard]] ActionType parse_action_type(std::string_view text);

enum class TaskStatus { pending, in_progress, completed };

[[nodiscard]] std::string_view to_string(TaskStatus status);

/// Sampling configuration for one task: how many redundant samples, how far
/// dynamic scaling may go, and the judge thresholds.
struct SamplingConfig {
  int n = 5;
  int n_max = 13;
  double temperature = 0.7;
  double theta = 0.6;  // confidence gate
  double tau = 0.85;   // cosine similarity for co-clustering
  std::vector<std::string> model_pool;

  void validate() const;
  friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;
};

/// Per-task overrides as written in a workflow file. Absent fields fall back
/// to the run's defaults.
struct SamplingOverrides {
  std::optional<int> n;
  std::optional<int> n_max;
  std::optional<double> temperature;
  std::optional<double> theta;
  std::optional<double> tau;
  std::optional<std::vector<std::string>> model_pool;

  [[nodiscard]] bool empty() const;
  [[nodiscard]] SamplingConfig resolve(const SamplingConfig& defaults) const;
  friend bool operator==(const SamplingOverrides&, const SamplingOverrides&) = default;
};

struct TaskSpec {
  std::string id;
  std::string description;
  ActionType action_type = ActionType::reasoning;
  std::vector<std::string> dependencies;  // declared order, no duplicates
  std::optional<nlohmann::json> output_schema;
  std::vector<std::string> tools;  // nonempty iff TOOL
  SamplingOverrides sampling;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// The judge-selected answer for a completed task plus its provenance.
struct VerifiedOutput {
  std::string task_id;
  std::string answer;
  double confidence = 1.0;  // winning cluster size / delivered samples
  int samples_used = 1;
  std::chrono::milliseconds elapsed{0};
  std::uint64_t judge_trace_ref = 0;  // seq of the deciding judge_round event
  int rounds = 1;
  bool forced = false;
  std::vector<std::vector<int>> cluster_sizes;  // per round, descending
  std::optional<std::string> tool_args;         // TOOL tasks: the voted arguments

  friend bool operator==(const VerifiedOutput&, const VerifiedOutput&) = default;
};

void to_json(nlohmann::json& j, const VerifiedOutput& v);
void from_json(const nlohmann::json& j, VerifiedOutput& v);

struct ContextInput {
  std::string task_id;
  std::string answer;
  friend bool operator==(const ContextInput&, const ContextInput&) = default;
};

/// Dependency DAG with a unique sink. Construction validates the structure;
/// afterwards the only mutations are status transitions.
class WorkflowGraph {
 public:
  /// Throws ValidationError on duplicate ids, unknown or self dependencies,
  /// cycles, zero or multiple sinks, or a TOOL task without tools.
  static WorkflowGraph from_tasks(std::vector<TaskSpec> tasks);

  [[nodiscard]] const std::map<std::string, TaskSpec, std::less<>>& tasks() const noexcept { return tasks_; }
  [[nodiscard]] const TaskSpec& task(std::string_view id) const;
  [[nodiscard]] TaskStatus status(std::string_view id) const;
  [[nodiscard]] const VerifiedOutput* verified(std::string_view id) const;
  [[nodiscard]] const std::string& sink() const noexcept { return sink_; }
  [[nodiscard]] std::size_t size() const noexcept { return tasks_.size(); }
  [[nodiscard]] const std::vector<std::string>& declared_order() const noexcept { return declared_order_; }

  /// Pending tasks whose dependencies are all completed, sorted by id.
  [[nodiscard]] std::vector<std::string> ready_tasks() const;

  /// Tasks ordered so every dependency precedes its dependents (ties by id).
  [[nodiscard]] std::vector<std::string> topological_order() const;

  [[nodiscard]] bool is_complete() const;

  /// pending -> in_progress. Rejects anything not currently ready.
  void start_task(std::string_view id);

  /// in_progress -> completed with its verified output.
  void complete_task(std::string_view id, VerifiedOutput verified);

  /// Puts every in_progress task back to pending.
  void reset_in_progress();

  /// (dependency id, verified answer) in declared dependency order.
  [[nodiscard]] std::vector<ContextInput> context_inputs(std::string_view id) const;

  /// The sink's verified answer. Throws if the workflow is not complete.
  [[nodiscard]] const VerifiedOutput& final_output() const;

 private:
  WorkflowGraph() = default;
  TaskStatus& status_ref(std::string_view id);

  std::map<std::string, TaskSpec, std::less<>> tasks_;
  std::vector<std::string> declared_order_;
  std::map<std::string, TaskStatus, std::less<>> status_;
  std::map<std::string, VerifiedOutput, std::less<>> verified_;
  std::string sink_;
};

/// Parses the workflow document (JSON with a top-level `tasks` array).
[[nodiscard]] WorkflowGraph load_workflow(std::string_view document);
[[nodiscard]] WorkflowGraph load_workflow_json(const nlohmann::json& document);
[[nodiscard]] WorkflowGraph load_workflow_file(const std::string& path);

/// Inverse of load_workflow: only the task definitions, in declared order.
[[nodiscard]] nlohmann::json serialize_workflow(const WorkflowGraph& graph);

}  // namespace voteflow::graph
