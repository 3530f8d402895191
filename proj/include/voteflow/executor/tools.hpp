#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "voteflow/graph/workflow_graph.hpp"

namespace voteflow::executor {

/// A side-effecting tool adapter.
class Tool {
 public:
  virtual ~Tool() = default;
  virtual std::string invoke(std::string_view args) = 0;
};

/// Appends its arguments to an in-memory ledger (refunds, tickets...).
class RecordAppendTool final : public Tool {
 public:
  std::string invoke(std::string_view args) override;
  [[nodiscard]] std::vector<std::string> records() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> records_;
};

/// Evaluates "a <op> b" for op in + - * /, printed with two decimals.
class ArithmeticTool final : public Tool {
 public:
  std::string invoke(std::string_view args) override;
};

/// Looks the arguments up in a fixed table.
class LookupTool final : public Tool {
 public:
  explicit LookupTool(std::map<std::string, std::string, std::less<>> table) : table_(std::move(table)) {}
  std::string invoke(std::string_view args) override;

 private:
  std::map<std::string, std::string, std::less<>> table_;
};

struct ToolRecord {
  std::string key;
  std::string task_id;
  std::string tool;
  std::string args;  // canonical form
  std::string result;
  friend bool operator==(const ToolRecord&, const ToolRecord&) = default;
};

void to_json(nlohmann::json& j, const ToolRecord& r);
void from_json(const nlohmann::json& j, ToolRecord& r);

/// Compact JSON when the arguments parse as JSON, else trimmed text.
[[nodiscard]] std::string canonical_args(std::string_view args);

/// hex(stable_hash(run id, task id, canonical args))
[[nodiscard]] std::string idempotency_key(std::string_view run_id, std::string_view task_id,
                                          std::string_view canonical);

/// Named tools plus the idempotency records of invocations already made.
class ToolRegistry {
 public:
  void add(std::string name, std::shared_ptr<Tool> tool);
  [[nodiscard]] bool has(std::string_view name) const;
  [[nodiscard]] std::shared_ptr<Tool> get(std::string_view name) const;

  /// Seeds the record table, e.g. from a recovered event log.
  void restore(const std::vector<ToolRecord>& records);
  [[nodiscard]] std::vector<ToolRecord> records() const;

  /// Number of real (non-replayed) invocations per tool.
  [[nodiscard]] int invocation_count(std::string_view tool) const;

  struct Outcome {
    ToolRecord record;
    bool replayed = false;  // result came from an earlier invocation
  };

  /// Invokes `tool` at most once per key. A key already recorded with
  /// different arguments is a hard error.
  Outcome invoke_once(const std::string& key, const std::string& task_id, const std::string& tool,
                      const std::string& canonical);

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Tool>, std::less<>> tools_;
  std::map<std::string, ToolRecord, std::less<>> records_;
  std::map<std::string, int, std::less<>> calls_;
};

/// Runs the side effect of a TOOL task once, keyed on the voted arguments.
/// With several tools listed the arguments must be a JSON object naming
/// the tool: {"tool": name, "args": ...}.
ToolRegistry::Outcome execute_tool_action(const graph::TaskSpec& task, std::string_view winning_args,
                                          ToolRegistry& registry, std::string_view run_id);

}  // namespace voteflow::executor
