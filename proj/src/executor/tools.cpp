#include "voteflow/executor/tools.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include <cstdio>

#include "voteflow/error.hpp"
#include "voteflow/hash.hpp"

namespace voteflow::executor {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view text) {
  text = trim(text);
  std::string cleaned;
  for (char c : text) {
    if (c != '$' && c != ',') cleaned.push_back(c);
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), value);
  if (ec != std::errc{} || ptr != cleaned.data() + cleaned.size() || cleaned.empty()) {
    throw ExecutionError("arithmetic tool: '" + std::string(text) + "' is not a number");
  }
  return value;
}

}  // namespace

std::string RecordAppendTool::invoke(std::string_view args) {
  std::lock_guard lock(mu_);
  records_.emplace_back(args);
  return "recorded: " + std::string(args);
}

std::vector<std::string> RecordAppendTool::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::string ArithmeticTool::invoke(std::string_view args) {
  const std::string_view expr = trim(args);
  // The operator is the first + - * / after the leading operand.
  for (std::size_t i = 1; i < expr.size(); ++i) {
    const char op = expr[i];
    if ((op == '+' || op == '-' || op == '*' || op == '/') && std::isspace(static_cast<unsigned char>(expr[i - 1]))) {
      const double a = parse_number(expr.substr(0, i));
      const double b = parse_number(expr.substr(i + 1));
      double r = 0.0;
      switch (op) {
        case '+':
          r = a + b;
          break;
        case '-':
          r = a - b;
          break;
        case '*':
          r = a * b;
          break;
        default:
          if (b == 0.0) throw ExecutionError("arithmetic tool: division by zero");
          r = a / b;
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.2f", r);
      return buf;
    }
  }
  throw ExecutionError("arithmetic tool: expected 'a <op> b', got '" + std::string(expr) + "'");
}

std::string LookupTool::invoke(std::string_view args) {
  auto it = table_.find(trim(args));
  if (it == table_.end()) throw ExecutionError("lookup tool: no entry for '" + std::string(trim(args)) + "'");
  return it->second;
}

void to_json(json& j, const ToolRecord& r) {
  j = json{{"key", r.key}, {"task_id", r.task_id}, {"tool", r.tool}, {"args", r.args}, {"result", r.result}};
}

void from_json(const json& j, ToolRecord& r) {
  j.at("key").get_to(r.key);
  j.at("task_id").get_to(r.task_id);
  j.at("tool").get_to(r.tool);
  j.at("args").get_to(r.args);
  j.at("result").get_to(r.result);
}

std::string canonical_args(std::string_view args) {
  const std::string_view t = trim(args);
  json parsed = json::parse(t.begin(), t.end(), nullptr, false);
  if (!parsed.is_discarded() && (parsed.is_object() || parsed.is_array())) return parsed.dump();
  return std::string(t);
}

std::string idempotency_key(std::string_view run_id, std::string_view task_id, std::string_view canonical) {
  return to_hex(stable_hash(run_id, task_id, canonical));
}

void ToolRegistry::add(std::string name, std::shared_ptr<Tool> tool) {
  if (!tool) throw ValidationError("tool '" + name + "' is null");
  std::lock_guard lock(mu_);
  tools_.insert_or_assign(std::move(name), std::move(tool));
}

bool ToolRegistry::has(std::string_view name) const {
  std::lock_guard lock(mu_);
  return tools_.find(name) != tools_.end();
}

std::shared_ptr<Tool> ToolRegistry::get(std::string_view name) const {
  std::lock_guard lock(mu_);
  auto it = tools_.find(name);
  if (it == tools_.end()) throw ValidationError("no tool named '" + std::string(name) + "' is registered");
  return it->second;
}

void ToolRegistry::restore(const std::vector<ToolRecord>& records) {
  std::lock_guard lock(mu_);
  for (const auto& r : records) {
    auto [it, inserted] = records_.try_emplace(r.key, r);
    if (!inserted && it->second.args != r.args) {
      throw ExecutionError("idempotency key " + r.key + " restored with conflicting arguments");
    }
  }
}

std::vector<ToolRecord> ToolRegistry::records() const {
  std::lock_guard lock(mu_);
  std::vector<ToolRecord> out;
  for (const auto& [k, r] : records_) out.push_back(r);
  return out;
}

int ToolRegistry::invocation_count(std::string_view tool) const {
  std::lock_guard lock(mu_);
  auto it = calls_.find(tool);
  return it == calls_.end() ? 0 : it->second;
}

ToolRegistry::Outcome ToolRegistry::invoke_once(const std::string& key, const std::string& task_id,
                                                const std::string& tool, const std::string& canonical) {
  std::shared_ptr<Tool> impl;
  {
    std::lock_guard lock(mu_);
    if (auto it = records_.find(key); it != records_.end()) {
      if (it->second.args != canonical || it->second.tool != tool) {
        throw ExecutionError("idempotency key " + key + " already used with different arguments");
      }
      return Outcome{it->second, true};
    }
    auto t = tools_.find(tool);
    if (t == tools_.end()) throw ExecutionError("no tool named '" + tool + "' is registered");
    impl = t->second;
  }
  // Keys are per task, and one task is executed by one thread at a time, so
  // the call can run outside the lock.
  ToolRecord record{key, task_id, tool, canonical, impl->invoke(canonical)};
  std::lock_guard lock(mu_);
  ++calls_[tool];
  records_.insert_or_assign(key, record);
  return Outcome{std::move(record), false};
}

ToolRegistry::Outcome execute_tool_action(const graph::TaskSpec& task, std::string_view winning_args,
                                          ToolRegistry& registry, std::string_view run_id) {
  if (task.action_type != graph::ActionType::tool) {
    throw ValidationError("task '" + task.id + "' is not a TOOL action");
  }
  std::string tool = task.tools.front();
  std::string args = canonical_args(winning_args);
  if (task.tools.size() > 1) {
    json call = json::parse(args, nullptr, false);
    if (call.is_discarded() || !call.is_object() || !call.contains("tool") || !call["tool"].is_string()) {
      throw ExecutionError("task '" + task.id + "' lists several tools; arguments must name one");
    }
    tool = call["tool"].get<std::string>();
    if (std::find(task.tools.begin(), task.tools.end(), tool) == task.tools.end()) {
      throw ExecutionError("task '" + task.id + "' may not call tool '" + tool + "'");
    }
    args = call.contains("args") ? canonical_args(call["args"].is_string() ? call["args"].get<std::string>()
                                                                          : call["args"].dump())
                                 : std::string{};
  }
  const std::string key = idempotency_key(run_id, task.id, args);
  try {
    return registry.invoke_once(key, task.id, tool, args);
  } catch (const ExecutionError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExecutionError("tool '" + tool + "' failed for task '" + task.id + "': " + e.what());
  }
}

}  // namespace voteflow::executor
