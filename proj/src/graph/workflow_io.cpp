#include <fstream>
#include <sstream>

#include "voteflow/error.hpp"
#include "voteflow/graph/workflow_graph.hpp"

namespace voteflow::graph {

using nlohmann::json;

namespace {

std::string read_id(const json& value, const std::string& where) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<std::int64_t>());
  throw ValidationError(where + ": task ids must be strings or integers");
}

template <class T>
std::optional<T> optional_field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

SamplingOverrides parse_sampling(const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + ": 'sampling' must be an object");
  SamplingOverrides s;
  s.n = optional_field<int>(obj, "n", where);
  s.n_max = optional_field<int>(obj, "n_max", where);
  s.temperature = optional_field<double>(obj, "temperature", where);
  s.theta = optional_field<double>(obj, "theta", where);
  s.tau = optional_field<double>(obj, "tau", where);
  s.model_pool = optional_field<std::vector<std::string>>(obj, "model_pool", where);
  return s;
}

json sampling_to_json(const SamplingOverrides& s) {
  json j = json::object();
  if (s.n) j["n"] = *s.n;
  if (s.n_max) j["n_max"] = *s.n_max;
  if (s.temperature) j["temperature"] = *s.temperature;
  if (s.theta) j["theta"] = *s.theta;
  if (s.tau) j["tau"] = *s.tau;
  if (s.model_pool) j["model_pool"] = *s.model_pool;
  return j;
}

TaskSpec parse_task(const json& entry, std::size_t index) {
  const std::string where = "tasks[" + std::to_string(index) + "]";
  if (!entry.is_object()) throw ValidationError(where + " must be an object");
  TaskSpec t;
  if (!entry.contains("id")) throw ValidationError(where + ": missing 'id'");
  t.id = read_id(entry.at("id"), where);
  t.description = optional_field<std::string>(entry, "description", where).value_or("");
  t.action_type = parse_action_type(optional_field<std::string>(entry, "type", where).value_or("REASONING"));
  if (auto deps = entry.find("dependencies"); deps != entry.end() && !deps->is_null()) {
    if (!deps->is_array()) throw ValidationError(where + ": 'dependencies' must be an array");
    for (const auto& d : *deps) t.dependencies.push_back(read_id(d, where));
  }
  if (auto schema = entry.find("output_schema"); schema != entry.end() && !schema->is_null()) {
    t.output_schema = *schema;
  }
  t.tools = optional_field<std::vector<std::string>>(entry, "tools", where).value_or(std::vector<std::string>{});
  if (auto s = entry.find("sampling"); s != entry.end() && !s->is_null()) t.sampling = parse_sampling(*s, where);
  return t;
}

}  // namespace

void to_json(json& j, const VerifiedOutput& v) {
  j = json{{"task_id", v.task_id},
           {"answer", v.answer},
           {"confidence", v.confidence},
           {"samples_used", v.samples_used},
           {"elapsed_ms", v.elapsed.count()},
           {"judge_trace_ref", v.judge_trace_ref},
           {"rounds", v.rounds},
           {"forced", v.forced},
           {"cluster_sizes", v.cluster_sizes}};
  if (v.tool_args) j["tool_args"] = *v.tool_args;
}

void from_json(const json& j, VerifiedOutput& v) {
  j.at("task_id").get_to(v.task_id);
  j.at("answer").get_to(v.answer);
  j.at("confidence").get_to(v.confidence);
  j.at("samples_used").get_to(v.samples_used);
  v.elapsed = std::chrono::milliseconds(j.value("elapsed_ms", std::int64_t{0}));
  v.judge_trace_ref = j.value("judge_trace_ref", std::uint64_t{0});
  v.rounds = j.value("rounds", 1);
  v.forced = j.value("forced", false);
  v.cluster_sizes = j.value("cluster_sizes", std::vector<std::vector<int>>{});
  if (auto it = j.find("tool_args"); it != j.end() && it->is_string()) {
    v.tool_args = it->get<std::string>();
  } else {
    v.tool_args.reset();
  }
}

WorkflowGraph load_workflow_json(const json& document) {
  if (!document.is_object() || !document.contains("tasks")) {
    throw ValidationError("workflow document must be an object with a 'tasks' array");
  }
  const json& entries = document.at("tasks");
  if (!entries.is_array()) throw ValidationError("'tasks' must be an array");
  std::vector<TaskSpec> tasks;
  tasks.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) tasks.push_back(parse_task(entries[i], i));
  return WorkflowGraph::from_tasks(std::move(tasks));
}

WorkflowGraph load_workflow(std::string_view document) {
  json parsed;
  try {
    parsed = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("workflow is not valid JSON: ") + e.what());
  }
  return load_workflow_json(parsed);
}

WorkflowGraph load_workflow_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open workflow file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_workflow(std::string_view(buf.str()));
}

json serialize_workflow(const WorkflowGraph& graph) {
  json tasks = json::array();
  for (const auto& id : graph.declared_order()) {
    const TaskSpec& t = graph.task(id);
    json entry{{"id", t.id},
               {"description", t.description},
               {"type", std::string(to_string(t.action_type))},
               {"dependencies", t.dependencies}};
    if (t.output_schema) entry["output_schema"] = *t.output_schema;
    if (!t.tools.empty()) entry["tools"] = t.tools;
    if (!t.sampling.empty()) entry["sampling"] = sampling_to_json(t.sampling);
    tasks.push_back(std::move(entry));
  }
  return json{{"tasks", std::move(tasks)}};
}

}  // namespace voteflow::graph
