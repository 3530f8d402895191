#include "voteflow/cli/config.hpp"

#include <fstream>
#include <sstream>

#include "voteflow/backends/http_client.hpp"
#include "voteflow/backends/scripted_agent.hpp"
#include "voteflow/error.hpp"

namespace voteflow::cli {

using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config field '") + key + "': " + e.what());
  }
}

// The object at `key`, or an empty object when absent.
const json& object_field(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  const json& v = j.at(key);
  if (!v.is_object()) throw ValidationError(std::string("config field '") + key + "' must be an object");
  return v;
}

std::string required_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw ValidationError(where + " needs a string field '" + key + "'");
  }
  return j[key].get<std::string>();
}

std::chrono::milliseconds seconds(double s) {
  if (!(s > 0.0)) throw ValidationError("timeouts must be positive");
  return std::chrono::milliseconds(static_cast<std::int64_t>(s * 1000.0));
}

backends::HttpEndpoint endpoint(const json& j, const std::string& where) {
  backends::HttpEndpoint e;
  e.url = required_string(j, "url", where);
  e.model = field<std::string>(j, "model", "");
  e.api_key_env = field<std::string>(j, "api_key_env", "");
  e.deadline = seconds(field<double>(j, "timeout_s", 60.0));
  e.retry.max_retries = field<int>(j, "max_retries", 3);
  if (e.retry.max_retries < 0) throw ValidationError(where + ": max_retries must be >= 0");
  (void)backends::parse_url(e.url);
  return e;
}

graph::SamplingConfig sampling(const json& j) {
  graph::SamplingConfig s;
  s.n = field<int>(j, "n", s.n);
  s.n_max = field<int>(j, "n_max", s.n_max);
  s.temperature = field<double>(j, "temperature", s.temperature);
  s.theta = field<double>(j, "theta", s.theta);
  s.tau = field<double>(j, "tau", s.tau);
  s.model_pool = field<std::vector<std::string>>(j, "model_pool", {});
  s.validate();
  return s;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ValidationError("'" + path + "' is not valid JSON");
  return doc;
}

std::unique_ptr<Runtime> build_runtime(const json& config) {
  if (!config.is_object()) throw ValidationError("config must be a JSON object");
  auto rt = std::make_unique<Runtime>();
  rt->document = config;
  rt->seed = field<std::uint64_t>(config, "seed", 0);
  if (config.contains("log_path")) rt->log_path = field<std::string>(config, "log_path", "");
  rt->sampling = sampling(config.value("sampling", json::object()));
  rt->delta_n = field<int>(config.value("judge", json::object()), "delta_n", 4);
  if (rt->delta_n < 1) throw ValidationError("judge.delta_n must be >= 1");
  rt->executor.max_concurrency = field<std::size_t>(config, "max_concurrency", 16);
  rt->executor.sample_deadline = seconds(field<double>(config, "sample_deadline_s", 120.0));
  if (rt->executor.max_concurrency == 0) throw ValidationError("max_concurrency must be >= 1");

  rt->truth = std::make_shared<backends::GroundTruth>();
  const json scenario = config.value("scenario", json::object());
  for (const auto& [task, answer] : object_field(scenario, "answers").items()) {
    if (!answer.is_string()) throw ValidationError("scenario answer for '" + task + "' must be a string");
    rt->truth->set(task, answer.get<std::string>());
  }

  std::map<std::string, std::shared_ptr<backends::ChatClient>, std::less<>> chat_clients;
  const json backends_doc = config.value("backends", json::array());
  if (!backends_doc.is_array() || backends_doc.empty()) throw ValidationError("config needs a nonempty 'backends' list");
  for (const auto& b : backends_doc) {
    const std::string name = required_string(b, "name", "backend entry");
    const std::string kind = required_string(b, "kind", "backend '" + name + "'");
    if (kind == "sim") {
      backends::SimAgentModel model;
      model.p = field<double>(b, "p", 0.0);
      model.error_space = field<int>(b, "error_space", 9);
      model.rho = field<double>(b, "rho", 0.0);
      model.family = field<std::string>(b, "family", name);
      const auto latency = std::chrono::milliseconds(field<std::int64_t>(b, "latency_ms", 0));
      rt->pool.add(std::make_shared<backends::SimAgent>(name, model, rt->truth, latency));
    } else if (kind == "scripted") {
      std::map<std::string, std::vector<std::string>, std::less<>> responses;
      for (const auto& [task, list] : object_field(b, "responses").items()) {
        responses[task] = list.is_string() ? std::vector<std::string>{list.get<std::string>()}
                                           : list.get<std::vector<std::string>>();
      }
      std::optional<std::string> fallback;
      if (b.contains("fallback")) fallback = b["fallback"].get<std::string>();
      rt->pool.add(std::make_shared<backends::ScriptedAgent>(name, std::move(responses), std::move(fallback)));
    } else if (kind == "http_chat") {
      auto client = std::make_shared<backends::HttpChatClient>(endpoint(b, "backend '" + name + "'"));
      chat_clients[name] = client;
      rt->pool.add(std::make_shared<backends::HttpChatAgent>(name, client, field<std::string>(b, "family", "")));
    } else {
      throw ValidationError("backend '" + name + "' has unknown kind '" + kind + "'");
    }
  }
  (void)rt->pool.select(rt->sampling);  // model_pool must name known backends

  const json emb = config.value("embedder", json{{"kind", "exact"}});
  const std::string emb_kind = field<std::string>(emb, "kind", "exact");
  if (emb_kind == "exact") {
    rt->embedder = std::make_unique<backends::ExactEmbedder>();
  } else if (emb_kind == "mock") {
    rt->embedder = std::make_unique<backends::MockEmbedder>();
  } else if (emb_kind == "scripted") {
    std::map<std::string, backends::Vector, std::less<>> table;
    for (const auto& [text, vec] : object_field(emb, "table").items()) {
      table[text] = vec.get<backends::Vector>();
    }
    rt->embedder = std::make_unique<backends::ScriptedEmbedder>(std::move(table));
  } else if (emb_kind == "http") {
    rt->embedder = std::make_unique<backends::HttpEmbedder>(endpoint(emb, "embedder"));
  } else {
    throw ValidationError("unknown embedder kind '" + emb_kind + "'");
  }

  const json sel = config.value("selector", json{{"kind", "deterministic"}});
  const std::string sel_kind = field<std::string>(sel, "kind", "deterministic");
  if (sel_kind == "deterministic") {
    rt->selector = std::make_unique<judge::DeterministicSelector>();
  } else if (sel_kind == "llm") {
    std::shared_ptr<backends::ChatClient> client;
    if (sel.contains("backend")) {
      auto it = chat_clients.find(sel["backend"].get<std::string>());
      if (it == chat_clients.end()) throw ValidationError("selector.backend must name an http_chat backend");
      client = it->second;
    } else {
      client = std::make_shared<backends::HttpChatClient>(endpoint(sel, "selector"));
    }
    std::string prompt(judge::kSelectionPromptTemplate);
    if (sel.contains("prompt_file")) prompt = read_text_file(sel["prompt_file"].get<std::string>());
    rt->selector = std::make_unique<judge::LlmSelector>(client, prompt, field<double>(sel, "temperature", 0.0));
  } else {
    throw ValidationError("unknown selector kind '" + sel_kind + "'");
  }

  for (const auto& [name, t] : object_field(config, "tools").items()) {
    const std::string kind = required_string(t, "kind", "tool '" + name + "'");
    if (kind == "record_append") {
      auto ledger = std::make_shared<executor::RecordAppendTool>();
      rt->ledgers[name] = ledger;
      rt->tools.add(name, ledger);
    } else if (kind == "arithmetic") {
      rt->tools.add(name, std::make_shared<executor::ArithmeticTool>());
    } else if (kind == "lookup") {
      std::map<std::string, std::string, std::less<>> table;
      for (const auto& [k, v] : object_field(t, "table").items()) table[k] = v.get<std::string>();
      rt->tools.add(name, std::make_shared<executor::LookupTool>(std::move(table)));
    } else {
      throw ValidationError("tool '" + name + "' has unknown kind '" + kind + "'");
    }
  }
  return rt;
}

void check_workflow(const graph::WorkflowGraph& graph, const Runtime& runtime) {
  bool simulated = false;
  for (std::size_t i = 0; i < runtime.pool.size(); ++i) {
    simulated = simulated || dynamic_cast<const backends::SimAgent*>(runtime.pool.at(i).get()) != nullptr;
  }
  for (const auto& [id, task] : graph.tasks()) {
    for (const auto& tool : task.tools) {
      if (!runtime.tools.has(tool)) throw ValidationError("task '" + id + "' needs unregistered tool '" + tool + "'");
    }
    const auto resolved = task.sampling.resolve(runtime.sampling);
    resolved.validate();
    (void)runtime.pool.select(resolved);
    if (simulated && !runtime.truth->contains(id)) {
      throw ValidationError("simulated backends need scenario.answers for task '" + id + "'");
    }
  }
}

}  // namespace voteflow::cli
