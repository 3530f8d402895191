#include "voteflow/graph/decomposition.hpp"

#include "voteflow/error.hpp"

namespace voteflow::graph {

namespace {

void replace_all(std::string& text, std::string_view key, std::string_view value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
}

}  // namespace

std::string render_decomposition_prompt(std::string_view prompt_template, std::string_view task_description,
                                        std::span<const std::string> tools) {
  std::string list;
  for (const auto& t : tools) list += (list.empty() ? "" : ", ") + t;
  if (list.empty()) list = "none";
  std::string out(prompt_template);
  replace_all(out, "{task_description}", task_description);
  replace_all(out, "{tool_list}", list);
  return out;
}

WorkflowGraph parse_decomposition_reply(std::string_view reply) {
  const std::size_t start = reply.find_first_of("[{");
  if (start == std::string_view::npos) throw ValidationError("planner reply contains no JSON");
  const std::size_t end = reply.find_last_of(reply[start] == '[' ? ']' : '}');
  if (end == std::string_view::npos || end < start) throw ValidationError("planner reply has unbalanced JSON");
  const std::string_view body = reply.substr(start, end - start + 1);
  nlohmann::json doc = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
  if (doc.is_discarded()) throw ValidationError("planner reply is not valid JSON");
  if (doc.is_array()) doc = nlohmann::json{{"tasks", std::move(doc)}};
  return load_workflow_json(doc);
}

}  // namespace voteflow::graph
