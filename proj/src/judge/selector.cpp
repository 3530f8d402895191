#include "voteflow/judge/selector.hpp"

#include <algorithm>
#include <regex>

#include <spdlog/spdlog.h>

namespace voteflow::judge {

namespace {

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  for (std::size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
}

}  // namespace

std::string render_selection_prompt(std::string_view prompt_template, std::string_view task_description,
                                    std::span<const std::string> candidates) {
  std::string block;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    block += "[Output " + std::to_string(i + 1) + "]: " + candidates[i] + "\n";
  }
  std::string out(prompt_template);
  // Candidates first, so braces inside the task text are left alone.
  replace_all(out, "{candidates}", block);
  replace_all(out, "{task_description}", task_description);
  return out;
}

Selection DeterministicSelector::select(std::string_view, std::span<const std::string> candidates) {
  if (candidates.empty()) throw ValidationError("no candidates to select from");
  const auto it = std::min_element(candidates.begin(), candidates.end());
  return Selection{static_cast<std::size_t>(it - candidates.begin()),
                   "deterministic: lexicographically smallest of " + std::to_string(candidates.size()) +
                       " candidates"};
}

LlmSelector::LlmSelector(std::shared_ptr<backends::ChatClient> client, std::string prompt_template, double temperature)
    : client_(std::move(client)), template_(std::move(prompt_template)), temperature_(temperature) {
  if (!client_) throw ValidationError("LLM selector needs a chat client");
}

std::optional<std::size_t> parse_choice(std::string_view reply, std::size_t candidate_count) {
  static const std::regex labelled(R"(Output\s*(\d+))", std::regex::icase);
  static const std::regex bare(R"((\d+))");
  const std::string text(reply);
  std::smatch m;
  if (!std::regex_search(text, m, labelled) && !std::regex_search(text, m, bare)) return std::nullopt;
  const auto k = std::stoull(m[1].str());
  if (k < 1 || k > candidate_count) return std::nullopt;
  return static_cast<std::size_t>(k - 1);
}

Selection LlmSelector::select(std::string_view task_description, std::span<const std::string> candidates) {
  if (candidates.empty()) throw ValidationError("no candidates to select from");
  if (candidates.size() == 1) return Selection{0, "single candidate"};
  const std::string prompt = render_selection_prompt(template_, task_description, candidates);
  const auto completion = client_->complete({{"user", prompt}}, temperature_);
  const auto choice = parse_choice(completion.text, candidates.size());
  if (!choice) throw ExecutionError("selector reply names no candidate: " + completion.text);
  return Selection{*choice, completion.text};
}

SelectedAnswer select_best(std::span<const std::string> candidates, std::string_view task_description,
                           Selector& selector) {
  if (candidates.empty()) throw ValidationError("select_best needs at least one candidate");
  try {
    Selection s = selector.select(task_description, candidates);
    if (s.index >= candidates.size()) throw ExecutionError("selector returned an out-of-range index");
    return SelectedAnswer{candidates[s.index], std::move(s.rationale), false};
  } catch (const std::exception& e) {
    spdlog::warn("selector failed ({}); using deterministic selection", e.what());
    DeterministicSelector fallback;
    Selection s = fallback.select(task_description, candidates);
    return SelectedAnswer{candidates[s.index], "fallback after selector failure: " + std::string(e.what()) + "; " +
                                                   s.rationale,
                          true};
  }
}

}  // namespace voteflow::judge
