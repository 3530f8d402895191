#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "voteflow/backends/http_client.hpp"

namespace voteflow::judge {

/// Shipped best-of-cluster selection prompt. `{task_description}` is the
/// task text and `{candidates}` expands to one "[Output k]: ..." line per
/// candidate.
inline constexpr std::string_view kSelectionPromptTemplate =
    "Task: {task_description}\n"
    "\n"
    "The following outputs are semantically similar candidates:\n"
    "{candidates}"
    "\n"
    "Evaluate each output and select the BEST one based on:\n"
    "- Correctness: Is the answer accurate and factually correct?\n"
    "- Completeness: Does it fully address the task requirements?\n"
    "- Reasoning: Is the logic sound and well-justified?\n"
    "- Task Alignment: Does it directly answer what was asked?\n";

[[nodiscard]] std::string render_selection_prompt(std::string_view prompt_template, std::string_view task_description,
                                                  std::span<const std::string> candidates);

struct Selection {
  std::size_t index = 0;  // into the candidate list
  std::string rationale;
};

/// Picks the best candidate inside the winning cluster. Never changes which
/// cluster won.
class Selector {
 public:
  virtual ~Selector() = default;
  virtual Selection select(std::string_view task_description, std::span<const std::string> candidates) = 0;
};

/// Lexicographically smallest candidate.
class DeterministicSelector final : public Selector {
 public:
  Selection select(std::string_view task_description, std::span<const std::string> candidates) override;
};

/// Sends the selection prompt to a chat model and reads back "Output k".
class LlmSelector final : public Selector {
 public:
  explicit LlmSelector(std::shared_ptr<backends::ChatClient> client,
                       std::string prompt_template = std::string(kSelectionPromptTemplate), double temperature = 0.0);
  Selection select(std::string_view task_description, std::span<const std::string> candidates) override;

 private:
  std::shared_ptr<backends::ChatClient> client_;
  std::string template_;
  double temperature_;
};

/// Parses the 1-based "Output k" choice (or the first integer) from a reply.
[[nodiscard]] std::optional<std::size_t> parse_choice(std::string_view reply, std::size_t candidate_count);

struct SelectedAnswer {
  std::string answer;
  std::string rationale;
  bool fell_back = false;
};

/// Runs the selector; on selector failure logs a warning and falls back to
/// the deterministic choice.
[[nodiscard]] SelectedAnswer select_best(std::span<const std::string> candidates, std::string_view task_description,
                                         Selector& selector);

}  // namespace voteflow::judge
