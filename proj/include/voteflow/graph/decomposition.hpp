#pragma once

#include <span>
#include <string>
#include <string_view>

#include "voteflow/graph/workflow_graph.hpp"

namespace voteflow::graph {

/// Planner prompt asking a model to break a task into atomic actions in the
/// workflow file format.
inline constexpr std::string_view kDecompositionPromptTemplate =
    "You are a task decomposition expert. Given a complex task,\n"
    "break it into atomic actions satisfying:\n"
    "1. MINIMAL: Cannot be meaningfully decomposed further\n"
    "2. VERIFIABLE: Output correctness is objectively determinable\n"
    "3. DETERMINISTIC: Given perfect reasoning, output is unique\n"
    "\n"
    "Task: {task_description}\n"
    "Available Tools: {tool_list}\n"
    "\n"
    "For each action, specify:\n"
    "- id: Unique identifier\n"
    "- description: What this action does\n"
    "- type: \"REASONING\" or \"TOOL\"\n"
    "- dependencies: List of action IDs this depends on\n"
    "- output_schema: Expected output format (JSON preferred)\n"
    "- tools: Required tools (if type is TOOL)\n"
    "\n"
    "Output as JSON.\n";

/// Fills {task_description} and {tool_list} (comma separated, or "none").
[[nodiscard]] std::string render_decomposition_prompt(std::string_view prompt_template,
                                                      std::string_view task_description,
                                                      std::span<const std::string> tools);

/// Reads a planner reply: the first JSON array or object in the text, an
/// array being taken as the task list.
[[nodiscard]] WorkflowGraph parse_decomposition_reply(std::string_view reply);

}  // namespace voteflow::graph
