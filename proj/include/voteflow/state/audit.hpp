#pragma once

#include <span>
#include <string>

#include "voteflow/state/event_log.hpp"

namespace voteflow::state {

/// Plain-text report of a run: every sample, cluster report, escalation,
/// verdict and tool call per task, with timings, then how the run ended.
[[nodiscard]] std::string export_audit(std::span<const RunEvent> events);

}  // namespace voteflow::state
