#include "voteflow/state/audit.hpp"

#include <map>
#include <vector>

#include <fmt/format.h>

namespace voteflow::state {

using nlohmann::json;

namespace {

std::string join_ints(const json& arr) {
  std::string out;
  for (const auto& v : arr) {
    if (!out.empty()) out += '-';
    out += v.dump();
  }
  return out;
}

std::string str(const json& p, const char* key) {
  if (!p.contains(key)) return {};
  const json& v = p[key];
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

std::string export_audit(std::span<const RunEvent> events) {
  // Task sections in first-start order, run-level lines around them.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::string>, std::less<>> sections;
  std::vector<std::string> header;
  std::vector<std::string> footer;

  auto section = [&](const std::string& task) -> std::vector<std::string>& {
    auto [it, inserted] = sections.try_emplace(task);
    if (inserted) order.push_back(task);
    return it->second;
  };

  for (const auto& e : events) {
    const json& p = e.payload;
    const std::string task = str(p, "task_id");
    switch (e.kind) {
      case EventKind::run_started:
        header.push_back(fmt::format("[{}] run {} started{} (seed {})", e.timestamp, str(p, "run_id"),
                                     p.value("resume", false) ? " (resume)" : "", str(p, "seed")));
        break;
      case EventKind::task_started:
        section(task).push_back(fmt::format("  [{}] started", e.timestamp));
        break;
      case EventKind::samples_collected: {
        auto& s = section(task);
        s.push_back(fmt::format("  round {}: {} requested, wall {:.1f} ms", str(p, "round"), str(p, "requested"),
                                p.value("wall_ms", 0.0)));
        for (const auto& smp : p.value("samples", json::array())) {
          s.push_back(fmt::format("    sample {} [{}] seed={} {:.1f} ms: {}", str(smp, "index"), str(smp, "backend"),
                                  str(smp, "seed"), smp.value("latency_ms", 0.0), str(smp, "text")));
        }
        for (const auto& f : p.value("failures", json::array())) {
          s.push_back(fmt::format("    sample {} [{}] FAILED ({}): {}", str(f, "index"), str(f, "backend"),
                                  str(f, "failure"), str(f, "message")));
        }
        break;
      }
      case EventKind::judge_round: {
        auto& s = section(task);
        s.push_back(fmt::format("    judge: {} delivered of {}, clusters {}, confidence {:.4f}{}", str(p, "delivered"),
                                str(p, "requested"), join_ints(p.value("sizes", json::array())),
                                p.value("confidence", 0.0), p.value("contested", false) ? " (contested)" : ""));
        for (const auto& c : p.value("clusters", json::array())) {
          s.push_back(fmt::format("      cluster {}", c.value("members", json::array()).dump()));
        }
        break;
      }
      case EventKind::escalated:
        section(task).push_back(fmt::format("    escalated: delta_n = {} (requested now {})", str(p, "delta_n"),
                                            str(p, "requested")));
        break;
      case EventKind::tool_invoked: {
        const json& r = p.value("record", json::object());
        section(task).push_back(fmt::format("  tool {}{} key={} args={} -> {}", str(r, "tool"),
                                            p.value("replayed", false) ? " (replayed)" : "", str(r, "key"),
                                            str(r, "args"), str(r, "result")));
        break;
      }
      case EventKind::task_completed: {
        const json& v = p.value("verified", json::object());
        section(task).push_back(fmt::format(
            "  [{}] verdict: {} (confidence {:.4f}, {} samples, {} rounds{}, {} ms)", e.timestamp, str(v, "answer"),
            v.value("confidence", 0.0), str(v, "samples_used"), str(v, "rounds"),
            v.value("forced", false) ? ", forced" : "", str(v, "elapsed_ms")));
        break;
      }
      case EventKind::run_completed:
        footer.push_back(fmt::format("[{}] run completed: {}", e.timestamp, str(p, "final_answer")));
        break;
      case EventKind::run_aborted:
        footer.push_back(fmt::format("[{}] run aborted: {}", e.timestamp, str(p, "cause")));
        break;
    }
  }

  std::string out;
  for (const auto& line : header) out += line + '\n';
  for (const auto& task : order) {
    out += "task " + task + '\n';
    for (const auto& line : sections[task]) out += line + '\n';
  }
  for (const auto& line : footer) out += line + '\n';
  return out;
}

}  // namespace voteflow::state
