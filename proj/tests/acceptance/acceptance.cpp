// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any
// asserted criterion fails.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "voteflow/backends/embedder.hpp"
#include "voteflow/cli/config.hpp"
#include "voteflow/executor/engine.hpp"
#include "voteflow/judge/clustering.hpp"
#include "voteflow/judge/judge.hpp"
#include "voteflow/reliability/reliability.hpp"
#include "voteflow/simulator/simulator.hpp"
#include "voteflow/state/event_log.hpp"

using namespace voteflow;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and sizes.
constexpr double kOracleRelTol = 1e-12;
constexpr double kOracleSeconds = 10.0;
constexpr double kWorkedExample = 0.001158;
constexpr double kWorkedExampleTol = 1e-6;
constexpr double kCurvePoint = 0.028;
constexpr double kCurveTol = 1e-4;
constexpr std::int64_t kConsensusTrials = 1000000;
constexpr std::int64_t kCorrelatedTrials = 1000000;
constexpr std::int64_t kWorkflowTrials = 100000;
constexpr std::int64_t kDynamicTrials = 100000;
constexpr double kMonteCarloSeconds = 300.0;
constexpr int kEngineRuns = 1000;
constexpr int kEngineMinCorrect = 985;
constexpr std::chrono::milliseconds kOverlapLatency{100};
constexpr int kResumeSeeds = 3;

const std::string kFixtures = VOTEFLOW_FIXTURES;
const std::string kTestFixtures = VOTEFLOW_TEST_FIXTURES;

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << fmt::format("{} criterion {}: {}", pass ? "PASS" : "FAIL", criterion, detail) << std::endl;
}

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

// ---- 1 -----------------------------------------------------------------------

void criterion1() {
  const auto start = Clock::now();
  double worst = 0.0;
  int cases = 0;
  for (int n = 1; n <= 19; n += 2) {
    for (double p : {0.01, 0.02, 0.05, 0.1, 0.3}) {
      const double closed = reliability::consensus_error(n, p);
      const double oracle = reliability::consensus_error_oracle(n, p);
      worst = std::max(worst, std::abs(closed - oracle) / oracle);
      ++cases;
    }
  }
  const double elapsed = seconds_since(start);
  report(1, worst <= kOracleRelTol && elapsed < kOracleSeconds,
         fmt::format("closed form vs enumeration, {} cases, max rel err {:.3g} (tol {:g}), {:.2f} s", cases, worst,
                     kOracleRelTol, elapsed));
}

// ---- 2 -----------------------------------------------------------------------

void criterion2() {
  const double p5 = reliability::consensus_error(5, 0.05);
  const double p3 = reliability::consensus_error(3, 0.1);
  const int nstar = reliability::min_agents_for_target(0.05, reliability::kSixSigmaTarget);
  bool ok = std::abs(p5 - kWorkedExample) <= kWorkedExampleTol && std::abs(p3 - kCurvePoint) <= kCurveTol &&
            nstar == 13;

  // Published values known to disagree with the formulas must be flagged.
  const std::vector<std::string> must_flag{"n*(p=0.01) for 3.4e-6", "P_sys(n=13, p=0.05)", "rho_max(n=11, p=0.05)"};
  int flagged = 0;
  const auto points = reliability::reference_points();
  for (const auto& label : must_flag) {
    for (const auto& pt : points) {
      if (pt.label == label && (label != "P_sys(n=13, p=0.05)" || pt.claimed == 3.4e-6) && pt.discrepant) {
        std::cout << fmt::format("  flagged: {} [{}] published {:g}, computed {:.6g}\n", pt.label, pt.source,
                                 pt.claimed, pt.computed);
        ++flagged;
        break;
      }
    }
  }
  int discrepant = 0;
  for (const auto& pt : points) discrepant += pt.discrepant;
  ok = ok && flagged == static_cast<int>(must_flag.size());
  report(2, ok,
         fmt::format("P(5,0.05)={:.7f}, P(3,0.1)={:.6f}, n*(0.05)={}; {}/{} required discrepancies flagged, {} of {} "
                     "published points differ from the formulas",
                     p5, p3, nstar, flagged, must_flag.size(), discrepant, points.size()));
}

// ---- 3 -----------------------------------------------------------------------

std::string band_text(const simulator::BandedEstimate& b) {
  return fmt::format("{:.4g} vs {:.4g} (z={:+.2f}, n={}{})", b.estimate.rate(), b.band.target, b.band.z,
                     b.estimate.trials, b.rerun ? ", rerun" : "");
}

void criterion3() {
  const auto start = Clock::now();
  simulator::TrialOptions opts{0, 20260101, 0};
  bool ok = true;
  std::string detail;

  const auto consensus = simulator::banded(
      [&](std::int64_t trials) {
        opts.trials = trials;
        return simulator::simulate_consensus(5, 0.05, 9, opts).defects;
      },
      kConsensusTrials, reliability::consensus_error(5, 0.05));
  ok = ok && consensus.band.within;
  detail += "consensus " + band_text(consensus);

  for (double rho : {0.0, 0.25, 0.5, 1.0}) {
    const auto corr = simulator::banded(
        [&](std::int64_t trials) {
          opts.trials = trials;
          return simulator::simulate_correlated(5, 0.05, rho, 9, opts).defects;
        },
        kCorrelatedTrials, rho * 0.05 + (1.0 - rho) * reliability::consensus_error(5, 0.05));
    ok = ok && corr.band.within;
    detail += fmt::format("; rho={:g} {}", rho, band_text(corr));
  }

  const auto workflow = simulator::banded(
      [&](std::int64_t trials) {
        opts.trials = trials;
        return simulator::simulate_workflow(100, 5, 0.05, 9, opts).successes;
      },
      kWorkflowTrials, std::pow(1.0 - reliability::consensus_error(5, 0.05), 100));
  ok = ok && workflow.band.within;
  detail += "; workflow m=100 " + band_text(workflow);

  const double elapsed = seconds_since(start);
  ok = ok && elapsed < kMonteCarloSeconds;
  report(3, ok, fmt::format("{}; {:.1f} s", detail, elapsed));
}

// ---- 4 -----------------------------------------------------------------------

std::vector<std::string> split(std::initializer_list<std::pair<const char*, int>> groups) {
  std::vector<std::string> out;
  for (const auto& [text, count] : groups) {
    for (int i = 0; i < count; ++i) out.emplace_back(text);
  }
  return out;
}

simulator::DynamicReport dynamic_report;

void criterion4() {
  backends::ExactEmbedder embedder;
  judge::DeterministicSelector selector;
  const judge::JudgeParams params;  // theta 0.6, delta_n 4, n_max 13

  const auto contested = judge::judge_round(split({{"A", 2}, {"B", 2}, {"C", 1}}), 5, 1, "t", params, embedder,
                                            selector);
  const bool escalates = !contested.decided() && contested.escalation().delta_n == 4;
  const auto three_two = judge::judge_round(split({{"A", 3}, {"B", 2}}), 5, 1, "t", params, embedder, selector);
  const bool decides = three_two.decided() && !three_two.verdict().forced && three_two.verdict().answer == "A";

  // Walk an always-contested task up to n_max.
  bool forced_ok = true;
  int requested = 5;
  for (int round = 1;; ++round) {
    std::vector<std::string> outs;
    for (int i = 0; i < requested; ++i) outs.push_back("x" + std::to_string(i));
    const auto d = judge::judge_round(outs, requested, round, "t", params, embedder, selector);
    if (d.decided()) {
      forced_ok = d.verdict().forced && requested == params.n_max;
      break;
    }
    if (requested >= params.n_max) {
      forced_ok = false;
      break;
    }
    requested += d.escalation().delta_n;
  }

  simulator::DynamicParams dp;  // n0 5, n_max 13, theta 0.6, delta_n 4, p 0.05, K 9
  dynamic_report = simulator::simulate_dynamic(dp, simulator::TrialOptions{kDynamicTrials, 424242, 0});
  const auto& r = dynamic_report;
  const bool dominates = r.defects.hits <= r.fixed_defects.hits && r.dominance_violations == 0;

  report(4, escalates && decides && forced_ok && dominates,
         fmt::format("2-2-1 escalates: {}; 3-2 decides: {}; forced exactly at n_max: {}; dynamic {} vs fixed-n0 {} "
                     "defects over {} paired trials ({} violations)",
                     escalates, decides, forced_ok, r.defects.hits, r.fixed_defects.hits, r.defects.trials,
                     r.dominance_violations));
}

// ---- 5 -----------------------------------------------------------------------

void criterion5() {
  std::ifstream in(kTestFixtures + "/surface_variants.json");
  const json doc = json::parse(in);
  std::map<std::string, backends::Vector, std::less<>> table;
  for (const auto& [text, v] : doc["table"].items()) table[text] = v.get<backends::Vector>();
  backends::ScriptedEmbedder scripted(table);
  const std::vector<std::string> answers{"$5M", "$5,000,000", "5 million", "$4.2M", "$4.2M"};
  const auto r = judge::cluster_outputs(scripted.embed(answers), 0.85);
  bool figure = r.clusters.size() == 2 && r.clusters[0].members == std::vector<std::size_t>{0, 1, 2} &&
                r.clusters[1].members == std::vector<std::size_t>{3, 4};

  // Identical strings under the mock embedder, mixed with assorted others.
  backends::MockEmbedder mock;
  const std::vector<std::string> pool{"The refund is $234.18",
                                      "Overcharge of $234.18 found",
                                      "No discrepancy",
                                      "Invoice total $4,734.18",
                                      "Customer verified: ACCT-0042",
                                      "",
                                      "refund 234.18 dollars",
                                      "Contract total $4,500.00"};
  bool identical = true;
  int checked = 0;
  for (std::size_t a = 0; a < pool.size(); ++a) {
    for (std::size_t b = 0; b < pool.size(); ++b) {
      const std::vector<std::string> texts{pool[a], pool[b], pool[a], pool[(a + 3) % pool.size()], pool[a]};
      const auto rep = judge::cluster_outputs(mock.embed(texts), 0.85);
      for (const auto& c : rep.clusters) {
        const bool has0 = std::find(c.members.begin(), c.members.end(), 0) != c.members.end();
        if (!has0) continue;
        for (std::size_t i = 0; i < texts.size(); ++i) {
          if (texts[i] == texts[0] && std::find(c.members.begin(), c.members.end(), i) == c.members.end()) {
            identical = false;
          }
        }
      }
      ++checked;
    }
  }
  report(5, figure && identical,
         fmt::format("surface variants cluster as {{3, 2}}: {}; identical strings co-clustered in all {} mock sets: {}",
                     figure, checked, identical));
}

// ---- engine helpers ----------------------------------------------------------

struct EngineRun {
  executor::RunResult result;
  int refunds = 0;
  int invocations = 0;
};

EngineRun run_engine(const json& workflow, const json& config, std::uint64_t seed,
                     const std::shared_ptr<state::LogStore>& store, std::optional<std::size_t> halt = std::nullopt) {
  auto rt = cli::build_runtime(config);
  auto graph = graph::load_workflow_json(workflow);
  state::EventLog log(store);
  executor::EngineOptions opts;
  opts.run_id = "acceptance-" + std::to_string(seed);
  opts.seed = seed;
  opts.defaults = rt->sampling;
  opts.delta_n = rt->delta_n;
  opts.executor = rt->executor;
  opts.workflow_document = workflow;
  opts.config_document = config;
  opts.halt_after_completions = halt;
  executor::Engine engine({rt->pool, *rt->embedder, *rt->selector, rt->tools, log}, opts);
  EngineRun out;
  out.result = engine.run(graph);
  out.refunds = static_cast<int>(rt->ledgers.at("refund")->records().size());
  out.invocations = rt->tools.invocation_count("refund");
  return out;
}

// The voted answer of a task: the tool arguments for TOOL tasks.
const std::string& voted(const graph::VerifiedOutput& v) { return v.tool_args ? *v.tool_args : v.answer; }

// ---- 6 -----------------------------------------------------------------------

void criterion6() {
  const json workflow = cli::read_json_file(kFixtures + "/invoice_refund.json");
  const json config = cli::read_json_file(kFixtures + "/invoice_refund.sim.json");
  const auto canonical = config["scenario"]["answers"];

  int correct = 0;
  int final_correct = 0;
  int concurrent_waves = 0;
  int once = 0;
  for (int i = 0; i < kEngineRuns; ++i) {
    const auto run = run_engine(workflow, config, 1000 + i, std::make_shared<state::MemoryLogStore>());
    bool all = run.result.status == executor::RunStatus::completed && run.result.outputs.size() == 6;
    for (const auto& [id, v] : run.result.outputs) all = all && voted(v) == canonical[id].get<std::string>();
    correct += all;
    final_correct += run.result.final_output && voted(*run.result.final_output) == canonical["5"].get<std::string>();
    for (const auto& wave : run.result.launch_waves) {
      if (wave == std::vector<std::string>{"2a", "2b"}) ++concurrent_waves;
    }
    once += run.refunds == 1 && run.invocations == 1;
  }

  // With a fixed per-sample latency, concurrent 2a/2b take one latency, not two.
  json slow = config;
  for (auto& b : slow["backends"]) b["latency_ms"] = kOverlapLatency.count();
  const auto timed = run_engine(workflow, slow, 1, std::make_shared<state::MemoryLogStore>());
  const auto& t2a = timed.result.timings.at("2a");
  const auto& t2b = timed.result.timings.at("2b");
  const bool overlap = t2a.started < t2b.finished && t2b.started < t2a.finished;
  const auto span = std::max(t2a.finished, t2b.finished) - std::min(t2a.started, t2b.started);
  const double span_ms = std::chrono::duration<double, std::milli>(span).count();
  const bool parallel = overlap && span_ms < 1.8 * static_cast<double>(kOverlapLatency.count());

  report(6,
         correct >= kEngineMinCorrect && concurrent_waves == kEngineRuns && once == kEngineRuns && parallel,
         fmt::format("{}/{} runs with all six verified answers correct (need >= {}), {} with the correct final tool "
                     "call; 2a/2b launched together in {} runs, overlapping span {:.0f} ms at {} ms latency; refund "
                     "tool invoked exactly once in {} runs",
                     correct, kEngineRuns, kEngineMinCorrect, final_correct, concurrent_waves, span_ms,
                     kOverlapLatency.count(), once));
}

// ---- 7 -----------------------------------------------------------------------

void criterion7() {
  const json workflow = cli::read_json_file(kFixtures + "/invoice_refund.json");
  const json config = cli::read_json_file(kFixtures + "/invoice_refund.sim.json");
  int identical = 0;
  int attempts = 0;
  int single_refund = 0;
  for (int s = 0; s < kResumeSeeds; ++s) {
    const std::uint64_t seed = 77 + 1000 * static_cast<std::uint64_t>(s);
    const auto straight = run_engine(workflow, config, seed, std::make_shared<state::MemoryLogStore>());
    for (std::size_t k = 1; k <= 5; ++k) {
      auto store = std::make_shared<state::MemoryLogStore>();
      const auto halted = run_engine(workflow, config, seed, store, k);
      const auto resumed = run_engine(workflow, config, seed, store);
      bool same = halted.result.status == executor::RunStatus::halted &&
                  resumed.result.status == executor::RunStatus::completed &&
                  resumed.result.outputs.size() == straight.result.outputs.size();
      for (const auto& [id, v] : straight.result.outputs) {
        const auto it = resumed.result.outputs.find(id);
        same = same && it != resumed.result.outputs.end() && it->second.answer == v.answer &&
               it->second.tool_args == v.tool_args;
      }
      identical += same;
      single_refund += halted.refunds + resumed.refunds == 1;
      ++attempts;
    }
  }
  report(7, identical == attempts && single_refund == attempts,
         fmt::format("{}/{} halt-after-k (k = 1..5, {} seeds) resumes match the uninterrupted answers byte for byte; "
                     "refund issued once in {}/{}",
                     identical, attempts, kResumeSeeds, single_refund, attempts));
}

// ---- 8 -----------------------------------------------------------------------

void criterion8() {
  const auto& r = dynamic_report;
  std::cout << "  not reproduced here: enterprise accuracy on real documents, the 80% cost reduction, the 47% "
               "latency reduction and the 11% real-workload escalation rate\n";
  std::cout << fmt::format(
      "  simulator statistics (reported, not asserted; p=0.05, K=9, n0=5, n_max=13, theta=0.6, {} trials): "
      "escalation rate {:.4f}, forced rate {:.5f}, mean samples {:.3f}, dynamic defect rate {:.3g}, fixed-n0 defect "
      "rate {:.3g}\n",
      r.escalated.trials, r.escalated.rate(), r.forced.rate(), r.mean_samples, r.defects.rate(),
      r.fixed_defects.rate());
  report(8, true, "desk-scale limits reported; statistics above are informational");
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
