#include "voteflow/executor/engine.hpp"

#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "voteflow/error.hpp"
#include "voteflow/hash.hpp"
#include "voteflow/judge/judge.hpp"
#include "voteflow/state/recovery.hpp"

namespace voteflow::executor {

using nlohmann::json;
using state::EventKind;
using Clock = std::chrono::steady_clock;

namespace {

double to_ms(std::chrono::duration<double> d) { return d.count() * 1000.0; }

json samples_payload(const SampleSet& set, std::size_t requested) {
  json samples = json::array();
  for (const auto& s : set.outputs) {
    json j{{"index", s.sample_index},
           {"backend", s.output.backend},
           {"seed", s.output.seed},
           {"latency_ms", to_ms(s.output.latency)},
           {"retries", s.output.retries},
           {"text", s.output.text}};
    if (s.output.truth_tag) j["truth"] = s.output.truth_tag->str();
    samples.push_back(std::move(j));
  }
  json failures = json::array();
  for (const auto& f : set.failures) {
    failures.push_back({{"index", f.sample_index},
                        {"backend", f.backend},
                        {"failure", backends::to_string(f.failure)},
                        {"message", f.message}});
  }
  return json{{"task_id", set.task_id}, {"round", set.round},          {"requested", requested},
              {"samples", samples},     {"failures", failures},        {"wall_ms", to_ms(set.wall_time)}};
}

json judge_payload(const std::string& task_id, int round, int requested, const judge::RoundDecision& d) {
  json clusters = json::array();
  for (const auto& c : d.report.clusters) clusters.push_back({{"members", c.members}});
  json j{{"task_id", task_id},
         {"round", round},
         {"requested", requested},
         {"delivered", d.report.total},
         {"sizes", d.report.sizes()},
         {"clusters", clusters},
         {"confidence", d.report.confidence},
         {"contested", d.report.contested},
         {"decision", d.decided() ? "verdict" : "escalate"}};
  if (d.decided()) {
    j["forced"] = d.verdict().forced;
    j["answer"] = d.verdict().answer;
    j["rationale"] = d.verdict().selection_rationale;
  } else {
    j["delta_n"] = d.escalation().delta_n;
  }
  return j;
}

}  // namespace

Engine::Engine(EngineServices services, EngineOptions options)
    : services_(services), options_(std::move(options)), executor_(services_.pool, options_.executor) {
  options_.defaults.validate();
  if (options_.delta_n < 1) throw ValidationError("delta_n must be >= 1");
  if (options_.run_id.empty()) options_.run_id = to_hex(stable_hash("run", options_.seed));
}

graph::VerifiedOutput Engine::execute_task(const graph::TaskSpec& task, const graph::SamplingConfig& sampling,
                                           const std::vector<graph::ContextInput>& context) {
  const auto start = Clock::now();
  auto& log = services_.log;

  // Common-cause draws, one per family, reused across escalation rounds.
  SharedDraws shared;
  for (const auto& agent : services_.pool.select(sampling)) {
    const std::string family = agent->family();
    if (shared.contains(family)) continue;
    if (auto draw = agent->draw_common_cause(task, stable_hash(options_.seed, task.id, "common", family))) {
      shared.emplace(family, std::move(*draw));
    }
  }

  judge::JudgeParams params{sampling.theta, sampling.tau, options_.delta_n, sampling.n_max};
  std::vector<std::string> texts;
  std::vector<std::vector<int>> history;
  int requested = 0;
  int count = sampling.n;
  for (int round = 0;; ++round) {
    SampleRequestSpec req{task,
                          sampling,
                          context,
                          options_.seed,
                          static_cast<std::size_t>(requested),
                          static_cast<std::size_t>(count),
                          round,
                          shared.empty() ? nullptr : &shared};
    SampleSet set = executor_.sample_task(req);
    requested += count;
    log.append(EventKind::samples_collected, samples_payload(set, static_cast<std::size_t>(requested)));
    if (set.outputs.empty()) {
      throw ExecutionError("task '" + task.id + "': all " + std::to_string(count) + " samples of round " +
                           std::to_string(round) + " failed");
    }
    for (auto& s : set.outputs) texts.push_back(std::move(s.output.text));

    auto decision = judge::judge_round(texts, requested, round + 1, task.description, params, services_.embedder,
                                       services_.selector);
    history.push_back(decision.report.sizes());
    const auto judge_seq =
        log.append(EventKind::judge_round, judge_payload(task.id, round + 1, requested, decision));

    if (!decision.decided()) {
      count = decision.escalation().delta_n;
      log.append(EventKind::escalated, json{{"task_id", task.id},
                                            {"round", round + 1},
                                            {"delta_n", count},
                                            {"requested", requested + count}});
      continue;
    }

    const judge::Verdict& verdict = decision.verdict();
    graph::VerifiedOutput out;
    out.task_id = task.id;
    out.answer = verdict.answer;
    out.confidence = verdict.confidence;
    out.samples_used = verdict.total_samples;
    out.judge_trace_ref = judge_seq;
    out.rounds = verdict.rounds;
    out.forced = verdict.forced;
    out.cluster_sizes = std::move(history);
    if (task.action_type == graph::ActionType::tool) {
      auto outcome = execute_tool_action(task, verdict.answer, services_.tools, options_.run_id);
      log.append(EventKind::tool_invoked,
                 json{{"task_id", task.id}, {"record", outcome.record}, {"replayed", outcome.replayed}});
      out.tool_args = verdict.answer;
      out.answer = outcome.record.result;
    }
    out.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
    return out;
  }
}

RunResult Engine::run(graph::WorkflowGraph& graph) {
  auto& log = services_.log;
  RunResult result;
  const auto recovered = state::recover(log.existing());
  result.resumed = !log.existing().empty();
  state::restore_graph(graph, recovered);
  services_.tools.restore(recovered.tool_records);

  auto collect_outputs = [&] {
    for (const auto& id : graph.declared_order()) {
      if (const auto* v = graph.verified(id)) result.outputs.insert_or_assign(id, *v);
    }
    if (graph.is_complete()) result.final_output = graph.final_output();
  };

  if (recovered.finished && graph.is_complete()) {
    collect_outputs();
    return result;
  }

  log.append(EventKind::run_started, json{{"run_id", options_.run_id},
                                          {"seed", options_.seed},
                                          {"resume", result.resumed},
                                          {"workflow", options_.workflow_document},
                                          {"config", options_.config_document}});

  struct Completion {
    std::string task_id;
    std::optional<graph::VerifiedOutput> output;
    std::exception_ptr error;
  };
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Completion> done;
  std::map<std::string, std::thread, std::less<>> workers;
  std::exception_ptr failure;
  std::string failed_task;
  std::size_t completions = 0;
  bool halted = false;

  auto join_all = [&] {
    for (auto& [id, t] : workers) {
      if (t.joinable()) t.join();
    }
    workers.clear();
  };

  try {
    while (!graph.is_complete()) {
      if (!failure && !halted) {
        std::vector<std::string> wave;
        for (const auto& id : graph.ready_tasks()) {
          const graph::TaskSpec& task = graph.task(id);
          const graph::SamplingConfig sampling = task.sampling.resolve(options_.defaults);
          sampling.validate();
          auto context = graph.context_inputs(id);
          graph.start_task(id);
          log.append(EventKind::task_started, json{{"task_id", id}});
          result.timings[id].started = Clock::now();
          wave.push_back(id);
          workers.emplace(id, std::thread([this, &task, sampling, context = std::move(context), &mu, &cv, &done] {
            Completion c{task.id, std::nullopt, nullptr};
            try {
              c.output = execute_task(task, sampling, context);
            } catch (...) {
              c.error = std::current_exception();
            }
            std::lock_guard lock(mu);
            done.push_back(std::move(c));
            cv.notify_one();
          }));
        }
        if (!wave.empty()) result.launch_waves.push_back(std::move(wave));
      }
      if (workers.empty()) break;

      Completion c;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return !done.empty(); });
        c = std::move(done.front());
        done.pop_front();
      }
      workers.at(c.task_id).join();
      workers.erase(c.task_id);
      result.timings[c.task_id].finished = Clock::now();

      if (c.error) {
        if (!failure) {
          failure = c.error;
          failed_task = c.task_id;
        }
        continue;
      }
      if (halted) continue;  // a crashed process records nothing more
      log.append(EventKind::task_completed, json{{"task_id", c.task_id}, {"verified", *c.output}});
      graph.complete_task(c.task_id, std::move(*c.output));
      ++completions;
      if (options_.halt_after_completions && completions >= *options_.halt_after_completions) halted = true;
    }
  } catch (...) {
    join_all();
    throw;
  }
  join_all();

  if (failure) {
    std::string cause = "unknown failure";
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      cause = e.what();
    } catch (...) {
    }
    try {
      log.append(EventKind::run_aborted, json{{"task_id", failed_task}, {"cause", cause}});
    } catch (const StorageError&) {
      // The original failure is the one worth reporting.
    }
    std::rethrow_exception(failure);
  }

  if (halted && !graph.is_complete()) {
    result.status = RunStatus::halted;
    collect_outputs();
    return result;
  }

  collect_outputs();
  log.append(EventKind::run_completed,
             json{{"task_id", graph.sink()}, {"final_answer", result.final_output->answer}});
  return result;
}

}  // namespace voteflow::executor
