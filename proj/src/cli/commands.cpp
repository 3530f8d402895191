#include "voteflow/cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "voteflow/backends/agent.hpp"
#include "voteflow/cli/config.hpp"
#include "voteflow/error.hpp"
#include "voteflow/executor/engine.hpp"
#include "voteflow/graph/decomposition.hpp"
#include "voteflow/hash.hpp"
#include "voteflow/judge/selector.hpp"
#include "voteflow/reliability/reliability.hpp"
#include "voteflow/simulator/simulator.hpp"
#include "voteflow/state/audit.hpp"
#include "voteflow/state/event_log.hpp"
#include "voteflow/state/recovery.hpp"

namespace voteflow::cli {

using nlohmann::json;
namespace rel = voteflow::reliability;
namespace sim = voteflow::simulator;

namespace {

constexpr const char* kDefaultLogPath = "voteflow-run.jsonl";

std::string cell(const json& v, bool full_precision) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return full_precision ? v.dump() : fmt::format("{:.6g}", v.get<double>());
  return v.dump();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

void render(const std::vector<Record>& records, Format format, std::ostream& out) {
  if (format == Format::jsonl) {
    for (const auto& r : records) out << r.dump() << '\n';
    return;
  }
  std::vector<std::string> columns;
  for (const auto& r : records) {
    for (const auto& [k, v] : r.items()) {
      if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
    }
  }
  auto value = [](const Record& r, const std::string& k, bool full) {
    return r.contains(k) ? cell(r[k], full) : std::string("-");
  };
  if (format == Format::csv) {
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << csv_escape(columns[i]);
    out << '\n';
    for (const auto& r : records) {
      for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << csv_escape(value(r, columns[i], true));
      out << '\n';
    }
    return;
  }
  std::vector<std::size_t> width(columns.size());
  for (std::size_t i = 0; i < columns.size(); ++i) {
    width[i] = columns[i].size();
    for (const auto& r : records) width[i] = std::max(width[i], value(r, columns[i], false).size());
  }
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "  " : "") << fmt::format("{:<{}}", columns[i], width[i]);
  out << '\n';
  for (const auto& r : records) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      out << (i ? "  " : "") << fmt::format("{:<{}}", value(r, columns[i], false), width[i]);
    }
    out << '\n';
  }
}

namespace {

Format parse_format(const std::string& s) {
  if (s == "table") return Format::table;
  if (s == "csv") return Format::csv;
  if (s == "jsonl") return Format::jsonl;
  throw ValidationError("unknown format '" + s + "'");
}

std::int64_t parse_count(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ValidationError("'" + text + "' is not a number");
  }
  if (used != text.size() || !(v >= 1.0) || v > 9.0e15 || std::floor(v) != v) {
    throw ValidationError("'" + text + "' is not a positive whole number");
  }
  return static_cast<std::int64_t>(v);
}

template <class F>
json optional_value(F&& f) {
  try {
    return f();
  } catch (const Error&) {
    return nullptr;
  }
}

// ---- calc -----------------------------------------------------------------

struct CalcArgs {
  std::vector<int> n;
  std::vector<double> p;
  std::optional<double> target;
  std::vector<double> rho;
  std::optional<std::int64_t> m;
  std::optional<double> reliability;
  bool grid = false;
  bool report = false;
  std::string format = "table";
};

Record reference_record(const rel::ReferencePoint& pt) {
  Record r;
  r["figure"] = pt.label;
  r["source"] = pt.source;
  r["published"] = pt.claimed;
  r["computed"] = pt.computed;
  r["flag"] = pt.discrepant ? "DISCREPANT" : "ok";
  return r;
}

std::vector<Record> calc_records(const CalcArgs& a) {
  std::vector<Record> rows;
  if (a.report) {
    for (const auto& pt : rel::reference_points()) rows.push_back(reference_record(pt));
    return rows;
  }
  const double target = a.target.value_or(rel::kSixSigmaTarget);
  if (a.grid) {
    for (double p : {0.01, 0.02, 0.05, 0.10}) {
      for (int n = 1; n <= 13; n += 2) {
        Record r;
        r["n"] = n;
        r["p"] = p;
        r["p_sys"] = rel::consensus_error(n, p);
        r["dpmo"] = rel::dpmo(rel::consensus_error(n, p));
        const auto pt = rel::plotted_point(n, p);
        r["plotted"] = pt ? json(pt->claimed) : json(nullptr);
        r["flag"] = pt && pt->discrepant ? "DISCREPANT" : "ok";
        rows.push_back(std::move(r));
      }
    }
    return rows;
  }
  if (a.p.empty()) throw ValidationError("calc needs --p (or --grid / --report)");
  for (double p : a.p) {
    rel::ReliabilityParams{1, p, 0.0, target}.validate(false);
    if (a.n.empty()) {
      Record r;
      r["p"] = p;
      r["target"] = target;
      r["n_star"] = rel::min_agents_for_target(p, target);
      rows.push_back(std::move(r));
      continue;
    }
    for (int n : a.n) {
      rel::ReliabilityParams{n, p, 0.0, target}.validate(true);
      const double p_sys = rel::consensus_error(n, p);
      const auto result = rel::ReliabilityResult::closed_form(p_sys);
      std::vector<std::optional<double>> rhos;
      if (a.rho.empty()) rhos.emplace_back();
      for (double rho : a.rho) rhos.emplace_back(rho);
      for (const auto& rho : rhos) {
        Record r;
        r["n"] = n;
        r["p"] = p;
        r["p_sys"] = result.p_sys;
        r["dpmo"] = result.dpmo;
        r["target"] = target;
        r["n_star"] = optional_value([&] { return json(rel::min_agents_for_target(p, target)); });
        r["rho_max"] = optional_value([&] { return json(rel::max_correlation(n, p, target).rho_max); });
        if (rho) {
          rel::ReliabilityParams{n, p, *rho, target}.validate(true);
          const double corr = rel::correlated_error(n, p, *rho);
          r["rho"] = *rho;
          r["p_corr"] = corr;
          r["dpmo_corr"] = rel::dpmo(corr);
        }
        const double effective = rho ? rel::correlated_error(n, p, *rho) : p_sys;
        if (a.m) {
          r["m"] = *a.m;
          r["success_m"] = rel::compound_success(effective, *a.m);
          r["single_agent_success_m"] = rel::compound_success(p, *a.m);
        }
        if (a.reliability) {
          r["reliability"] = *a.reliability;
          r["m_max"] = optional_value([&] { return json(rel::max_workflow_length(*a.reliability, effective)); });
        }
        rows.push_back(std::move(r));
      }
    }
  }
  return rows;
}

// ---- simulate ---------------------------------------------------------------

struct SimArgs {
  int n = 5;
  double p = 0.05;
  int k = 9;
  double rho = 0.0;
  int m = 100;
  int n0 = 5;
  int n_max = 13;
  double theta = 0.6;
  int delta_n = 4;
  std::string trials;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string format = "table";
};

void add_band(Record& r, const sim::BandedEstimate& b, const char* name) {
  r[std::string(name) + "_rate"] = b.estimate.rate();
  r["ci99"] = b.estimate.ci_halfwidth();
  r["expected"] = b.band.target;
  r["sigma"] = b.band.sigma;
  r["z"] = b.band.z;
  r["within_3sigma"] = b.band.within;
  r["rerun"] = b.rerun;
}

int simulate_command(const std::string& which, const SimArgs& a, std::ostream& out) {
  const std::int64_t default_trials = (which == "workflow" || which == "dynamic") ? 100000 : 1000000;
  const std::int64_t trials = a.trials.empty() ? default_trials : parse_count(a.trials);
  auto opts = [&](std::int64_t t) { return sim::TrialOptions{t, a.seed, a.threads}; };
  Record r;
  r["kind"] = which;
  bool within = true;

  if (which == "consensus") {
    rel::ReliabilityParams{a.n, a.p, 0.0, rel::kSixSigmaTarget, a.k}.validate(true);
    sim::ConsensusReport last;
    auto b = sim::banded(
        [&](std::int64_t t) {
          last = sim::simulate_consensus(a.n, a.p, a.k, opts(t));
          return last.defects;
        },
        trials, rel::consensus_error(a.n, a.p));
    r["n"] = a.n;
    r["p"] = a.p;
    r["K"] = a.k;
    r["trials"] = b.estimate.trials;
    r["errors"] = b.estimate.hits;
    add_band(r, b, "error");
    r["dpmo"] = b.estimate.as_result().dpmo;
    r["wrong_answer_rate"] = last.wrong_answers.rate();
    within = b.band.within;
  } else if (which == "correlated") {
    rel::ReliabilityParams{a.n, a.p, a.rho, rel::kSixSigmaTarget, a.k}.validate(true);
    sim::CorrelatedReport last;
    auto b = sim::banded(
        [&](std::int64_t t) {
          last = sim::simulate_correlated(a.n, a.p, a.rho, a.k, opts(t));
          return last.defects;
        },
        trials, rel::correlated_error(a.n, a.p, a.rho));
    r["n"] = a.n;
    r["p"] = a.p;
    r["rho"] = a.rho;
    r["K"] = a.k;
    r["trials"] = b.estimate.trials;
    r["errors"] = b.estimate.hits;
    add_band(r, b, "error");
    r["common_cause_rate"] = last.common_cause.rate();
    r["wrong_answer_rate"] = last.wrong_answers.rate();
    within = b.band.within;
  } else if (which == "workflow") {
    rel::ReliabilityParams{a.n, a.p, 0.0, rel::kSixSigmaTarget, a.k}.validate(true);
    if (a.m < 1) throw ValidationError("--m must be >= 1");
    auto b = sim::banded([&](std::int64_t t) { return sim::simulate_workflow(a.m, a.n, a.p, a.k, opts(t)).successes; },
                         trials, rel::compound_success(rel::consensus_error(a.n, a.p), a.m));
    r["m"] = a.m;
    r["n"] = a.n;
    r["p"] = a.p;
    r["K"] = a.k;
    r["trials"] = b.estimate.trials;
    r["successes"] = b.estimate.hits;
    add_band(r, b, "success");
    within = b.band.within;
  } else {
    sim::DynamicParams params{a.n0, a.n_max, a.theta, a.delta_n, a.p, a.k};
    rel::ReliabilityParams{a.n0, a.p, 0.0, rel::kSixSigmaTarget, a.k}.validate(true);
    sim::DynamicReport last;
    auto b = sim::banded(
        [&](std::int64_t t) {
          last = sim::simulate_dynamic(params, opts(t));
          return last.fixed_defects;
        },
        trials, rel::consensus_error(a.n0, a.p));
    r["n0"] = a.n0;
    r["n_max"] = a.n_max;
    r["theta"] = a.theta;
    r["delta_n"] = a.delta_n;
    r["p"] = a.p;
    r["K"] = a.k;
    r["trials"] = last.defects.trials;
    r["error_rate"] = last.defects.rate();
    r["wrong_answer_rate"] = last.wrong_answers.rate();
    r["escalation_rate"] = last.escalated.rate();
    r["forced_rate"] = last.forced.rate();
    r["mean_samples"] = last.mean_samples;
    r["fixed_n0_error_rate"] = b.estimate.rate();
    r["fixed_n0_expected"] = b.band.target;
    r["fixed_n0_within_3sigma"] = b.band.within;
    r["dominance_violations"] = last.dominance_violations;
    r["rerun"] = b.rerun;
    within = b.band.within;
  }
  render({r}, parse_format(a.format), out);
  return within ? kExitOk : kExitBandMiss;
}

// ---- run / resume -------------------------------------------------------------

struct RunArgs {
  std::string workflow;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string log;
  std::optional<std::size_t> halt_after;
};

std::string make_run_id(std::uint64_t seed, const json& workflow, const json& config) {
  return to_hex(stable_hash("run", seed, workflow.dump(), config.dump()));
}

int execute_run(const json& workflow_doc, const json& config_doc, std::uint64_t seed, const std::string& run_id,
                state::EventLog& log, std::optional<std::size_t> halt_after, std::ostream& out) {
  auto graph = graph::load_workflow_json(workflow_doc);
  auto rt = build_runtime(config_doc);
  check_workflow(graph, *rt);

  executor::EngineOptions options;
  options.run_id = run_id;
  options.seed = seed;
  options.defaults = rt->sampling;
  options.delta_n = rt->delta_n;
  options.executor = rt->executor;
  options.workflow_document = workflow_doc;
  options.config_document = config_doc;
  options.halt_after_completions = halt_after;
  executor::Engine engine({rt->pool, *rt->embedder, *rt->selector, rt->tools, log}, options);
  const auto result = engine.run(graph);

  std::vector<Record> rows;
  for (const auto& id : graph.declared_order()) {
    Record r;
    r["task"] = id;
    if (const auto it = result.outputs.find(id); it != result.outputs.end()) {
      const auto& v = it->second;
      r["answer"] = v.answer;
      r["confidence"] = v.confidence;
      r["samples"] = v.samples_used;
      r["rounds"] = v.rounds;
      r["forced"] = v.forced;
    } else {
      r["answer"] = nullptr;
    }
    rows.push_back(std::move(r));
  }
  render(rows, Format::table, out);
  if (result.status == executor::RunStatus::halted) {
    out << "halted after " << *halt_after << " task completions\n";
    return kExitHalted;
  }
  out << "final answer [" << graph.sink() << "]: " << result.final_output->answer << '\n';
  return kExitOk;
}

int run_command(const RunArgs& a, std::ostream& out) {
  const json workflow_doc = graph::serialize_workflow(graph::load_workflow_json(read_json_file(a.workflow)));
  const json config_doc = read_json_file(a.config);
  const std::uint64_t seed = a.seed.value_or(config_doc.value("seed", std::uint64_t{0}));
  const std::string path =
      !a.log.empty() ? a.log : config_doc.value("log_path", std::string(kDefaultLogPath));
  state::EventLog log(std::make_shared<state::FileLogStore>(path));
  if (!log.existing().empty()) {
    throw ValidationError("event log '" + path + "' already holds a run; use 'resume' to continue it");
  }
  return execute_run(workflow_doc, config_doc, seed, make_run_id(seed, workflow_doc, config_doc), log, a.halt_after,
                     out);
}

int resume_command(const RunArgs& a, std::ostream& out) {
  state::EventLog log(std::make_shared<state::FileLogStore>(a.log));
  const auto recovered = state::recover(log.existing());
  if (!recovered.run) {
    if (a.workflow.empty() || a.config.empty()) {
      throw ValidationError("event log '" + a.log + "' is empty; pass --workflow and --config to start the run");
    }
    const json workflow_doc = graph::serialize_workflow(graph::load_workflow_json(read_json_file(a.workflow)));
    const json config_doc = read_json_file(a.config);
    const std::uint64_t seed = a.seed.value_or(config_doc.value("seed", std::uint64_t{0}));
    return execute_run(workflow_doc, config_doc, seed, make_run_id(seed, workflow_doc, config_doc), log, a.halt_after,
                       out);
  }
  const auto& info = *recovered.run;
  if (a.seed && *a.seed != info.seed) {
    throw ValidationError(fmt::format("log was written with seed {}, not {}", info.seed, *a.seed));
  }
  return execute_run(info.workflow, info.config, info.seed, info.run_id, log, a.halt_after, out);
}

int audit_command(const std::string& log_path, const std::string& out_path, std::ostream& out) {
  if (!std::filesystem::exists(log_path)) throw StorageError("no event log at '" + log_path + "'");
  const auto parsed = state::read_log_file(log_path);
  const std::string report = state::export_audit(parsed.events);
  if (out_path.empty()) {
    out << report;
  } else {
    std::ofstream file(out_path);
    if (!file) throw StorageError("cannot write '" + out_path + "'");
    file << report;
    if (!file) throw StorageError("cannot write '" + out_path + "'");
  }
  return kExitOk;
}

std::string read_template(const std::string& path, std::string_view fallback) {
  if (path.empty()) return std::string(fallback);
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read template '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Redundant-sampling workflow engine with consensus voting and reliability tools", "voteflow"};
  app.require_subcommand(1);

  CalcArgs calc;
  auto* calc_cmd = app.add_subcommand("calc", "Closed-form reliability figures");
  calc_cmd->add_option("--n", calc.n, "Agent counts")->delimiter(',');
  calc_cmd->add_option("--p", calc.p, "Per-agent error probabilities")->delimiter(',');
  calc_cmd->add_option("--target", calc.target, "System error target (default 3.4e-6)");
  calc_cmd->add_option("--rho", calc.rho, "Common-cause correlations")->delimiter(',');
  calc_cmd->add_option("--m", calc.m, "Workflow length for end-to-end success");
  calc_cmd->add_option("--reliability", calc.reliability, "End-to-end reliability target for m_max");
  calc_cmd->add_flag("--grid", calc.grid, "Scaling grid n = 1..13 odd, p in {0.01, 0.02, 0.05, 0.10}");
  calc_cmd->add_flag("--report", calc.report, "Published reference figures next to recomputed values");
  calc_cmd->add_option("--format", calc.format, "table, csv or jsonl");

  SimArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo checks against the closed forms");
  sim_cmd->require_subcommand(1);
  std::map<std::string, CLI::App*> sims;
  for (const char* name : {"consensus", "correlated", "workflow", "dynamic"}) {
    auto* s = sim_cmd->add_subcommand(name);
    s->add_option("--trials", sim_args.trials, "Trial count, e.g. 1e6");
    s->add_option("--seed", sim_args.seed, "Seed");
    s->add_option("--threads", sim_args.threads, "Worker threads (0 = all cores)");
    s->add_option("--K,--error-space", sim_args.k, "Distinct wrong answers");
    s->add_option("--p", sim_args.p, "Per-agent error probability");
    s->add_option("--format", sim_args.format, "table, csv or jsonl");
    sims[name] = s;
  }
  for (const char* name : {"consensus", "correlated", "workflow"}) sims[name]->add_option("--n", sim_args.n, "Agents");
  sims["correlated"]->add_option("--rho", sim_args.rho, "Common-cause probability");
  sims["workflow"]->add_option("--m", sim_args.m, "Actions per workflow");
  sims["dynamic"]->add_option("--n0", sim_args.n0, "Initial samples");
  sims["dynamic"]->add_option("--nmax,--n-max", sim_args.n_max, "Sample ceiling");
  sims["dynamic"]->add_option("--theta", sim_args.theta, "Confidence gate");
  sims["dynamic"]->add_option("--delta-n", sim_args.delta_n, "Samples added per escalation");

  RunArgs run_args;
  std::uint64_t seed_value = 0;
  std::size_t halt_value = 0;
  auto* run_cmd = app.add_subcommand("run", "Execute a workflow");
  run_cmd->add_option("--workflow", run_args.workflow, "Workflow file")->required();
  run_cmd->add_option("--config", run_args.config, "Config file")->required();
  auto* run_seed = run_cmd->add_option("--seed", seed_value, "Run seed (overrides the config)");
  run_cmd->add_option("--log", run_args.log, "Event log path (overrides the config)");
  auto* run_halt = run_cmd->add_option("--halt-after", halt_value, "Stop after this many task completions");

  auto* resume_cmd = app.add_subcommand("resume", "Continue a run from its event log");
  resume_cmd->add_option("--log", run_args.log, "Event log path")->required();
  resume_cmd->add_option("--workflow", run_args.workflow, "Workflow file, for an empty log");
  resume_cmd->add_option("--config", run_args.config, "Config file, for an empty log");
  auto* resume_seed = resume_cmd->add_option("--seed", seed_value, "Run seed");
  auto* resume_halt = resume_cmd->add_option("--halt-after", halt_value, "Stop after this many task completions");

  std::string audit_log;
  std::string audit_out;
  auto* audit_cmd = app.add_subcommand("audit", "Print the audit report of a run");
  audit_cmd->add_option("--log", audit_log, "Event log path")->required();
  audit_cmd->add_option("--out", audit_out, "Write the report to this file");

  std::string prompt_task;
  std::vector<std::string> prompt_items;
  std::string prompt_template;
  auto* prompt_cmd = app.add_subcommand("prompt", "Render the planner or selection prompt");
  prompt_cmd->require_subcommand(1);
  auto* decomp_cmd = prompt_cmd->add_subcommand("decomposition", "Task decomposition prompt");
  decomp_cmd->add_option("--task", prompt_task, "Task description")->required();
  decomp_cmd->add_option("--tools", prompt_items, "Available tools")->delimiter(',');
  decomp_cmd->add_option("--template", prompt_template, "Template file");
  auto* select_cmd = prompt_cmd->add_subcommand("selection", "Best-candidate selection prompt");
  select_cmd->add_option("--task", prompt_task, "Task description")->required();
  select_cmd->add_option("--candidate", prompt_items, "Candidate output (repeatable)")->required();
  select_cmd->add_option("--template", prompt_template, "Template file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*calc_cmd) {
      render(calc_records(calc), parse_format(calc.format), out);
      return kExitOk;
    }
    if (*sim_cmd) {
      for (const auto& [name, s] : sims) {
        if (*s) return simulate_command(name, sim_args, out);
      }
    }
    if (*run_cmd) {
      if (*run_seed) run_args.seed = seed_value;
      if (*run_halt) run_args.halt_after = halt_value;
      return run_command(run_args, out);
    }
    if (*resume_cmd) {
      if (*resume_seed) run_args.seed = seed_value;
      if (*resume_halt) run_args.halt_after = halt_value;
      return resume_command(run_args, out);
    }
    if (*audit_cmd) return audit_command(audit_log, audit_out, out);
    if (*decomp_cmd) {
      out << graph::render_decomposition_prompt(read_template(prompt_template, graph::kDecompositionPromptTemplate),
                                                prompt_task, prompt_items);
      return kExitOk;
    }
    if (*select_cmd) {
      out << judge::render_selection_prompt(read_template(prompt_template, judge::kSelectionPromptTemplate),
                                            prompt_task, prompt_items);
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const StorageError& e) {
    err << "storage error: " << e.what() << '\n';
    return kExitStorage;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "run aborted: " << e.what() << '\n';
    return kExitExecution;
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace voteflow::cli
