#include "voteflow/simulator/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "voteflow/backends/sim_agent.hpp"
#include "voteflow/error.hpp"
#include "voteflow/executor/executor.hpp"
#include "voteflow/hash.hpp"

namespace voteflow::simulator {

using backends::SimAgentModel;

namespace {

constexpr std::string_view kTask = "task";

void require_trials(std::int64_t trials) {
  if (trials < kMinTrials) {
    throw ValidationError("at least " + std::to_string(kMinTrials) + " trials are required");
  }
}

SimAgentModel make_model(double p, int error_space, double rho = 0.0) {
  SimAgentModel model{p, error_space, rho, "sim"};
  model.validate();
  return model;
}

std::uint64_t trial_seed(std::uint64_t seed, std::int64_t trial) {
  return stable_hash(seed, static_cast<std::uint64_t>(trial));
}

int draw(std::string_view task, const SimAgentModel& model, std::uint64_t tseed, std::size_t index, int round) {
  return backends::sim_draw(task, model, executor::sample_seed(tseed, task, index, round)).error_index;
}

// Trials are split into contiguous chunks, one per thread. Each trial is
// seeded by its index alone, so the summed counts do not depend on the
// thread count.
template <class Acc, class Fn>
Acc run_trials(const TrialOptions& options, Fn&& fn) {
  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, std::max<std::int64_t>(1, options.trials / 1000)));
  std::vector<Acc> partial(threads);
  auto chunk = [&](unsigned t) {
    const std::int64_t begin = options.trials * t / threads;
    const std::int64_t end = options.trials * (t + 1) / threads;
    for (std::int64_t i = begin; i < end; ++i) fn(i, partial[t]);
  };
  if (threads == 1) {
    chunk(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(chunk, t);
    for (auto& th : pool) th.join();
  }
  Acc total{};
  for (const auto& a : partial) total += a;
  return total;
}

struct VoteCounts {
  std::int64_t defects = 0;
  std::int64_t wrong = 0;
  std::int64_t common = 0;
  VoteCounts& operator+=(const VoteCounts& o) {
    defects += o.defects;
    wrong += o.wrong;
    common += o.common;
    return *this;
  }
};

}  // namespace

double Estimate::rate() const noexcept { return trials == 0 ? 0.0 : static_cast<double>(hits) / trials; }

double Estimate::ci_halfwidth() const noexcept {
  if (trials == 0) return 0.0;
  const double r = rate();
  return kZ99 * std::sqrt(r * (1.0 - r) / static_cast<double>(trials));
}

reliability::ReliabilityResult Estimate::as_result() const {
  return reliability::ReliabilityResult::monte_carlo(rate(), ci_halfwidth(), trials);
}

BandCheck check_band(const Estimate& estimate, double target) {
  BandCheck b;
  b.target = target;
  b.sigma = std::sqrt(target * (1.0 - target) / static_cast<double>(std::max<std::int64_t>(1, estimate.trials)));
  const double diff = estimate.rate() - target;
  if (b.sigma == 0.0) {
    b.z = 0.0;
    b.within = diff == 0.0;
  } else {
    b.z = diff / b.sigma;
    b.within = std::abs(diff) <= kBandSigmas * b.sigma;
  }
  return b;
}

Tally tally(std::span<const int> truths) {
  // Distinct answers in order of first appearance, with their counts.
  std::vector<std::pair<int, int>> seen;
  seen.reserve(truths.size());
  for (int t : truths) {
    auto it = std::find_if(seen.begin(), seen.end(), [t](const auto& s) { return s.first == t; });
    if (it == seen.end()) {
      seen.emplace_back(t, 1);
    } else {
      ++it->second;
    }
  }
  Tally out;
  out.delivered = static_cast<int>(truths.size());
  for (const auto& [value, count] : seen) {
    if (count > out.winner_size) {
      out.winner_truth = value;
      out.winner_size = count;
      out.tied = false;
    } else if (count == out.winner_size) {
      out.tied = true;
    }
  }
  return out;
}

ConsensusReport simulate_consensus(int n, double p, int error_space, const TrialOptions& options) {
  require_trials(options.trials);
  if (n < 1) throw ValidationError("n must be >= 1");
  const SimAgentModel model = make_model(p, error_space);
  const auto counts = run_trials<VoteCounts>(options, [&](std::int64_t trial, VoteCounts& acc) {
    const std::uint64_t tseed = trial_seed(options.seed, trial);
    thread_local std::vector<int> truths;
    truths.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) truths[i] = draw(kTask, model, tseed, static_cast<std::size_t>(i), 0);
    const Tally t = tally(truths);
    acc.defects += t.defect();
    acc.wrong += t.wrong();
  });
  ConsensusReport r;
  r.defects = {options.trials, counts.defects};
  r.wrong_answers = {options.trials, counts.wrong};
  r.closed_form = p < 0.5 ? reliability::consensus_error(n, p) : 0.0;
  return r;
}

CorrelatedReport simulate_correlated(int n, double p, double rho, int error_space, const TrialOptions& options) {
  require_trials(options.trials);
  if (n < 1) throw ValidationError("n must be >= 1");
  const SimAgentModel model = make_model(p, error_space, rho);
  const std::string canonical = "CORRECT";
  const auto counts = run_trials<VoteCounts>(options, [&](std::int64_t trial, VoteCounts& acc) {
    const std::uint64_t tseed = trial_seed(options.seed, trial);
    thread_local std::vector<int> truths;
    truths.resize(static_cast<std::size_t>(n));
    const auto shared = backends::draw_common_cause(kTask, canonical, model, tseed);
    for (int i = 0; i < n; ++i) {
      truths[i] = shared ? shared->truth.error_index : draw(kTask, model, tseed, static_cast<std::size_t>(i), 0);
    }
    const Tally t = tally(truths);
    acc.defects += t.defect();
    acc.wrong += t.wrong();
    acc.common += shared.has_value();
  });
  CorrelatedReport r;
  r.defects = {options.trials, counts.defects};
  r.wrong_answers = {options.trials, counts.wrong};
  r.common_cause = {options.trials, counts.common};
  r.closed_form = reliability::correlated_error(n, p, rho);
  return r;
}

WorkflowReport simulate_workflow(int m, int n, double p, int error_space, const TrialOptions& options) {
  require_trials(options.trials);
  if (m < 1) throw ValidationError("m must be >= 1");
  if (n < 1) throw ValidationError("n must be >= 1");
  const SimAgentModel model = make_model(p, error_space);
  std::vector<std::string> actions;
  for (int a = 0; a < m; ++a) actions.push_back("a" + std::to_string(a + 1));
  const auto counts = run_trials<VoteCounts>(options, [&](std::int64_t trial, VoteCounts& acc) {
    const std::uint64_t tseed = trial_seed(options.seed, trial);
    thread_local std::vector<int> truths;
    truths.resize(static_cast<std::size_t>(n));
    for (const auto& action : actions) {
      for (int i = 0; i < n; ++i) truths[i] = draw(action, model, tseed, static_cast<std::size_t>(i), 0);
      if (tally(truths).defect()) {
        ++acc.defects;
        return;
      }
    }
  });
  WorkflowReport r;
  r.successes = {options.trials, options.trials - counts.defects};
  r.closed_form = p < 0.5 ? reliability::compound_success(reliability::consensus_error(n, p), m) : 0.0;
  return r;
}

namespace {

struct DynamicCounts {
  std::int64_t defects = 0;
  std::int64_t wrong = 0;
  std::int64_t escalated = 0;
  std::int64_t forced = 0;
  std::int64_t samples = 0;
  std::int64_t fixed_defects = 0;
  std::int64_t fixed_wrong = 0;
  std::int64_t violations = 0;
  DynamicCounts& operator+=(const DynamicCounts& o) {
    defects += o.defects;
    wrong += o.wrong;
    escalated += o.escalated;
    forced += o.forced;
    samples += o.samples;
    fixed_defects += o.fixed_defects;
    fixed_wrong += o.fixed_wrong;
    violations += o.violations;
    return *this;
  }
};

}  // namespace

DynamicReport simulate_dynamic(const DynamicParams& params, const TrialOptions& options) {
  require_trials(options.trials);
  if (params.n0 < 1 || params.n0 > params.n_max) throw ValidationError("need 1 <= n0 <= n_max");
  if (!(params.theta > 0.0 && params.theta <= 1.0)) throw ValidationError("theta must lie in (0, 1]");
  if (params.delta_n < 1) throw ValidationError("delta_n must be >= 1");
  const SimAgentModel model = make_model(params.p, params.error_space);

  const auto counts = run_trials<DynamicCounts>(options, [&](std::int64_t trial, DynamicCounts& acc) {
    const std::uint64_t tseed = trial_seed(options.seed, trial);
    thread_local std::vector<int> truths;
    truths.clear();
    for (int i = 0; i < params.n0; ++i) truths.push_back(draw(kTask, model, tseed, static_cast<std::size_t>(i), 0));
    Tally t = tally(truths);
    const Tally fixed = t;
    int requested = params.n0;
    int round = 0;
    auto undecided = [&](const Tally& x) { return x.confidence() < params.theta || x.tied; };
    while (undecided(t) && requested < params.n_max) {
      const int more = std::min(params.delta_n, params.n_max - requested);
      ++round;
      for (int i = 0; i < more; ++i) {
        truths.push_back(draw(kTask, model, tseed, static_cast<std::size_t>(requested + i), round));
      }
      requested += more;
      t = tally(truths);
    }
    acc.defects += t.defect();
    acc.wrong += t.wrong();
    acc.escalated += round > 0;
    acc.forced += undecided(t);
    acc.samples += requested;
    acc.fixed_defects += fixed.defect();
    acc.fixed_wrong += fixed.wrong();
    acc.violations += t.defect() && !fixed.defect();
  });

  DynamicReport r;
  r.defects = {options.trials, counts.defects};
  r.wrong_answers = {options.trials, counts.wrong};
  r.escalated = {options.trials, counts.escalated};
  r.forced = {options.trials, counts.forced};
  r.mean_samples = static_cast<double>(counts.samples) / static_cast<double>(options.trials);
  r.fixed_defects = {options.trials, counts.fixed_defects};
  r.fixed_wrong_answers = {options.trials, counts.fixed_wrong};
  r.dominance_violations = counts.violations;
  r.fixed_closed_form = params.p < 0.5 ? reliability::consensus_error(params.n0, params.p) : 0.0;
  return r;
}

BandedEstimate banded(const std::function<Estimate(std::int64_t trials)>& estimate, std::int64_t trials,
                      double target) {
  BandedEstimate out;
  out.estimate = estimate(trials);
  out.band = check_band(out.estimate, target);
  if (!out.band.within) {
    out.rerun = true;
    out.estimate = estimate(2 * trials);
    out.band = check_band(out.estimate, target);
  }
  return out;
}

nlohmann::json to_json(const Estimate& e) {
  return nlohmann::json{{"trials", e.trials}, {"hits", e.hits}, {"rate", e.rate()}, {"ci99", e.ci_halfwidth()}};
}

}  // namespace voteflow::simulator
