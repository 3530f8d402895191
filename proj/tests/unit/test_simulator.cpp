#include <doctest.h>

#include <random>

#include "voteflow/backends/embedder.hpp"
#include "voteflow/error.hpp"
#include "voteflow/judge/judge.hpp"
#include "voteflow/reliability/reliability.hpp"
#include "voteflow/simulator/simulator.hpp"

using namespace voteflow;
using namespace voteflow::simulator;

namespace {

TrialOptions opts(std::int64_t trials, std::uint64_t seed = 1, unsigned threads = 2) {
  return TrialOptions{trials, seed, threads};
}

}  // namespace

TEST_CASE("tally matches the judge on exact embeddings") {
  std::mt19937_64 rng(2024);
  backends::ExactEmbedder embedder;
  judge::DeterministicSelector selector;
  judge::JudgeParams params;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 13);
    const int k = 1 + static_cast<int>(rng() % 4);
    std::vector<int> truths(n);
    std::vector<std::string> texts(n);
    for (int i = 0; i < n; ++i) {
      truths[i] = (rng() % 3 == 0) ? 1 + static_cast<int>(rng() % k) : 0;
      texts[i] = truths[i] == 0 ? "CORRECT" : "WRONG" + std::to_string(truths[i]);
    }
    const Tally t = tally(truths);
    // requested = n_max forces a decision, so the winning cluster is visible.
    const auto d = judge::judge_round(texts, params.n_max, 1, "t", params, embedder, selector);
    REQUIRE(d.decided());
    CHECK(d.verdict().answer == (t.winner_truth == 0 ? "CORRECT" : "WRONG" + std::to_string(t.winner_truth)));
    CHECK(d.verdict().confidence == doctest::Approx(t.confidence()));
    CHECK(d.report.tied() == t.tied);
  }
}

TEST_CASE("tally defect rule") {
  const std::vector<int> majority{0, 0, 0, 1, 2};
  CHECK_FALSE(tally(majority).defect());
  const std::vector<int> plurality{0, 0, 1, 2, 3};
  CHECK_FALSE(tally(plurality).wrong());
  CHECK(tally(plurality).defect());
  const std::vector<int> wrong{1, 1, 1, 0, 0};
  CHECK(tally(wrong).wrong());
}

TEST_CASE("perfect agents never fail") {
  const auto r = simulate_consensus(5, 0.0, 9, opts(kMinTrials));
  CHECK(r.defects.hits == 0);
  CHECK(r.closed_form == 0.0);
  CHECK(check_band(r.defects, r.closed_form).within);
}

TEST_CASE("estimates are reproducible and thread-count independent") {
  const auto a = simulate_consensus(5, 0.2, 9, opts(20000, 5, 1));
  const auto b = simulate_consensus(5, 0.2, 9, opts(20000, 5, 3));
  const auto c = simulate_consensus(5, 0.2, 9, opts(20000, 6, 2));
  CHECK(a.defects.hits == b.defects.hits);
  CHECK(a.wrong_answers.hits == b.wrong_answers.hits);
  CHECK(a.defects.hits != c.defects.hits);
  CHECK_THROWS_AS((void)simulate_consensus(5, 0.2, 9, opts(100)), ValidationError);
}

TEST_CASE("consensus estimate sits in the band") {
  const auto r = simulate_consensus(5, 0.2, 9, opts(200000));
  CHECK(r.closed_form == doctest::Approx(reliability::consensus_error(5, 0.2)));
  const auto band = check_band(r.defects, r.closed_form);
  CHECK(band.within);
  CHECK(r.wrong_answers.hits <= r.defects.hits);
}

TEST_CASE("fully correlated agents fail like one agent") {
  const auto r = simulate_correlated(5, 0.1, 1.0, 9, opts(100000));
  CHECK(r.common_cause.hits == r.common_cause.trials);
  CHECK(r.closed_form == doctest::Approx(0.1));
  CHECK(check_band(r.defects, r.closed_form).within);
  const auto indep = simulate_correlated(5, 0.1, 0.0, 9, opts(100000));
  CHECK(indep.common_cause.hits == 0);
  CHECK(check_band(indep.defects, reliability::consensus_error(5, 0.1)).within);
}

TEST_CASE("workflow success over a chain") {
  const auto r = simulate_workflow(10, 5, 0.1, 9, opts(50000));
  CHECK(r.closed_form == doctest::Approx(std::pow(1.0 - reliability::consensus_error(5, 0.1), 10)));
  CHECK(check_band(r.successes, r.closed_form).within);
}

TEST_CASE("dynamic scaling dominates fixed n0") {
  DynamicParams p;
  p.p = 0.2;
  const auto r = simulate_dynamic(p, opts(50000));
  CHECK(r.dominance_violations == 0);
  CHECK(r.defects.hits <= r.fixed_defects.hits);
  CHECK(r.escalated.hits > 0);
  CHECK(r.mean_samples >= p.n0);
  CHECK(r.mean_samples <= p.n_max);
  CHECK(r.fixed_closed_form == doctest::Approx(reliability::consensus_error(5, 0.2)));

  // A binary answer space never ties or drops below 3 of 5.
  DynamicParams binary;
  binary.error_space = 1;
  binary.p = 0.3;
  const auto b = simulate_dynamic(binary, opts(20000));
  CHECK(b.escalated.hits == 0);
  CHECK(b.mean_samples == 5.0);
  CHECK(b.defects.hits == b.fixed_defects.hits);
}

TEST_CASE("band checks") {
  CHECK(check_band(Estimate{10000, 100}, 0.01).within);
  CHECK_FALSE(check_band(Estimate{10000, 200}, 0.01).within);
  CHECK(check_band(Estimate{10000, 0}, 0.0).within);
  CHECK_FALSE(check_band(Estimate{10000, 1}, 0.0).within);
  const auto b = check_band(Estimate{10000, 130}, 0.01);
  CHECK(b.sigma == doctest::Approx(std::sqrt(0.01 * 0.99 / 10000)));
  CHECK(b.z == doctest::Approx(3.0151).epsilon(1e-3));

  int calls = 0;
  const auto rerun = banded(
      [&](std::int64_t trials) {
        ++calls;
        return calls == 1 ? Estimate{trials, trials / 2} : Estimate{trials, trials / 100};
      },
      10000, 0.01);
  CHECK(calls == 2);
  CHECK(rerun.rerun);
  CHECK(rerun.estimate.trials == 20000);
  CHECK(rerun.band.within);

  const auto j = to_json(Estimate{1000, 10});
  CHECK(j["rate"] == doctest::Approx(0.01));
  CHECK(Estimate{1000, 10}.ci_halfwidth() == doctest::Approx(kZ99 * std::sqrt(0.01 * 0.99 / 1000)));
}
