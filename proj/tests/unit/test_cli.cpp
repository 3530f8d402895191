#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "voteflow/cli/commands.hpp"
#include "voteflow/reliability/reliability.hpp"

using namespace voteflow;
using namespace voteflow::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = VOTEFLOW_FIXTURES;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return Result{code, out.str(), err.str()};
}

std::vector<json> jsonl(const std::string& text) {
  std::vector<json> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) rows.push_back(json::parse(line));
  }
  return rows;
}

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("voteflow_test_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  [[nodiscard]] std::string path(const std::string& file) const { return (dir / file).string(); }
  void write(const std::string& file, const std::string& content) const { std::ofstream(dir / file) << content; }
};

}  // namespace

TEST_CASE("calc values equal the library") {
  const auto r = invoke({"calc", "--n", "3,5,7", "--p", "0.05,0.1", "--format", "jsonl"});
  REQUIRE(r.code == kExitOk);
  const auto rows = jsonl(r.out);
  REQUIRE(rows.size() == 6);
  for (const auto& row : rows) {
    const int n = row["n"];
    const double p = row["p"];
    CHECK(row["p_sys"].get<double>() == reliability::consensus_error(n, p));
    CHECK(row["dpmo"].get<double>() == reliability::dpmo(reliability::consensus_error(n, p)));
  }
}

TEST_CASE("calc examples") {
  const auto single = jsonl(invoke({"calc", "--n", "1", "--p", "0.05", "--format", "jsonl"}).out);
  REQUIRE(single.size() == 1);
  CHECK(single[0]["dpmo"].get<double>() == doctest::Approx(50000.0));
  CHECK(single[0]["n_star"] == 13);

  const auto target = jsonl(invoke({"calc", "--p", "0.05", "--target", "3.4e-6", "--format", "jsonl"}).out);
  REQUIRE(target.size() == 1);
  CHECK(target[0]["n_star"] == 13);

  const auto corr = jsonl(invoke({"calc", "--n", "11", "--p", "0.05", "--rho", "0.5", "--format", "jsonl"}).out);
  REQUIRE(corr.size() == 1);
  CHECK(corr[0]["p_corr"].get<double>() == doctest::Approx(0.0250029).epsilon(1e-5));

  const auto mmax = jsonl(invoke({"calc", "--n", "5", "--p", "0.05", "--reliability", "0.9999", "--format", "jsonl"}).out);
  REQUIRE(mmax.size() == 1);
  CHECK(mmax[0]["m_max"] == reliability::max_workflow_length(0.9999, reliability::consensus_error(5, 0.05)));
}

TEST_CASE("calc grid and report") {
  const auto grid = invoke({"calc", "--grid", "--format", "csv"});
  REQUIRE(grid.code == kExitOk);
  CHECK(grid.out.rfind("n,p,", 0) == 0);
  CHECK(grid.out.find("plotted") != std::string::npos);
  const auto report = invoke({"calc", "--report", "--format", "csv"});
  REQUIRE(report.code == kExitOk);
  CHECK(report.out.find("DISCREPANT") != std::string::npos);
  CHECK(report.out.find("figure,source,published,computed,flag") != std::string::npos);
}

TEST_CASE("simulate with small trial counts") {
  const auto r = invoke({"simulate", "consensus", "--n", "5", "--p", "0.2", "--trials", "2e4", "--format", "jsonl"});
  CHECK((r.code == kExitOk || r.code == kExitBandMiss));
  const auto rows = jsonl(r.out);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0]["trials"].get<std::int64_t>() >= 20000);
  CHECK(rows[0].contains("within_3sigma"));
  CHECK(rows[0]["expected"].get<double>() == doctest::Approx(reliability::consensus_error(5, 0.2)));
  CHECK(invoke({"simulate", "consensus", "--trials", "100"}).code == kExitValidation);
}

TEST_CASE("bad arguments are validation errors") {
  CHECK(invoke({}).code == kExitValidation);
  CHECK(invoke({"calc", "--n", "0", "--p", "0.05"}).code == kExitValidation);
  CHECK(invoke({"calc", "--n", "5", "--p", "1.5"}).code == kExitValidation);
  CHECK(invoke({"run", "--workflow", kFixtures + "/missing.json", "--config", kFixtures + "/single_task.sim.json"}).code ==
        kExitValidation);
}

TEST_CASE("run, resume and audit") {
  Scratch s("run");
  const auto log = s.path("single.jsonl");
  const auto r = invoke({"run", "--workflow", kFixtures + "/single_task.json", "--config",
                      kFixtures + "/single_task.sim.json", "--log", log});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("final answer [answer]: Paris") != std::string::npos);

  // A second run into the same log is refused; resume replays it.
  CHECK(invoke({"run", "--workflow", kFixtures + "/single_task.json", "--config", kFixtures + "/single_task.sim.json",
             "--log", log})
            .code == kExitValidation);
  const auto again = invoke({"resume", "--log", log});
  REQUIRE(again.code == kExitOk);
  CHECK(again.out.find("final answer [answer]: Paris") != std::string::npos);
  CHECK(invoke({"resume", "--log", log, "--seed", "999"}).code == kExitValidation);

  const auto audit = invoke({"audit", "--log", log});
  REQUIRE(audit.code == kExitOk);
  CHECK(audit.out.find("verdict: Paris") != std::string::npos);
  CHECK(audit.out.find("run completed: Paris") != std::string::npos);
  CHECK(invoke({"audit", "--log", log, "--out", s.path("audit.txt")}).code == kExitOk);
  CHECK(fs::file_size(s.path("audit.txt")) == audit.out.size());
}

TEST_CASE("resume of an empty log starts the run") {
  Scratch s("empty");
  const auto log = s.path("fresh.jsonl");
  CHECK(invoke({"resume", "--log", log}).code == kExitValidation);
  const auto r = invoke({"resume", "--log", log, "--workflow", kFixtures + "/single_task.json", "--config",
                      kFixtures + "/single_task.sim.json"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("Paris") != std::string::npos);
}

TEST_CASE("scripted invoice workflow") {
  Scratch s("invoice");
  const auto log = s.path("invoice.jsonl");
  const auto r = invoke({"run", "--workflow", kFixtures + "/invoice_refund.json", "--config",
                      kFixtures + "/invoice_refund.scripted.json", "--log", log});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("final answer [5]: recorded: ") != std::string::npos);
  CHECK(r.out.find("$234.18") != std::string::npos);
  const auto audit = invoke({"audit", "--log", log});
  CHECK(audit.out.find("No discrepancy") != std::string::npos);
  CHECK(audit.out.find("tool refund") != std::string::npos);
}

TEST_CASE("halt and resume from the command line") {
  Scratch s("halt");
  const auto log = s.path("halt.jsonl");
  const auto halted = invoke({"run", "--workflow", kFixtures + "/invoice_refund.json", "--config",
                           kFixtures + "/invoice_refund.sim.json", "--log", log, "--halt-after", "3"});
  CHECK(halted.code == kExitHalted);
  CHECK(halted.out.find("halted after 3 task completions") != std::string::npos);
  const auto resumed = invoke({"resume", "--log", log});
  REQUIRE(resumed.code == kExitOk);
  const auto straight = invoke({"run", "--workflow", kFixtures + "/invoice_refund.json", "--config",
                             kFixtures + "/invoice_refund.sim.json", "--log", s.path("straight.jsonl")});
  REQUIRE(straight.code == kExitOk);
  const auto final_line = [](const std::string& out) { return out.substr(out.find("final answer")); };
  CHECK(final_line(resumed.out) == final_line(straight.out));
}

TEST_CASE("execution and storage failures") {
  Scratch s("fail");
  s.write("mute.json", R"({"seed": 1, "backends": [{"name": "mute", "kind": "scripted", "responses": {}}]})");
  const auto r = invoke({"run", "--workflow", kFixtures + "/single_task.json", "--config", s.path("mute.json"), "--log",
                      s.path("mute.jsonl")});
  CHECK(r.code == kExitExecution);
  CHECK(invoke({"audit", "--log", s.path("missing.jsonl")}).code == kExitStorage);

  s.write("corrupt.jsonl", "garbage\n{\"seq\":1}\n");
  CHECK(invoke({"resume", "--log", s.path("corrupt.jsonl")}).code == kExitStorage);
}

TEST_CASE("prompt rendering") {
  const auto d = invoke({"prompt", "decomposition", "--task", "Refund the overcharge", "--tools", "refund,lookup"});
  REQUIRE(d.code == kExitOk);
  CHECK(d.out.find("Refund the overcharge") != std::string::npos);
  CHECK(d.out.find("refund, lookup") != std::string::npos);
  const auto sel = invoke({"prompt", "selection", "--task", "Sum", "--candidate", "4", "--candidate", "four"});
  REQUIRE(sel.code == kExitOk);
  CHECK(sel.out.find("[Output 1]: 4\n[Output 2]: four\n") != std::string::npos);
}
