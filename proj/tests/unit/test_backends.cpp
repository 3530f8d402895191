#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <httplib.h>

#include "voteflow/backends/agent.hpp"
#include "voteflow/backends/embedder.hpp"
#include "voteflow/backends/http_client.hpp"
#include "voteflow/backends/scripted_agent.hpp"
#include "voteflow/backends/sim_agent.hpp"
#include "voteflow/error.hpp"
#include "voteflow/hash.hpp"

using namespace voteflow;
using namespace voteflow::backends;
using nlohmann::json;

namespace {

graph::TaskSpec make_task(std::string id) {
  graph::TaskSpec t;
  t.id = std::move(id);
  t.description = "Compute the total";
  return t;
}

// Loopback HTTP server for fault injection.
class FakeServer {
 public:
  FakeServer() {
    server_.set_keep_alive_max_count(1);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpEndpoint endpoint(const std::string& url) {
  HttpEndpoint e;
  e.url = url;
  e.model = "test-model";
  e.deadline = std::chrono::milliseconds(2000);
  e.retry.initial_backoff = std::chrono::milliseconds(5);
  e.retry.max_backoff = std::chrono::milliseconds(20);
  return e;
}

json completion(const std::string& text) { return json{{"choices", {{{"message", {{"content", text}}}}}}}; }

}  // namespace

TEST_CASE("sim_execute basics") {
  SimAgentModel m{0.0, 9, 0.0, "f"};
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto out = sim_execute("t", "CANON", m, s);
    CHECK(out.text == "CANON");
    CHECK(out.truth_tag->correct());
  }
  SimAgentModel always{1.0, 1, 0.0, "f"};
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto out = sim_execute("t", "CANON", always, s);
    CHECK(out.text == "WRONG::t::1");
    CHECK(out.truth_tag->error_index == 1);
  }
  SimAgentModel some{0.3, 9, 0.0, "f"};
  CHECK(sim_execute("t", "C", some, 77).text == sim_execute("t", "C", some, 77).text);
  CHECK(sim_draw("t", some, 77) == *sim_execute("t", "C", some, 77).truth_tag);
  CHECK(wrong_answer_text("2a", 3) == "WRONG::2a::3");
}

TEST_CASE("sim error frequency is p within 3 sigma") {
  SimAgentModel m{0.05, 9, 0.0, "f"};
  const int trials = 1000000;
  int errors = 0;
  std::vector<int> by_index(10, 0);
  for (int s = 0; s < trials; ++s) {
    const auto tag = sim_draw("task", m, stable_hash(std::uint64_t{99}, static_cast<std::uint64_t>(s)));
    errors += !tag.correct();
    ++by_index[tag.error_index];
  }
  const double sigma = std::sqrt(0.05 * 0.95 / trials);
  CHECK(std::abs(static_cast<double>(errors) / trials - 0.05) <= 3 * sigma);
  // Wrong answers are uniform over the K = 9 alternatives.
  for (int j = 1; j <= 9; ++j) {
    const double expected = errors / 9.0;
    CHECK(std::abs(by_index[j] - expected) <= 4 * std::sqrt(expected));
  }
}

TEST_CASE("common-cause draws") {
  SimAgentModel none{0.2, 9, 0.0, "f"};
  SimAgentModel all{0.2, 9, 1.0, "f"};
  SimAgentModel half{0.2, 9, 0.5, "f"};
  int present = 0;
  const int trials = 100000;
  for (int s = 0; s < trials; ++s) {
    CHECK_FALSE(draw_common_cause("t", "C", none, s));
    CHECK(draw_common_cause("t", "C", all, s));
    present += draw_common_cause("t", "C", half, s).has_value();
  }
  CHECK(std::abs(present / static_cast<double>(trials) - 0.5) <= 3 * std::sqrt(0.25 / trials));
  const auto shared = draw_common_cause("t", "C", all, 5);
  const auto out = sim_execute("t", "C", all, 123, &*shared);
  CHECK(out.text == shared->text);
}

TEST_CASE("sim agent needs a canonical answer") {
  auto truth = std::make_shared<GroundTruth>();
  truth->set("known", "yes");
  SimAgent agent("a", SimAgentModel{0.0, 9, 0.0, "fam"}, truth);
  CHECK(agent.family() == "fam");
  const auto t = make_task("known");
  AgentConfig cfg;
  cfg.seed = 3;
  const auto out = agent.execute(SampleRequest{t, cfg, {}, 0, 0, nullptr});
  CHECK(out.text == "yes");
  CHECK(out.backend == "a");
  const auto unknown = make_task("unknown");
  CHECK_THROWS_AS(agent.execute(SampleRequest{unknown, cfg, {}, 0, 0, nullptr}), ValidationError);
}

TEST_CASE("scripted agent replays responses by sample index") {
  ScriptedAgent agent("s", {{"t", {"x", "y"}}}, std::string("fallback"));
  const auto t = make_task("t");
  const auto other = make_task("other");
  AgentConfig cfg;
  CHECK(agent.execute(SampleRequest{t, cfg, {}, 0, 0, nullptr}).text == "x");
  CHECK(agent.execute(SampleRequest{t, cfg, {}, 1, 0, nullptr}).text == "y");
  CHECK(agent.execute(SampleRequest{t, cfg, {}, 2, 1, nullptr}).text == "x");
  CHECK(agent.execute(SampleRequest{other, cfg, {}, 0, 0, nullptr}).text == "fallback");
  ScriptedAgent strict("s", {{"t", {"x"}}});
  CHECK_THROWS(strict.execute(SampleRequest{other, cfg, {}, 0, 0, nullptr}));
}

TEST_CASE("agent config and prompt assembly") {
  auto t = make_task("3");
  t.output_schema = json{{"overcharge", "string"}};
  graph::SamplingConfig s;
  const auto cfg = generate_agent_config(t, s);
  CHECK(cfg.temperature == 0.7);
  CHECK(cfg.goal == t.description);
  CHECK(cfg.instructions.find("overcharge") != std::string::npos);
  const std::vector<graph::ContextInput> ctx{{"2a", "$4,734.18"}, {"2b", "$4,500.00"}};
  const auto msgs = assemble_prompt(t, cfg, ctx);
  REQUIRE(msgs.size() == 2);
  CHECK(msgs[0].role == "system");
  CHECK(msgs[1].content == "Task: Compute the total\n\nVerified inputs:\n[2a]: $4,734.18\n[2b]: $4,500.00");

  auto tool = make_task("5");
  tool.action_type = graph::ActionType::tool;
  tool.tools = {"refund"};
  const auto tcfg = generate_agent_config(tool, s);
  CHECK(tcfg.tools == std::vector<std::string>{"refund"});
  CHECK(tcfg.instructions.find("arguments only") != std::string::npos);
}

TEST_CASE("mock embeddings") {
  const auto a = mock_embed("alpha beta gamma");
  CHECK(cosine_similarity(a, mock_embed("alpha beta gamma")) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, mock_embed("Alpha, BETA gamma!")) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, mock_embed("alpha beta delta")) > cosine_similarity(a, mock_embed("x y z")));
  const auto empty = mock_embed("");
  CHECK(empty.size() == kMockDimension);
  CHECK(empty[kMockDimension - 1] == 1.0);
  CHECK(cosine_similarity(empty, mock_embed("   ")) == doctest::Approx(1.0));
  double norm = 0;
  for (double x : a) norm += x * x;
  CHECK(norm == doctest::Approx(1.0));
}

TEST_CASE("exact and scripted embedders") {
  ExactEmbedder exact;
  const std::vector<std::string> texts{"A", "B", "A", "C"};
  const auto v = exact.embed(texts);
  CHECK(cosine_similarity(v[0], v[2]) == 1.0);
  CHECK(cosine_similarity(v[0], v[1]) == 0.0);
  CHECK(cosine_similarity(v[1], v[3]) == 0.0);

  ScriptedEmbedder scripted({{"$5M", {1.0, 0.05}}, {"5 million", {2.0, 0.2}}});
  const std::vector<std::string> more{"$5M", "5 million", "unknown words"};
  const auto w = scripted.embed(more);
  CHECK(cosine_similarity(w[0], w[1]) > 0.99);
  CHECK(w[2] == mock_embed("unknown words"));
  CHECK_THROWS_AS(ScriptedEmbedder({{"zero", {0.0, 0.0}}}), ValidationError);
}

TEST_CASE("url parsing") {
  CHECK(parse_url("http://localhost:8080/v1/chat").origin == "http://localhost:8080");
  CHECK(parse_url("http://localhost:8080/v1/chat").path == "/v1/chat");
  CHECK(parse_url("https://api.example.com").origin == "https://api.example.com:443");
  CHECK(parse_url("https://api.example.com").path == "/");
  CHECK_THROWS_AS((void)parse_url("ftp://x"), ValidationError);
}

TEST_CASE("retry backoff schedule") {
  RetryPolicy p;
  CHECK(p.backoff(1).count() == 200);
  CHECK(p.backoff(2).count() == 400);
  CHECK(p.backoff(10).count() == 5000);
}

TEST_CASE("chat completion over loopback") {
  FakeServer fake;
  std::atomic<int> hits{0};
  std::string seen_auth;
  json seen_body;
  fake.server().Post("/ok", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    seen_auth = req.get_header_value("Authorization");
    seen_body = json::parse(req.body);
    res.set_content(completion("OK").dump(), "application/json");
  });
  ::setenv("VOTEFLOW_TEST_KEY", "sekrit", 1);
  auto ep = endpoint(fake.url("/ok"));
  ep.api_key_env = "VOTEFLOW_TEST_KEY";
  auto client = std::make_shared<HttpChatClient>(ep);
  HttpChatAgent agent("chat", client);
  const auto t = make_task("t");
  AgentConfig cfg;
  cfg.temperature = 0.7;
  cfg.seed = 9;
  const auto out = agent.execute(SampleRequest{t, cfg, {}, 0, 0, nullptr});
  CHECK(out.text == "OK");
  CHECK(out.retries == 0);
  CHECK(out.backend == "chat");
  CHECK(out.latency.count() > 0.0);
  CHECK(hits == 1);
  CHECK(seen_auth == "Bearer sekrit");
  CHECK(seen_body["model"] == "test-model");
  CHECK(seen_body["temperature"] == 0.7);
  CHECK(seen_body["messages"].size() == 2);

  ep.api_key_env = "VOTEFLOW_TEST_KEY_UNSET";
  ::unsetenv("VOTEFLOW_TEST_KEY_UNSET");
  HttpChatClient no_key(ep);
  try {
    (void)no_key.complete({{"user", "hi"}}, 0.0);
    FAIL("expected auth failure");
  } catch (const BackendError& e) {
    CHECK(e.failure() == BackendFailure::auth);
    CHECK_FALSE(e.retryable());
  }
  CHECK(hits == 1);
}

TEST_CASE("server errors are retried, then succeed") {
  FakeServer fake;
  std::atomic<int> hits{0};
  fake.server().Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
    if (++hits <= 2) {
      res.status = 500;
      return;
    }
    res.set_content(completion("recovered").dump(), "application/json");
  });
  HttpChatClient client(endpoint(fake.url("/flaky")));
  const auto c = client.complete({{"user", "hi"}}, 0.7);
  CHECK(c.text == "recovered");
  CHECK(c.retries == 2);
  CHECK(hits == 3);
}

TEST_CASE("failure classification") {
  FakeServer fake;
  std::atomic<int> hits{0};
  fake.server().Post("/401", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  fake.server().Post("/400", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
  });
  fake.server().Post("/garbage", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content("<html>not json", "text/html");
  });
  fake.server().Post("/nocontent", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content(R"({"choices": []})", "application/json");
  });
  fake.server().Post("/always500", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  fake.server().Post("/slow", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    res.set_content(completion("late").dump(), "application/json");
  });

  auto expect = [&](const std::string& path, BackendFailure kind, int expected_hits, auto&& tweak) {
    hits = 0;
    auto ep = endpoint(fake.url(path));
    tweak(ep);
    HttpChatClient client(ep);
    try {
      (void)client.complete({{"user", "hi"}}, 0.0);
      FAIL("expected a failure from " << path);
    } catch (const BackendError& e) {
      CHECK(e.failure() == kind);
      if (expected_hits >= 0) CHECK(hits == expected_hits);
      return e.elapsed();
    }
    return std::chrono::duration<double>{0};
  };
  auto none = [](HttpEndpoint&) {};
  expect("/401", BackendFailure::auth, 1, none);
  expect("/400", BackendFailure::rejected, 1, none);
  expect("/garbage", BackendFailure::malformed, 1, none);  // never retried after a 2xx
  expect("/nocontent", BackendFailure::malformed, 1, none);
  expect("/always500", BackendFailure::server, 4, none);  // 1 + max_retries
  const auto elapsed = expect("/slow", BackendFailure::timeout, -1, [](HttpEndpoint& ep) {
    ep.deadline = std::chrono::milliseconds(200);
  });
  CHECK(elapsed.count() >= 0.2);
  CHECK(elapsed.count() < 0.6);
}

TEST_CASE("transport failures are retried") {
  // Bind an ephemeral port without listening, then release it.
  int port = 0;
  {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    socklen_t len = sizeof addr;
    REQUIRE(::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
    port = ntohs(addr.sin_port);
    ::close(fd);
  }
  auto ep = endpoint("http://127.0.0.1:" + std::to_string(port) + "/x");
  ep.retry.max_retries = 2;
  HttpChatClient client(ep);
  try {
    (void)client.complete({{"user", "hi"}}, 0.0);
    FAIL("expected transport failure");
  } catch (const BackendError& e) {
    CHECK(e.failure() == BackendFailure::transport);
    CHECK(e.retryable());
    CHECK(e.attempts() == 3);
  }
}

TEST_CASE("batch embeddings keep input order") {
  FakeServer fake;
  std::atomic<int> hits{0};
  fake.server().Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const json body = json::parse(req.body);
    json data = json::array();
    const auto& input = body["input"];
    // Reply in reverse order with explicit indices.
    for (std::size_t i = input.size(); i-- > 0;) {
      data.push_back({{"index", i}, {"embedding", {static_cast<double>(i + 1), 0.0, 3.0}}});
    }
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });
  fake.server().Post("/partial", [&](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    json data = json::array();
    for (std::size_t i = 0; i + 1 < body["input"].size(); ++i) data.push_back({{"index", i}, {"embedding", {1.0}}});
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });
  HttpEmbedder embedder(endpoint(fake.url("/embed")));
  const std::vector<std::string> texts{"a", "b", "c", "d", "e"};
  const auto v = embedder.embed(texts);
  REQUIRE(v.size() == 5);
  CHECK(hits == 1);
  for (std::size_t i = 0; i < 5; ++i) {
    Vector expected{static_cast<double>(i + 1), 0.0, 3.0};
    normalize(expected);
    CHECK(v[i] == expected);
  }
  HttpEmbedder partial(endpoint(fake.url("/partial")));
  try {
    (void)partial.embed(texts);
    FAIL("expected malformed batch");
  } catch (const BackendError& e) {
    CHECK(e.failure() == BackendFailure::malformed);
  }
}
