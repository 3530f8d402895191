#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voteflow/backends/agent.hpp"
#include "voteflow/backends/embedder.hpp"

namespace voteflow::backends {

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};

  /// Delay before retry number `retry` (1-based).
  [[nodiscard]] std::chrono::milliseconds backoff(int retry) const;
};

/// Where and how to reach a completion or embedding service. The credential
/// is read from the environment variable named by api_key_env at call time.
struct HttpEndpoint {
  std::string url;  // scheme://host[:port]/path
  std::string model;
  std::string api_key_env;  // empty: no Authorization header
  std::chrono::milliseconds deadline{60000};
  RetryPolicy retry;
};

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string path;
};

/// Throws ValidationError for anything other than http(s)://host[:port][/path].
[[nodiscard]] ParsedUrl parse_url(const std::string& url);

struct HttpReply {
  nlohmann::json body;
  int retries = 0;
  std::chrono::duration<double> elapsed{0};
};

/// POST a JSON body, retrying transport failures and 5xx/408/429 with
/// exponential backoff inside the endpoint deadline. A 2xx is final: a bad
/// body raises malformed without retrying.
[[nodiscard]] HttpReply post_json(const HttpEndpoint& endpoint, const nlohmann::json& body);

/// Messages-style chat completion client.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  struct Completion {
    std::string text;
    int retries = 0;
    std::chrono::duration<double> latency{0};
  };
  virtual Completion complete(const std::vector<ChatMessage>& messages, double temperature) = 0;
};

class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(HttpEndpoint endpoint);
  Completion complete(const std::vector<ChatMessage>& messages, double temperature) override;
  [[nodiscard]] const HttpEndpoint& endpoint() const noexcept { return endpoint_; }

 private:
  HttpEndpoint endpoint_;
};

/// Agent that asks a chat service for each sample.
class HttpChatAgent final : public Agent {
 public:
  HttpChatAgent(std::string name, std::shared_ptr<ChatClient> client, std::string family = {});

  [[nodiscard]] const std::string& name() const noexcept override { return name_; }
  [[nodiscard]] std::string family() const override { return family_.empty() ? name_ : family_; }
  AgentOutput execute(const SampleRequest& request) override;

 private:
  std::string name_;
  std::shared_ptr<ChatClient> client_;
  std::string family_;
};

/// Batch embedding client: one request per batch, vectors normalized on
/// receipt, order restored from the response indices.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(HttpEndpoint endpoint);
  std::vector<Vector> embed(std::span<const std::string> texts) override;

 private:
  HttpEndpoint endpoint_;
};

}  // namespace voteflow::backends
