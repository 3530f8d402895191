#include "voteflow/backends/http_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <regex>
#include <thread>

#include <httplib.h>

namespace voteflow::backends {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::chrono::milliseconds RetryPolicy::backoff(int retry) const {
  const double scaled = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, std::max(0, retry - 1));
  const double capped = std::min(scaled, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

ParsedUrl parse_url(const std::string& url) {
  static const std::regex pattern(R"(^(https?)://([^/:]+)(:(\d+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, pattern)) throw ValidationError("unsupported endpoint url '" + url + "'");
  const std::string scheme = m[1];
  const std::string port = m[4].matched ? m[4].str() : (scheme == "https" ? "443" : "80");
  return ParsedUrl{scheme + "://" + m[2].str() + ":" + port, m[5].matched ? m[5].str() : "/"};
}

namespace {

// One keep-alive client per origin per thread; httplib clients are not
// safe to share across threads.
httplib::Client& client_for(const std::string& origin) {
  thread_local std::map<std::string, std::unique_ptr<httplib::Client>> cache;
  auto& slot = cache[origin];
  if (!slot) {
    slot = std::make_unique<httplib::Client>(origin);
    slot->set_keep_alive(true);
  }
  return *slot;
}

void drop_client(const std::string& origin) {
  // A fresh connection is opened on the next attempt.
  client_for(origin).stop();
}

std::chrono::duration<double> since(Clock::time_point start) { return Clock::now() - start; }

}  // namespace

HttpReply post_json(const HttpEndpoint& endpoint, const json& body) {
  const ParsedUrl url = parse_url(endpoint.url);
  const auto start = Clock::now();
  const auto deadline = start + endpoint.deadline;

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw BackendError(BackendFailure::auth, "credential variable " + endpoint.api_key_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string payload = body.dump();

  for (int attempt = 1;; ++attempt) {
    const auto remaining = std::chrono::duration_cast<std::chrono::microseconds>(deadline - Clock::now());
    if (remaining.count() <= 0) {
      throw BackendError(BackendFailure::timeout, "deadline exceeded before attempt " + std::to_string(attempt),
                         since(start), attempt - 1);
    }
    httplib::Client& client = client_for(url.origin);
    client.set_connection_timeout(remaining);
    client.set_read_timeout(remaining);
    client.set_write_timeout(remaining);

    auto res = client.Post(url.path, headers, payload, "application/json");
    std::optional<BackendError> failure;
    if (!res) {
      drop_client(url.origin);
      if (Clock::now() >= deadline) {
        throw BackendError(BackendFailure::timeout, "no response within deadline", since(start), attempt);
      }
      failure.emplace(BackendFailure::transport, httplib::to_string(res.error()), since(start), attempt);
    } else if (res->status >= 200 && res->status < 300) {
      json parsed = json::parse(res->body, nullptr, false);
      if (parsed.is_discarded()) {
        throw BackendError(BackendFailure::malformed, "response body is not JSON", since(start), attempt);
      }
      return HttpReply{std::move(parsed), attempt - 1, since(start)};
    } else if (res->status == 401 || res->status == 403) {
      throw BackendError(BackendFailure::auth, "HTTP " + std::to_string(res->status), since(start), attempt);
    } else if (res->status >= 500 || res->status == 408 || res->status == 429) {
      failure.emplace(BackendFailure::server, "HTTP " + std::to_string(res->status), since(start), attempt);
    } else {
      throw BackendError(BackendFailure::rejected, "HTTP " + std::to_string(res->status) + ": " + res->body,
                         since(start), attempt);
    }

    if (attempt > endpoint.retry.max_retries) throw *failure;
    const auto pause = endpoint.retry.backoff(attempt);
    if (Clock::now() + pause >= deadline) {
      throw BackendError(BackendFailure::timeout, std::string("deadline exceeded while backing off after ") +
                                                      failure->what(),
                         since(start), attempt);
    }
    std::this_thread::sleep_for(pause);
  }
}

HttpChatClient::HttpChatClient(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) { (void)parse_url(endpoint_.url); }

ChatClient::Completion HttpChatClient::complete(const std::vector<ChatMessage>& messages, double temperature) {
  json body{{"model", endpoint_.model}, {"temperature", temperature}, {"messages", json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  HttpReply reply = post_json(endpoint_, body);
  const json* content = nullptr;
  if (reply.body.contains("choices") && reply.body["choices"].is_array() && !reply.body["choices"].empty()) {
    const json& first = reply.body["choices"][0];
    if (first.contains("message") && first["message"].contains("content")) content = &first["message"]["content"];
  }
  if (content == nullptr || !content->is_string()) {
    throw BackendError(BackendFailure::malformed, "completion has no choices[0].message.content", reply.elapsed,
                       reply.retries + 1);
  }
  return Completion{content->get<std::string>(), reply.retries, reply.elapsed};
}

HttpChatAgent::HttpChatAgent(std::string name, std::shared_ptr<ChatClient> client, std::string family)
    : name_(std::move(name)), client_(std::move(client)), family_(std::move(family)) {
  if (!client_) throw ValidationError("chat agent '" + name_ + "' has no client");
}

AgentOutput HttpChatAgent::execute(const SampleRequest& request) {
  const auto messages = assemble_prompt(request.task, request.config, request.context);
  auto completion = client_->complete(messages, request.config.temperature);
  AgentOutput out;
  out.text = std::move(completion.text);
  out.backend = name_;
  out.seed = request.config.seed;
  out.latency = completion.latency;
  out.retries = completion.retries;
  return out;
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) { (void)parse_url(endpoint_.url); }

std::vector<Vector> HttpEmbedder::embed(std::span<const std::string> texts) {
  if (texts.empty()) return {};
  json body{{"model", endpoint_.model}, {"input", json::array()}};
  for (const auto& t : texts) body["input"].push_back(t);
  HttpReply reply = post_json(endpoint_, body);

  auto malformed = [&](const std::string& why) {
    return BackendError(BackendFailure::malformed, "embedding batch: " + why, reply.elapsed, reply.retries + 1);
  };
  if (!reply.body.contains("data") || !reply.body["data"].is_array()) throw malformed("missing 'data' array");
  const json& data = reply.body["data"];
  if (data.size() != texts.size()) {
    throw malformed("expected " + std::to_string(texts.size()) + " vectors, got " + std::to_string(data.size()));
  }
  std::vector<Vector> out(texts.size());
  std::vector<bool> filled(texts.size(), false);
  try {
  for (std::size_t pos = 0; pos < data.size(); ++pos) {
    const json& item = data[pos];
    const std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : pos;
    if (index >= texts.size() || filled[index]) throw malformed("bad or duplicate index " + std::to_string(index));
    if (!item.contains("embedding") || !item["embedding"].is_array() || item["embedding"].empty()) {
      throw malformed("entry " + std::to_string(index) + " has no embedding");
    }
    Vector v = item["embedding"].get<Vector>();
    normalize(v);
    out[index] = std::move(v);
    filled[index] = true;
  }
  } catch (const json::exception& e) {
    throw malformed(e.what());
  }
  return out;
}

}  // namespace voteflow::backends
