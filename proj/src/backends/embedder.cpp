#include "voteflow/backends/embedder.hpp"

#include <cctype>
#include <cmath>
#include <unordered_map>

#include "voteflow/error.hpp"
#include "voteflow/hash.hpp"

namespace voteflow::backends {

void normalize(Vector& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return;
  for (double& x : v) x /= norm;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  const std::size_t common = std::min(a.size(), b.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < common; ++i) dot += a[i] * b[i];
  double na = 0.0;
  double nb = 0.0;
  for (double x : a) na += x * x;
  for (double x : b) nb += x * x;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Vector mock_embed(std::string_view text) {
  constexpr std::size_t kTokenAxes = kMockDimension - 1;
  Vector v(kMockDimension, 0.0);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = stable_hash(token);
    v[h % kTokenAxes] += ((h >> 63) != 0U) ? -1.0 : 1.0;
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '$' || c == '.' || c == '%') {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  normalize(v);
  bool zero = true;
  for (double x : v) zero = zero && x == 0.0;
  if (zero) v[kMockDimension - 1] = 1.0;
  return v;
}

std::vector<Vector> MockEmbedder::embed(std::span<const std::string> texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(mock_embed(t));
  return out;
}

std::vector<Vector> ExactEmbedder::embed(std::span<const std::string> texts) {
  std::unordered_map<std::string_view, std::size_t> axis;
  std::vector<std::size_t> assignment;
  assignment.reserve(texts.size());
  for (const auto& t : texts) assignment.push_back(axis.try_emplace(t, axis.size()).first->second);
  std::vector<Vector> out(texts.size(), Vector(axis.size(), 0.0));
  for (std::size_t i = 0; i < texts.size(); ++i) out[i][assignment[i]] = 1.0;
  return out;
}

ScriptedEmbedder::ScriptedEmbedder(std::map<std::string, Vector, std::less<>> table) : table_(std::move(table)) {
  for (auto& [text, v] : table_) {
    normalize(v);
    bool zero = true;
    for (double x : v) zero = zero && x == 0.0;
    if (zero) throw ValidationError("scripted embedding for '" + text + "' is the zero vector");
  }
}

std::vector<Vector> ScriptedEmbedder::embed(std::span<const std::string> texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto it = table_.find(t);
    out.push_back(it != table_.end() ? it->second : mock_embed(t));
  }
  return out;
}

}  // namespace voteflow::backends
