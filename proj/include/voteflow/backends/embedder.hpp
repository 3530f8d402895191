#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace voteflow::backends {

using Vector = std::vector<double>;

/// Dimension of mock_embed vectors. The last axis is reserved for text with
/// no tokens.
inline constexpr std::size_t kMockDimension = 64;

/// Turns answer texts into unit vectors for the judge. Implementations must
/// be safe to call concurrently.
class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One unit vector per input, same order.
  virtual std::vector<Vector> embed(std::span<const std::string> texts) = 0;
};

/// Scales to unit length. A zero vector is returned unchanged.
void normalize(Vector& v);

/// Cosine similarity; vectors of different length are zero-padded.
[[nodiscard]] double cosine_similarity(const Vector& a, const Vector& b);

/// Signed token-hash bag of words, L2-normalized.
[[nodiscard]] Vector mock_embed(std::string_view text);

class MockEmbedder final : public Embedder {
 public:
  std::vector<Vector> embed(std::span<const std::string> texts) override;
};

/// One-hot vector per distinct text within a batch, so identical texts and
/// only identical texts have similarity 1.
class ExactEmbedder final : public Embedder {
 public:
  std::vector<Vector> embed(std::span<const std::string> texts) override;
};

/// Fixed vectors for known texts, mock_embed for everything else.
class ScriptedEmbedder final : public Embedder {
 public:
  explicit ScriptedEmbedder(std::map<std::string, Vector, std::less<>> table);
  std::vector<Vector> embed(std::span<const std::string> texts) override;

 private:
  std::map<std::string, Vector, std::less<>> table_;
};

}  // namespace voteflow::backends
