#include "voteflow/judge/clustering.hpp"

#include <algorithm>
#include <limits>

#include "voteflow/error.hpp"

namespace voteflow::judge {

std::vector<int> ClusterReport::sizes() const {
  std::vector<int> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) out.push_back(static_cast<int>(c.members.size()));
  std::sort(out.rbegin(), out.rend());
  return out;
}

bool ClusterReport::tied() const {
  const std::size_t best = winner_size();
  return std::count_if(clusters.begin(), clusters.end(),
                       [&](const Cluster& c) { return c.members.size() == best; }) > 1;
}

ClusterReport cluster_outputs(std::span<const backends::Vector> vectors, double tau) {
  if (vectors.empty()) throw ValidationError("cannot cluster an empty sample set");
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
  const std::size_t n = vectors.size();
  // Slack for similarities that equal tau up to rounding.
  const double merge_limit = (1.0 - tau) + 1e-12;

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::max(0.0, 1.0 - backends::cosine_similarity(vectors[i], vectors[j]));
      dist[i][j] = dist[j][i] = d;
    }
  }

  // Cluster k is identified by its lowest member, so slot order is member order.
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  std::vector<bool> active(n, true);

  for (;;) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_a = n;
    std::size_t best_b = n;
    for (std::size_t a = 0; a < n; ++a) {
      if (!active[a]) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (active[b] && dist[a][b] < best) {
          best = dist[a][b];
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_a == n || best > merge_limit) break;

    // Lance-Williams update for average linkage.
    const double wa = static_cast<double>(members[best_a].size());
    const double wb = static_cast<double>(members[best_b].size());
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == best_a || c == best_b) continue;
      const double merged = (wa * dist[best_a][c] + wb * dist[best_b][c]) / (wa + wb);
      dist[best_a][c] = dist[c][best_a] = merged;
    }
    auto& into = members[best_a];
    into.insert(into.end(), members[best_b].begin(), members[best_b].end());
    std::sort(into.begin(), into.end());
    members[best_b].clear();
    active[best_b] = false;
  }

  ClusterReport report;
  report.total = n;
  for (std::size_t k = 0; k < n; ++k) {
    if (!active[k]) continue;
    Cluster c;
    c.members = std::move(members[k]);
    std::size_t dim = 0;
    for (auto m : c.members) dim = std::max(dim, vectors[m].size());
    c.centroid.assign(dim, 0.0);
    for (auto m : c.members) {
      for (std::size_t d = 0; d < vectors[m].size(); ++d) c.centroid[d] += vectors[m][d];
    }
    backends::normalize(c.centroid);
    report.clusters.push_back(std::move(c));
  }
  for (std::size_t k = 1; k < report.clusters.size(); ++k) {
    if (report.clusters[k].members.size() > report.clusters[report.winner].members.size()) report.winner = k;
  }
  report.confidence = static_cast<double>(report.winner_size()) / static_cast<double>(n);
  return report;
}

void apply_confidence(ClusterReport& report, double theta) { report.contested = report.confidence < theta; }

}  // namespace voteflow::judge
