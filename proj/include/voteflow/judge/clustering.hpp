#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "voteflow/backends/embedder.hpp"

namespace voteflow::judge {

struct Cluster {
  std::vector<std::size_t> members;  // ascending output indices
  backends::Vector centroid;         // unit-length mean of the members
};

struct ClusterReport {
  std::vector<Cluster> clusters;  // ordered by lowest member index
  std::size_t winner = 0;         // a largest cluster; ties go to the earliest
  double confidence = 0.0;        // winner size / total outputs
  bool contested = false;         // confidence < theta, set by apply_confidence
  std::size_t total = 0;

  [[nodiscard]] std::size_t winner_size() const { return clusters.at(winner).members.size(); }
  /// Cluster sizes, descending.
  [[nodiscard]] std::vector<int> sizes() const;
  /// Whether another cluster has the winner's size.
  [[nodiscard]] bool tied() const;
};

/// Average-linkage agglomerative clustering on cosine distance. Merges while
/// the closest pair of clusters is within 1 - tau; ties merge the pair with
/// the lowest member indices first. Fills confidence; contested stays false.
[[nodiscard]] ClusterReport cluster_outputs(std::span<const backends::Vector> vectors, double tau);

void apply_confidence(ClusterReport& report, double theta);

}  // namespace voteflow::judge
