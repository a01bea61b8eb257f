#pragma once

#include <filesystem>
#include <vector>

#include "glam/data.hpp"
#include "glam/numerics.hpp"

namespace glam {

/// One stored adjacency entry: `src` sends information to `dest`.
struct Edge {
  Index dest;
  Index src;
  double weight;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Directed weighted graph over n nodes.
///
/// Orientation contract: entry (i, j) of the adjacency means source j feeds
/// destination i, so row i lists the in-neighbors of i. Weights are finite
/// and strictly positive; absent entries are zero.
class SparseGraph {
 public:
  SparseGraph() = default;
  explicit SparseGraph(Index n) : adjacency_(n, n) {}

  /// Validates indices, weights and uniqueness of (dest, src).
  static SparseGraph from_edges(Index n, const std::vector<Edge>& edges);

  /// Wraps an adjacency matrix; explicit zeros are dropped.
  static SparseGraph from_adjacency(SparseMatrix adjacency);

  Index num_nodes() const { return adjacency_.rows(); }
  Index num_entries() const { return adjacency_.nonZeros(); }
  const SparseMatrix& adjacency() const { return adjacency_; }

  /// Entries in (dest, src) order.
  std::vector<Edge> edges() const;

  double weight(Index dest, Index src) const { return adjacency_.coeff(dest, src); }
  bool has_edge(Index dest, Index src) const { return weight(dest, src) != 0.0; }

  bool is_symmetric() const;

 private:
  SparseMatrix adjacency_;
};

/// Exact cosine kNN graph. Each node receives unit-weight edges from its k
/// most similar other nodes (ties to the lower index), then the graph is
/// symmetrized by union. Zero-feature nodes neither pick nor get picked.
SparseGraph knn_graph(const FeatureMatrix& x, int k);

/// Removes every entry whose destination is a labeled node.
SparseGraph crop_incoming_to_labeled(const SparseGraph& g, const std::vector<Index>& labeled);

/// w_a * g_a + (1 - w_a) * g_ck, dropping entries whose weight is zero.
SparseGraph combine_graphs(const SparseGraph& g_a, const SparseGraph& g_ck, double w_a);

/// D_in^{-1/2} (G + I) D_in^{-1/2} with D_in the row sums of G + I.
SparseGraph indegree_laplacian(const SparseGraph& g);

/// Percentage of non-self-loop entries joining same-label nodes. 0 (with a
/// warning) for a graph without such entries.
double homophily(const SparseGraph& g, const std::vector<int>& labels);

/// Drops every entry whose endpoints carry different labels.
SparseGraph perfect_knn(const SparseGraph& g, const std::vector<int>& labels);

/// Adds ceil(fraction * pairs) symmetric unit edges between cross-label node
/// pairs that are not yet connected, where `pairs` counts the undirected
/// non-self-loop pairs of g. Sampling is without replacement.
SparseGraph add_noisy_edges(const SparseGraph& g, double fraction, const std::vector<int>& labels, Rng& rng);

/// Removes floor(fraction * good pairs) same-label undirected pairs (both
/// directions) chosen uniformly without replacement.
SparseGraph remove_good_edges(const SparseGraph& g, double fraction, const std::vector<int>& labels, Rng& rng);

/// `edges.tsv`: a `# n=<count>` header then `dest src weight` lines.
void write_edges(const SparseGraph& g, const std::filesystem::path& file);
SparseGraph read_edges(const std::filesystem::path& file);

}  // namespace glam
