#pragma once

#include <string>
#include <vector>

#include "glam/graphs.hpp"
#include "glam/model.hpp"
#include "glam/trainer.hpp"

namespace glam {

/// Attention matrices over the nodes; row i holds the weights node i puts on
/// its in-neighbors. A normalized Laplacian is a single-head view.
struct AttentionView {
  std::vector<SparseMatrix> heads;

  static AttentionView from_graph(const SparseGraph& g) { return AttentionView{{g.adjacency()}}; }
};

/// Percentage of nodes with any cross-label weight whose cross-label weight
/// strictly exceeds their same-label weight, averaged over heads. Self-loops
/// count as same-label unless excluded.
double bad_neighbor_ratio(const AttentionView& view, const std::vector<int>& labels, bool exclude_self_loops = false);

/// Percentage of attention mass on same-label entries, averaged over heads.
double weighted_homophily(const AttentionView& view, const std::vector<int>& labels, bool exclude_self_loops = false);

struct CurvePoint {
  double x = 0.0;
  double mean = 0.0;
  double std = 0.0;
  int n_seeds = 0;
  int failed = 0;
};

using Curve = std::vector<CurvePoint>;

/// `x,mean,std,n_seeds`
std::string curve_csv(const Curve& curve);

enum class NoiseMode { add_noise, remove_good };

/// Test accuracy of a plain GCN on the perfect kNN graph (k = hp.k) after
/// adding cross-label edges or removing same-label pairs, per fraction.
/// Uses ground-truth labels of every node; an analysis tool only.
Curve noise_experiment(Workspace& workspace, const GlamHyperParams& hp, const std::vector<double>& fractions,
                       NoiseMode mode, const std::vector<std::uint64_t>& seeds, int workers = 1);

/// GLAM test accuracy with the affinity weight w_A fixed at each value.
Curve affinity_weight_sweep(Workspace& workspace, const GlamHyperParams& hp, const std::vector<double>& weights,
                            const std::vector<std::uint64_t>& seeds, int workers = 1);

}  // namespace glam
