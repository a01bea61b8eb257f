#pragma once

#include <vector>

#include "glam/data.hpp"
#include "glam/graphs.hpp"
#include "glam/numerics.hpp"

namespace glam {

/// Two-layer network mapping every node to a distribution over the labeled
/// nodes. Column k of the output belongs to node `labeled[k]`.
struct AffinityModel {
  DenseMatrix w1;  // d x h_A
  DenseMatrix w2;  // h_A x l
  double input_dropout = 0.0;
  double hidden_dropout = 0.0;
  std::vector<Index> labeled;
};

/// Same-label targets among the labeled nodes, l x l. Row k is uniform over
/// the other labeled nodes of k's class; rows of singleton classes are zero
/// and inactive.
struct AffinityTargets {
  DenseMatrix matrix;
  std::vector<char> active;
  std::vector<Index> nodes;

  Index size() const { return matrix.rows(); }
  Index num_active() const;

  /// n x l matrix holding row k at node `nodes[k]` and zeros elsewhere.
  DenseMatrix expanded(Index num_nodes) const;
};

AffinityTargets build_affinity_targets(const DatasetSplit& split, const std::vector<int>& labels);

/// Intermediates of one affinity forward pass, kept for the backward pass.
struct AffinityCache {
  FeatureMatrix input;    // after input dropout
  DenseMatrix pre_hidden; // X W1
  DenseMatrix hidden;     // relu(X W1) after hidden dropout
  DenseMatrix hidden_mask;
  DenseMatrix probs;      // Z^A
};

/// Z^A = softmax(relu(X W1) W2) with each labeled node's own column masked
/// out. Requires at least two labeled nodes.
DenseMatrix affinity_forward(const AffinityModel& model, const FeatureMatrix& x, bool training, Rng& rng,
                             AffinityCache* cache = nullptr);

/// Sum of cross-entropies of the active labeled rows of Z^A against the targets.
double affinity_loss(const DenseMatrix& z_a, const AffinityTargets& targets);

/// Gradient of `scale * affinity_loss` with respect to the pre-softmax scores.
DenseMatrix affinity_loss_backward(const DenseMatrix& z_a, const AffinityTargets& targets, double scale);

enum class SampleMode { sample, argmax };

/// One draw of the affinity graph.
struct AffinitySample {
  std::vector<Index> choice;  // chosen column per node
  DenseMatrix noise;          // Gumbel noise, n x l; empty in argmax mode
  DenseMatrix weights;        // n x l selection matrix P (one-hot rows here)
  double temperature = 1.0;
  SparseGraph graph;
};

/// Each node picks one labeled node, by argmax of Z^A or of ln Z^A + Gumbel
/// noise (ties to the lowest column), and is joined to it in both directions.
/// `frozen_noise`, when given, replaces the fresh Gumbel draws.
AffinitySample sample_affinity_graph(const DenseMatrix& z_a, const std::vector<Index>& labeled, SampleMode mode,
                                     double temperature, Rng& rng, bool clip = false,
                                     const DenseMatrix* frozen_noise = nullptr);

/// Standard Gumbel matrix of the given shape.
DenseMatrix draw_gumbel(Index rows, Index cols, Rng& rng);

/// Gumbel-softmax relaxation softmax((ln Z^A + noise) / temperature).
DenseMatrix soft_selection(const DenseMatrix& z_a, const DenseMatrix& noise, double temperature);

/// G_A from a selection matrix P: entry (i, labeled[j]) and (labeled[j], i)
/// each receive P(i, j); coincident contributions add. With `clip` every
/// weight is capped at 1.
SparseGraph affinity_graph_from_weights(const DenseMatrix& weights, const std::vector<Index>& labeled,
                                        bool clip = false);

/// Below this temperature the soft relaxation is numerically one-hot and its
/// Jacobian vanishes, so the straight-through rule takes over.
inline constexpr double kStraightThroughTemperature = 0.05;

/// Backward of the Gumbel-softmax sample with respect to its logits ln Z^A.
/// For temperature >= kStraightThroughTemperature this is the exact Jacobian
/// of the soft sample at the cached noise; below it the upstream gradient
/// passes through on the chosen coordinate only.
DenseMatrix straight_through_grad(const DenseMatrix& upstream, const DenseMatrix& z_a, const AffinitySample& sample);

/// Exact Jacobian-vector product of soft_selection with respect to ln Z^A.
DenseMatrix soft_selection_backward(const DenseMatrix& upstream, const DenseMatrix& soft, double temperature);

}  // namespace glam
