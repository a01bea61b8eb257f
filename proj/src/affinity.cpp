#include "glam/affinity.hpp"

#include <cmath>
#include <limits>

namespace glam {

Index AffinityTargets::num_active() const {
  Index count = 0;
  for (char a : active) count += a != 0;
  return count;
}

DenseMatrix AffinityTargets::expanded(Index num_nodes) const {
  DenseMatrix out = DenseMatrix::Zero(num_nodes, size());
  for (Index k = 0; k < size(); ++k) out.row(nodes[k]) = matrix.row(k);
  return out;
}

AffinityTargets build_affinity_targets(const DatasetSplit& split, const std::vector<int>& labels) {
  if (split.train.empty()) throw ParameterError("affinity targets need a nonempty labeled set");
  const auto l = static_cast<Index>(split.train.size());
  AffinityTargets t;
  t.nodes = split.train;
  t.matrix = DenseMatrix::Zero(l, l);
  t.active.assign(l, 0);
  for (Index a = 0; a < l; ++a) {
    for (Index b = 0; b < l; ++b) {
      if (a != b && labels.at(t.nodes[a]) == labels.at(t.nodes[b])) t.matrix(a, b) = 1.0;
    }
    const double total = t.matrix.row(a).sum();
    if (total > 0.0) {
      t.matrix.row(a) /= total;
      t.active[a] = 1;
    }
  }
  return t;
}

DenseMatrix affinity_forward(const AffinityModel& model, const FeatureMatrix& x, bool training, Rng& rng,
                             AffinityCache* cache) {
  const auto l = static_cast<Index>(model.labeled.size());
  if (l < 2) throw ParameterError("the affinity model needs at least two labeled nodes");
  if (x.cols() != model.w1.rows()) {
    throw DimensionError("affinity_forward: features have " + std::to_string(x.cols()) + " columns, W1 has " +
                         std::to_string(model.w1.rows()) + " rows");
  }
  if (model.w1.cols() != model.w2.rows() || model.w2.cols() != l) {
    throw DimensionError("affinity_forward: W1/W2/labeled shapes do not chain");
  }

  const bool drop_input = training && model.input_dropout > 0.0;
  FeatureMatrix dropped;
  if (drop_input) dropped = x.dropped(model.input_dropout, rng);
  const FeatureMatrix& input = drop_input ? dropped : x;

  DenseMatrix pre = input.times(model.w1);
  DenseMatrix hidden = relu(pre);
  DenseMatrix mask;
  if (training && model.hidden_dropout > 0.0) {
    mask = dropout_mask<double>(hidden.rows(), hidden.cols(), model.hidden_dropout, rng);
    hidden.array() *= mask.array();
  }
  DenseMatrix scores = hidden * model.w2;
  for (Index k = 0; k < l; ++k) scores(model.labeled[k], k) = -std::numeric_limits<double>::infinity();
  DenseMatrix probs = softmax_rows(scores);

  if (cache) {
    cache->input = drop_input ? std::move(dropped) : FeatureMatrix();
    cache->pre_hidden = std::move(pre);
    cache->hidden = std::move(hidden);
    cache->hidden_mask = std::move(mask);
    cache->probs = probs;
  }
  return probs;
}

double affinity_loss(const DenseMatrix& z_a, const AffinityTargets& targets) {
  if (z_a.cols() != targets.size()) throw DimensionError("affinity_loss: Z^A columns differ from labeled count");
  double total = 0.0;
  for (Index k = 0; k < targets.size(); ++k) {
    if (!targets.active[k]) continue;
    const Index row = targets.nodes[k];
    for (Index j = 0; j < targets.size(); ++j) {
      const double t = targets.matrix(k, j);
      if (t != 0.0) total -= t * floored_log(z_a(row, j));
    }
  }
  return total;
}

DenseMatrix affinity_loss_backward(const DenseMatrix& z_a, const AffinityTargets& targets, double scale) {
  if (z_a.cols() != targets.size()) throw DimensionError("affinity_loss_backward: shape mismatch");
  DenseMatrix grad = DenseMatrix::Zero(z_a.rows(), z_a.cols());
  Eigen::RowVectorXd d_prob(z_a.cols());
  for (Index k = 0; k < targets.size(); ++k) {
    if (!targets.active[k]) continue;
    const Index row = targets.nodes[k];
    for (Index j = 0; j < z_a.cols(); ++j) d_prob(j) = -scale * targets.matrix(k, j) * floored_log_derivative(z_a(row, j));
    const double inner = d_prob.dot(z_a.row(row));
    grad.row(row) = (z_a.row(row).array() * (d_prob.array() - inner)).matrix();
  }
  return grad;
}

DenseMatrix draw_gumbel(Index rows, Index cols, Rng& rng) {
  DenseMatrix g(rows, cols);
  double* p = g.data();
  for (Index k = 0; k < g.size(); ++k) p[k] = rng.gumbel();
  return g;
}

DenseMatrix soft_selection(const DenseMatrix& z_a, const DenseMatrix& noise, double temperature) {
  require_same_shape(z_a.rows(), z_a.cols(), noise.rows(), noise.cols(), "soft_selection");
  DenseMatrix logits = (z_a.array().log() + noise.array()) / temperature;
  return softmax_rows(logits);
}

DenseMatrix soft_selection_backward(const DenseMatrix& upstream, const DenseMatrix& soft, double temperature) {
  require_same_shape(upstream.rows(), upstream.cols(), soft.rows(), soft.cols(), "soft_selection_backward");
  DenseMatrix grad(upstream.rows(), upstream.cols());
  for (Index i = 0; i < upstream.rows(); ++i) {
    const double inner = upstream.row(i).dot(soft.row(i));
    grad.row(i) = (soft.row(i).array() * (upstream.row(i).array() - inner) / temperature).matrix();
  }
  return grad;
}

SparseGraph affinity_graph_from_weights(const DenseMatrix& weights, const std::vector<Index>& labeled, bool clip) {
  if (weights.cols() != static_cast<Index>(labeled.size())) {
    throw DimensionError("affinity graph: selection matrix has " + std::to_string(weights.cols()) +
                         " columns for " + std::to_string(labeled.size()) + " labeled nodes");
  }
  const Index n = weights.rows();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(2 * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < weights.cols(); ++j) {
      const double w = weights(i, j);
      if (w == 0.0) continue;
      const Index t = labeled[j];
      if (t < 0 || t >= n) throw DimensionError("affinity graph: labeled node out of range");
      entries.emplace_back(i, t, w);
      entries.emplace_back(t, i, w);
    }
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(entries.begin(), entries.end());
  if (clip) {
    for (Index k = 0; k < a.nonZeros(); ++k) a.valuePtr()[k] = std::min(a.valuePtr()[k], 1.0);
  }
  return SparseGraph::from_adjacency(std::move(a));
}

AffinitySample sample_affinity_graph(const DenseMatrix& z_a, const std::vector<Index>& labeled, SampleMode mode,
                                     double temperature, Rng& rng, bool clip, const DenseMatrix* frozen_noise) {
  if (!(temperature > 0.0)) throw ParameterError("Gumbel-softmax temperature must be positive");
  const Index n = z_a.rows(), l = z_a.cols();
  AffinitySample s;
  s.temperature = temperature;
  if (mode == SampleMode::sample) {
    if (frozen_noise) {
      require_same_shape(frozen_noise->rows(), frozen_noise->cols(), n, l, "frozen Gumbel noise");
      s.noise = *frozen_noise;
    } else {
      s.noise = draw_gumbel(n, l, rng);
    }
  }
  s.choice.resize(n);
  s.weights = DenseMatrix::Zero(n, l);
  for (Index i = 0; i < n; ++i) {
    Index best = -1;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < l; ++j) {
      const double p = z_a(i, j);
      if (p <= 0.0) continue;
      const double v = mode == SampleMode::sample ? std::log(p) + s.noise(i, j) : p;
      if (best < 0 || v > best_value) {
        best = j;
        best_value = v;
      }
    }
    if (best < 0) throw ParameterError("affinity row " + std::to_string(i) + " has no positive entry");
    s.choice[i] = best;
    s.weights(i, best) = 1.0;
  }
  s.graph = affinity_graph_from_weights(s.weights, labeled, clip);
  return s;
}

DenseMatrix straight_through_grad(const DenseMatrix& upstream, const DenseMatrix& z_a, const AffinitySample& sample) {
  require_same_shape(upstream.rows(), upstream.cols(), z_a.rows(), z_a.cols(), "straight_through_grad");
  if (sample.temperature >= kStraightThroughTemperature) {
    const DenseMatrix noise =
        sample.noise.size() ? sample.noise : DenseMatrix::Zero(z_a.rows(), z_a.cols()).eval();
    return soft_selection_backward(upstream, soft_selection(z_a, noise, sample.temperature), sample.temperature);
  }
  if (static_cast<Index>(sample.choice.size()) != upstream.rows()) {
    throw StateError("straight_through_grad: sample does not match the upstream gradient");
  }
  DenseMatrix grad = DenseMatrix::Zero(upstream.rows(), upstream.cols());
  for (Index i = 0; i < upstream.rows(); ++i) grad(i, sample.choice[i]) = upstream(i, sample.choice[i]);
  return grad;
}

}  // namespace glam
