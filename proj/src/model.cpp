#include "glam/model.hpp"

#include <cmath>

namespace glam {

namespace {

void check_rate(double v, const char* name) {
  if (!(v >= 0.0 && v < 1.0)) throw ParameterError(std::string(name) + " must lie in [0, 1), got " + std::to_string(v));
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0 && std::isfinite(v))) throw ParameterError(std::string(name) + " must be positive, got " + std::to_string(v));
}

void check_nonnegative(double v, const char* name) {
  if (!(v >= 0.0 && std::isfinite(v))) {
    throw ParameterError(std::string(name) + " must be nonnegative, got " + std::to_string(v));
  }
}

/// Gradient of the loss with respect to the Laplacian at (a, b):
/// dO[a] . M2[b] + dB1[a] . M1[b].
struct LaplacianGradient {
  const DenseMatrix& d_out;
  const DenseMatrix& m2;
  const DenseMatrix& d_b1;
  const DenseMatrix& m1;

  double operator()(Index a, Index b) const { return d_out.row(a).dot(m2.row(b)) + d_b1.row(a).dot(m1.row(b)); }
};

/// dL/dP for the affinity selection matrix, through G = w_A G_A + w_ck G_ck
/// and the in-degree normalization of G + I.
DenseMatrix selection_gradient(const GlamHyperParams& hp, const GlamInputs& inputs, const GlamForward& forward,
                               const DenseMatrix& weights, const LaplacianGradient& gamma) {
  const Index n = inputs.num_nodes();
  const auto l = static_cast<Index>(inputs.labeled.size());
  const SparseMatrix& lap = forward.laplacian.adjacency();
  const SparseMatrix& g = forward.graph.adjacency();

  Eigen::VectorXd degree = Eigen::VectorXd::Ones(n);
  for (Index i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(g, i); it; ++it) degree(i) += it.value();
  }
  Eigen::VectorXd through_rows = Eigen::VectorXd::Zero(n), through_cols = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(lap, i); it; ++it) {
      const double v = gamma(i, it.col()) * it.value();
      through_rows(i) += v;
      through_cols(it.col()) += v;
    }
  }
  // dL/dd_a, the dependence of every normalized entry on a's in-degree.
  const Eigen::VectorXd d_degree = -(through_rows + through_cols).cwiseQuotient(2.0 * degree);
  const Eigen::VectorXd inv_sqrt = degree.cwiseSqrt().cwiseInverse();

  DenseMatrix d_out_t(l, gamma.d_out.cols()), m2_t(l, gamma.m2.cols());
  DenseMatrix d_b1_t(l, gamma.d_b1.cols()), m1_t(l, gamma.m1.cols());
  for (Index j = 0; j < l; ++j) {
    const Index t = inputs.labeled[j];
    d_out_t.row(j) = gamma.d_out.row(t);
    m2_t.row(j) = gamma.m2.row(t);
    d_b1_t.row(j) = gamma.d_b1.row(t);
    m1_t.row(j) = gamma.m1.row(t);
  }
  // into(i, j): entry (i <- labeled j); out_of(i, j): entry (labeled j <- i).
  const DenseMatrix into = gamma.d_out * m2_t.transpose() + gamma.d_b1 * m1_t.transpose();
  const DenseMatrix out_of = gamma.m2 * d_out_t.transpose() + gamma.m1 * d_b1_t.transpose();

  SparseGraph unclipped;
  if (hp.clip_affinity_weights) unclipped = affinity_graph_from_weights(weights, inputs.labeled, false);
  auto gate = [&](Index a, Index b) {
    return hp.clip_affinity_weights && unclipped.weight(a, b) > 1.0 ? 0.0 : 1.0;
  };

  const double w_a = hp.w_a();
  DenseMatrix d_p(n, l);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < l; ++j) {
      const Index t = inputs.labeled[j];
      const double scale = inv_sqrt(i) * inv_sqrt(t);
      const double forward_entry = into(i, j) * scale + d_degree(i);
      const double backward_entry = out_of(i, j) * scale + d_degree(t);
      d_p(i, j) = w_a * (gate(i, t) * forward_entry + gate(t, i) * backward_entry);
    }
  }
  return d_p;
}

}  // namespace

void validate(const GlamHyperParams& hp) {
  if (hp.k < 1) throw ParameterError("k must be >= 1");
  if (!(hp.w_ck >= 0.0 && hp.w_ck <= 1.0)) throw ParameterError("w_ck must lie in [0, 1]");
  check_nonnegative(hp.beta, "beta");
  check_nonnegative(hp.alpha_a, "alpha_a");
  check_nonnegative(hp.alpha_c, "alpha_c");
  check_positive(hp.lr, "lr");
  check_rate(hp.dropout_a_input, "dropout_a_input");
  check_rate(hp.dropout_a_hidden, "dropout_a_hidden");
  check_rate(hp.dropout_c_input, "dropout_c_input");
  check_rate(hp.dropout_c_hidden, "dropout_c_hidden");
  if (hp.h_a < 1 || hp.h_c < 1) throw ParameterError("hidden sizes must be >= 1");
  check_positive(hp.temperature, "temperature");
  if (hp.epochs < 1 || hp.epochs > 500) throw ParameterError("epochs must lie in [1, 500]");
  if (hp.patience < 1) throw ParameterError("patience must be >= 1");
  if (!(hp.adam.beta1 >= 0.0 && hp.adam.beta1 < 1.0 && hp.adam.beta2 >= 0.0 && hp.adam.beta2 < 1.0)) {
    throw ParameterError("Adam betas must lie in [0, 1)");
  }
  check_positive(hp.adam.epsilon, "adam epsilon");
}

GlamInputs make_inputs(const Dataset& dataset, const GlamHyperParams& hp, const FeatureMatrix* boosted,
                       const SparseGraph* graph) {
  validate(hp);
  validate_dataset(dataset);
  const Index n = dataset.num_nodes();
  GlamInputs in;
  in.num_classes = dataset.num_classes;
  in.labeled = dataset.split.train;

  FeatureMatrix computed;
  if (hp.boosted && !boosted) {
    computed = boosted_features(dataset.features);
    boosted = &computed;
  }
  const FeatureMatrix& knn_x = hp.boosted ? *boosted : dataset.features;
  SparseGraph knn = graph ? *graph : knn_graph(knn_x, hp.k);
  in.affinity_x = knn_x.with_precision(hp.feature_precision);
  in.gcn_x = (hp.gcn_boosted() ? *boosted : dataset.features).with_precision(hp.feature_precision);

  if (knn.num_nodes() != n) throw DimensionError("graph node count differs from the dataset");
  in.g_ck = hp.model == ModelKind::glam ? crop_incoming_to_labeled(knn, in.labeled) : std::move(knn);

  in.train_labels.assign(n, -1);
  in.class_targets = DenseMatrix::Zero(n, dataset.num_classes);
  for (Index t : in.labeled) {
    in.train_labels[t] = dataset.labels[t];
    in.class_targets(t, dataset.labels[t]) = 1.0;
  }
  if (hp.uses_affinity()) {
    if (in.labeled.size() < 2) throw ParameterError("GLAM needs at least two labeled nodes");
    in.targets = build_affinity_targets(dataset.split, in.train_labels);
  }
  return in;
}

GlamParams init_params(const GlamInputs& inputs, const GlamHyperParams& hp, Rng rng) {
  GlamParams p;
  Rng gcn = rng.stream("init.gcn");
  p.w3 = glorot_uniform<double>(inputs.gcn_x.cols(), hp.h_c, gcn);
  p.w4 = glorot_uniform<double>(hp.h_c, inputs.num_classes, gcn);
  p.affinity.labeled = inputs.labeled;
  p.affinity.input_dropout = hp.dropout_a_input;
  p.affinity.hidden_dropout = hp.dropout_a_hidden;
  if (hp.uses_affinity()) {
    Rng aff = rng.stream("init.affinity");
    const auto l = static_cast<Index>(inputs.labeled.size());
    p.affinity.w1 = glorot_uniform<double>(inputs.affinity_x.cols(), hp.h_a, aff);
    p.affinity.w2 = glorot_uniform<double>(hp.h_a, l, aff);
  }
  return p;
}

GlamForward glam_forward(const GlamParams& params, const GlamHyperParams& hp, const GlamInputs& inputs, bool training,
                         ForwardRng& rng, ForwardCache* cache, const ForwardOptions& options) {
  const Index n = inputs.num_nodes();
  if (params.w3.rows() != inputs.gcn_x.cols() || params.w3.cols() != params.w4.rows() ||
      params.w4.cols() != inputs.num_classes) {
    throw DimensionError("glam_forward: W3/W4 shapes do not match the inputs");
  }
  GlamForward out;
  if (cache) *cache = ForwardCache{};

  SparseGraph g_a;
  if (hp.uses_affinity()) {
    AffinityCache* ac = cache ? &cache->affinity : nullptr;
    out.z_a = affinity_forward(params.affinity, inputs.affinity_x, training, rng.affinity, ac);
    if (hp.w_a() > 0.0) {
      AffinitySample sample;
      bool constant = false;
      if (options.fixed_sample) {
        sample = *options.fixed_sample;
        constant = true;
      } else if (training && hp.relaxation == Relaxation::soft) {
        sample.noise = options.frozen_noise ? *options.frozen_noise : draw_gumbel(n, out.z_a.cols(), rng.gumbel);
        sample.temperature = hp.temperature;
        sample.weights = soft_selection(out.z_a, sample.noise, hp.temperature);
        sample.graph = affinity_graph_from_weights(sample.weights, inputs.labeled, hp.clip_affinity_weights);
      } else {
        sample = sample_affinity_graph(out.z_a, inputs.labeled, training ? SampleMode::sample : SampleMode::argmax,
                                       hp.temperature, rng.gumbel, hp.clip_affinity_weights, options.frozen_noise);
      }
      g_a = sample.graph;
      out.built_affinity_graph = true;
      if (cache) {
        cache->graph_is_constant = constant;
        if (training && hp.relaxation == Relaxation::soft && !constant) cache->soft_weights = sample.weights;
        cache->sample = std::move(sample);
      }
    }
  }
  out.graph = out.built_affinity_graph ? combine_graphs(g_a, inputs.g_ck, hp.w_a()) : inputs.g_ck;
  out.laplacian = indegree_laplacian(out.graph);
  const SparseMatrix& lap = out.laplacian.adjacency();

  const bool drop_input = training && hp.dropout_c_input > 0.0;
  FeatureMatrix dropped;
  if (drop_input) dropped = inputs.gcn_x.dropped(hp.dropout_c_input, rng.gcn);
  const FeatureMatrix& x = drop_input ? dropped : inputs.gcn_x;

  DenseMatrix m1 = x.times(params.w3);
  DenseMatrix b1 = spmm(lap, m1);
  DenseMatrix hidden = relu(b1);
  DenseMatrix mask;
  if (training && hp.dropout_c_hidden > 0.0) {
    mask = dropout_mask<double>(hidden.rows(), hidden.cols(), hp.dropout_c_hidden, rng.gcn);
    hidden.array() *= mask.array();
  }
  DenseMatrix m2 = hidden * params.w4;
  out.z_c = softmax_rows(spmm(lap, m2));

  if (cache) {
    cache->valid = true;
    if (drop_input) cache->gcn_input = std::move(dropped);
    cache->m1 = std::move(m1);
    cache->b1 = std::move(b1);
    cache->hidden = std::move(hidden);
    cache->hidden_mask = std::move(mask);
    cache->m2 = std::move(m2);
  }
  return out;
}

LossParts glam_loss(const GlamForward& forward, const GlamParams& params, const GlamInputs& inputs,
                    const GlamHyperParams& hp) {
  LossParts parts;
  parts.loss_c = cross_entropy_rows(forward.z_c, inputs.class_targets, std::span<const Index>(inputs.labeled));
  if (hp.uses_affinity() && inputs.targets) {
    parts.loss_a = affinity_loss(forward.z_a, *inputs.targets);
    parts.reg_a = hp.alpha_a * (squared_norm(params.affinity.w1) + squared_norm(params.affinity.w2));
  }
  parts.reg_c = hp.alpha_c * (squared_norm(params.w3) + squared_norm(params.w4));
  const double beta = hp.uses_affinity() ? hp.beta : 0.0;
  parts.total = parts.loss_c + beta * parts.loss_a + parts.reg_a + parts.reg_c;
  return parts;
}

GlamGradients glam_backward(const GlamParams& params, const GlamHyperParams& hp, const GlamInputs& inputs,
                            const GlamForward& forward, const ForwardCache& cache) {
  if (!cache.valid) throw StateError("glam_backward called without a cached forward pass");
  const SparseMatrix& lap = forward.laplacian.adjacency();
  const SparseMatrix lap_t = lap.transpose();
  GlamGradients grads;

  const DenseMatrix d_out =
      softmax_cross_entropy_backward(forward.z_c, inputs.class_targets, std::span<const Index>(inputs.labeled));
  const DenseMatrix d_m2 = spmm(lap_t, d_out);
  grads.w4 = cache.hidden.transpose() * d_m2;
  DenseMatrix d_hidden = d_m2 * params.w4.transpose();
  if (cache.hidden_mask.size()) d_hidden.array() *= cache.hidden_mask.array();
  const DenseMatrix d_b1 = relu_backward(d_hidden, cache.b1);
  const DenseMatrix d_m1 = spmm(lap_t, d_b1);
  const FeatureMatrix& x = cache.gcn_input.rows() ? cache.gcn_input : inputs.gcn_x;
  grads.w3 = x.transpose_times(d_m1);

  if (!hp.uses_affinity()) return grads;

  const AffinityCache& ac = cache.affinity;
  DenseMatrix d_scores = affinity_loss_backward(forward.z_a, *inputs.targets, hp.beta);
  const bool graph_path = cache.sample && !cache.graph_is_constant &&
                          (hp.relaxation == Relaxation::soft || hp.straight_through);
  if (graph_path) {
    const LaplacianGradient gamma{d_out, cache.m2, d_b1, cache.m1};
    const DenseMatrix d_p = selection_gradient(hp, inputs, forward, cache.sample->weights, gamma);
    const DenseMatrix d_log = cache.soft_weights.size()
                                  ? soft_selection_backward(d_p, cache.soft_weights, cache.sample->temperature)
                                  : straight_through_grad(d_p, forward.z_a, *cache.sample);
    d_scores += log_softmax_backward(d_log, forward.z_a);
  }
  grads.w2 = ac.hidden.transpose() * d_scores;
  DenseMatrix d_h1 = d_scores * params.affinity.w2.transpose();
  if (ac.hidden_mask.size()) d_h1.array() *= ac.hidden_mask.array();
  const DenseMatrix d_pre = relu_backward(d_h1, ac.pre_hidden);
  const FeatureMatrix& xa = ac.input.rows() ? ac.input : inputs.affinity_x;
  grads.w1 = xa.transpose_times(d_pre);
  return grads;
}

std::vector<int> predict(const DenseMatrix& z_c) {
  std::vector<int> out(z_c.rows(), 0);
  for (Index i = 0; i < z_c.rows(); ++i) {
    int best = 0;
    for (Index j = 1; j < z_c.cols(); ++j) {
      if (z_c(i, j) > z_c(i, best)) best = static_cast<int>(j);
    }
    out[i] = best;
  }
  return out;
}

std::string to_string(GcnInput v) { return v == GcnInput::raw ? "raw" : "boosted"; }
std::string to_string(Resample v) { return v == Resample::per_epoch ? "per-epoch" : "once"; }
std::string to_string(ModelKind v) { return v == ModelKind::glam ? "glam" : "gcn-knn"; }
std::string to_string(Relaxation v) { return v == Relaxation::hard ? "hard" : "soft"; }
std::string to_string(FeaturePrecision v) { return v == FeaturePrecision::single ? "single" : "double"; }

GcnInput parse_gcn_input(const std::string& s) {
  if (s == "raw") return GcnInput::raw;
  if (s == "boosted") return GcnInput::boosted;
  throw ParameterError("gcn_input must be raw or boosted, got '" + s + "'");
}

Resample parse_resample(const std::string& s) {
  if (s == "per-epoch") return Resample::per_epoch;
  if (s == "once") return Resample::once;
  throw ParameterError("resample must be per-epoch or once, got '" + s + "'");
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "glam") return ModelKind::glam;
  if (s == "gcn-knn") return ModelKind::gcn_knn;
  throw ParameterError("model must be glam or gcn-knn, got '" + s + "'");
}

Relaxation parse_relaxation(const std::string& s) {
  if (s == "hard") return Relaxation::hard;
  if (s == "soft") return Relaxation::soft;
  throw ParameterError("relaxation must be hard or soft, got '" + s + "'");
}

FeaturePrecision parse_feature_precision(const std::string& s) {
  if (s == "single") return FeaturePrecision::single;
  if (s == "double") return FeaturePrecision::double_;
  throw ParameterError("feature_precision must be single or double, got '" + s + "'");
}

}  // namespace glam
