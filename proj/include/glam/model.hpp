#pragma once

#include <optional>
#include <string>
#include <vector>

#include "glam/affinity.hpp"
#include "glam/data.hpp"
#include "glam/graphs.hpp"
#include "glam/numerics.hpp"

namespace glam {

enum class GcnInput { raw, boosted };
enum class Resample { per_epoch, once };
enum class ModelKind { glam, gcn_knn };
/// `hard` draws one-hot affinity choices (the training default); `soft` uses
/// the Gumbel-softmax weights themselves, which makes the whole loss smooth.
enum class Relaxation { hard, soft };

struct GlamHyperParams {
  ModelKind model = ModelKind::glam;
  int k = 10;
  double w_ck = 0.5;
  double beta = 1.0;
  double alpha_a = 5e-4;
  double alpha_c = 5e-4;
  double lr = 0.01;
  double dropout_a_input = 0.5;
  double dropout_a_hidden = 0.5;
  double dropout_c_input = 0.5;
  double dropout_c_hidden = 0.5;
  int h_a = 128;
  int h_c = 64;
  double temperature = 1e-10;
  int epochs = 500;
  int patience = 25;
  std::uint64_t seed = 0;
  /// Boosted features for kNN and the affinity model; the classifier also
  /// takes them when `gcn_input` is boosted. Without it every input is raw.
  bool boosted = false;
  GcnInput gcn_input = GcnInput::boosted;
  Resample resample = Resample::per_epoch;
  Relaxation relaxation = Relaxation::hard;
  bool clip_affinity_weights = false;
  bool straight_through = true;
  /// Storage of dense feature matrices during training; single is opt-in.
  FeaturePrecision feature_precision = FeaturePrecision::double_;
  AdamConfig adam;

  double w_a() const { return model == ModelKind::gcn_knn ? 0.0 : 1.0 - w_ck; }
  bool uses_affinity() const { return model == ModelKind::glam; }
  bool gcn_boosted() const { return boosted && gcn_input == GcnInput::boosted; }
};

/// Throws ParameterError naming the first knob outside its range.
void validate(const GlamHyperParams& hp);

struct GlamParams {
  AffinityModel affinity;  // empty weights for gcn-knn
  DenseMatrix w3;          // d x h_C
  DenseMatrix w4;          // h_C x C
};

/// Everything a forward pass needs besides the parameters. Built from train
/// labels only: `train_labels` is -1 outside the labeled set.
struct GlamInputs {
  FeatureMatrix affinity_x;
  FeatureMatrix gcn_x;
  SparseGraph g_ck;  // cropped kNN for GLAM, uncropped for gcn-knn
  std::vector<Index> labeled;
  std::vector<int> train_labels;
  DenseMatrix class_targets;  // n x C, one-hot on labeled rows
  std::optional<AffinityTargets> targets;
  int num_classes = 0;

  Index num_nodes() const { return gcn_x.rows(); }
};

/// `graph` is used as-is when given, otherwise the kNN graph of the
/// (boosted) features is built and, for GLAM, cropped.
GlamInputs make_inputs(const Dataset& dataset, const GlamHyperParams& hp, const FeatureMatrix* boosted = nullptr,
                       const SparseGraph* graph = nullptr);

GlamParams init_params(const GlamInputs& inputs, const GlamHyperParams& hp, Rng rng);

/// Intermediates retained by a training forward pass.
struct ForwardCache {
  bool valid = false;
  AffinityCache affinity;
  std::optional<AffinitySample> sample;
  DenseMatrix soft_weights;  // soft relaxation only
  bool graph_is_constant = false;
  FeatureMatrix gcn_input;   // after input dropout; empty when not dropped
  DenseMatrix m1;            // X W3
  DenseMatrix b1;            // G^ X W3
  DenseMatrix hidden;        // relu(b1) after dropout
  DenseMatrix hidden_mask;
  DenseMatrix m2;            // hidden W4
};

struct GlamForward {
  DenseMatrix z_c;
  DenseMatrix z_a;  // empty for gcn-knn
  SparseGraph graph;
  SparseGraph laplacian;
  bool built_affinity_graph = false;
};

/// Random sources for one forward pass.
struct ForwardRng {
  Rng affinity;  // affinity-model dropout
  Rng gcn;       // classifier dropout
  Rng gumbel;
};

/// Optional overrides, used by gradient checks and the `once` fast path.
struct ForwardOptions {
  const DenseMatrix* frozen_noise = nullptr;
  /// Reuse this affinity sample instead of drawing a new one.
  const AffinitySample* fixed_sample = nullptr;
};

/// Z^A -> G_A -> G = w_A G_A + w_ck G_ck -> G^ -> Z^C. Training draws G_A
/// from Gumbel noise and applies dropout; evaluation uses argmax G_A.
GlamForward glam_forward(const GlamParams& params, const GlamHyperParams& hp, const GlamInputs& inputs, bool training,
                         ForwardRng& rng, ForwardCache* cache = nullptr, const ForwardOptions& options = {});

struct LossParts {
  double total = 0.0;
  double loss_c = 0.0;
  double loss_a = 0.0;
  double reg_a = 0.0;
  double reg_c = 0.0;
};

/// L = L_C + beta L_A + alpha_A (|W1|^2 + |W2|^2) + alpha_C (|W3|^2 + |W4|^2).
LossParts glam_loss(const GlamForward& forward, const GlamParams& params, const GlamInputs& inputs,
                    const GlamHyperParams& hp);

struct GlamGradients {
  DenseMatrix w1, w2, w3, w4;
};

/// Exact gradient of L_C + beta L_A (weight decay is left to the optimizer).
/// Throws StateError when `cache` holds no forward pass.
GlamGradients glam_backward(const GlamParams& params, const GlamHyperParams& hp, const GlamInputs& inputs,
                            const GlamForward& forward, const ForwardCache& cache);

/// Row-wise argmax, ties to the lowest class.
std::vector<int> predict(const DenseMatrix& z_c);

std::string to_string(GcnInput v);
std::string to_string(Resample v);
std::string to_string(ModelKind v);
std::string to_string(Relaxation v);
std::string to_string(FeaturePrecision v);
GcnInput parse_gcn_input(const std::string& s);
Resample parse_resample(const std::string& s);
ModelKind parse_model_kind(const std::string& s);
Relaxation parse_relaxation(const std::string& s);
FeaturePrecision parse_feature_precision(const std::string& s);

}  // namespace glam
