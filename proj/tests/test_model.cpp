#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "glam/baseline_gcn.hpp"
#include "glam/model.hpp"
#include "support.hpp"

using namespace glam;

namespace {

struct Instance {
  Dataset dataset;
  GlamHyperParams hp;
  GlamInputs inputs;
  GlamParams params;
  DenseMatrix noise;
};

// Six nodes, four features, two classes, four labeled nodes.
Instance make_instance(GlamHyperParams hp, std::uint64_t seed = 1) {
  Instance in;
  in.dataset = testutil::toy_dataset(2, 3, 2, 1, Rng(seed), 0);
  hp.k = 2;
  hp.dropout_a_input = hp.dropout_a_hidden = hp.dropout_c_input = hp.dropout_c_hidden = 0.0;
  hp.h_a = 5;
  hp.h_c = 3;
  hp.seed = seed;
  in.hp = hp;
  in.inputs = make_inputs(in.dataset, hp);
  in.params = init_params(in.inputs, hp, Rng(seed).stream("init"));
  // Larger weights than the initializer keeps the relu units active and the
  // gradients away from zero.
  Rng rng(seed + 100);
  in.params.w3 = testutil::random_dense(in.params.w3.rows(), in.params.w3.cols(), rng, -1.5, 1.5);
  in.params.w4 = testutil::random_dense(in.params.w4.rows(), in.params.w4.cols(), rng, -1.5, 1.5);
  if (hp.uses_affinity()) {
    auto& a = in.params.affinity;
    a.w1 = testutil::random_dense(a.w1.rows(), a.w1.cols(), rng, -1.5, 1.5);
    a.w2 = testutil::random_dense(a.w2.rows(), a.w2.cols(), rng, -1.5, 1.5);
    Rng g(seed + 200);
    in.noise = draw_gumbel(in.inputs.num_nodes(), static_cast<Index>(in.inputs.labeled.size()), g);
  }
  return in;
}

GlamForward run(const Instance& in, const GlamParams& p, ForwardCache* cache = nullptr) {
  ForwardRng rng{Rng(1), Rng(2), Rng(3)};
  ForwardOptions options;
  if (in.noise.size()) options.frozen_noise = &in.noise;
  return glam_forward(p, in.hp, in.inputs, true, rng, cache, options);
}

double objective(const Instance& in, const GlamParams& p) {
  const LossParts parts = glam_loss(run(in, p), p, in.inputs, in.hp);
  return parts.loss_c + (in.hp.uses_affinity() ? in.hp.beta * parts.loss_a : 0.0);
}

using Slot = std::function<DenseMatrix&(GlamParams&)>;

DenseMatrix numeric_gradient(const Instance& in, const Slot& slot) {
  GlamParams p = in.params;
  DenseMatrix& w = slot(p);
  DenseMatrix out(w.rows(), w.cols());
  const double h = 1e-5;
  for (Index k = 0; k < w.size(); ++k) {
    const double keep = w.data()[k];
    w.data()[k] = keep + h;
    const double up = objective(in, p);
    w.data()[k] = keep - h;
    const double down = objective(in, p);
    w.data()[k] = keep;
    out.data()[k] = (up - down) / (2 * h);
  }
  return out;
}

GlamGradients analytic(const Instance& in) {
  ForwardCache cache;
  const GlamForward f = run(in, in.params, &cache);
  return glam_backward(in.params, in.hp, in.inputs, f, cache);
}

const Slot w1 = [](GlamParams& p) -> DenseMatrix& { return p.affinity.w1; };
const Slot w2 = [](GlamParams& p) -> DenseMatrix& { return p.affinity.w2; };
const Slot w3 = [](GlamParams& p) -> DenseMatrix& { return p.w3; };
const Slot w4 = [](GlamParams& p) -> DenseMatrix& { return p.w4; };

void expect_gradients_match(const Instance& in, bool affinity) {
  const GlamGradients g = analytic(in);
  EXPECT_LT(testutil::matrix_relative_error(g.w3, numeric_gradient(in, w3)), 1e-4);
  EXPECT_LT(testutil::matrix_relative_error(g.w4, numeric_gradient(in, w4)), 1e-4);
  if (!affinity) return;
  EXPECT_LT(testutil::matrix_relative_error(g.w1, numeric_gradient(in, w1)), 1e-4);
  EXPECT_LT(testutil::matrix_relative_error(g.w2, numeric_gradient(in, w2)), 1e-4);
  EXPECT_GT(g.w1.cwiseAbs().maxCoeff(), 1e-6);
}

GlamHyperParams soft_glam(double temperature) {
  GlamHyperParams hp;
  hp.relaxation = Relaxation::soft;
  hp.temperature = temperature;
  hp.w_ck = 0.4;
  hp.beta = 0.7;
  return hp;
}

}  // namespace

TEST(GradientCheck, AffinityOnly) {
  // w_ck = 1 removes the graph path, leaving beta * L_A for W1 and W2.
  GlamHyperParams hp;
  hp.w_ck = 1.0;
  hp.beta = 1.3;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Instance in = make_instance(hp, seed);
    const GlamGradients g = analytic(in);
    EXPECT_LT(testutil::matrix_relative_error(g.w1, numeric_gradient(in, w1)), 1e-4) << seed;
    EXPECT_LT(testutil::matrix_relative_error(g.w2, numeric_gradient(in, w2)), 1e-4) << seed;
  }
}

TEST(GradientCheck, GcnOnly) {
  GlamHyperParams hp;
  hp.model = ModelKind::gcn_knn;
  for (std::uint64_t seed : {1, 2, 3}) expect_gradients_match(make_instance(hp, seed), false);
}

TEST(GradientCheck, FullGlamSoftRelaxation) {
  for (std::uint64_t seed : {1, 2, 3}) expect_gradients_match(make_instance(soft_glam(0.8), seed), true);
}

TEST(GradientCheck, FullGlamSoftRelaxationClipped) {
  GlamHyperParams hp = soft_glam(0.5);
  hp.clip_affinity_weights = true;
  for (std::uint64_t seed : {4, 5}) expect_gradients_match(make_instance(hp, seed), true);
}

TEST(GradientCheck, FullGlamHardSampleWithoutStraightThrough) {
  // With the sample held fixed the graph is locally constant in W1 and W2.
  GlamHyperParams hp;
  hp.straight_through = false;
  hp.w_ck = 0.3;
  hp.beta = 0.5;
  for (std::uint64_t seed : {1, 2, 3}) expect_gradients_match(make_instance(hp, seed), true);
}

TEST(GradientCheck, RandomSmallInstances) {
  for (std::uint64_t seed = 10; seed < 30; ++seed) {
    Rng rng(seed);
    GlamHyperParams hp = soft_glam(rng.uniform(0.3, 2.0));
    hp.w_ck = rng.uniform(0.05, 0.95);
    hp.beta = rng.uniform(0.0, 2.0);
    Instance in;
    in.dataset = testutil::toy_dataset(2 + static_cast<int>(rng.below(2)), 3, 2, 1, Rng(seed), 2);
    hp.k = 2;
    hp.dropout_a_input = hp.dropout_a_hidden = hp.dropout_c_input = hp.dropout_c_hidden = 0.0;
    hp.h_a = 4;
    hp.h_c = 3;
    in.hp = hp;
    in.inputs = make_inputs(in.dataset, hp);
    in.params = init_params(in.inputs, hp, Rng(seed));
    Rng w(seed + 1);
    for (DenseMatrix* m : {&in.params.w3, &in.params.w4, &in.params.affinity.w1, &in.params.affinity.w2}) {
      *m = testutil::random_dense(m->rows(), m->cols(), w, -1.5, 1.5);
    }
    in.noise = draw_gumbel(in.inputs.num_nodes(), static_cast<Index>(in.inputs.labeled.size()), w);
    SCOPED_TRACE(seed);
    expect_gradients_match(in, true);
  }
}

TEST(GradientCheck, ZeroBetaWithoutStraightThroughLeavesAffinityUntouched) {
  GlamHyperParams hp;
  hp.beta = 0.0;
  hp.straight_through = false;
  hp.w_ck = 0.5;
  const GlamGradients g = analytic(make_instance(hp));
  EXPECT_EQ(g.w1, DenseMatrix::Zero(g.w1.rows(), g.w1.cols()));
  EXPECT_EQ(g.w2, DenseMatrix::Zero(g.w2.rows(), g.w2.cols()));
}

TEST(GradientCheck, ZeroBetaWithStraightThroughUsesOnlyTheGraphPath) {
  GlamHyperParams hp;
  hp.beta = 0.0;
  hp.w_ck = 0.5;
  const GlamGradients with_graph = analytic(make_instance(hp));
  EXPECT_GT(with_graph.w2.cwiseAbs().maxCoeff(), 0.0);
  hp.w_ck = 1.0;
  const GlamGradients no_graph = analytic(make_instance(hp));
  EXPECT_EQ(no_graph.w2, DenseMatrix::Zero(no_graph.w2.rows(), no_graph.w2.cols()));
}

TEST(GlamModel, NoAffinityWeightEqualsGcnOnCroppedGraph) {
  GlamHyperParams hp;
  hp.w_ck = 1.0;
  hp.beta = 0.0;
  const Instance glam = make_instance(hp);
  ASSERT_FALSE(run(glam, glam.params).built_affinity_graph);

  GlamHyperParams g = gcn_config(glam.hp);
  const GlamInputs inputs = make_inputs(glam.dataset, g, nullptr, &glam.inputs.g_ck);
  GlamParams params;
  params.w3 = glam.params.w3;
  params.w4 = glam.params.w4;
  ForwardRng r1{Rng(1), Rng(2), Rng(3)}, r2{Rng(1), Rng(2), Rng(3)};
  ForwardCache c1, c2;
  const GlamForward f1 = glam_forward(glam.params, glam.hp, glam.inputs, true, r1, &c1);
  const GlamForward f2 = glam_forward(params, g, inputs, true, r2, &c2);
  EXPECT_EQ(f1.z_c, f2.z_c);
  EXPECT_EQ(glam_loss(f1, glam.params, glam.inputs, glam.hp).loss_c, glam_loss(f2, params, inputs, g).loss_c);
  const GlamGradients a = glam_backward(glam.params, glam.hp, glam.inputs, f1, c1);
  const GlamGradients b = glam_backward(params, g, inputs, f2, c2);
  EXPECT_EQ(a.w3, b.w3);
  EXPECT_EQ(a.w4, b.w4);
}

TEST(GlamModel, CroppingSurvivesCombination) {
  GlamHyperParams hp;
  hp.w_ck = 0.6;
  const Instance in = make_instance(hp);
  const GlamForward f = run(in, in.params);
  ASSERT_TRUE(f.built_affinity_graph);
  for (Index t : in.inputs.labeled) {
    for (SparseMatrix::InnerIterator it(f.graph.adjacency(), t); it; ++it) {
      EXPECT_EQ(in.inputs.g_ck.weight(t, it.col()), 0.0);
      EXPECT_GT(it.value(), 0.0);
    }
  }
}

TEST(GlamModel, OutputRowsAreDistributions) {
  for (std::uint64_t seed : {1, 2, 3}) {
    GlamHyperParams hp;
    hp.dropout_c_input = 0.3;
    const Instance in = make_instance(hp, seed);
    ForwardRng rng{Rng(seed), Rng(seed + 1), Rng(seed + 2)};
    for (bool training : {true, false}) {
      const GlamForward f = glam_forward(in.params, in.hp, in.inputs, training, rng);
      for (Index i = 0; i < f.z_c.rows(); ++i) EXPECT_NEAR(f.z_c.row(i).sum(), 1.0, 1e-9);
      for (Index i = 0; i < f.z_a.rows(); ++i) EXPECT_NEAR(f.z_a.row(i).sum(), 1.0, 1e-9);
    }
  }
}

TEST(GlamModel, SingleNodeReducesToMlp) {
  GlamInputs in;
  in.num_classes = 2;
  in.gcn_x = FeatureMatrix(DenseMatrix((DenseMatrix(1, 3) << 0.5, -1.0, 2.0).finished()));
  in.affinity_x = in.gcn_x;
  in.g_ck = SparseGraph(1);
  in.labeled = {0};
  in.train_labels = {0};
  in.class_targets = DenseMatrix::Zero(1, 2);
  in.class_targets(0, 0) = 1.0;
  GlamHyperParams hp;
  hp.model = ModelKind::gcn_knn;
  Rng rng(50);
  GlamParams p;
  p.w3 = testutil::random_dense(3, 4, rng);
  p.w4 = testutil::random_dense(4, 2, rng);
  ForwardRng r{Rng(1), Rng(2), Rng(3)};
  const GlamForward f = glam_forward(p, hp, in, false, r);
  EXPECT_EQ(f.laplacian.weight(0, 0), 1.0);
  const DenseMatrix expected = softmax_rows(relu(in.gcn_x.to_dense() * p.w3) * p.w4);
  EXPECT_LT((f.z_c - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GlamLoss, UniformOutputsOverFourClasses) {
  // Zero weights give uniform Z^C, so each of the 80 labeled rows costs ln 4.
  const Dataset ds = testutil::toy_dataset(4, 25, 20, 3, Rng(51));
  GlamHyperParams hp;
  hp.model = ModelKind::gcn_knn;
  const GlamInputs in = make_inputs(ds, hp);
  GlamParams p = init_params(in, hp, Rng(1));
  p.w3.setZero();
  p.w4.setZero();
  ForwardRng r{Rng(1), Rng(2), Rng(3)};
  const LossParts parts = glam_loss(glam_forward(p, hp, in, false, r), p, in, hp);
  EXPECT_EQ(in.labeled.size(), 80u);
  EXPECT_NEAR(parts.loss_c, 80 * std::log(4.0), 1e-9);
  EXPECT_EQ(parts.total, parts.loss_c);
}

TEST(GlamLoss, PenaltiesAreNonnegativeAndZeroBetaDropsAffinity) {
  GlamHyperParams hp;
  hp.alpha_a = 0.1;
  hp.alpha_c = 0.2;
  const Instance in = make_instance(hp);
  const LossParts parts = glam_loss(run(in, in.params), in.params, in.inputs, in.hp);
  EXPECT_GE(parts.total, parts.loss_c);
  EXPECT_NEAR(parts.reg_c, 0.2 * (in.params.w3.squaredNorm() + in.params.w4.squaredNorm()), 1e-12);
  EXPECT_NEAR(parts.reg_a, 0.1 * (in.params.affinity.w1.squaredNorm() + in.params.affinity.w2.squaredNorm()), 1e-12);

  GlamHyperParams plain = hp;
  plain.beta = 0.0;
  plain.alpha_a = plain.alpha_c = 0.0;
  const Instance p = make_instance(plain);
  const LossParts q = glam_loss(run(p, p.params), p.params, p.inputs, p.hp);
  EXPECT_EQ(q.total, q.loss_c);
}

TEST(GlamModel, BackwardWithoutForwardThrows) {
  const Instance in = make_instance(GlamHyperParams{});
  ForwardCache empty;
  EXPECT_THROW(glam_backward(in.params, in.hp, in.inputs, GlamForward{}, empty), StateError);
}

TEST(GlamModel, InputsNeverCarryEvaluationLabels) {
  const Instance in = make_instance(GlamHyperParams{});
  for (Index i = 0; i < in.inputs.num_nodes(); ++i) {
    const bool labeled = std::find(in.inputs.labeled.begin(), in.inputs.labeled.end(), i) != in.inputs.labeled.end();
    EXPECT_EQ(in.inputs.train_labels[i] >= 0, labeled);
    EXPECT_EQ(in.inputs.class_targets.row(i).sum(), labeled ? 1.0 : 0.0);
  }
}

TEST(Predict, ArgmaxWithLowestTie) {
  const DenseMatrix z = (DenseMatrix(3, 2) << 0.1, 0.9, 0.5, 0.5, 0.7, 0.3).finished();
  EXPECT_EQ(predict(z), (std::vector<int>{1, 0, 0}));
}

TEST(HyperParams, ValidationNamesTheKnob) {
  GlamHyperParams hp;
  hp.w_ck = 1.5;
  EXPECT_THROW(validate(hp), ParameterError);
  hp = {};
  hp.epochs = 501;
  EXPECT_THROW(validate(hp), ParameterError);
  hp = {};
  hp.dropout_c_hidden = 1.0;
  try {
    validate(hp);
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("dropout_c_hidden"), std::string::npos);
  }
  hp = {};
  hp.temperature = 0.0;
  EXPECT_THROW(validate(hp), ParameterError);
}
