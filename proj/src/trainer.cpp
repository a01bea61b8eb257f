#include "glam/trainer.hpp"

#include <spdlog/spdlog.h>

#include "glam/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>

namespace glam {

Workspace::Workspace(Dataset dataset) : dataset_(std::move(dataset)) { validate_dataset(dataset_); }

const FeatureMatrix& Workspace::boosted() {
  std::lock_guard lock(mutex_);
  if (!boosted_) boosted_ = std::make_unique<FeatureMatrix>(boosted_features(dataset_.features));
  return *boosted_;
}

const SparseGraph& Workspace::knn(int k, bool use_boosted) {
  const FeatureMatrix& x = use_boosted ? boosted() : dataset_.features;
  std::lock_guard lock(mutex_);
  auto& slot = knn_[{k, use_boosted}];
  if (!slot) slot = std::make_unique<SparseGraph>(knn_graph(x, k));
  return *slot;
}

GlamInputs Workspace::inputs(const GlamHyperParams& hp, const SparseGraph* graph) {
  validate(hp);
  const FeatureMatrix* b = hp.boosted ? &boosted() : nullptr;
  if (!graph) graph = &knn(hp.k, hp.boosted);
  return make_inputs(dataset_, hp, b, graph);
}

LabelGuard::LabelGuard(const Dataset& dataset)
    : labels_(dataset.labels), val_(dataset.split.val), test_(dataset.split.test) {}

double LabelGuard::val_accuracy(const std::vector<int>& predictions) const {
  return accuracy(predictions, labels_, val_);
}

double LabelGuard::test_accuracy(const std::vector<int>& predictions) {
  if (test_read_) throw StateError("test labels were already read for this run");
  test_read_ = true;
  return accuracy(predictions, labels_, test_);
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels, const std::vector<Index>& nodes) {
  if (nodes.empty()) return 0.0;
  Index hits = 0;
  for (Index i : nodes) hits += predictions.at(i) == labels.at(i);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(nodes.size());
}

TrainResult train(Workspace& workspace, const GlamHyperParams& hp, const TrainOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const GlamInputs inputs = workspace.inputs(hp, options.graph);
  LabelGuard guard(workspace.dataset());

  Rng base(hp.seed);
  TrainResult result;
  result.params = init_params(inputs, hp, base.stream("init"));
  GlamParams& params = result.params;
  ForwardRng rng{base.stream("dropout.affinity"), base.stream("dropout.gcn"), base.stream("gumbel")};
  AdamState<double> adam;
  adam.config = hp.adam;

  const bool affinity = hp.uses_affinity();
  std::vector<DenseMatrix*> weights{&params.w3, &params.w4};
  std::vector<double> decay{hp.alpha_c, hp.alpha_c};
  if (affinity) {
    weights.insert(weights.begin(), {&params.affinity.w1, &params.affinity.w2});
    decay.insert(decay.begin(), {hp.alpha_a, hp.alpha_a});
  }

  TrainReport& report = result.report;
  report.seed = hp.seed;
  report.hp = hp;
  GlamParams best = params;
  double best_val = -1.0;
  std::optional<AffinitySample> frozen;
  ForwardCache cache;

  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    ForwardOptions fo;
    if (frozen) fo.fixed_sample = &*frozen;
    const GlamForward fwd = glam_forward(params, hp, inputs, true, rng, &cache, fo);
    report.affinity_graphs_built += fwd.built_affinity_graph && !frozen;
    if (hp.resample == Resample::once && !frozen && cache.sample) frozen = *cache.sample;

    const LossParts parts = glam_loss(fwd, params, inputs, hp);
    if (!std::isfinite(parts.total)) {
      throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) + " (L_C=" +
                            std::to_string(parts.loss_c) + ", L_A=" + std::to_string(parts.loss_a) + ", seed " +
                            std::to_string(hp.seed) + ")");
    }
    const GlamGradients g = glam_backward(params, hp, inputs, fwd, cache);
    std::vector<const DenseMatrix*> grads{&g.w3, &g.w4};
    if (affinity) grads.insert(grads.begin(), {&g.w1, &g.w2});
    adam_step<double>(weights, grads, decay, adam, hp.lr);

    ForwardRng idle = rng;
    const GlamForward eval = glam_forward(params, hp, inputs, false, idle, nullptr, fo);
    report.affinity_graphs_built += eval.built_affinity_graph && !frozen;
    const double val = guard.val_accuracy(predict(eval.z_c));
    report.epochs.push_back({epoch, parts.loss_c, parts.loss_a, parts.total, val});

    if (val > best_val) {
      best_val = val;
      best = params;
      report.best_epoch = epoch;
      report.best_total_loss = parts.total;
    } else if (epoch - report.best_epoch >= hp.patience) {
      report.early_stopped = true;
      break;
    }
  }

  params = std::move(best);
  report.best_val_accuracy = best_val;
  ForwardRng idle = rng;
  ForwardOptions fo;
  if (frozen) fo.fixed_sample = &*frozen;
  const GlamForward final_pass = glam_forward(params, hp, inputs, false, idle, nullptr, fo);
  if (options.evaluate_test) report.test_accuracy = guard.test_accuracy(predict(final_pass.z_c));
  result.graph = final_pass.graph;
  result.laplacian = final_pass.laplacian;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

TrainResult train(const Dataset& dataset, const GlamHyperParams& hp, const TrainOptions& options) {
  Workspace ws(dataset);
  return train(ws, hp, options);
}

std::pair<double, double> mean_and_std(std::vector<double> values) {
  if (values.empty()) return {0.0, 0.0};
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

SeedSummary evaluate_seeds(Workspace& workspace, const GlamHyperParams& hp, const std::vector<std::uint64_t>& seeds,
                           int workers, const TrainOptions& options, const RunObserver& observe) {
  if (seeds.empty()) throw ParameterError("evaluate_seeds needs at least one seed");
  std::vector<std::optional<TrainReport>> reports(seeds.size());
  std::vector<std::string> errors(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), workers, [&](int i) {
    GlamHyperParams run = hp;
    run.seed = seeds[i];
    try {
      TrainResult result = train(workspace, run, options);
      if (observe) observe(i, result);
      reports[i] = std::move(result.report);
    } catch (const DivergenceError& e) {
      errors[i] = e.what();
    }
  });

  SeedSummary s;
  s.seeds = seeds;
  std::vector<double> acc;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (reports[i]) {
      acc.push_back(reports[i]->test_accuracy.value_or(reports[i]->best_val_accuracy));
      s.reports.push_back(std::move(*reports[i]));
    } else {
      spdlog::warn("seed {} diverged: {}", seeds[i], errors[i]);
      s.failures.emplace_back(seeds[i], errors[i]);
    }
  }
  std::tie(s.mean, s.std) = mean_and_std(acc);
  return s;
}

double Range::sample(Rng& rng) const {
  if (log) return std::exp(rng.uniform(std::log(lo), std::log(hi)));
  return rng.uniform(lo, hi);
}

void validate(const SweepSpec& spec) {
  if (spec.budget < 1) throw ParameterError("sweep budget must be >= 1");
  if (spec.trial_seeds.empty()) throw ParameterError("sweep needs at least one trial seed");
  for (const Range* r : {&spec.alpha_a, &spec.alpha_c, &spec.lr, &spec.beta, &spec.dropout, &spec.w_ck}) {
    if (!(r->lo <= r->hi) || (r->log && !(r->lo > 0.0))) throw ParameterError("invalid sweep range");
  }
  if (spec.dropout.lo < 0.0 || spec.dropout.hi > 1.0) throw ParameterError("dropout range must lie within [0, 1]");
  if (spec.w_ck.lo < 0.0 || spec.w_ck.hi > 1.0) throw ParameterError("w_ck range must lie within [0, 1]");
  if (spec.k.empty() || spec.h_a.empty() || spec.h_c.empty()) throw ParameterError("categorical choices are empty");
}

std::vector<GlamHyperParams> sample_configs(const SweepSpec& spec, const GlamHyperParams& base) {
  validate(spec);
  Rng rng = Rng(spec.seed).stream("sweep");
  auto pick = [&](const std::vector<int>& v) { return v[rng.below(v.size())]; };
  auto rate = [&] { return std::min(spec.dropout.sample(rng), std::nextafter(1.0, 0.0)); };
  std::vector<GlamHyperParams> out;
  for (int t = 0; t < spec.budget; ++t) {
    GlamHyperParams hp = base;
    // Every knob is drawn even when unused so a trial's configuration does
    // not depend on the model kind.
    hp.alpha_a = spec.alpha_a.sample(rng);
    hp.alpha_c = spec.alpha_c.sample(rng);
    hp.lr = spec.lr.sample(rng);
    hp.beta = spec.beta.sample(rng);
    hp.dropout_a_input = rate();
    hp.dropout_a_hidden = rate();
    hp.dropout_c_input = rate();
    hp.dropout_c_hidden = rate();
    hp.w_ck = spec.w_ck.sample(rng);
    hp.k = pick(spec.k);
    hp.h_a = pick(spec.h_a);
    hp.h_c = pick(spec.h_c);
    out.push_back(hp);
  }
  return out;
}

SweepResult sweep(Workspace& workspace, const SweepSpec& spec, const GlamHyperParams& base, int workers) {
  const auto configs = sample_configs(spec, base);
  std::vector<Trial> trials(configs.size());
  TrainOptions options;
  options.evaluate_test = false;
  parallel_for(static_cast<int>(configs.size()), workers, [&](int t) {
    Trial& trial = trials[t];
    trial.index = t;
    trial.hp = configs[t];
    std::vector<double> vals, losses;
    try {
      for (auto seed : spec.trial_seeds) {
        GlamHyperParams run = configs[t];
        run.seed = seed;
        const TrainReport r = train(workspace, run, options).report;
        vals.push_back(r.best_val_accuracy);
        losses.push_back(r.best_total_loss);
      }
      trial.val_mean = mean_and_std(vals).first;
      trial.loss_mean = mean_and_std(losses).first;
    } catch (const DivergenceError& e) {
      trial.failed = true;
      trial.message = e.what();
    }
    spdlog::info("trial {}/{}: val {:.2f}{}", t + 1, configs.size(), trial.val_mean, trial.failed ? " (diverged)" : "");
  });

  std::sort(trials.begin(), trials.end(), [](const Trial& a, const Trial& b) {
    if (a.failed != b.failed) return !a.failed;
    if (a.val_mean != b.val_mean) return a.val_mean > b.val_mean;
    if (a.loss_mean != b.loss_mean) return a.loss_mean < b.loss_mean;
    return a.index < b.index;
  });
  return SweepResult{std::move(trials)};
}

int resolve_workers(int requested) {
  if (const char* env = std::getenv("GLAM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
    spdlog::warn("ignoring GLAM_WORKERS='{}'", env);
  }
  return std::max(1, requested);
}

}  // namespace glam
