#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "glam/data.hpp"
#include "glam/graphs.hpp"
#include "glam/model.hpp"

namespace glam {

/// Dataset plus lazily built, shared derived inputs (boosted features, kNN
/// graphs per k). Safe to use from several trials at once.
class Workspace {
 public:
  explicit Workspace(Dataset dataset);

  const Dataset& dataset() const { return dataset_; }
  const FeatureMatrix& boosted();
  const SparseGraph& knn(int k, bool boosted);

  /// Inputs for `hp`; `graph` replaces the kNN graph when given.
  GlamInputs inputs(const GlamHyperParams& hp, const SparseGraph* graph = nullptr);

 private:
  Dataset dataset_;
  std::mutex mutex_;
  std::unique_ptr<FeatureMatrix> boosted_;
  std::map<std::pair<int, bool>, std::unique_ptr<SparseGraph>> knn_;
};

/// Gatekeeper for evaluation labels. Validation accuracy may be read any
/// number of times; test accuracy exactly once, after training.
class LabelGuard {
 public:
  explicit LabelGuard(const Dataset& dataset);

  double val_accuracy(const std::vector<int>& predictions) const;
  /// Throws StateError on a second call.
  double test_accuracy(const std::vector<int>& predictions);
  bool test_read() const { return test_read_; }

 private:
  std::vector<int> labels_;
  std::vector<Index> val_;
  std::vector<Index> test_;
  bool test_read_ = false;
};

/// Percentage of `nodes` whose prediction matches `labels`.
double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels, const std::vector<Index>& nodes);

struct EpochRecord {
  int epoch = 0;
  double loss_c = 0.0;
  double loss_a = 0.0;
  double total = 0.0;
  double val_acc = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  double best_total_loss = 0.0;
  std::optional<double> test_accuracy;  // percent, at the best-val epoch
  double seconds = 0.0;                 // wall clock; kept out of the report JSON
  std::uint64_t seed = 0;
  GlamHyperParams hp;
  long affinity_graphs_built = 0;
  bool early_stopped = false;
};

struct TrainOptions {
  bool evaluate_test = true;
  /// Replaces the kNN graph (cropped for GLAM, used as-is for gcn-knn).
  const SparseGraph* graph = nullptr;
};

struct TrainResult {
  GlamParams params;
  TrainReport report;
  SparseGraph graph;      // combined graph of the restored model, evaluation mode
  SparseGraph laplacian;  // its in-degree normalization
};

/// Full-batch Adam training with early stopping on validation accuracy and
/// restoration of the best-validation parameters. Deterministic in
/// (dataset, hp). Throws DivergenceError when the loss becomes non-finite.
TrainResult train(Workspace& workspace, const GlamHyperParams& hp, const TrainOptions& options = {});
TrainResult train(const Dataset& dataset, const GlamHyperParams& hp, const TrainOptions& options = {});

struct SeedSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<TrainReport> reports;  // successful runs, in seed order
  std::vector<std::pair<std::uint64_t, std::string>> failures;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
};

/// Mean and sample standard deviation of `values`, summed in sorted order so
/// the result does not depend on the order of the input.
std::pair<double, double> mean_and_std(std::vector<double> values);

/// Called with the seed index and the finished run, possibly from a worker
/// thread.
using RunObserver = std::function<void(std::size_t, const TrainResult&)>;

/// Trains once per seed (hp.seed replaced) and summarizes test accuracy.
/// Diverged runs are recorded in `failures` and excluded.
SeedSummary evaluate_seeds(Workspace& workspace, const GlamHyperParams& hp, const std::vector<std::uint64_t>& seeds,
                           int workers = 1, const TrainOptions& options = {}, const RunObserver& observe = {});

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double sample(Rng& rng) const;
};

/// Random-search space. Knobs that do not apply to the model kind are left
/// at the base configuration.
struct SweepSpec {
  int budget = 200;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> trial_seeds{0};
  Range alpha_a{1e-5, 1e4, true};
  Range alpha_c{1e-5, 1e4, true};
  Range lr{1e-3, 1e0, true};
  Range beta{1e-2, 1e2, true};
  Range dropout{0.0, 1.0, false};
  Range w_ck{0.0, 1.0, false};
  std::vector<int> k{5, 10, 15, 20};
  std::vector<int> h_a{32, 64, 128, 256};
  std::vector<int> h_c{16, 32, 64, 128};
};

void validate(const SweepSpec& spec);

struct Trial {
  int index = 0;
  GlamHyperParams hp;
  double val_mean = 0.0;
  double loss_mean = 0.0;
  bool failed = false;
  std::string message;
};

struct SweepResult {
  std::vector<Trial> leaderboard;  // best first
  const Trial& best() const { return leaderboard.front(); }
};

/// Configurations are drawn up front from the spec's seed, evaluated on
/// `trial_seeds`, and ranked by mean validation accuracy, ties to lower
/// total loss, then to lower trial index.
std::vector<GlamHyperParams> sample_configs(const SweepSpec& spec, const GlamHyperParams& base);
SweepResult sweep(Workspace& workspace, const SweepSpec& spec, const GlamHyperParams& base, int workers = 1);

/// Worker count from `requested`, overridden by GLAM_WORKERS when set.
int resolve_workers(int requested);

}  // namespace glam
