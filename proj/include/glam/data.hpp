#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "glam/numerics.hpp"

namespace glam {

using DenseMatrixF = Dense<float>;

enum class FeaturePrecision { double_, single };

/// Node-feature matrix, n x d, stored sparse or dense.
///
/// Products with weight matrices dispatch on the storage, so callers never
/// need to know which one they hold.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(SparseMatrix m) : storage_(std::move(m)) {}
  explicit FeatureMatrix(DenseMatrix m) : storage_(std::move(m)) {}
  explicit FeatureMatrix(DenseMatrixF m) : storage_(std::move(m)) {}

  Index rows() const;
  Index cols() const;
  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(storage_); }
  bool is_single() const { return std::holds_alternative<DenseMatrixF>(storage_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(storage_); }
  const DenseMatrix& dense() const { return std::get<DenseMatrix>(storage_); }
  const DenseMatrixF& dense_single() const { return std::get<DenseMatrixF>(storage_); }

  /// Dense storage converted to `precision`; sparse storage is returned as is.
  /// Single precision halves the cost of the products at ~1e-7 relative error.
  FeatureMatrix with_precision(FeaturePrecision precision) const;

  /// Fraction of entries that are nonzero.
  double density() const;
  Index nonzeros() const;

  DenseMatrix to_dense() const;
  SparseMatrix to_sparse() const;

  /// X * w
  DenseMatrix times(const DenseMatrix& w) const;
  /// X^T * g
  DenseMatrix transpose_times(const DenseMatrix& g) const;

  /// Inverted dropout over the stored entries; zeros stay zero.
  FeatureMatrix dropped(double rate, Rng& rng) const;

  bool all_nonnegative() const;

 private:
  std::variant<SparseMatrix, DenseMatrix, DenseMatrixF> storage_{SparseMatrix()};
};

/// Train/val/test node index sets. `train` is the labeled set; its order
/// defines the column order of the affinity model.
struct DatasetSplit {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
};

struct Dataset {
  FeatureMatrix features;
  std::vector<int> labels;
  int num_classes = 0;
  DatasetSplit split;
  std::vector<std::string> names;

  Index num_nodes() const { return features.rows(); }
};

/// Reads `features.tsv`, `labels.tsv` and `split.tsv` from `dir`.
/// Throws LoadError naming the file and line on any malformed input.
Dataset load_dataset(const std::filesystem::path& dir);

/// Reads a dataset whose split file may be absent (for make-split).
Dataset load_dataset_unsplit(const std::filesystem::path& dir);

/// Writes the three files in canonical form; inverse of load_dataset.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

void write_split(const DatasetSplit& split, const std::filesystem::path& file);
DatasetSplit read_split(const std::filesystem::path& file, Index num_nodes);

/// Checks split disjointness, index ranges and label ranges. Warns when a
/// class has no training node.
void validate_dataset(const Dataset& dataset);

/// Boosted features X * N where S = X^T X and N = D^{-1/2} S D^{-1/2} with D
/// the row sums of S. Zero-sum rows of S give zero rows of N. The result is
/// stored dense when its density exceeds `dense_threshold`.
FeatureMatrix boosted_features(const FeatureMatrix& x, double dense_threshold = 0.25);

struct SplitSizes {
  int per_class = 20;
  int val = 500;
  int test = 1000;
};

/// Samples `per_class` training nodes per class, then `val` and `test` nodes
/// from the remainder. Throws ParameterError when a class is too small or the
/// remainder cannot hold val + test.
DatasetSplit make_split(const std::vector<int>& labels, int num_classes, const SplitSizes& sizes, Rng rng);

}  // namespace glam
