#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "glam/data.hpp"
#include "glam/graphs.hpp"
#include "glam/random.hpp"

namespace glam::testutil {

inline std::filesystem::path data_dir() { return GLAM_TEST_DATA; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("glam_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline DenseMatrix random_dense(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  DenseMatrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(lo, hi);
  return m;
}

/// Random sparse matrix with about `fill` of the entries set, values in (lo, hi).
inline SparseMatrix random_sparse(Index rows, Index cols, double fill, Rng& rng, double lo = 0.1, double hi = 2.0) {
  std::vector<Eigen::Triplet<double>> t;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (rng.uniform() < fill) t.emplace_back(i, j, rng.uniform(lo, hi));
    }
  }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

/// Random directed graph; self-loops only when `self_loops` is set.
inline SparseGraph random_graph(Index n, int max_entries, Rng& rng, bool unit = false, bool self_loops = false) {
  std::vector<Edge> edges;
  std::vector<char> taken(n * n, 0);
  const int want = static_cast<int>(rng.below(max_entries + 1));
  for (int tries = 0; static_cast<int>(edges.size()) < want && tries < 20 * max_entries + 20; ++tries) {
    const Index i = rng.below(n), j = rng.below(n);
    if ((i == j && !self_loops) || taken[i * n + j]) continue;
    taken[i * n + j] = 1;
    edges.push_back({i, j, unit ? 1.0 : rng.uniform(0.05, 2.0)});
  }
  return SparseGraph::from_edges(n, edges);
}

inline SparseGraph symmetric_unit_graph(Index n, int max_pairs, Rng& rng) {
  std::vector<Edge> edges;
  std::vector<char> taken(n * n, 0);
  const int want = static_cast<int>(rng.below(max_pairs + 1));
  for (int tries = 0; static_cast<int>(edges.size()) < 2 * want && tries < 20 * max_pairs + 20; ++tries) {
    const Index i = rng.below(n), j = rng.below(n);
    if (i == j || taken[i * n + j]) continue;
    taken[i * n + j] = taken[j * n + i] = 1;
    edges.push_back({i, j, 1.0});
    edges.push_back({j, i, 1.0});
  }
  return SparseGraph::from_edges(n, edges);
}

inline std::vector<int> random_labels(Index n, int classes, Rng& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.below(classes));
  return y;
}

inline DenseMatrix to_dense(const SparseGraph& g) { return DenseMatrix(g.adjacency()); }

/// Small separable dataset: `per_class` nodes per class, features are a noisy
/// one-hot block per class. The first `train_per_class` nodes of each class
/// are labeled, the next `val_per_class` validation, the rest test.
inline Dataset toy_dataset(int classes, int per_class, int train_per_class, int val_per_class, Rng rng,
                           int extra_features = 2) {
  const Index n = classes * per_class;
  const Index d = classes * 2 + extra_features;
  std::vector<Eigen::Triplet<double>> t;
  Dataset ds;
  ds.num_classes = classes;
  for (int c = 0; c < classes; ++c) {
    for (int k = 0; k < per_class; ++k) {
      const Index i = c * per_class + k;
      ds.labels.push_back(c);
      t.emplace_back(i, 2 * c, 1.0 + rng.uniform(0.0, 0.5));
      t.emplace_back(i, 2 * c + 1, rng.uniform(0.2, 1.0));
      for (int e = 0; e < extra_features; ++e) {
        if (rng.uniform() < 0.5) t.emplace_back(i, classes * 2 + e, rng.uniform(0.0, 0.5));
      }
      if (k < train_per_class) {
        ds.split.train.push_back(i);
      } else if (k < train_per_class + val_per_class) {
        ds.split.val.push_back(i);
      } else {
        ds.split.test.push_back(i);
      }
    }
  }
  SparseMatrix x(n, d);
  x.setFromTriplets(t.begin(), t.end());
  x.makeCompressed();
  ds.features = FeatureMatrix(std::move(x));
  return ds;
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)}); }

/// Largest |a - b| over the matrix, scaled by max(|a|max, |b|max, floor).
inline double matrix_relative_error(const DenseMatrix& a, const DenseMatrix& b, double floor = 1e-6) {
  const double scale = std::max({floor, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace glam::testutil
