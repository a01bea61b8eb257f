#include "glam/data.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace glam {

namespace {

/// Line reader that skips blank and '#' lines and remembers line numbers.
class TableReader {
 public:
  explicit TableReader(const std::filesystem::path& file) : file_(file), in_(file) {
    if (!in_) throw LoadError(file.string() + ": cannot open file");
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      fields.clear();
      for (std::string f; ss >> f;) fields.push_back(f);
      if (!fields.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw LoadError(file_.string() + ":" + std::to_string(line_no_) + ": " + what);
  }

  long long integer(const std::string& s) const {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("expected an integer, got '" + s + "'");
    return v;
  }

  double real(const std::string& s) const {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) fail("expected a number, got '" + s + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("expected a number, got '" + s + "'");
    }
  }

  void expect_fields(const std::vector<std::string>& fields, std::size_t n) const {
    if (fields.size() != n) fail("expected " + std::to_string(n) + " fields, got " + std::to_string(fields.size()));
  }

 private:
  std::filesystem::path file_;
  std::ifstream in_;
  long line_no_ = 0;
};

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

FeatureMatrix read_features(const std::filesystem::path& file) {
  TableReader reader(file);
  std::vector<std::string> f;
  if (!reader.next(f)) reader.fail("missing 'n d' header");
  reader.expect_fields(f, 2);
  const long long n = reader.integer(f[0]), d = reader.integer(f[1]);
  if (n <= 0 || d <= 0) reader.fail("header dimensions must be positive");

  std::vector<Eigen::Triplet<double>> entries;
  std::set<std::pair<long long, long long>> seen;
  while (reader.next(f)) {
    reader.expect_fields(f, 3);
    const long long i = reader.integer(f[0]), j = reader.integer(f[1]);
    const double v = reader.real(f[2]);
    if (i < 0 || i >= n) reader.fail("node index " + std::to_string(i) + " out of range [0, " + std::to_string(n) + ")");
    if (j < 0 || j >= d) reader.fail("feature index " + std::to_string(j) + " out of range [0, " + std::to_string(d) + ")");
    if (!std::isfinite(v)) reader.fail("non-finite feature value");
    if (!seen.emplace(i, j).second) reader.fail("duplicate coordinate (" + f[0] + ", " + f[1] + ")");
    entries.emplace_back(static_cast<Index>(i), static_cast<Index>(j), v);
  }
  SparseMatrix m(n, d);
  m.setFromTriplets(entries.begin(), entries.end());
  m.makeCompressed();
  return FeatureMatrix(std::move(m));
}

std::pair<std::vector<int>, int> read_labels(const std::filesystem::path& file, Index n) {
  TableReader reader(file);
  std::vector<std::string> f;
  if (!reader.next(f)) reader.fail("missing class-count header");
  reader.expect_fields(f, 1);
  const long long c = reader.integer(f[0]);
  if (c <= 0) reader.fail("class count must be positive");
  std::vector<int> labels(n, -1);
  while (reader.next(f)) {
    reader.expect_fields(f, 2);
    const long long i = reader.integer(f[0]), y = reader.integer(f[1]);
    if (i < 0 || i >= n) reader.fail("node index " + std::to_string(i) + " out of range [0, " + std::to_string(n) + ")");
    if (y < 0 || y >= c) reader.fail("label " + std::to_string(y) + " out of range [0, " + std::to_string(c) + ")");
    if (labels[i] != -1) reader.fail("duplicate label for node " + std::to_string(i));
    labels[i] = static_cast<int>(y);
  }
  for (Index i = 0; i < n; ++i) {
    if (labels[i] == -1) throw LoadError(file.string() + ": node " + std::to_string(i) + " has no label");
  }
  return {std::move(labels), static_cast<int>(c)};
}

void check_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw LoadError(dir.string() + ": dataset directory not found");
}

}  // namespace

Index FeatureMatrix::rows() const {
  return std::visit([](const auto& m) { return m.rows(); }, storage_);
}

Index FeatureMatrix::cols() const {
  return std::visit([](const auto& m) { return m.cols(); }, storage_);
}

Index FeatureMatrix::nonzeros() const {
  if (is_sparse()) {
    const auto& s = sparse();
    Index count = 0;
    for (Index k = 0; k < s.nonZeros(); ++k) count += s.valuePtr()[k] != 0.0;
    return count;
  }
  if (is_single()) return (dense_single().array() != 0.0f).count();
  return (dense().array() != 0.0).count();
}

double FeatureMatrix::density() const {
  const double total = static_cast<double>(rows()) * static_cast<double>(cols());
  return total == 0 ? 0.0 : static_cast<double>(nonzeros()) / total;
}

DenseMatrix FeatureMatrix::to_dense() const {
  if (is_sparse()) return DenseMatrix(sparse());
  if (is_single()) return dense_single().cast<double>();
  return dense();
}

SparseMatrix FeatureMatrix::to_sparse() const {
  if (is_sparse()) return sparse();
  return to_dense().sparseView();
}

FeatureMatrix FeatureMatrix::with_precision(FeaturePrecision precision) const {
  if (is_sparse()) return *this;
  if (precision == FeaturePrecision::single) {
    return is_single() ? *this : FeatureMatrix(DenseMatrixF(dense().cast<float>()));
  }
  return FeatureMatrix(to_dense());
}

DenseMatrix FeatureMatrix::times(const DenseMatrix& w) const {
  if (cols() != w.rows()) throw DimensionError("FeatureMatrix::times: inner dimensions differ");
  if (is_sparse()) return spmm(sparse(), w);
  if (is_single()) return (dense_single() * w.cast<float>()).cast<double>();
  return dense() * w;
}

DenseMatrix FeatureMatrix::transpose_times(const DenseMatrix& g) const {
  if (rows() != g.rows()) throw DimensionError("FeatureMatrix::transpose_times: row counts differ");
  if (is_sparse()) {
    const auto& s = sparse();
    DenseMatrix out = DenseMatrix::Zero(s.cols(), g.cols());
    for (Index i = 0; i < s.outerSize(); ++i) {
      for (SparseMatrix::InnerIterator it(s, i); it; ++it) out.row(it.col()).noalias() += it.value() * g.row(i);
    }
    return out;
  }
  if (is_single()) return (dense_single().transpose() * g.cast<float>()).cast<double>();
  return dense().transpose() * g;
}

FeatureMatrix FeatureMatrix::dropped(double rate, Rng& rng) const {
  check_dropout_rate(rate);
  if (rate == 0.0) return *this;
  const double keep = 1.0 / (1.0 - rate);
  if (is_sparse()) {
    SparseMatrix s = sparse();
    Eigen::VectorXd scale(s.nonZeros());
    fill_dropout_scales(rng, rate, keep, scale.data(), scale.size());
    Eigen::Map<Eigen::VectorXd>(s.valuePtr(), s.nonZeros()).array() *= scale.array();
    return FeatureMatrix(std::move(s));
  }
  if (is_single()) {
    DenseMatrixF d(rows(), cols());
    fill_dropout_scales(rng, rate, keep, d.data(), d.size());
    d.array() *= dense_single().array();
    return FeatureMatrix(std::move(d));
  }
  DenseMatrix scale(rows(), cols());
  fill_dropout_scales(rng, rate, keep, scale.data(), scale.size());
  scale.array() *= dense().array();
  return FeatureMatrix(std::move(scale));
}

bool FeatureMatrix::all_nonnegative() const {
  if (is_sparse()) {
    const auto& s = sparse();
    return std::all_of(s.valuePtr(), s.valuePtr() + s.nonZeros(), [](double v) { return v >= 0.0; });
  }
  if (is_single()) return (dense_single().array() >= 0.0f).all();
  return (dense().array() >= 0.0).all();
}

void validate_dataset(const Dataset& ds) {
  const Index n = ds.num_nodes();
  if (static_cast<Index>(ds.labels.size()) != n) throw LoadError("label count does not match node count");
  for (int y : ds.labels) {
    if (y < 0 || y >= ds.num_classes) throw LoadError("label out of range");
  }
  std::vector<char> role(n, 0);
  auto mark = [&](const std::vector<Index>& idx, char r, const char* name) {
    for (Index i : idx) {
      if (i < 0 || i >= n) throw LoadError(std::string("split: ") + name + " index out of range");
      if (role[i] != 0) throw LoadError("split: node " + std::to_string(i) + " appears in more than one set");
      role[i] = r;
    }
  };
  mark(ds.split.train, 1, "train");
  mark(ds.split.val, 2, "val");
  mark(ds.split.test, 3, "test");
  if (ds.split.train.empty()) throw LoadError("split: train set is empty");
  if (ds.split.val.empty()) throw LoadError("split: val set is empty");
  std::vector<char> present(ds.num_classes, 0);
  for (Index i : ds.split.train) present[ds.labels[i]] = 1;
  for (int c = 0; c < ds.num_classes; ++c) {
    if (!present[c]) spdlog::warn("class {} has no training node", c);
  }
}

DatasetSplit read_split(const std::filesystem::path& file, Index n) {
  TableReader reader(file);
  DatasetSplit split;
  std::vector<char> seen(n, 0);
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.expect_fields(f, 2);
    const long long i = reader.integer(f[0]);
    if (i < 0 || i >= n) reader.fail("node index " + std::to_string(i) + " out of range [0, " + std::to_string(n) + ")");
    if (seen[i]) reader.fail("node " + std::to_string(i) + " listed twice");
    seen[i] = 1;
    if (f[1] == "train") {
      split.train.push_back(i);
    } else if (f[1] == "val") {
      split.val.push_back(i);
    } else if (f[1] == "test") {
      split.test.push_back(i);
    } else {
      reader.fail("unknown role '" + f[1] + "'");
    }
  }
  return split;
}

Dataset load_dataset_unsplit(const std::filesystem::path& dir) {
  check_directory(dir);
  Dataset ds;
  ds.features = read_features(dir / "features.tsv");
  std::tie(ds.labels, ds.num_classes) = read_labels(dir / "labels.tsv", ds.features.rows());
  return ds;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds = load_dataset_unsplit(dir);
  ds.split = read_split(dir / "split.tsv", ds.num_nodes());
  validate_dataset(ds);
  return ds;
}

void write_split(const DatasetSplit& split, const std::filesystem::path& file) {
  std::vector<std::pair<Index, const char*>> rows;
  for (Index i : split.train) rows.emplace_back(i, "train");
  for (Index i : split.val) rows.emplace_back(i, "val");
  for (Index i : split.test) rows.emplace_back(i, "test");
  std::sort(rows.begin(), rows.end());
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  for (const auto& [i, role] : rows) out << i << ' ' << role << '\n';
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "features.tsv");
    if (!out) throw LoadError((dir / "features.tsv").string() + ": cannot write");
    out << ds.features.rows() << ' ' << ds.features.cols() << '\n';
    const SparseMatrix s = ds.features.to_sparse();
    for (Index i = 0; i < s.outerSize(); ++i) {
      for (SparseMatrix::InnerIterator it(s, i); it; ++it) {
        out << i << ' ' << it.col() << ' ' << format_value(it.value()) << '\n';
      }
    }
  }
  {
    std::ofstream out(dir / "labels.tsv");
    out << ds.num_classes << '\n';
    for (std::size_t i = 0; i < ds.labels.size(); ++i) out << i << ' ' << ds.labels[i] << '\n';
  }
  write_split(ds.split, dir / "split.tsv");
}

FeatureMatrix boosted_features(const FeatureMatrix& x, double dense_threshold) {
  const SparseMatrix xs = x.to_sparse();
  // Feature co-occurrence S = X^T X is symmetric, so row sums equal column sums.
  DenseMatrix s = DenseMatrix(xs.transpose() * xs);
  Eigen::VectorXd degree = s.rowwise().sum();
  Eigen::VectorXd inv_sqrt(degree.size());
  for (Index k = 0; k < degree.size(); ++k) inv_sqrt(k) = degree(k) > 0.0 ? 1.0 / std::sqrt(degree(k)) : 0.0;
  DenseMatrix normalized = inv_sqrt.asDiagonal() * s * inv_sqrt.asDiagonal();
  DenseMatrix out = spmm(xs, normalized);
  const double density = out.size() == 0 ? 0.0 : static_cast<double>((out.array() != 0.0).count()) / out.size();
  if (density > dense_threshold) return FeatureMatrix(std::move(out));
  SparseMatrix sparse_out = out.sparseView();
  sparse_out.makeCompressed();
  return FeatureMatrix(std::move(sparse_out));
}

DatasetSplit make_split(const std::vector<int>& labels, int num_classes, const SplitSizes& sizes, Rng rng) {
  const Index n = static_cast<Index>(labels.size());
  std::vector<std::vector<Index>> by_class(num_classes);
  for (Index i = 0; i < n; ++i) by_class.at(labels[i]).push_back(i);

  auto shuffle = [&rng](std::vector<Index>& v) {
    for (std::size_t k = v.size(); k > 1; --k) std::swap(v[k - 1], v[rng.below(k)]);
  };

  DatasetSplit split;
  std::vector<char> used(n, 0);
  for (int c = 0; c < num_classes; ++c) {
    auto& members = by_class[c];
    if (static_cast<int>(members.size()) < sizes.per_class) {
      throw ParameterError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                           " nodes, fewer than the requested " + std::to_string(sizes.per_class));
    }
    shuffle(members);
    for (int k = 0; k < sizes.per_class; ++k) {
      split.train.push_back(members[k]);
      used[members[k]] = 1;
    }
  }
  std::sort(split.train.begin(), split.train.end());

  std::vector<Index> rest;
  for (Index i = 0; i < n; ++i) {
    if (!used[i]) rest.push_back(i);
  }
  if (static_cast<Index>(rest.size()) < sizes.val + sizes.test) {
    throw ParameterError("not enough unlabeled nodes for the requested val/test sizes");
  }
  shuffle(rest);
  split.val.assign(rest.begin(), rest.begin() + sizes.val);
  split.test.assign(rest.begin() + sizes.val, rest.begin() + sizes.val + sizes.test);
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace glam
