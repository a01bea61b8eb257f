#include "glam/graphs.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace glam {

namespace {

std::uint64_t pair_key(Index a, Index b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

/// Undirected non-self-loop pairs present in either direction, as (min, max).
std::vector<std::pair<Index, Index>> undirected_pairs(const SparseGraph& g) {
  std::vector<std::pair<Index, Index>> pairs;
  const auto& a = g.adjacency();
  for (Index i = 0; i < a.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      const Index j = it.col();
      if (i == j) continue;
      // Keep (min, max) once: from the lower endpoint, or from the higher one
      // when the reverse entry is missing.
      if (i < j || !g.has_edge(j, i)) pairs.emplace_back(std::min(i, j), std::max(i, j));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

void check_labels(const SparseGraph& g, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) < g.num_nodes()) {
    throw DimensionError("labels cover " + std::to_string(labels.size()) + " nodes, graph has " +
                         std::to_string(g.num_nodes()));
  }
}

}  // namespace

SparseGraph SparseGraph::from_edges(Index n, const std::vector<Edge>& edges) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(edges.size());
  std::unordered_set<std::uint64_t> seen;
  for (const auto& e : edges) {
    if (e.dest < 0 || e.dest >= n || e.src < 0 || e.src >= n) {
      throw DimensionError("edge (" + std::to_string(e.dest) + ", " + std::to_string(e.src) + ") out of range for n=" +
                           std::to_string(n));
    }
    if (!(std::isfinite(e.weight) && e.weight > 0.0)) {
      throw ParameterError("edge weights must be finite and positive");
    }
    const std::uint64_t key = (static_cast<std::uint64_t>(e.dest) << 32) | static_cast<std::uint64_t>(e.src);
    if (!seen.insert(key).second) {
      throw ParameterError("duplicate edge (" + std::to_string(e.dest) + ", " + std::to_string(e.src) + ")");
    }
    triplets.emplace_back(e.dest, e.src, e.weight);
  }
  SparseGraph g(n);
  g.adjacency_.setFromTriplets(triplets.begin(), triplets.end());
  g.adjacency_.makeCompressed();
  return g;
}

SparseGraph SparseGraph::from_adjacency(SparseMatrix adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw DimensionError("adjacency must be square");
  adjacency.prune([](Index, Index, double v) { return v != 0.0; });
  adjacency.makeCompressed();
  SparseGraph g;
  g.adjacency_ = std::move(adjacency);
  return g;
}

std::vector<Edge> SparseGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(adjacency_.nonZeros());
  for (Index i = 0; i < adjacency_.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(adjacency_, i); it; ++it) out.push_back({i, it.col(), it.value()});
  }
  return out;
}

bool SparseGraph::is_symmetric() const {
  for (const auto& e : edges()) {
    if (weight(e.src, e.dest) != e.weight) return false;
  }
  return true;
}

SparseGraph knn_graph(const FeatureMatrix& x, int k) {
  const Index n = x.rows();
  if (k < 1) throw ParameterError("kNN requires k >= 1");
  if (k >= n) throw ParameterError("kNN requires k < n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");

  DenseMatrix unit = x.to_dense();
  std::vector<char> usable(n, 1);
  Index zero_rows = 0;
  for (Index i = 0; i < n; ++i) {
    const double norm = unit.row(i).norm();
    if (norm > 0.0) {
      unit.row(i) /= norm;
    } else {
      usable[i] = 0;
      ++zero_rows;
    }
  }
  if (zero_rows > 0) spdlog::warn("kNN: {} node(s) have all-zero features and get no neighbors", zero_rows);

  std::vector<Eigen::Triplet<double>> picks;
  picks.reserve(static_cast<std::size_t>(n) * k);
  std::vector<Index> candidates;
  candidates.reserve(n);
  constexpr Index kBlock = 256;
  for (Index start = 0; start < n; start += kBlock) {
    const Index rows = std::min(kBlock, n - start);
    DenseMatrix sim = unit.middleRows(start, rows) * unit.transpose();
    // Rounded so that cosines equal up to floating error tie and go to the lower index.
    sim = (sim.array() * 0x1p40).round();
    for (Index r = 0; r < rows; ++r) {
      const Index i = start + r;
      if (!usable[i]) continue;
      candidates.clear();
      for (Index j = 0; j < n; ++j) {
        if (j != i && usable[j]) candidates.push_back(j);
      }
      const auto take = std::min<std::size_t>(k, candidates.size());
      auto better = [&](Index a, Index b) {
        const double sa = sim(r, a), sb = sim(r, b);
        return sa != sb ? sa > sb : a < b;
      };
      std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end(), better);
      for (std::size_t t = 0; t < take; ++t) picks.emplace_back(i, candidates[t], 1.0);
    }
  }
  SparseMatrix directed(n, n);
  directed.setFromTriplets(picks.begin(), picks.end());
  SparseMatrix transposed = directed.transpose();
  SparseMatrix both = directed + transposed;
  for (Index k2 = 0; k2 < both.nonZeros(); ++k2) both.valuePtr()[k2] = 1.0;
  return SparseGraph::from_adjacency(std::move(both));
}

SparseGraph crop_incoming_to_labeled(const SparseGraph& g, const std::vector<Index>& labeled) {
  std::vector<char> is_labeled(g.num_nodes(), 0);
  for (Index t : labeled) {
    if (t < 0 || t >= g.num_nodes()) throw DimensionError("labeled node index out of range");
    is_labeled[t] = 1;
  }
  SparseMatrix a = g.adjacency();
  a.prune([&](Index row, Index, double) { return !is_labeled[row]; });
  return SparseGraph::from_adjacency(std::move(a));
}

SparseGraph combine_graphs(const SparseGraph& g_a, const SparseGraph& g_ck, double w_a) {
  if (g_a.num_nodes() != g_ck.num_nodes()) throw DimensionError("combine_graphs: node counts differ");
  if (!(w_a >= 0.0 && w_a <= 1.0)) throw ParameterError("combine_graphs: w_a must lie in [0, 1]");
  if (w_a == 0.0) return g_ck;
  if (w_a == 1.0) return g_a;
  SparseMatrix sum = w_a * g_a.adjacency() + (1.0 - w_a) * g_ck.adjacency();
  return SparseGraph::from_adjacency(std::move(sum));
}

SparseGraph indegree_laplacian(const SparseGraph& g) {
  const Index n = g.num_nodes();
  SparseMatrix eye(n, n);
  eye.setIdentity();
  SparseMatrix with_loops = g.adjacency() + eye;
  Eigen::VectorXd inv_sqrt(n);
  for (Index i = 0; i < n; ++i) {
    double degree = 0.0;
    for (SparseMatrix::InnerIterator it(with_loops, i); it; ++it) degree += it.value();
    inv_sqrt(i) = 1.0 / std::sqrt(degree);
  }
  for (Index i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(with_loops, i); it; ++it) {
      it.valueRef() *= inv_sqrt(i) * inv_sqrt(it.col());
    }
  }
  return SparseGraph::from_adjacency(std::move(with_loops));
}

double homophily(const SparseGraph& g, const std::vector<int>& labels) {
  check_labels(g, labels);
  Index same = 0, total = 0;
  for (const auto& e : g.edges()) {
    if (e.dest == e.src) continue;
    ++total;
    same += labels[e.dest] == labels[e.src];
  }
  if (total == 0) {
    spdlog::warn("homophily of a graph without edges is reported as 0");
    return 0.0;
  }
  return 100.0 * static_cast<double>(same) / static_cast<double>(total);
}

SparseGraph perfect_knn(const SparseGraph& g, const std::vector<int>& labels) {
  check_labels(g, labels);
  SparseMatrix a = g.adjacency();
  a.prune([&](Index row, Index col, double) { return labels[row] == labels[col]; });
  return SparseGraph::from_adjacency(std::move(a));
}

SparseGraph add_noisy_edges(const SparseGraph& g, double fraction, const std::vector<int>& labels, Rng& rng) {
  check_labels(g, labels);
  if (!(fraction >= 0.0)) throw ParameterError("add_noisy_edges: fraction must be >= 0");
  const Index n = g.num_nodes();
  const auto existing = undirected_pairs(g);
  const auto wanted = static_cast<std::uint64_t>(std::ceil(fraction * static_cast<double>(existing.size()) - 1e-9));
  if (wanted == 0) return g;

  std::unordered_set<std::uint64_t> taken;
  for (const auto& [a, b] : existing) taken.insert(pair_key(a, b));

  // Count cross-label candidate pairs exactly to decide between rejection
  // sampling and full enumeration.
  std::vector<std::uint64_t> class_size;
  for (Index i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    if (class_size.size() <= c) class_size.resize(c + 1, 0);
    ++class_size[c];
  }
  std::uint64_t same_pairs = 0;
  for (auto s : class_size) same_pairs += s * (s - (s > 0 ? 1 : 0)) / 2;
  const std::uint64_t all_pairs = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1) / 2;
  std::uint64_t existing_cross = 0;
  for (const auto& [a, b] : existing) existing_cross += labels[a] != labels[b];
  const std::uint64_t available = all_pairs - same_pairs - existing_cross;

  std::vector<std::pair<Index, Index>> chosen;
  if (wanted >= available || available <= 4 * wanted) {
    std::vector<std::pair<Index, Index>> pool;
    for (Index a = 0; a < n; ++a) {
      for (Index b = a + 1; b < n; ++b) {
        if (labels[a] != labels[b] && !taken.count(pair_key(a, b))) pool.emplace_back(a, b);
      }
    }
    if (wanted > pool.size()) {
      spdlog::warn("add_noisy_edges: requested {} new pairs but only {} candidates exist", wanted, pool.size());
    }
    const std::size_t count = std::min<std::size_t>(wanted, pool.size());
    for (std::size_t t = 0; t < count; ++t) std::swap(pool[t], pool[t + rng.below(pool.size() - t)]);
    chosen.assign(pool.begin(), pool.begin() + count);
  } else {
    while (chosen.size() < wanted) {
      const Index a = static_cast<Index>(rng.below(n));
      const Index b = static_cast<Index>(rng.below(n));
      if (a == b || labels[a] == labels[b]) continue;
      if (!taken.insert(pair_key(a, b)).second) continue;
      chosen.emplace_back(std::min(a, b), std::max(a, b));
    }
  }

  std::vector<Edge> edges = g.edges();
  for (const auto& [a, b] : chosen) {
    edges.push_back({a, b, 1.0});
    edges.push_back({b, a, 1.0});
  }
  return SparseGraph::from_edges(n, edges);
}

SparseGraph remove_good_edges(const SparseGraph& g, double fraction, const std::vector<int>& labels, Rng& rng) {
  check_labels(g, labels);
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ParameterError("remove_good_edges: fraction must lie in [0, 1]");
  std::vector<std::pair<Index, Index>> good;
  for (const auto& p : undirected_pairs(g)) {
    if (labels[p.first] == labels[p.second]) good.push_back(p);
  }
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(good.size()) + 1e-9));
  if (count == 0) return g;
  for (std::size_t t = 0; t < count; ++t) std::swap(good[t], good[t + rng.below(good.size() - t)]);
  std::unordered_set<std::uint64_t> drop;
  for (std::size_t t = 0; t < count; ++t) drop.insert(pair_key(good[t].first, good[t].second));
  SparseMatrix a = g.adjacency();
  a.prune([&](Index row, Index col, double) { return row == col || !drop.count(pair_key(row, col)); });
  return SparseGraph::from_adjacency(std::move(a));
}

void write_edges(const SparseGraph& g, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << "# n=" << g.num_nodes() << '\n';
  char buf[32];
  for (const auto& e : g.edges()) {
    std::snprintf(buf, sizeof buf, "%.17g", e.weight);
    out << e.dest << ' ' << e.src << ' ' << buf << '\n';
  }
}

SparseGraph read_edges(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string() + ": cannot open file");
  std::string line;
  long line_no = 0;
  long long n = -1;
  std::vector<Edge> edges;
  auto fail = [&](const std::string& what) {
    throw LoadError(file.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto pos = line.find("# n="); pos != std::string::npos && n < 0) {
      try {
        n = std::stoll(line.substr(pos + 4));
      } catch (const std::logic_error&) {
        fail("malformed '# n=' header");
      }
      continue;
    }
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    long long dest, src;
    double w;
    if (!(ss >> dest)) continue;
    if (!(ss >> src >> w)) fail("expected 'dest src weight'");
    std::string extra;
    if (ss >> extra) fail("trailing field '" + extra + "'");
    if (n < 0) fail("edge line before '# n=<count>' header");
    if (dest < 0 || dest >= n || src < 0 || src >= n) fail("node index out of range");
    if (!(std::isfinite(w) && w > 0.0)) fail("weight must be finite and positive");
    edges.push_back({static_cast<Index>(dest), static_cast<Index>(src), w});
  }
  if (n < 0) throw LoadError(file.string() + ": missing '# n=<count>' header");
  try {
    return SparseGraph::from_edges(n, edges);
  } catch (const Error& e) {
    throw LoadError(file.string() + ": " + e.what());
  }
}

}  // namespace glam
