#include "glam/analysis.hpp"

#include <spdlog/spdlog.h>

#include <sstream>

#include "glam/baseline_gcn.hpp"
#include "glam/parallel.hpp"
#include "glam/serialize.hpp"

namespace glam {

namespace {

void check_cover(const SparseMatrix& head, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) < head.rows()) throw DimensionError("labels do not cover every node");
}

CurvePoint summarize(double x, const SeedSummary& s) {
  std::vector<double> acc;
  for (const auto& r : s.reports) acc.push_back(r.test_accuracy.value_or(0.0));
  const auto [mean, sd] = mean_and_std(acc);
  return {x, mean, sd, static_cast<int>(acc.size()), static_cast<int>(s.failures.size())};
}

}  // namespace

double bad_neighbor_ratio(const AttentionView& view, const std::vector<int>& labels, bool exclude_self_loops) {
  if (view.heads.empty()) {
    spdlog::warn("bad neighbor ratio of an empty view is reported as 0");
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& head : view.heads) {
    check_cover(head, labels);
    Index exposed = 0, bad = 0;
    for (Index i = 0; i < head.outerSize(); ++i) {
      double good_w = 0.0, bad_w = 0.0;
      for (SparseMatrix::InnerIterator it(head, i); it; ++it) {
        if (it.value() < 0.0) throw ParameterError("attention weights must be nonnegative");
        if (it.col() == i && exclude_self_loops) continue;
        (labels[i] == labels[it.col()] ? good_w : bad_w) += it.value();
      }
      if (bad_w > 0.0) {
        ++exposed;
        bad += bad_w > good_w;
      }
    }
    if (exposed == 0) {
      spdlog::warn("no node has a cross-label neighbor; bad neighbor ratio reported as 0");
      continue;
    }
    sum += 100.0 * static_cast<double>(bad) / static_cast<double>(exposed);
  }
  return sum / static_cast<double>(view.heads.size());
}

double weighted_homophily(const AttentionView& view, const std::vector<int>& labels, bool exclude_self_loops) {
  if (view.heads.empty()) {
    spdlog::warn("weighted homophily of an empty view is reported as 0");
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& head : view.heads) {
    check_cover(head, labels);
    double good_w = 0.0, all_w = 0.0;
    for (Index i = 0; i < head.outerSize(); ++i) {
      for (SparseMatrix::InnerIterator it(head, i); it; ++it) {
        if (it.value() < 0.0) throw ParameterError("attention weights must be nonnegative");
        if (it.col() == i && exclude_self_loops) continue;
        all_w += it.value();
        if (labels[i] == labels[it.col()]) good_w += it.value();
      }
    }
    if (all_w == 0.0) {
      spdlog::warn("weighted homophily of a view without weight is reported as 0");
      continue;
    }
    sum += 100.0 * (good_w / all_w);
  }
  return sum / static_cast<double>(view.heads.size());
}

std::string curve_csv(const Curve& curve) {
  std::ostringstream out;
  out << "x,mean,std,n_seeds\n";
  for (const auto& p : curve) {
    out << format_double(p.x) << ',' << format_double(p.mean) << ',' << format_double(p.std) << ',' << p.n_seeds
        << '\n';
  }
  return out.str();
}

Curve noise_experiment(Workspace& workspace, const GlamHyperParams& hp, const std::vector<double>& fractions,
                       NoiseMode mode, const std::vector<std::uint64_t>& seeds, int workers) {
  const GlamHyperParams gcn = gcn_config(hp);
  const auto& labels = workspace.dataset().labels;
  const SparseGraph perfect = perfect_knn(workspace.knn(gcn.k, gcn.boosted), labels);
  const int per_point = static_cast<int>(seeds.size());
  const int jobs = static_cast<int>(fractions.size()) * per_point;
  std::vector<SeedSummary> results(jobs);
  parallel_for(jobs, workers, [&](int job) {
    const double f = fractions[job / per_point];
    const auto seed = seeds[job % per_point];
    Rng rng = Rng(seed).stream("noise");
    const SparseGraph g = mode == NoiseMode::add_noise ? add_noisy_edges(perfect, f, labels, rng)
                                                       : remove_good_edges(perfect, f, labels, rng);
    TrainOptions options;
    options.graph = &g;
    results[job] = evaluate_seeds(workspace, gcn, {seed}, 1, options);
  });

  Curve curve;
  for (std::size_t p = 0; p < fractions.size(); ++p) {
    SeedSummary merged;
    for (int s = 0; s < per_point; ++s) {
      auto& one = results[p * per_point + s];
      for (auto& r : one.reports) merged.reports.push_back(std::move(r));
      for (auto& e : one.failures) merged.failures.push_back(std::move(e));
    }
    curve.push_back(summarize(fractions[p], merged));
    spdlog::info("noise fraction {}: {:.2f} +- {:.2f}", fractions[p], curve.back().mean, curve.back().std);
  }
  return curve;
}

Curve affinity_weight_sweep(Workspace& workspace, const GlamHyperParams& hp, const std::vector<double>& weights,
                            const std::vector<std::uint64_t>& seeds, int workers) {
  Curve curve;
  for (double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw ParameterError("affinity weights must lie in [0, 1]");
    GlamHyperParams run = hp;
    run.model = ModelKind::glam;
    run.w_ck = 1.0 - w;
    curve.push_back(summarize(w, evaluate_seeds(workspace, run, seeds, workers)));
    spdlog::info("w_A {}: {:.2f} +- {:.2f}", w, curve.back().mean, curve.back().std);
  }
  return curve;
}

}  // namespace glam
