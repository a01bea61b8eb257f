#include "glam/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <functional>
#include <iostream>
#include <memory>
#include <mutex>

#include "glam/analysis.hpp"
#include "glam/baseline_gcn.hpp"
#include "glam/data.hpp"
#include "glam/parallel.hpp"
#include "glam/serialize.hpp"
#include "glam/trainer.hpp"

namespace glam {

namespace {

namespace fs = std::filesystem;

/// Hyperparameter flags staged during parsing and applied on top of the
/// config file afterwards, so flags win over the file and the file over
/// defaults.
class HyperFlags {
 public:
  void attach(CLI::App& app) {
    app.add_option("--config", config_, "JSON configuration file (e.g. a sweep's best_config.json)")
        ->check(CLI::ExistingFile);
    bind(app, "--model", model_, "glam | gcn-knn", [](auto& hp, auto& v) { hp.model = parse_model_kind(v); });
    bind(app, "--k", s_.k, "kNN neighbors", [](auto& hp, auto& v) { hp.k = v; });
    bind(app, "--w-ck", s_.w_ck, "weight of the cropped kNN graph; w_A = 1 - w_ck",
         [](auto& hp, auto& v) { hp.w_ck = v; });
    bind(app, "--beta", s_.beta, "coefficient of the affinity loss", [](auto& hp, auto& v) { hp.beta = v; });
    bind(app, "--alpha-a", s_.alpha_a, "weight decay of W1, W2", [](auto& hp, auto& v) { hp.alpha_a = v; });
    bind(app, "--alpha-c", s_.alpha_c, "weight decay of W3, W4", [](auto& hp, auto& v) { hp.alpha_c = v; });
    bind(app, "--lr", s_.lr, "Adam learning rate", [](auto& hp, auto& v) { hp.lr = v; });
    bind(app, "--dropout-a-input", s_.dropout_a_input, "affinity input dropout",
         [](auto& hp, auto& v) { hp.dropout_a_input = v; });
    bind(app, "--dropout-a-hidden", s_.dropout_a_hidden, "affinity hidden dropout",
         [](auto& hp, auto& v) { hp.dropout_a_hidden = v; });
    bind(app, "--dropout-c-input", s_.dropout_c_input, "GCN input dropout",
         [](auto& hp, auto& v) { hp.dropout_c_input = v; });
    bind(app, "--dropout-c-hidden", s_.dropout_c_hidden, "GCN hidden dropout",
         [](auto& hp, auto& v) { hp.dropout_c_hidden = v; });
    bind(app, "--h-a", s_.h_a, "affinity hidden size", [](auto& hp, auto& v) { hp.h_a = v; });
    bind(app, "--h-c", s_.h_c, "GCN hidden size", [](auto& hp, auto& v) { hp.h_c = v; });
    bind(app, "--temperature", s_.temperature, "Gumbel-softmax temperature",
         [](auto& hp, auto& v) { hp.temperature = v; });
    bind(app, "--epochs", s_.epochs, "maximum epochs (<= 500)", [](auto& hp, auto& v) { hp.epochs = v; });
    bind(app, "--patience", s_.patience, "early-stopping patience in epochs",
         [](auto& hp, auto& v) { hp.patience = v; });
    bind(app, "--seed", s_.seed, "base seed", [](auto& hp, auto& v) { hp.seed = v; });
    bind(app, "--gcn-input", gcn_input_, "raw | boosted (classifier input when --boosted)",
         [](auto& hp, auto& v) { hp.gcn_input = parse_gcn_input(v); });
    bind(app, "--feature-precision", precision_, "single | double storage of dense features",
         [](auto& hp, auto& v) { hp.feature_precision = parse_feature_precision(v); });
    bind(app, "--resample", resample_, "per-epoch | once",
         [](auto& hp, auto& v) { hp.resample = parse_resample(v); });
    bind(app, "--relaxation", relaxation_, "hard | soft affinity selection during training",
         [](auto& hp, auto& v) { hp.relaxation = parse_relaxation(v); });
    bind(app, "--adam-beta1", s_.adam.beta1, "Adam beta1", [](auto& hp, auto& v) { hp.adam.beta1 = v; });
    bind(app, "--adam-beta2", s_.adam.beta2, "Adam beta2", [](auto& hp, auto& v) { hp.adam.beta2 = v; });
    bind(app, "--adam-epsilon", s_.adam.epsilon, "Adam epsilon", [](auto& hp, auto& v) { hp.adam.epsilon = v; });
    flag(app, "--boosted", "use boosted features", [](auto& hp) { hp.boosted = true; });
    flag(app, "--raw", "use raw features everywhere", [](auto& hp) { hp.boosted = false; });
    flag(app, "--clip-affinity-weights", "cap affinity-graph weights at 1",
         [](auto& hp) { hp.clip_affinity_weights = true; });
    flag(app, "--no-straight-through", "no gradient through the sampled affinity graph",
         [](auto& hp) { hp.straight_through = false; });
  }

  GlamHyperParams resolve() const {
    GlamHyperParams hp;
    if (!config_.empty()) hp = hyperparams_from_json(read_json(config_));
    for (const auto& [opt, apply] : appliers_) {
      if (opt->count() > 0) apply(hp);
    }
    validate(hp);
    return hp;
  }

 private:
  template <typename T, typename Fn>
  void bind(CLI::App& app, const std::string& name, T& slot, const std::string& help, Fn fn) {
    CLI::Option* opt = app.add_option(name, slot, help);
    appliers_.emplace_back(opt, [&slot, fn](GlamHyperParams& hp) { fn(hp, slot); });
  }

  template <typename Fn>
  void flag(CLI::App& app, const std::string& name, const std::string& help, Fn fn) {
    appliers_.emplace_back(app.add_flag(name, help), [fn](GlamHyperParams& hp) { fn(hp); });
  }

  std::string config_;
  GlamHyperParams s_;
  std::string model_, gcn_input_, precision_, resample_, relaxation_;
  std::vector<std::pair<CLI::Option*, std::function<void(GlamHyperParams&)>>> appliers_;
};

struct Common {
  std::string dataset;
  std::string out = "glam-out";
  int workers = 1;
  std::vector<std::uint64_t> seeds;
};

void add_common(CLI::App& app, Common& c, bool seeds) {
  app.add_option("--dataset", c.dataset, "dataset directory (features.tsv, labels.tsv, split.tsv)")->required();
  app.add_option("--out", c.out, "output directory")->capture_default_str();
  app.add_option("--workers", c.workers, "parallel runs (GLAM_WORKERS overrides)")->capture_default_str();
  if (seeds) app.add_option("--seeds", c.seeds, "comma-separated seeds (default: --seed)")->delimiter(',');
}

std::vector<std::uint64_t> seeds_or(const Common& c, std::uint64_t fallback) {
  return c.seeds.empty() ? std::vector<std::uint64_t>{fallback} : c.seeds;
}

Json resolved(const std::string& command, const Common& c, const GlamHyperParams& hp,
              const std::vector<std::uint64_t>& seeds) {
  return {{"command", command}, {"dataset", c.dataset}, {"out", c.out},
          {"seeds", seeds},     {"workers", c.workers}, {"hyperparameters", to_json(hp)}};
}

Json timing(const SeedSummary& s) {
  Json per = Json::array();
  double total = 0.0;
  for (const auto& r : s.reports) {
    per.push_back({{"seed", r.seed}, {"seconds", r.seconds}, {"epochs", r.epochs.size()}});
    total += r.seconds;
  }
  return {{"runs", std::move(per)}, {"total_seconds", total}};
}

int summary_exit(const SeedSummary& s) { return s.failures.empty() ? 0 : 2; }

void print_summary(const std::string& what, const SeedSummary& s) {
  std::cout << what << ": test accuracy " << format_double(std::round(s.mean * 100.0) / 100.0) << " +- "
            << format_double(std::round(s.std * 100.0) / 100.0) << " over " << s.reports.size() << " seed(s)";
  if (!s.failures.empty()) std::cout << " (" << s.failures.size() << " diverged)";
  std::cout << '\n';
}

int cmd_train(const Common& c, const GlamHyperParams& hp) {
  const auto seeds = seeds_or(c, hp.seed);
  const fs::path out = c.out;
  write_json(resolved("train", c, hp, seeds), out / "resolved_config.json");
  Workspace ws(load_dataset(c.dataset));
  std::mutex io;
  const SeedSummary s = evaluate_seeds(ws, hp, seeds, resolve_workers(c.workers), {},
                                       [&](std::size_t, const TrainResult& r) {
                                         const std::string tag = "seed" + std::to_string(r.report.seed);
                                         std::lock_guard lock(io);
                                         write_text(epochs_csv(r.report), out / ("epochs_" + tag + ".csv"));
                                         write_json(checkpoint_to_json(r.params, r.report.hp),
                                                    out / ("checkpoint_" + tag + ".json"));
                                       });
  write_json(to_json(s), out / "report.json");
  write_json(timing(s), out / "timing.json");
  print_summary(to_string(hp.model), s);
  return summary_exit(s);
}

int cmd_sweep(const Common& c, const GlamHyperParams& base, const std::string& spec_file,
              const std::function<void(SweepSpec&)>& overrides) {
  SweepSpec spec;
  if (!spec_file.empty()) spec = sweep_spec_from_json(read_json(spec_file));
  overrides(spec);
  validate(spec);
  const fs::path out = c.out;
  Json r = resolved("sweep", c, base, spec.trial_seeds);
  r["sweep"] = to_json(spec);
  write_json(r, out / "resolved_config.json");

  Workspace ws(load_dataset(c.dataset));
  const SweepResult result = sweep(ws, spec, base, resolve_workers(c.workers));
  write_json(to_json(result), out / "leaderboard.json");
  GlamHyperParams best = result.best().hp;
  best.seed = base.seed;
  write_json(to_json(best), out / "best_config.json");
  std::cout << "best trial " << result.best().index << ": val accuracy " << format_double(result.best().val_mean)
            << '\n';
  return result.best().failed ? 2 : 0;
}

int cmd_ablate(const Common& c, const GlamHyperParams& hp) {
  const auto seeds = seeds_or(c, hp.seed);
  const fs::path out = c.out;
  write_json(resolved("ablate", c, hp, seeds), out / "resolved_config.json");
  Workspace ws(load_dataset(c.dataset));
  const int workers = resolve_workers(c.workers);

  GlamHyperParams full = hp, no_graph = hp, no_loss = hp;
  full.model = no_graph.model = no_loss.model = ModelKind::glam;
  no_graph.w_ck = 1.0;
  no_loss.beta = 0.0;
  const std::vector<std::pair<std::string, GlamHyperParams>> variants{
      {"glam", full}, {"without_affinity_graph", no_graph}, {"without_affinity_loss", no_loss}};

  Json rows = Json::array();
  std::string csv = "variant,mean,std,n_seeds\n";
  int code = 0;
  for (const auto& [name, run] : variants) {
    const SeedSummary s = evaluate_seeds(ws, run, seeds, workers);
    long built = 0;
    for (const auto& r : s.reports) built += r.affinity_graphs_built;
    if (name == "without_affinity_graph" && built != 0) {
      throw StateError("the w/o-affinity-graph variant constructed an affinity graph");
    }
    rows.push_back({{"variant", name}, {"mean", s.mean}, {"std", s.std}, {"n_seeds", s.reports.size()},
                    {"affinity_graphs_built", built}, {"failures", s.failures.size()}});
    csv += name + "," + format_double(s.mean) + "," + format_double(s.std) + "," + std::to_string(s.reports.size()) +
           "\n";
    print_summary(name, s);
    code = std::max(code, summary_exit(s));
  }
  write_json({{"rows", rows}}, out / "ablation.json");
  write_text(csv, out / "ablation.csv");
  return code;
}

Json graph_metrics(const SparseGraph& g, const SparseGraph& lap, const std::vector<int>& labels) {
  const auto raw = AttentionView::from_graph(g), norm = AttentionView::from_graph(lap);
  return {
      {"nodes", g.num_nodes()},
      {"entries", g.num_entries()},
      {"homophily", homophily(g, labels)},
      {"weighted_homophily", weighted_homophily(norm, labels)},
      {"weighted_homophily_without_self_loops", weighted_homophily(norm, labels, true)},
      {"bad_neighbor_ratio", bad_neighbor_ratio(norm, labels)},
      {"bad_neighbor_ratio_without_self_loops", bad_neighbor_ratio(norm, labels, true)},
      {"raw_weighted_homophily", weighted_homophily(raw, labels)},
      {"raw_bad_neighbor_ratio", bad_neighbor_ratio(raw, labels)},
  };
}

int cmd_graph_metrics(const Common& c, const std::string& checkpoint, const std::string& edges,
                      const std::string& export_edges) {
  if (checkpoint.empty() == edges.empty()) throw ParameterError("give exactly one of --checkpoint or --edges");
  const fs::path out = c.out;
  Json r = {{"command", "analyze graph-metrics"}, {"dataset", c.dataset}, {"out", c.out},
            {"checkpoint", checkpoint},           {"edges", edges}};
  write_json(r, out / "resolved_config.json");
  const Dataset ds = load_dataset_unsplit(c.dataset);
  SparseGraph g, lap;
  if (!edges.empty()) {
    g = read_edges(edges);
    if (g.num_nodes() != ds.num_nodes()) throw DimensionError("edge file node count differs from the dataset");
    lap = indegree_laplacian(g);
  } else {
    auto [params, hp] = checkpoint_from_json(read_json(checkpoint));
    Workspace ws(load_dataset(c.dataset));
    const GlamInputs inputs = ws.inputs(hp);
    if (params.affinity.labeled != inputs.labeled) throw LoadError("checkpoint labeled set differs from the split");
    ForwardRng idle{Rng(0), Rng(0), Rng(0)};
    const GlamForward fwd = glam_forward(params, hp, inputs, false, idle);
    g = fwd.graph;
    lap = fwd.laplacian;
  }
  const Json m = graph_metrics(g, lap, ds.labels);
  write_json(m, out / "metrics.json");
  if (!export_edges.empty()) write_edges(lap, export_edges);
  std::cout << m.dump(2) << '\n';
  return 0;
}

int cmd_curve(const std::string& name, const Common& c, const GlamHyperParams& hp, Json extra,
              const std::function<Curve(Workspace&, const std::vector<std::uint64_t>&, int)>& run) {
  const auto seeds = seeds_or(c, hp.seed);
  const fs::path out = c.out;
  Json r = resolved("analyze " + name, c, hp, seeds);
  r.update(extra);
  write_json(r, out / "resolved_config.json");
  Workspace ws(load_dataset(c.dataset));
  const Curve curve = run(ws, seeds, resolve_workers(c.workers));
  write_text(curve_csv(curve), out / (name + ".csv"));
  Json points = Json::array();
  int failed = 0;
  for (const auto& p : curve) {
    points.push_back({{"x", p.x}, {"mean", p.mean}, {"std", p.std}, {"n_seeds", p.n_seeds}, {"failed", p.failed}});
    failed += p.failed;
  }
  write_json({{"points", points}}, out / (name + ".json"));
  std::cout << curve_csv(curve);
  return failed ? 2 : 0;
}

int cmd_make_split(const std::string& dataset, const std::string& out, const SplitSizes& sizes,
                   std::uint64_t seed) {
  const Dataset ds = load_dataset_unsplit(dataset);
  const DatasetSplit split = make_split(ds.labels, ds.num_classes, sizes, Rng(seed).stream("split"));
  const fs::path file = out.empty() ? fs::path(dataset) / "split.tsv" : fs::path(out);
  write_split(split, file);
  std::cout << "wrote " << file.string() << ": " << split.train.size() << " train, " << split.val.size() << " val, "
            << split.test.size() << " test\n";
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"GLAM: graph learning by label affinity, with diagnostics and experiment harnesses", "glam"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every command");

  std::function<int()> action;

  Common train_c;
  HyperFlags train_hp;
  auto* train = app.add_subcommand("train", "train over one or more seeds and report mean +- std test accuracy");
  add_common(*train, train_c, true);
  train_hp.attach(*train);
  train->callback([&] { action = [&] { return cmd_train(train_c, train_hp.resolve()); }; });

  Common sweep_c;
  HyperFlags sweep_hp;
  std::string spec_file;
  int budget = 0;
  std::uint64_t sweep_seed = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "random search; writes leaderboard.json and best_config.json");
  add_common(*sweep_cmd, sweep_c, false);
  sweep_hp.attach(*sweep_cmd);
  sweep_cmd->add_option("--spec", spec_file, "sweep spec JSON (ranges, budget, trial seeds)")->check(CLI::ExistingFile);
  auto* budget_opt = sweep_cmd->add_option("--budget", budget, "number of configurations (default 200)");
  auto* sweep_seed_opt = sweep_cmd->add_option("--sweep-seed", sweep_seed, "seed of the configuration sampler");
  auto* trial_seeds_opt =
      sweep_cmd->add_option("--trial-seeds", sweep_c.seeds, "seeds each configuration is trained with")
          ->delimiter(',');
  sweep_cmd->callback([&] {
    action = [&] {
      return cmd_sweep(sweep_c, sweep_hp.resolve(), spec_file, [&](SweepSpec& s) {
        if (budget_opt->count()) s.budget = budget;
        if (sweep_seed_opt->count()) s.seed = sweep_seed;
        if (trial_seeds_opt->count()) s.trial_seeds = sweep_c.seeds;
      });
    };
  });

  Common ablate_c;
  HyperFlags ablate_hp;
  auto* ablate = app.add_subcommand("ablate", "full GLAM vs. w/o affinity graph vs. w/o affinity loss");
  add_common(*ablate, ablate_c, true);
  ablate_hp.attach(*ablate);
  ablate->callback([&] { action = [&] { return cmd_ablate(ablate_c, ablate_hp.resolve()); }; });

  auto* analyze = app.add_subcommand("analyze", "graph diagnostics and experiment curves");
  analyze->require_subcommand(1);

  Common gm_c;
  std::string checkpoint, edges, export_edges;
  auto* gm = analyze->add_subcommand("graph-metrics", "homophily, weighted homophily and bad-neighbor ratio");
  add_common(*gm, gm_c, false);
  gm->add_option("--checkpoint", checkpoint, "checkpoint JSON; metrics of its evaluation-mode graph")
      ->check(CLI::ExistingFile);
  gm->add_option("--edges", edges, "edges.tsv graph")->check(CLI::ExistingFile);
  gm->add_option("--export-edges", export_edges, "also write the normalized graph as edges.tsv");
  gm->callback([&] { action = [&] { return cmd_graph_metrics(gm_c, checkpoint, edges, export_edges); }; });

  Common noise_c;
  HyperFlags noise_hp;
  std::string noise_mode = "add";
  std::vector<double> fractions{0.0, 0.25, 0.5, 0.75, 1.0};
  auto* noise = analyze->add_subcommand("noise-curve", "GCN accuracy on a perfect kNN graph under edge surgery");
  add_common(*noise, noise_c, true);
  noise_hp.attach(*noise);
  noise->add_option("--mode", noise_mode, "add | remove")->check(CLI::IsMember({"add", "remove"}))
      ->capture_default_str();
  noise->add_option("--fractions", fractions, "comma-separated fractions")->delimiter(',');
  noise->callback([&] {
    action = [&] {
      const GlamHyperParams hp = noise_hp.resolve();
      const NoiseMode mode = noise_mode == "add" ? NoiseMode::add_noise : NoiseMode::remove_good;
      return cmd_curve("noise_curve", noise_c, hp, {{"mode", noise_mode}, {"fractions", fractions}},
                       [&](Workspace& ws, const auto& seeds, int workers) {
                         return noise_experiment(ws, hp, fractions, mode, seeds, workers);
                       });
    };
  });

  Common ws_c;
  HyperFlags ws_hp;
  std::vector<double> weights{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  auto* wsweep = analyze->add_subcommand("weight-sweep", "GLAM accuracy as a function of the affinity weight w_A");
  add_common(*wsweep, ws_c, true);
  ws_hp.attach(*wsweep);
  wsweep->add_option("--weights", weights, "comma-separated w_A values")->delimiter(',');
  wsweep->callback([&] {
    action = [&] {
      const GlamHyperParams hp = ws_hp.resolve();
      return cmd_curve("weight_sweep", ws_c, hp, {{"weights", weights}},
                       [&](Workspace& ws, const auto& seeds, int workers) {
                         return affinity_weight_sweep(ws, hp, weights, seeds, workers);
                       });
    };
  });

  std::string split_dataset, split_out;
  SplitSizes sizes;
  std::uint64_t split_seed = 0;
  auto* ms = app.add_subcommand("make-split", "sample a seeded train/val/test split");
  ms->add_option("--dataset", split_dataset, "dataset directory (features.tsv, labels.tsv)")->required();
  ms->add_option("--out", split_out, "split file (default <dataset>/split.tsv)");
  ms->add_option("--per-class", sizes.per_class, "training nodes per class")->capture_default_str();
  ms->add_option("--val", sizes.val, "validation nodes")->capture_default_str();
  ms->add_option("--test", sizes.test, "test nodes")->capture_default_str();
  ms->add_option("--seed", split_seed, "seed")->capture_default_str();
  ms->callback([&] { action = [&] { return cmd_make_split(split_dataset, split_out, sizes, split_seed); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return action ? action() : 1;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace glam
