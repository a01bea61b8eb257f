#include "glam/serialize.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace glam {

namespace {

Json matrix_to_json(const DenseMatrix& m) {
  Json data = Json::array();
  for (Index k = 0; k < m.size(); ++k) data.push_back(m.data()[k]);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

DenseMatrix matrix_from_json(const Json& j, const char* what) {
  const Index rows = j.at("rows").get<Index>(), cols = j.at("cols").get<Index>();
  const Json& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols) {
    throw LoadError(std::string("checkpoint: ") + what + " has inconsistent shape");
  }
  DenseMatrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = data[k].get<double>();
  return m;
}

Json range_to_json(const Range& r) { return {{"lo", r.lo}, {"hi", r.hi}, {"log", r.log}}; }

Range range_from_json(const Json& j, Range base) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "lo") {
      base.lo = it->get<double>();
    } else if (it.key() == "hi") {
      base.hi = it->get<double>();
    } else if (it.key() == "log") {
      base.log = it->get<bool>();
    } else {
      throw ParameterError("unknown range key '" + it.key() + "'");
    }
  }
  return base;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

Json to_json(const GlamHyperParams& hp) {
  return {
      {"model", to_string(hp.model)},
      {"k", hp.k},
      {"w_ck", hp.w_ck},
      {"beta", hp.beta},
      {"alpha_a", hp.alpha_a},
      {"alpha_c", hp.alpha_c},
      {"lr", hp.lr},
      {"dropout_a_input", hp.dropout_a_input},
      {"dropout_a_hidden", hp.dropout_a_hidden},
      {"dropout_c_input", hp.dropout_c_input},
      {"dropout_c_hidden", hp.dropout_c_hidden},
      {"h_a", hp.h_a},
      {"h_c", hp.h_c},
      {"temperature", hp.temperature},
      {"epochs", hp.epochs},
      {"patience", hp.patience},
      {"seed", hp.seed},
      {"boosted", hp.boosted},
      {"gcn_input", to_string(hp.gcn_input)},
      {"feature_precision", to_string(hp.feature_precision)},
      {"resample", to_string(hp.resample)},
      {"relaxation", to_string(hp.relaxation)},
      {"clip_affinity_weights", hp.clip_affinity_weights},
      {"straight_through", hp.straight_through},
      {"adam_beta1", hp.adam.beta1},
      {"adam_beta2", hp.adam.beta2},
      {"adam_epsilon", hp.adam.epsilon},
  };
}

GlamHyperParams hyperparams_from_json(const Json& j, GlamHyperParams hp) {
  if (!j.is_object()) throw ParameterError("configuration must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      const Json& v = *it;
      if (key == "model") hp.model = parse_model_kind(v.get<std::string>());
      else if (key == "k") hp.k = v.get<int>();
      else if (key == "w_ck") hp.w_ck = v.get<double>();
      else if (key == "beta") hp.beta = v.get<double>();
      else if (key == "alpha_a") hp.alpha_a = v.get<double>();
      else if (key == "alpha_c") hp.alpha_c = v.get<double>();
      else if (key == "lr") hp.lr = v.get<double>();
      else if (key == "dropout_a_input") hp.dropout_a_input = v.get<double>();
      else if (key == "dropout_a_hidden") hp.dropout_a_hidden = v.get<double>();
      else if (key == "dropout_c_input") hp.dropout_c_input = v.get<double>();
      else if (key == "dropout_c_hidden") hp.dropout_c_hidden = v.get<double>();
      else if (key == "h_a") hp.h_a = v.get<int>();
      else if (key == "h_c") hp.h_c = v.get<int>();
      else if (key == "temperature") hp.temperature = v.get<double>();
      else if (key == "epochs") hp.epochs = v.get<int>();
      else if (key == "patience") hp.patience = v.get<int>();
      else if (key == "seed") hp.seed = v.get<std::uint64_t>();
      else if (key == "boosted") hp.boosted = v.get<bool>();
      else if (key == "gcn_input") hp.gcn_input = parse_gcn_input(v.get<std::string>());
      else if (key == "feature_precision") hp.feature_precision = parse_feature_precision(v.get<std::string>());
      else if (key == "resample") hp.resample = parse_resample(v.get<std::string>());
      else if (key == "relaxation") hp.relaxation = parse_relaxation(v.get<std::string>());
      else if (key == "clip_affinity_weights") hp.clip_affinity_weights = v.get<bool>();
      else if (key == "straight_through") hp.straight_through = v.get<bool>();
      else if (key == "adam_beta1") hp.adam.beta1 = v.get<double>();
      else if (key == "adam_beta2") hp.adam.beta2 = v.get<double>();
      else if (key == "adam_epsilon") hp.adam.epsilon = v.get<double>();
      else throw ParameterError("unknown configuration key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw ParameterError(std::string("bad configuration value: ") + e.what());
  }
  validate(hp);
  return hp;
}

Json to_json(const SweepSpec& spec) {
  return {
      {"budget", spec.budget},       {"seed", spec.seed},
      {"trial_seeds", spec.trial_seeds},
      {"alpha_a", range_to_json(spec.alpha_a)},
      {"alpha_c", range_to_json(spec.alpha_c)},
      {"lr", range_to_json(spec.lr)},
      {"beta", range_to_json(spec.beta)},
      {"dropout", range_to_json(spec.dropout)},
      {"w_ck", range_to_json(spec.w_ck)},
      {"k", spec.k},                 {"h_a", spec.h_a},
      {"h_c", spec.h_c},
  };
}

SweepSpec sweep_spec_from_json(const Json& j, SweepSpec spec) {
  if (!j.is_object()) throw ParameterError("sweep spec must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      const Json& v = *it;
      if (key == "budget") spec.budget = v.get<int>();
      else if (key == "seed") spec.seed = v.get<std::uint64_t>();
      else if (key == "trial_seeds") spec.trial_seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "alpha_a") spec.alpha_a = range_from_json(v, spec.alpha_a);
      else if (key == "alpha_c") spec.alpha_c = range_from_json(v, spec.alpha_c);
      else if (key == "lr") spec.lr = range_from_json(v, spec.lr);
      else if (key == "beta") spec.beta = range_from_json(v, spec.beta);
      else if (key == "dropout") spec.dropout = range_from_json(v, spec.dropout);
      else if (key == "w_ck") spec.w_ck = range_from_json(v, spec.w_ck);
      else if (key == "k") spec.k = v.get<std::vector<int>>();
      else if (key == "h_a") spec.h_a = v.get<std::vector<int>>();
      else if (key == "h_c") spec.h_c = v.get<std::vector<int>>();
      else throw ParameterError("unknown sweep key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw ParameterError(std::string("bad sweep value: ") + e.what());
  }
  validate(spec);
  return spec;
}

Json to_json(const TrainReport& report) {
  Json epochs = Json::array();
  for (const auto& e : report.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"loss_c", e.loss_c}, {"loss_a", e.loss_a}, {"total", e.total},
                      {"val_acc", e.val_acc}});
  }
  Json j = {
      {"seed", report.seed},
      {"hyperparameters", to_json(report.hp)},
      {"epochs", std::move(epochs)},
      {"num_epochs", report.epochs.size()},
      {"best_epoch", report.best_epoch},
      {"best_val_accuracy", report.best_val_accuracy},
      {"best_total_loss", report.best_total_loss},
      {"early_stopped", report.early_stopped},
      {"affinity_graphs_built", report.affinity_graphs_built},
  };
  j["test_accuracy"] = report.test_accuracy ? Json(*report.test_accuracy) : Json(nullptr);
  return j;
}

Json to_json(const SeedSummary& summary) {
  Json runs = Json::array();
  for (const auto& r : summary.reports) runs.push_back(to_json(r));
  Json failures = Json::array();
  for (const auto& [seed, msg] : summary.failures) failures.push_back({{"seed", seed}, {"error", msg}});
  return {{"seeds", summary.seeds},        {"mean_test_accuracy", summary.mean},
          {"std_test_accuracy", summary.std}, {"runs", std::move(runs)},
          {"failures", std::move(failures)}};
}

Json to_json(const SweepResult& result) {
  Json board = Json::array();
  for (const auto& t : result.leaderboard) {
    Json row = {{"trial", t.index}, {"val_accuracy", t.val_mean}, {"total_loss", t.loss_mean},
                {"failed", t.failed}, {"hyperparameters", to_json(t.hp)}};
    if (t.failed) row["error"] = t.message;
    board.push_back(std::move(row));
  }
  return {{"leaderboard", std::move(board)}};
}

std::string epochs_csv(const TrainReport& report) {
  std::ostringstream out;
  out << "epoch,loss_c,loss_a,total,val_acc\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << format_double(e.loss_c) << ',' << format_double(e.loss_a) << ','
        << format_double(e.total) << ',' << format_double(e.val_acc) << '\n';
  }
  return out.str();
}

Json checkpoint_to_json(const GlamParams& params, const GlamHyperParams& hp) {
  return {
      {"format", kCheckpointFormat},
      {"hyperparameters", to_json(hp)},
      {"labeled", params.affinity.labeled},
      {"w1", matrix_to_json(params.affinity.w1)},
      {"w2", matrix_to_json(params.affinity.w2)},
      {"w3", matrix_to_json(params.w3)},
      {"w4", matrix_to_json(params.w4)},
  };
}

std::pair<GlamParams, GlamHyperParams> checkpoint_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw LoadError("checkpoint: unsupported format '" + j.at("format").get<std::string>() + "'");
    }
    const GlamHyperParams hp = hyperparams_from_json(j.at("hyperparameters"));
    GlamParams p;
    p.affinity.labeled = j.at("labeled").get<std::vector<Index>>();
    p.affinity.w1 = matrix_from_json(j.at("w1"), "w1");
    p.affinity.w2 = matrix_from_json(j.at("w2"), "w2");
    p.affinity.input_dropout = hp.dropout_a_input;
    p.affinity.hidden_dropout = hp.dropout_a_hidden;
    p.w3 = matrix_from_json(j.at("w3"), "w3");
    p.w4 = matrix_from_json(j.at("w4"), "w4");
    if (p.w3.cols() != p.w4.rows()) throw LoadError("checkpoint: W3/W4 shapes do not chain");
    if (hp.uses_affinity() && (p.affinity.w1.cols() != p.affinity.w2.rows() ||
                               p.affinity.w2.cols() != static_cast<Index>(p.affinity.labeled.size()))) {
      throw LoadError("checkpoint: W1/W2/labeled shapes do not chain");
    }
    return {std::move(p), hp};
  } catch (const Json::exception& e) {
    throw LoadError(std::string("checkpoint: ") + e.what());
  }
}

Json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string() + ": cannot open file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw LoadError(file.string() + ": " + e.what());
  }
}

void write_json(const Json& j, const std::filesystem::path& file) {
  write_text(j.dump(2) + "\n", file);
}

void write_text(const std::string& text, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << text;
}

}  // namespace glam
