#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "glam/model.hpp"
#include "glam/trainer.hpp"

namespace glam {

using Json = nlohmann::json;

Json to_json(const GlamHyperParams& hp);

/// Applies the keys present in `j` on top of `base`. Unknown keys and
/// out-of-range values raise ParameterError.
GlamHyperParams hyperparams_from_json(const Json& j, GlamHyperParams base = {});

Json to_json(const SweepSpec& spec);
SweepSpec sweep_spec_from_json(const Json& j, SweepSpec base = {});

/// Report without wall-clock time, so equal runs serialize identically.
Json to_json(const TrainReport& report);
Json to_json(const SeedSummary& summary);
Json to_json(const SweepResult& result);

/// `epoch,loss_c,loss_a,total,val_acc`
std::string epochs_csv(const TrainReport& report);

/// Version-tagged checkpoint: hyperparameters, labeled ordering, shapes and
/// all four weight matrices.
inline constexpr const char* kCheckpointFormat = "glam-checkpoint/1";
Json checkpoint_to_json(const GlamParams& params, const GlamHyperParams& hp);
std::pair<GlamParams, GlamHyperParams> checkpoint_from_json(const Json& j);

Json read_json(const std::filesystem::path& file);
/// Writes `j` pretty-printed with a trailing newline.
void write_json(const Json& j, const std::filesystem::path& file);
void write_text(const std::string& text, const std::filesystem::path& file);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace glam
