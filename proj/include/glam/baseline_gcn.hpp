#pragma once

#include "glam/graphs.hpp"
#include "glam/model.hpp"
#include "glam/trainer.hpp"

namespace glam {

/// `hp` as a plain two-layer GCN: no affinity model, no cropping, w_A = 0.
GlamHyperParams gcn_config(GlamHyperParams hp);

/// Trains a GCN on `graph` (the dataset's kNN graph when null) with the
/// trainer's protocol.
TrainResult gcn_train(Workspace& workspace, const GlamHyperParams& hp, const SparseGraph* graph = nullptr);

}  // namespace glam
