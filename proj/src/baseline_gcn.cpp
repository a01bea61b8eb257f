#include "glam/baseline_gcn.hpp"

namespace glam {

GlamHyperParams gcn_config(GlamHyperParams hp) {
  hp.model = ModelKind::gcn_knn;
  return hp;
}

TrainResult gcn_train(Workspace& workspace, const GlamHyperParams& hp, const SparseGraph* graph) {
  TrainOptions options;
  options.graph = graph;
  return train(workspace, gcn_config(hp), options);
}

}  // namespace glam
