#pragma once

#include <string>

#include "chanex/extrapolator.hpp"

namespace chanex {

/// Trained checkpoint: model.bin (little-endian float64 parameters) plus
/// model.json (dims, seeds, training config, loss trace, pipeline metadata).
struct ModelBundle {
    Network net;
    MlpConfig mlp;
    TrainConfig train_cfg;
    std::vector<double> train_loss_trace;
    std::vector<double> val_nmse_db_trace;
    int best_epoch = -1;
    double best_val_nmse = 0.0;
    double best_train_loss = 0.0;
    std::string mode = "co";  // co | po | po_pa
    AlignmentMode alignment = AlignmentMode::full;
    OversamplingConfig os;
    std::string config_digest;
};

void save_model(const ModelBundle& bundle, const std::string& dir);
ModelBundle load_model(const std::string& dir);

}  // namespace chanex
