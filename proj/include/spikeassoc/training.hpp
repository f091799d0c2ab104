#pragma once

#include "spikeassoc/models.hpp"
#include "spikeassoc/oracle.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spikeassoc {

struct PlateauConfig {
    double factor = 0.5;
    int patience = 10;   // epochs without val-loss improvement before reducing
    double min_lr = 1e-5;
};

struct TrainConfig {
    int epochs_max = 200;
    int batch_size = 32;
    double lr0 = 1e-3;
    PlateauConfig plateau;
    int early_stop_patience = 25;
    double split_ratio = 0.8;
    std::uint64_t seed = 12345;
    LossConfig loss; // loss.limit <= 0 means "take L from the labeled data"
};

void validate(const TrainConfig& cfg);

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

enum class ModelKind { topdown, bottomup };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct CheckpointMeta {
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::string config_digest;
};

struct Checkpoint {
    int format_version = 1;
    ModelKind kind = ModelKind::topdown;
    NetworkSpec spec;
    Weights weights;
    Standardizer standardizer;
    CheckpointMeta meta;
};

// seeded shuffle, then split at floor(ratio * n); throws on fewer than 2
// instances or a degenerate split
std::pair<std::vector<LabeledInstance>, std::vector<LabeledInstance>>
split_dataset(const std::vector<LabeledInstance>& data, double ratio, std::uint64_t seed);

// Plateau schedule as a pure function of the epoch history: if the best val
// loss has not improved by >= 1e-8 in the last `patience` epochs (measured from
// the later of the last improvement and the last reduction), the rate drops by
// `factor`, floored at min_lr.
double reduce_lr_on_plateau(std::span<const EpochStats> history, const PlateauConfig& cfg,
                            double current_lr);

struct TrainResult {
    Checkpoint checkpoint;
    TrainHistory history;
};

// Full training run: split, fit standardizer on the train split, shuffled
// mini-batches with Adam, plateau schedule, early stopping on val loss,
// best-epoch checkpoint. Deterministic in (data, cfg). `spec_override`
// replaces the default architecture when non-null.
TrainResult train(ModelKind kind, const std::vector<LabeledInstance>& data,
                  const TrainConfig& cfg, const NetworkSpec* spec_override = nullptr);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// model assembly from a checkpoint; dims come from the data at hand
TopDownModel build_topdown_model(const Checkpoint& ckpt, int n_rx, int n_tx, int limit);
BottomUpModel build_bottomup_model(const Checkpoint& ckpt, int n_tx);

// training config file (JSON mirroring TrainConfig field names)
TrainConfig load_train_config(const std::string& path);
TrainConfig train_config_from_json_text(const std::string& text);
std::string train_config_to_json_text(const TrainConfig& cfg);

// per-epoch CSV: epoch,train_loss,val_loss,val_accuracy,lr
void write_history_csv(const TrainHistory& history, const std::string& path);

} // namespace spikeassoc
