#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moxgate/loss.hpp"
#include "moxgate/metrics.hpp"
#include "moxgate/model.hpp"
#include "moxgate/omics.hpp"
#include "moxgate/optimizer.hpp"

namespace moxgate {

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;  // epochs without validation weighted-F1 improvement
    std::uint64_t seed = 1;

    void validate() const;
};

// Complete training recipe; everything a run needs besides the dataset.
struct TrainRun {
    ModelConfig model;
    TrainConfig train;
    AdamWConfig optimizer;
    FocalLossConfig focal;
    RegularizerConfig reg;
};

struct EpochLog {
    std::size_t epoch = 0;
    double total_loss = 0.0;
    double focal = 0.0;
    double balance = 0.0;
    double frobenius = 0.0;
    std::vector<double> modality_weights;
    double val_accuracy = 0.0;
    double val_weighted_f1 = 0.0;
};

struct TrainResult {
    Model best_model;  // parameters at the best validation weighted-F1 epoch
    std::size_t best_epoch = 0;
    double best_val_weighted_f1 = 0.0;
    std::vector<EpochLog> log;
    std::uint64_t optimizer_steps = 0;
};

// Fills modality dims and class count from the dataset when unset and
// verifies agreement otherwise.
ModelConfig resolve_model_config(ModelConfig cfg, const AlignedDataset& d);

// Shuffled mini-batch epochs with early stopping, deterministic under
// run.train.seed. Requires nonempty train and validation splits.
TrainResult train_model(const AlignedDataset& dataset, const TrainRun& run);

// Argmax predictions, dropout off.
std::vector<int> predict(Model& model, const AlignedDataset& d,
                         std::span<const std::size_t> rows);

MetricsReport evaluate_split(Model& model, const AlignedDataset& d, Split split);

void write_train_log_csv(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace moxgate
