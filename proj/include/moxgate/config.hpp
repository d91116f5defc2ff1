#pragma once

#include <string>

#include <json.hpp>

#include "moxgate/ablation.hpp"
#include "moxgate/dataset_io.hpp"
#include "moxgate/loss.hpp"
#include "moxgate/model.hpp"
#include "moxgate/optimizer.hpp"
#include "moxgate/synthetic.hpp"
#include "moxgate/train.hpp"

namespace moxgate {

enum class DataMode { unset, synthetic, dataset_file, matrices };

// The full configuration file: sections {data, model, loss, optimizer,
// train, ablation}, every field defaulted, unknown keys rejected.
struct AppConfig {
    DataMode data_mode = DataMode::unset;
    SyntheticSpec synthetic;
    std::string dataset_path;
    DataSourceConfig source;

    ModelConfig model;
    FocalLossConfig focal;
    RegularizerConfig reg;
    AdamWConfig optimizer;
    TrainConfig train;
    AblationSpec ablation;

    TrainRun train_run() const { return TrainRun{model, train, optimizer, focal, reg}; }
};

AppConfig parse_app_config(const nlohmann::json& j);
AppConfig load_app_config_file(const std::string& path);

// Materializes the configured data source (generator, dataset/manifest file,
// or raw matrices through the ingest pipeline).
AlignedDataset load_dataset_from_config(const AppConfig& cfg);

// `--set a.b.c=value` style override on the raw JSON document; the value is
// parsed as JSON when possible and treated as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& dotted_key,
                    const std::string& value);

// Model-config serialization shared by checkpoints.
nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace moxgate
