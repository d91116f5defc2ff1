#include "moxgate/config.hpp"

#include <fstream>
#include <set>

#include "moxgate/errors.hpp"

namespace moxgate {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& section) {
    if (!j.is_object()) {
        throw ConfigError("config: section '" + section + "' must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.contains(key)) {
            throw ConfigError("config: unknown key '" + key + "' in section '" + section +
                              "'");
        }
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

SyntheticSpec parse_synthetic(const json& j) {
    check_keys(j,
               {"samples_per_class", "num_classes", "modality_dims", "separation",
                "dependency", "noise", "signal_scales", "validation_fraction",
                "test_fraction", "seed"},
               "data.synthetic");
    SyntheticSpec s;
    read_field(j, "samples_per_class", s.samples_per_class);
    read_field(j, "num_classes", s.num_classes);
    read_field(j, "modality_dims", s.modality_dims);
    read_field(j, "separation", s.separation);
    read_field(j, "dependency", s.dependency);
    read_field(j, "noise", s.noise);
    read_field(j, "signal_scales", s.signal_scales);
    read_field(j, "validation_fraction", s.validation_fraction);
    read_field(j, "test_fraction", s.test_fraction);
    read_field(j, "seed", s.seed);
    s.validate();
    return s;
}

DataSourceConfig parse_matrices(const json& j) {
    check_keys(j, {"modalities", "labels_file", "delimiter", "max_missing_fraction", "split"},
               "data.matrices");
    DataSourceConfig src;
    if (!j.contains("modalities") || !j.at("modalities").is_array() ||
        j.at("modalities").empty()) {
        throw ConfigError("config: data.matrices.modalities must be a nonempty array");
    }
    for (const auto& m : j.at("modalities")) {
        check_keys(m, {"label", "files", "orientation"}, "data.matrices.modalities[]");
        MatrixSource ms;
        ms.label = m.at("label").get<std::string>();
        ms.files = m.at("files").get<std::vector<std::string>>();
        if (m.contains("orientation")) {
            const std::string o = m.at("orientation").get<std::string>();
            if (o == "samples_in_rows") {
                ms.orientation = Orientation::samples_in_rows;
            } else if (o == "features_in_rows") {
                ms.orientation = Orientation::features_in_rows;
            } else {
                throw ConfigError("config: unknown orientation '" + o + "'");
            }
        }
        src.modalities.push_back(std::move(ms));
    }
    if (!j.contains("labels_file")) {
        throw ConfigError("config: data.matrices.labels_file is required");
    }
    src.labels_file = j.at("labels_file").get<std::string>();
    if (j.contains("delimiter")) {
        const std::string d = j.at("delimiter").get<std::string>();
        if (d.size() != 1) throw ConfigError("config: delimiter must be one character");
        src.delimiter = d[0];
    }
    read_field(j, "max_missing_fraction", src.pipeline.max_missing_fraction);
    if (j.contains("split")) {
        const json& s = j.at("split");
        check_keys(s, {"held_out_cohorts", "validation_fraction", "seed"},
                   "data.matrices.split");
        read_field(s, "held_out_cohorts", src.pipeline.split.held_out_cohorts);
        read_field(s, "validation_fraction", src.pipeline.split.validation_fraction);
        read_field(s, "seed", src.pipeline.split.seed);
    }
    return src;
}

ModelConfig parse_model(const json& j) {
    check_keys(j,
               {"modality_input_dims", "num_classes", "embed_dim", "encoder_heads",
                "cross_heads", "encoder_dropout", "classifier_dropout",
                "classifier_hidden_dim", "attention_axis", "token_count", "fusion_mode",
                "use_batchnorm", "use_skip", "use_feedforward_attention"},
               "model");
    ModelConfig cfg;
    read_field(j, "modality_input_dims", cfg.modality_input_dims);
    read_field(j, "num_classes", cfg.num_classes);
    read_field(j, "embed_dim", cfg.embed_dim);
    read_field(j, "encoder_heads", cfg.encoder_heads);
    read_field(j, "cross_heads", cfg.cross_heads);
    read_field(j, "encoder_dropout", cfg.encoder_dropout);
    read_field(j, "classifier_dropout", cfg.classifier_dropout);
    read_field(j, "classifier_hidden_dim", cfg.classifier_hidden_dim);
    if (j.contains("attention_axis")) {
        const std::string a = j.at("attention_axis").get<std::string>();
        if (a == "tokens") {
            cfg.attention_axis = AttentionAxis::tokens;
        } else if (a == "batch") {
            cfg.attention_axis = AttentionAxis::batch;
        } else {
            throw ConfigError("config: unknown attention_axis '" + a + "'");
        }
    }
    read_field(j, "token_count", cfg.token_count);
    if (j.contains("fusion_mode")) {
        const std::string f = j.at("fusion_mode").get<std::string>();
        if (f == "cross_attention") {
            cfg.fusion_mode = FusionMode::cross_attention;
        } else if (f == "concat") {
            cfg.fusion_mode = FusionMode::concat;
        } else {
            throw ConfigError("config: unknown fusion_mode '" + f + "'");
        }
    }
    read_field(j, "use_batchnorm", cfg.use_batchnorm);
    read_field(j, "use_skip", cfg.use_skip);
    read_field(j, "use_feedforward_attention", cfg.use_feedforward_attention);
    return cfg;
}

void parse_loss(const json& j, FocalLossConfig& focal, RegularizerConfig& reg) {
    check_keys(j, {"alpha", "gamma", "lambda1", "lambda2"}, "loss");
    if (j.contains("alpha")) {
        if (!j.at("alpha").is_array()) {
            throw ConfigError("config: loss.alpha must be an array of per-class weights");
        }
        focal.alpha = j.at("alpha").get<std::vector<double>>();
    }
    read_field(j, "gamma", focal.gamma);
    read_field(j, "lambda1", reg.lambda1);
    read_field(j, "lambda2", reg.lambda2);
}

AdamWConfig parse_optimizer(const json& j) {
    check_keys(j, {"learning_rate", "weight_decay", "beta1", "beta2", "epsilon"},
               "optimizer");
    AdamWConfig cfg;
    read_field(j, "learning_rate", cfg.learning_rate);
    read_field(j, "weight_decay", cfg.weight_decay);
    read_field(j, "beta1", cfg.beta1);
    read_field(j, "beta2", cfg.beta2);
    read_field(j, "epsilon", cfg.epsilon);
    cfg.validate();
    return cfg;
}

TrainConfig parse_train(const json& j) {
    check_keys(j, {"batch_size", "max_epochs", "patience", "seed"}, "train");
    TrainConfig cfg;
    read_field(j, "batch_size", cfg.batch_size);
    read_field(j, "max_epochs", cfg.max_epochs);
    read_field(j, "patience", cfg.patience);
    read_field(j, "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

AblationSpec parse_ablation(const json& j) {
    check_keys(j, {"axis", "cross_heads", "subsets", "seeds"}, "ablation");
    AblationSpec spec;
    if (j.contains("axis")) {
        spec.axis = ablation_axis_from_name(j.at("axis").get<std::string>());
    }
    read_field(j, "cross_heads", spec.cross_head_values);
    read_field(j, "subsets", spec.subsets);
    read_field(j, "seeds", spec.seeds);
    spec.validate();
    return spec;
}

}  // namespace

AppConfig parse_app_config(const json& j) {
    check_keys(j, {"data", "model", "loss", "optimizer", "train", "ablation"}, "(root)");
    AppConfig cfg;
    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, {"synthetic", "dataset", "matrices"}, "data");
        int modes = 0;
        if (d.contains("synthetic")) ++modes;
        if (d.contains("dataset")) ++modes;
        if (d.contains("matrices")) ++modes;
        if (modes > 1) {
            throw ConfigError(
                "config: data must specify at most one of synthetic/dataset/matrices");
        }
        if (d.contains("synthetic")) {
            cfg.data_mode = DataMode::synthetic;
            cfg.synthetic = parse_synthetic(d.at("synthetic"));
        } else if (d.contains("dataset")) {
            cfg.data_mode = DataMode::dataset_file;
            cfg.dataset_path = d.at("dataset").get<std::string>();
        } else if (d.contains("matrices")) {
            cfg.data_mode = DataMode::matrices;
            cfg.source = parse_matrices(d.at("matrices"));
        }
    }
    if (j.contains("model")) cfg.model = parse_model(j.at("model"));
    if (j.contains("loss")) parse_loss(j.at("loss"), cfg.focal, cfg.reg);
    if (j.contains("optimizer")) cfg.optimizer = parse_optimizer(j.at("optimizer"));
    if (j.contains("train")) cfg.train = parse_train(j.at("train"));
    if (j.contains("ablation")) cfg.ablation = parse_ablation(j.at("ablation"));
    return cfg;
}

AppConfig load_app_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_app_config(j);
}

AlignedDataset load_dataset_from_config(const AppConfig& cfg) {
    switch (cfg.data_mode) {
        case DataMode::synthetic:
            return generate_synthetic(cfg.synthetic);
        case DataMode::dataset_file:
            return load_any_dataset(cfg.dataset_path);
        case DataMode::matrices:
            return run_pipeline(cfg.source).dataset;
        case DataMode::unset:
            break;
    }
    throw ConfigError("config: no data source configured (data.synthetic, data.dataset, "
                      "or data.matrices)");
}

void apply_override(json& config, const std::string& dotted_key, const std::string& value) {
    if (dotted_key.empty()) throw ConfigError("override: empty key");
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted_key.find('.', start);
        const std::string part = dotted_key.substr(start, dot - start);
        if (part.empty()) throw ConfigError("override: malformed key '" + dotted_key + "'");
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

json model_config_to_json(const ModelConfig& cfg) {
    return json{
        {"modality_input_dims", cfg.modality_input_dims},
        {"num_classes", cfg.num_classes},
        {"embed_dim", cfg.embed_dim},
        {"encoder_heads", cfg.encoder_heads},
        {"cross_heads", cfg.cross_heads},
        {"encoder_dropout", cfg.encoder_dropout},
        {"classifier_dropout", cfg.classifier_dropout},
        {"classifier_hidden_dim", cfg.classifier_hidden_dim},
        {"attention_axis",
         cfg.attention_axis == AttentionAxis::tokens ? "tokens" : "batch"},
        {"token_count", cfg.token_count},
        {"fusion_mode",
         cfg.fusion_mode == FusionMode::cross_attention ? "cross_attention" : "concat"},
        {"use_batchnorm", cfg.use_batchnorm},
        {"use_skip", cfg.use_skip},
        {"use_feedforward_attention", cfg.use_feedforward_attention}};
}

ModelConfig model_config_from_json(const json& j) { return parse_model(j); }

}  // namespace moxgate
