#include "moxgate/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "moxgate/config.hpp"
#include "moxgate/errors.hpp"
#include "moxgate/rng.hpp"

namespace moxgate {

using nlohmann::json;

namespace {
constexpr const char* kCheckpointType = "moxgate-checkpoint";
}

void save_checkpoint(const std::string& path, const Model& model, const AdamW* optimizer,
                     const std::string& rng_state, std::uint64_t train_step) {
    json j;
    j["type"] = kCheckpointType;
    j["format_version"] = 1;
    j["model_config"] = model_config_to_json(model.config());
    json params = json::array();
    for (const auto& np : model.named_params()) {
        params.push_back(json{{"name", np.name},
                              {"shape", np.tensor.shape()},
                              {"data", std::vector<double>(np.tensor.data().begin(),
                                                           np.tensor.data().end())}});
    }
    j["params"] = params;
    json buffers = json::object();
    if (model.config().use_batchnorm) {
        for (std::size_t i = 0; i < model.params().encoders.size(); ++i) {
            const auto& enc = model.params().encoders[i];
            const std::string prefix = "encoder." + std::to_string(i) + ".";
            buffers[prefix + "bn_running_mean"] = enc.bn_running_mean;
            buffers[prefix + "bn_running_var"] = enc.bn_running_var;
        }
    }
    j["buffers"] = buffers;
    if (optimizer != nullptr) {
        json moments = json::array();
        for (const auto& slot : optimizer->slots()) {
            moments.push_back(json{{"m", slot.m}, {"v", slot.v}});
        }
        j["optimizer"] = json{{"learning_rate", optimizer->config().learning_rate},
                              {"weight_decay", optimizer->config().weight_decay},
                              {"beta1", optimizer->config().beta1},
                              {"beta2", optimizer->config().beta2},
                              {"epsilon", optimizer->config().epsilon},
                              {"step", optimizer->step_count()},
                              {"moments", moments}};
    } else {
        j["optimizer"] = nullptr;
    }
    j["rng_state"] = rng_state;
    j["train_step"] = train_step;

    std::ofstream out(path);
    if (!out) throw FormatError("cannot write checkpoint: " + path);
    out << j.dump(2) << '\n';
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    if (j.value("type", "") != kCheckpointType) {
        throw FormatError(path + ": not a checkpoint file");
    }

    CheckpointData ckpt;
    const ModelConfig cfg = model_config_from_json(j.at("model_config"));
    cfg.validate();
    Rng scratch(0);  // placeholder draws, immediately overwritten below
    ckpt.model = Model::init(cfg, scratch);

    auto named = ckpt.model.named_params();
    const json& params = j.at("params");
    if (params.size() != named.size()) {
        throw FormatError(path + ": parameter count does not match the model config");
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
        const json& p = params[i];
        if (p.at("name").get<std::string>() != named[i].name) {
            throw FormatError(path + ": parameter '" + p.at("name").get<std::string>() +
                              "' out of order (expected '" + named[i].name + "')");
        }
        const auto shape = p.at("shape").get<std::vector<std::size_t>>();
        if (shape != named[i].tensor.shape()) {
            throw FormatError(path + ": parameter '" + named[i].name + "' shape mismatch");
        }
        const auto data = p.at("data").get<std::vector<double>>();
        if (data.size() != named[i].tensor.numel()) {
            throw FormatError(path + ": parameter '" + named[i].name + "' size mismatch");
        }
        std::copy(data.begin(), data.end(), named[i].tensor.data_mut().begin());
    }
    if (cfg.use_batchnorm && j.contains("buffers")) {
        for (std::size_t i = 0; i < ckpt.model.params().encoders.size(); ++i) {
            auto& enc = ckpt.model.params().encoders[i];
            const std::string prefix = "encoder." + std::to_string(i) + ".";
            enc.bn_running_mean =
                j.at("buffers").at(prefix + "bn_running_mean").get<std::vector<double>>();
            enc.bn_running_var =
                j.at("buffers").at(prefix + "bn_running_var").get<std::vector<double>>();
        }
    }
    if (!j.at("optimizer").is_null()) {
        const json& o = j.at("optimizer");
        ckpt.has_optimizer = true;
        ckpt.optimizer_config.learning_rate = o.at("learning_rate").get<double>();
        ckpt.optimizer_config.weight_decay = o.at("weight_decay").get<double>();
        ckpt.optimizer_config.beta1 = o.at("beta1").get<double>();
        ckpt.optimizer_config.beta2 = o.at("beta2").get<double>();
        ckpt.optimizer_config.epsilon = o.at("epsilon").get<double>();
        ckpt.optimizer_step = o.at("step").get<std::uint64_t>();
        for (const auto& m : o.at("moments")) {
            ckpt.first_moments.push_back(m.at("m").get<std::vector<double>>());
            ckpt.second_moments.push_back(m.at("v").get<std::vector<double>>());
        }
    }
    ckpt.rng_state = j.at("rng_state").get<std::string>();
    ckpt.train_step = j.at("train_step").get<std::uint64_t>();
    return ckpt;
}

AdamW restore_optimizer(CheckpointData& ckpt) {
    if (!ckpt.has_optimizer) throw ValueError("checkpoint has no optimizer state");
    AdamW opt(ckpt.optimizer_config);
    auto named = ckpt.model.named_params();
    if (ckpt.first_moments.size() != named.size()) {
        throw FormatError("checkpoint optimizer moments do not match the parameter list");
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
        opt.add_param(named[i].tensor, named[i].decay_exempt);
        opt.restore_moments(i, ckpt.first_moments[i], ckpt.second_moments[i]);
    }
    opt.set_step_count(ckpt.optimizer_step);
    return opt;
}

}  // namespace moxgate
