#include "moxgate/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "moxgate/errors.hpp"
#include "moxgate/ops.hpp"

namespace moxgate {

namespace {
constexpr std::size_t kEvalBatch = 256;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (patience >= max_epochs) {
        throw ConfigError("train: patience must be smaller than max_epochs");
    }
}

ModelConfig resolve_model_config(ModelConfig cfg, const AlignedDataset& d) {
    const std::vector<std::size_t> dims = d.modality_dims();
    if (cfg.modality_input_dims.empty()) {
        cfg.modality_input_dims = dims;
    } else if (cfg.modality_input_dims != dims) {
        throw ConfigError("model: configured modality dims do not match the dataset");
    }
    if (cfg.num_classes == 0) {
        cfg.num_classes = d.num_classes();
    } else if (cfg.num_classes != d.num_classes()) {
        throw ConfigError("model: configured num_classes does not match the dataset");
    }
    return cfg;
}

std::vector<int> predict(Model& model, const AlignedDataset& d,
                         std::span<const std::size_t> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    Rng unused(0);  // dropout is off in eval mode, no draws happen
    for (std::size_t start = 0; start < rows.size(); start += kEvalBatch) {
        const std::size_t count = std::min(kEvalBatch, rows.size() - start);
        const std::span<const std::size_t> chunk = rows.subspan(start, count);
        std::vector<Tensor> xs;
        for (std::size_t m = 0; m < d.modalities.size(); ++m) {
            xs.push_back(d.modality_batch(m, chunk));
        }
        Tensor probs = model.forward(xs, false, unused);
        const std::size_t k = probs.dim(1);
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < k; ++j) {
                if (probs.at(i, j) > probs.at(i, best)) best = j;
            }
            out.push_back(static_cast<int>(best));
        }
    }
    return out;
}

MetricsReport evaluate_split(Model& model, const AlignedDataset& d, Split split) {
    const std::vector<std::size_t> rows = d.indices_of(split);
    const std::vector<int> predictions = predict(model, d, rows);
    const std::vector<int> targets = d.label_batch(rows);
    return compute_metrics(targets, predictions, d.num_classes());
}

TrainResult train_model(const AlignedDataset& dataset, const TrainRun& run) {
    run.train.validate();
    const ModelConfig cfg = resolve_model_config(run.model, dataset);
    cfg.validate();
    run.reg.validate();

    const std::vector<std::size_t> train_rows = dataset.indices_of(Split::train);
    const std::vector<std::size_t> val_rows = dataset.indices_of(Split::val);
    if (train_rows.empty()) throw ConfigError("train: dataset has no train split");
    if (val_rows.empty()) throw ConfigError("train: dataset has no validation split");

    Rng master(run.train.seed);
    Rng init_rng = master.fork("init");
    Rng shuffle_rng = master.fork("shuffle");
    Rng dropout_rng = master.fork("dropout");

    Model model = Model::init(cfg, init_rng);
    AdamW optimizer(run.optimizer);
    for (const auto& np : model.named_params()) {
        optimizer.add_param(np.tensor, np.decay_exempt);
    }
    const bool cross_mode = cfg.fusion_mode == FusionMode::cross_attention;

    TrainResult result;
    result.best_model = model.clone();
    result.best_val_weighted_f1 = -1.0;
    std::size_t epochs_since_best = 0;

    std::vector<std::size_t> order = train_rows;
    for (std::size_t epoch = 1; epoch <= run.train.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double sum_total = 0.0, sum_focal = 0.0, sum_balance = 0.0, sum_frob = 0.0;
        for (std::size_t start = 0; start < order.size(); start += run.train.batch_size) {
            const std::size_t count = std::min(run.train.batch_size, order.size() - start);
            const std::span<const std::size_t> rows(order.data() + start, count);
            std::vector<Tensor> xs;
            for (std::size_t m = 0; m < dataset.modalities.size(); ++m) {
                xs.push_back(dataset.modality_batch(m, rows));
            }
            const std::vector<int> ys = dataset.label_batch(rows);

            Tape tape;
            Tensor probs = model.forward(xs, true, dropout_rng);
            Tensor focal = focal_loss(probs, ys, run.focal);
            Tensor balance = cross_mode ? weight_balance_penalty(model.modality_weight_vector())
                                        : Tensor::scalar(0.0);
            std::vector<Tensor> cross = model.cross_matrices();
            Tensor frob = frobenius_penalty(cross);
            Tensor loss = ops::add(focal, ops::add(ops::scale(balance, run.reg.lambda1),
                                                   ops::scale(frob, run.reg.lambda2)));
            optimizer.zero_grad();
            tape.backward(loss);
            optimizer.step();

            if (cross_mode) {
                // Simplex invariant: softmax keeps the weights normalized no
                // matter what the step did to the logits.
                double total = 0.0;
                for (double w : model.modality_weight_vector().data()) total += w;
                if (std::abs(total - 1.0) > 1e-12) {
                    throw std::logic_error("modality weights left the simplex");
                }
            }

            const double weight = static_cast<double>(count);
            sum_total += loss.value() * weight;
            sum_focal += focal.value() * weight;
            sum_balance += balance.value() * weight;
            sum_frob += frob.value() * weight;
        }

        EpochLog entry;
        entry.epoch = epoch;
        const double inv_n = 1.0 / static_cast<double>(order.size());
        entry.total_loss = sum_total * inv_n;
        entry.focal = sum_focal * inv_n;
        entry.balance = sum_balance * inv_n;
        entry.frobenius = sum_frob * inv_n;
        const Tensor w = model.modality_weight_vector();
        entry.modality_weights.assign(w.data().begin(), w.data().end());
        const MetricsReport val = evaluate_split(model, dataset, Split::val);
        entry.val_accuracy = val.accuracy;
        entry.val_weighted_f1 = val.weighted_f1;
        result.log.push_back(std::move(entry));

        if (val.weighted_f1 > result.best_val_weighted_f1) {
            result.best_val_weighted_f1 = val.weighted_f1;
            result.best_epoch = epoch;
            result.best_model = model.clone();
            epochs_since_best = 0;
        } else if (++epochs_since_best >= run.train.patience) {
            break;
        }
    }
    result.optimizer_steps = optimizer.step_count();
    return result;
}

void write_train_log_csv(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write train log: " + path);
    const std::size_t num_weights = log.empty() ? 0 : log[0].modality_weights.size();
    out << "epoch,total_loss,focal,balance_penalty,frobenius_penalty";
    for (std::size_t i = 0; i < num_weights; ++i) out << ",w_" << i;
    out << ",val_accuracy,val_weighted_f1\n";
    char buf[32];
    const auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << ',' << buf;
    };
    for (const EpochLog& e : log) {
        out << e.epoch;
        emit(e.total_loss);
        emit(e.focal);
        emit(e.balance);
        emit(e.frobenius);
        for (double w : e.modality_weights) emit(w);
        emit(e.val_accuracy);
        emit(e.val_weighted_f1);
        out << '\n';
    }
}

}  // namespace moxgate
