#include "moxgate/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "moxgate/errors.hpp"

namespace moxgate {

const char* ablation_axis_name(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::modality_subsets: return "modality_subsets";
        case AblationAxis::cross_heads: return "cross_heads";
        case AblationAxis::components: return "components";
        case AblationAxis::fusion_mode: return "fusion_mode";
    }
    return "?";
}

AblationAxis ablation_axis_from_name(const std::string& name) {
    if (name == "modality_subsets") return AblationAxis::modality_subsets;
    if (name == "cross_heads") return AblationAxis::cross_heads;
    if (name == "components") return AblationAxis::components;
    if (name == "fusion_mode") return AblationAxis::fusion_mode;
    throw ConfigError("unknown ablation axis '" + name + "'");
}

void AblationSpec::validate() const {
    if (seeds.empty()) throw ConfigError("ablation: at least one seed is required");
    if (axis == AblationAxis::cross_heads && cross_head_values.empty()) {
        throw ConfigError("ablation: cross_heads axis needs head values");
    }
    for (const auto& subset : subsets) {
        if (subset.empty()) throw ConfigError("ablation: empty modality subset");
    }
}

namespace {

// One arm of the sweep: a label plus the dataset/config edits it implies.
struct Arm {
    std::string name;
    std::vector<std::size_t> modality_indices;  // empty = all
    std::function<void(ModelConfig&)> adjust;
};

std::vector<std::size_t> resolve_subset(const AlignedDataset& d,
                                        const std::vector<std::string>& labels) {
    std::vector<std::size_t> indices;
    for (const std::string& label : labels) {
        bool found = false;
        for (std::size_t i = 0; i < d.modalities.size(); ++i) {
            if (d.modalities[i].label == label) {
                indices.push_back(i);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("ablation: dataset has no modality '" + label + "'");
    }
    return indices;
}

std::string subset_name(const AlignedDataset& d, const std::vector<std::size_t>& indices) {
    if (indices.size() == d.modalities.size()) return "all";
    std::string name;
    for (std::size_t i : indices) {
        if (!name.empty()) name += " + ";
        name += d.modalities[i].label;
    }
    return name;
}

std::vector<Arm> build_arms(const AlignedDataset& d, const AblationSpec& spec) {
    std::vector<Arm> arms;
    switch (spec.axis) {
        case AblationAxis::modality_subsets: {
            std::vector<std::vector<std::size_t>> index_sets;
            if (!spec.subsets.empty()) {
                for (const auto& labels : spec.subsets) {
                    index_sets.push_back(resolve_subset(d, labels));
                }
            } else {
                // Singletons, then pairs, then the full set: the Table-2 row
                // layout (7 rows for three modalities).
                const std::size_t m = d.modalities.size();
                for (std::size_t i = 0; i < m; ++i) index_sets.push_back({i});
                for (std::size_t i = 0; i + 1 < m; ++i) {
                    for (std::size_t j = i + 1; j < m; ++j) {
                        if (m > 2) index_sets.push_back({i, j});
                    }
                }
                if (m > 1) {
                    std::vector<std::size_t> full(m);
                    for (std::size_t i = 0; i < m; ++i) full[i] = i;
                    index_sets.push_back(std::move(full));
                }
            }
            for (auto& indices : index_sets) {
                arms.push_back({subset_name(d, indices), indices, {}});
            }
            break;
        }
        case AblationAxis::cross_heads: {
            for (std::size_t heads : spec.cross_head_values) {
                arms.push_back({"heads=" + std::to_string(heads), {},
                                [heads](ModelConfig& cfg) { cfg.cross_heads = heads; }});
            }
            break;
        }
        case AblationAxis::components: {
            arms.push_back({"w/ BatchNorm", {}, [](ModelConfig& cfg) {
                                cfg.use_batchnorm = true;
                            }});
            arms.push_back({"w/ Skip Connection", {}, [](ModelConfig& cfg) {
                                cfg.use_skip = true;
                            }});
            arms.push_back({"w/ Feedforward Attention", {}, [](ModelConfig& cfg) {
                                cfg.use_feedforward_attention = true;
                            }});
            arms.push_back({"w/ Skip + Feedforward Attn", {}, [](ModelConfig& cfg) {
                                cfg.use_skip = true;
                                cfg.use_feedforward_attention = true;
                            }});
            break;
        }
        case AblationAxis::fusion_mode: {
            arms.push_back({"cross_attention", {}, [](ModelConfig& cfg) {
                                cfg.fusion_mode = FusionMode::cross_attention;
                            }});
            arms.push_back({"concat", {}, [](ModelConfig& cfg) {
                                cfg.fusion_mode = FusionMode::concat;
                            }});
            break;
        }
    }
    return arms;
}

}  // namespace

AblationTable run_ablation(const AlignedDataset& dataset, const TrainRun& base,
                           const AblationSpec& spec) {
    spec.validate();
    const bool has_test = !dataset.indices_of(Split::test).empty();
    const Split eval_split = has_test ? Split::test : Split::val;

    AblationTable table;
    table.axis = ablation_axis_name(spec.axis);
    table.eval_split = split_name(eval_split);

    for (const Arm& arm : build_arms(dataset, spec)) {
        AlignedDataset view = arm.modality_indices.empty()
                                  ? dataset
                                  : dataset.subset_modalities(arm.modality_indices);
        AblationRow row;
        row.arm = arm.name;
        for (std::uint64_t seed : spec.seeds) {
            TrainRun run = base;
            run.model.modality_input_dims.clear();  // re-derived from the view
            run.model.num_classes = 0;
            if (arm.adjust) arm.adjust(run.model);
            run.train.seed = seed;
            TrainResult result = train_model(view, run);
            MetricsReport metrics = evaluate_split(result.best_model, view, eval_split);
            row.accuracy += metrics.accuracy;
            row.precision += metrics.weighted_precision;
            row.recall += metrics.weighted_recall;
            row.f1 += metrics.weighted_f1;
            row.per_seed.push_back(std::move(metrics));
        }
        const double inv = 1.0 / static_cast<double>(spec.seeds.size());
        row.accuracy *= inv;
        row.precision *= inv;
        row.recall *= inv;
        row.f1 *= inv;
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string format_ablation_text(const AblationTable& table) {
    std::size_t width = 12;
    for (const AblationRow& row : table.rows) width = std::max(width, row.arm.size() + 2);
    std::ostringstream out;
    out << "axis: " << table.axis << " (evaluated on " << table.eval_split << ")\n";
    out << std::string(width, ' ') << "Accuracy  Precision  Recall  F1-Score\n";
    char buf[96];
    for (const AblationRow& row : table.rows) {
        std::string padded = row.arm;
        padded.resize(width, ' ');
        std::snprintf(buf, sizeof(buf), "%c%.4f    %.4f     %.4f  %.4f", ' ', row.accuracy,
                      row.precision, row.recall, row.f1);
        out << padded << (buf + 1) << '\n';
    }
    return out.str();
}

void write_ablation_csv(const std::string& path, const AblationTable& table) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write ablation table: " + path);
    out << "axis,arm,eval_split,seeds,accuracy,precision,recall,f1\n";
    char buf[32];
    const auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << ',' << buf;
    };
    for (const AblationRow& row : table.rows) {
        out << table.axis << ",\"" << row.arm << "\"," << table.eval_split << ','
            << row.per_seed.size();
        emit(row.accuracy);
        emit(row.precision);
        emit(row.recall);
        emit(row.f1);
        out << '\n';
    }
}

}  // namespace moxgate
