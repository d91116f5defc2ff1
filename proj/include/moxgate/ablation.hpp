#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moxgate/metrics.hpp"
#include "moxgate/omics.hpp"
#include "moxgate/train.hpp"

namespace moxgate {

enum class AblationAxis { modality_subsets, cross_heads, components, fusion_mode };

const char* ablation_axis_name(AblationAxis axis);
AblationAxis ablation_axis_from_name(const std::string& name);

struct AblationSpec {
    AblationAxis axis = AblationAxis::modality_subsets;
    // cross_heads axis sweep values.
    std::vector<std::size_t> cross_head_values = {8, 16, 32};
    // modality_subsets axis: explicit subsets by label; empty enumerates every
    // nonempty subset (singletons, pairs, ..., all).
    std::vector<std::vector<std::string>> subsets;
    std::vector<std::uint64_t> seeds = {1, 2, 3};

    void validate() const;
};

struct AblationRow {
    std::string arm;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<MetricsReport> per_seed;
};

struct AblationTable {
    std::string axis;
    std::string eval_split;
    std::vector<AblationRow> rows;
};

// One train + evaluate per arm per seed; rows report seed-averaged accuracy
// and weighted precision/recall/F1 on the test split (validation when the
// dataset has no test samples).
AblationTable run_ablation(const AlignedDataset& dataset, const TrainRun& base,
                           const AblationSpec& spec);

std::string format_ablation_text(const AblationTable& table);
void write_ablation_csv(const std::string& path, const AblationTable& table);

}  // namespace moxgate
