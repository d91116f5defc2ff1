#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "moxgate/tensor.hpp"

namespace moxgate {

enum class Orientation { samples_in_rows, features_in_rows };

// One modality's raw measurements for one cohort (or a whole study).
// Wherever `missing` is set the value slot is a placeholder that no
// statistic may read.
struct OmicsMatrix {
    std::string modality;
    std::vector<std::string> sample_ids;
    std::vector<std::string> feature_ids;
    std::vector<double> values;         // samples x features, row-major
    std::vector<std::uint8_t> missing;  // same shape

    std::size_t num_samples() const { return sample_ids.size(); }
    std::size_t num_features() const { return feature_ids.size(); }
    double at(std::size_t s, std::size_t f) const { return values[s * num_features() + f]; }
    bool is_missing(std::size_t s, std::size_t f) const {
        return missing[s * num_features() + f] != 0;
    }
    std::size_t missing_count() const;
};

struct LabelTable {
    std::vector<std::string> sample_ids;
    std::vector<std::string> cohort;
    std::vector<std::string> subtype;

    std::size_t size() const { return sample_ids.size(); }
    // Index of a sample id, or npos.
    std::size_t find(const std::string& sample_id) const;
};

struct SplitSpec {
    std::vector<std::string> held_out_cohorts;
    double validation_fraction = 0.1;
    std::uint64_t seed = 1;
};

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

// Per-feature standardization statistics computed on train samples only.
struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct ModalityBlock {
    std::string label;
    std::size_t num_features = 0;
    std::vector<double> values;  // num_samples x num_features
};

// Preprocessed, fully dense dataset: all modalities share one sample axis.
struct AlignedDataset {
    std::vector<std::string> sample_ids;
    std::vector<std::string> cohorts;
    std::vector<int> labels;               // class indices
    std::vector<std::string> class_names;  // class index -> subtype string
    std::vector<Split> split;
    std::vector<ModalityBlock> modalities;
    std::vector<FeatureStats> stats;  // parallel to modalities; empty before standardize

    std::size_t num_samples() const { return sample_ids.size(); }
    std::size_t num_classes() const { return class_names.size(); }
    std::vector<std::size_t> indices_of(Split s) const;
    std::vector<std::size_t> modality_dims() const;

    Tensor modality_batch(std::size_t modality, std::span<const std::size_t> rows) const;
    std::vector<int> label_batch(std::span<const std::size_t> rows) const;

    // Restricts to the given modality indices (Table-2 style subset runs).
    AlignedDataset subset_modalities(std::span<const std::size_t> keep) const;

    void validate() const;
};

// --- ingest operations ----------------------------------------------------

// Delimited text with one ID header row and one ID column. Empty cells and
// the tokens NA / NaN (case-insensitive) set the missing mask.
OmicsMatrix load_matrix(const std::string& path, Orientation orientation,
                        char delimiter = '\t');

LabelTable load_labels(const std::string& path, char delimiter = '\t');

// Removes features whose missing fraction strictly exceeds the threshold.
OmicsMatrix drop_sparse_features(const OmicsMatrix& m, double max_missing_fraction = 0.4);

// Replaces every missing slot with the median of the feature's observed
// values (even counts take the midpoint of the central pair).
OmicsMatrix impute_median(const OmicsMatrix& m);

// Restricts >= 2 same-modality matrices to their shared features, in
// lexicographic order.
std::vector<OmicsMatrix> intersect_features(std::span<const OmicsMatrix> cohort_matrices);

// Reorders features lexicographically (the single-cohort analogue of
// intersect_features' canonical order).
OmicsMatrix sort_features(const OmicsMatrix& m);

// Held-out cohorts become test; the rest is split per class with the given
// validation fraction, deterministically under the seed.
std::vector<Split> make_splits(const LabelTable& labels, const SplitSpec& spec);

// Per-feature z-scoring with train-split statistics; near-constant features
// (stddev < 1e-12) map to all zeros. Stores the statistics on the result.
AlignedDataset standardize(const AlignedDataset& d);

// --- pipeline ---------------------------------------------------------------

struct PipelineConfig {
    double max_missing_fraction = 0.4;
    SplitSpec split;
};

struct ModalityStageCounts {
    std::string label;
    std::vector<std::size_t> loaded;      // per cohort file
    std::vector<std::size_t> after_drop;  // per cohort file
    std::size_t after_intersect = 0;
};

struct PipelineResult {
    AlignedDataset dataset;
    std::vector<ModalityStageCounts> stage_counts;
};

// Full preprocessing: drop -> impute -> intersect -> align samples ->
// split -> standardize. Labels are encoded lexicographically over the
// subtypes present among aligned samples.
PipelineResult build_dataset(std::vector<std::vector<OmicsMatrix>> per_modality_cohorts,
                             const LabelTable& labels, const PipelineConfig& cfg);

}  // namespace moxgate
