#pragma once

#include <string>
#include <vector>

#include "moxgate/omics.hpp"

namespace moxgate {

struct MatrixSource {
    std::string label;
    std::vector<std::string> files;  // one per cohort, or a single study-wide file
    Orientation orientation = Orientation::samples_in_rows;
};

// Everything needed to run the ingest pipeline from raw files.
struct DataSourceConfig {
    std::vector<MatrixSource> modalities;
    std::string labels_file;
    char delimiter = '\t';
    PipelineConfig pipeline;
};

// Loads every file and runs drop -> impute -> intersect -> split -> standardize.
PipelineResult run_pipeline(const DataSourceConfig& src);

// Fully materialized dataset container (used for synthetic data and small
// processed sets). Doubles survive the JSON round trip bit-exactly.
void save_dataset(const std::string& path, const AlignedDataset& d);
AlignedDataset load_dataset_file(const std::string& path);

// Manifest: records sources, per-stage feature counts, the label encoding,
// the split assignment, and the standardization statistics. Reloading
// re-runs the deterministic pipeline from the recorded sources and verifies
// the stored assignment and statistics still match.
void save_manifest(const std::string& path, const DataSourceConfig& src,
                   const PipelineResult& result);
AlignedDataset load_from_manifest(const std::string& path);

// Dispatches on the file's "type" field (dataset vs manifest).
AlignedDataset load_any_dataset(const std::string& path);

// Writes one <label>.tsv per modality (samples in rows) plus labels.tsv in
// the ingest input format, so generated data can exercise the file pipeline.
void export_dataset_tsv(const AlignedDataset& d, const std::string& dir);

}  // namespace moxgate
