#include "moxgate/dataset_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "moxgate/errors.hpp"

namespace moxgate {

using nlohmann::json;

namespace {

constexpr const char* kDatasetType = "moxgate-dataset";
constexpr const char* kManifestType = "moxgate-manifest";

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    return j;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write file: " + path);
    out << j.dump(2) << '\n';
}

json splits_to_json(const std::vector<Split>& split) {
    json arr = json::array();
    for (Split s : split) arr.push_back(split_name(s));
    return arr;
}

std::vector<Split> splits_from_json(const json& arr) {
    std::vector<Split> out;
    for (const auto& s : arr) out.push_back(split_from_name(s.get<std::string>()));
    return out;
}

json stats_to_json(const std::vector<FeatureStats>& stats) {
    json arr = json::array();
    for (const FeatureStats& s : stats) {
        arr.push_back(json{{"mean", s.mean}, {"stddev", s.stddev}});
    }
    return arr;
}

std::vector<FeatureStats> stats_from_json(const json& arr) {
    std::vector<FeatureStats> out;
    for (const auto& s : arr) {
        FeatureStats fs;
        fs.mean = s.at("mean").get<std::vector<double>>();
        fs.stddev = s.at("stddev").get<std::vector<double>>();
        out.push_back(std::move(fs));
    }
    return out;
}

}  // namespace

PipelineResult run_pipeline(const DataSourceConfig& src) {
    if (src.modalities.empty()) throw ConfigError("data: no modalities configured");
    if (src.labels_file.empty()) throw ConfigError("data: labels file is required");
    std::vector<std::vector<OmicsMatrix>> per_modality;
    for (const MatrixSource& ms : src.modalities) {
        if (ms.files.empty()) {
            throw ConfigError("data: modality '" + ms.label + "' has no files");
        }
        std::vector<OmicsMatrix> cohorts;
        for (const std::string& path : ms.files) {
            OmicsMatrix m = load_matrix(path, ms.orientation, src.delimiter);
            m.modality = ms.label;
            cohorts.push_back(std::move(m));
        }
        per_modality.push_back(std::move(cohorts));
    }
    const LabelTable labels = load_labels(src.labels_file, src.delimiter);
    return build_dataset(std::move(per_modality), labels, src.pipeline);
}

void save_dataset(const std::string& path, const AlignedDataset& d) {
    json j;
    j["type"] = kDatasetType;
    j["format_version"] = 1;
    j["sample_ids"] = d.sample_ids;
    j["cohorts"] = d.cohorts;
    j["labels"] = d.labels;
    j["class_names"] = d.class_names;
    j["split"] = splits_to_json(d.split);
    json mods = json::array();
    for (const ModalityBlock& m : d.modalities) {
        mods.push_back(json{{"label", m.label},
                            {"num_features", m.num_features},
                            {"values", m.values}});
    }
    j["modalities"] = mods;
    j["standardization"] = stats_to_json(d.stats);
    write_json(path, j);
}

AlignedDataset load_dataset_file(const std::string& path) {
    const json j = load_json(path);
    if (j.value("type", "") != kDatasetType) {
        throw FormatError(path + ": not a dataset file");
    }
    AlignedDataset d;
    d.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
    d.cohorts = j.at("cohorts").get<std::vector<std::string>>();
    d.labels = j.at("labels").get<std::vector<int>>();
    d.class_names = j.at("class_names").get<std::vector<std::string>>();
    d.split = splits_from_json(j.at("split"));
    for (const auto& m : j.at("modalities")) {
        ModalityBlock block;
        block.label = m.at("label").get<std::string>();
        block.num_features = m.at("num_features").get<std::size_t>();
        block.values = m.at("values").get<std::vector<double>>();
        d.modalities.push_back(std::move(block));
    }
    d.stats = stats_from_json(j.at("standardization"));
    d.validate();
    return d;
}

namespace {

json source_to_json(const DataSourceConfig& src) {
    json mods = json::array();
    for (const MatrixSource& m : src.modalities) {
        mods.push_back(json{
            {"label", m.label},
            {"files", m.files},
            {"orientation", m.orientation == Orientation::samples_in_rows
                                ? "samples_in_rows"
                                : "features_in_rows"}});
    }
    return json{{"modalities", mods},
                {"labels_file", src.labels_file},
                {"delimiter", std::string(1, src.delimiter)},
                {"max_missing_fraction", src.pipeline.max_missing_fraction},
                {"split",
                 json{{"held_out_cohorts", src.pipeline.split.held_out_cohorts},
                      {"validation_fraction", src.pipeline.split.validation_fraction},
                      {"seed", src.pipeline.split.seed}}}};
}

DataSourceConfig source_from_json(const json& j) {
    DataSourceConfig src;
    for (const auto& m : j.at("modalities")) {
        MatrixSource ms;
        ms.label = m.at("label").get<std::string>();
        ms.files = m.at("files").get<std::vector<std::string>>();
        ms.orientation = m.at("orientation").get<std::string>() == "features_in_rows"
                             ? Orientation::features_in_rows
                             : Orientation::samples_in_rows;
        src.modalities.push_back(std::move(ms));
    }
    src.labels_file = j.at("labels_file").get<std::string>();
    src.delimiter = j.at("delimiter").get<std::string>().at(0);
    src.pipeline.max_missing_fraction = j.at("max_missing_fraction").get<double>();
    const json& split = j.at("split");
    src.pipeline.split.held_out_cohorts =
        split.at("held_out_cohorts").get<std::vector<std::string>>();
    src.pipeline.split.validation_fraction = split.at("validation_fraction").get<double>();
    src.pipeline.split.seed = split.at("seed").get<std::uint64_t>();
    return src;
}

}  // namespace

void save_manifest(const std::string& path, const DataSourceConfig& src,
                   const PipelineResult& result) {
    const AlignedDataset& d = result.dataset;
    json j;
    j["type"] = kManifestType;
    j["format_version"] = 1;
    j["data"] = source_to_json(src);
    json counts = json::array();
    for (const ModalityStageCounts& c : result.stage_counts) {
        counts.push_back(json{{"label", c.label},
                              {"loaded", c.loaded},
                              {"after_drop", c.after_drop},
                              {"after_intersect", c.after_intersect}});
    }
    j["feature_counts"] = counts;
    j["class_names"] = d.class_names;
    j["samples"] = json{{"count", d.num_samples()},
                        {"train", d.indices_of(Split::train).size()},
                        {"val", d.indices_of(Split::val).size()},
                        {"test", d.indices_of(Split::test).size()}};
    j["sample_ids"] = d.sample_ids;
    j["split_assignment"] = splits_to_json(d.split);
    j["standardization"] = stats_to_json(d.stats);
    write_json(path, j);
}

AlignedDataset load_from_manifest(const std::string& path) {
    const json j = load_json(path);
    if (j.value("type", "") != kManifestType) {
        throw FormatError(path + ": not a manifest file");
    }
    const DataSourceConfig src = source_from_json(j.at("data"));
    PipelineResult rebuilt = run_pipeline(src);
    AlignedDataset& d = rebuilt.dataset;

    // The pipeline is deterministic; verify the recorded artifacts still match.
    if (j.at("sample_ids").get<std::vector<std::string>>() != d.sample_ids) {
        throw DataError(path + ": sample set changed since the manifest was written");
    }
    if (j.at("class_names").get<std::vector<std::string>>() != d.class_names) {
        throw DataError(path + ": label encoding changed since the manifest was written");
    }
    const std::vector<Split> stored = splits_from_json(j.at("split_assignment"));
    if (stored != d.split) {
        throw DataError(path + ": split assignment changed since the manifest was written");
    }
    const std::vector<FeatureStats> stats = stats_from_json(j.at("standardization"));
    if (stats.size() != d.stats.size()) {
        throw DataError(path + ": standardization stats changed since the manifest was written");
    }
    for (std::size_t i = 0; i < stats.size(); ++i) {
        if (stats[i].mean != d.stats[i].mean || stats[i].stddev != d.stats[i].stddev) {
            throw DataError(path +
                            ": standardization stats changed since the manifest was written");
        }
    }
    return std::move(d);
}

AlignedDataset load_any_dataset(const std::string& path) {
    const json j = load_json(path);
    const std::string type = j.value("type", "");
    if (type == kDatasetType) return load_dataset_file(path);
    if (type == kManifestType) return load_from_manifest(path);
    throw FormatError(path + ": unrecognized file type '" + type + "'");
}

void export_dataset_tsv(const AlignedDataset& d, const std::string& dir) {
    std::filesystem::create_directories(dir);
    char buf[32];
    for (const ModalityBlock& m : d.modalities) {
        std::ofstream out(std::filesystem::path(dir) / (m.label + ".tsv"));
        if (!out) throw FormatError("cannot write TSV for modality '" + m.label + "'");
        out << "sample_id";
        for (std::size_t f = 0; f < m.num_features; ++f) out << '\t' << m.label << "_f" << f;
        out << '\n';
        for (std::size_t s = 0; s < d.num_samples(); ++s) {
            out << d.sample_ids[s];
            for (std::size_t f = 0; f < m.num_features; ++f) {
                std::snprintf(buf, sizeof(buf), "%.17g", m.values[s * m.num_features + f]);
                out << '\t' << buf;
            }
            out << '\n';
        }
    }
    std::ofstream out(std::filesystem::path(dir) / "labels.tsv");
    if (!out) throw FormatError("cannot write labels.tsv");
    out << "sample_id\tcohort\tsubtype\n";
    for (std::size_t s = 0; s < d.num_samples(); ++s) {
        out << d.sample_ids[s] << '\t' << d.cohorts[s] << '\t'
            << d.class_names[static_cast<std::size_t>(d.labels[s])] << '\n';
    }
}

}  // namespace moxgate
