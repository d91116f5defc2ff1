#include "moxgate/omics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "moxgate/errors.hpp"
#include "moxgate/rng.hpp"

namespace moxgate {

namespace {

bool is_missing_token(const std::string& cell) {
    if (cell.empty()) return true;
    std::string lower;
    lower.reserve(cell.size());
    for (char c : cell) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return lower == "na" || lower == "nan";
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == delimiter) {
            fields.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    return fields;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

void check_unique(const std::vector<std::string>& ids, const std::string& path,
                  const char* kind) {
    std::unordered_set<std::string> seen;
    for (const std::string& id : ids) {
        if (!seen.insert(id).second) {
            throw FormatError(path + ": duplicate " + kind + " ID '" + id + "'");
        }
    }
}

double parse_value(const std::string& cell, const std::string& path, std::size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0') {
        std::ostringstream msg;
        msg << path << ": line " << line_no << ": cannot parse value '" << cell << "'";
        throw FormatError(msg.str());
    }
    return v;
}

double median_of_sorted(std::vector<double>& vals) {
    std::sort(vals.begin(), vals.end());
    const std::size_t n = vals.size();
    if (n % 2 == 1) return vals[n / 2];
    return 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
}

}  // namespace

std::size_t OmicsMatrix::missing_count() const {
    std::size_t n = 0;
    for (std::uint8_t m : missing) n += m;
    return n;
}

std::size_t LabelTable::find(const std::string& sample_id) const {
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        if (sample_ids[i] == sample_id) return i;
    }
    return static_cast<std::size_t>(-1);
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw ValueError("unknown split tag '" + name + "'");
}

std::vector<std::size_t> AlignedDataset::indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (split[i] == s) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> AlignedDataset::modality_dims() const {
    std::vector<std::size_t> dims;
    for (const ModalityBlock& m : modalities) dims.push_back(m.num_features);
    return dims;
}

Tensor AlignedDataset::modality_batch(std::size_t modality,
                                      std::span<const std::size_t> rows) const {
    const ModalityBlock& block = modalities.at(modality);
    Tensor out = Tensor::zeros({rows.size(), block.num_features});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(block.values.data() + rows[r] * block.num_features, block.num_features,
                    out.data_mut().data() + r * block.num_features);
    }
    return out;
}

std::vector<int> AlignedDataset::label_batch(std::span<const std::size_t> rows) const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(labels[r]);
    return out;
}

AlignedDataset AlignedDataset::subset_modalities(std::span<const std::size_t> keep) const {
    AlignedDataset out = *this;
    out.modalities.clear();
    out.stats.clear();
    for (std::size_t i : keep) {
        out.modalities.push_back(modalities.at(i));
        if (i < stats.size()) out.stats.push_back(stats[i]);
    }
    return out;
}

void AlignedDataset::validate() const {
    const std::size_t n = sample_ids.size();
    if (cohorts.size() != n || labels.size() != n || split.size() != n) {
        throw DataError("dataset: sample-axis arrays disagree in length");
    }
    for (const ModalityBlock& m : modalities) {
        if (m.values.size() != n * m.num_features) {
            throw DataError("dataset: modality '" + m.label + "' value count mismatch");
        }
    }
    for (int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= class_names.size()) {
            throw DataError("dataset: class index out of range");
        }
    }
}

OmicsMatrix load_matrix(const std::string& path, Orientation orientation, char delimiter) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.size() < 2) {
        throw FormatError(path + ": no data rows (header only or empty file)");
    }
    const std::vector<std::string> header = split_line(lines[0], delimiter);
    if (header.size() < 2) {
        throw FormatError(path + ": header has no data columns");
    }
    // First header cell is the corner label and carries no data.
    std::vector<std::string> col_ids(header.begin() + 1, header.end());
    const std::size_t cols = col_ids.size();

    std::vector<std::string> row_ids;
    std::vector<double> values;
    std::vector<std::uint8_t> missing;
    values.reserve((lines.size() - 1) * cols);
    missing.reserve((lines.size() - 1) * cols);
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::vector<std::string> fields = split_line(lines[li], delimiter);
        if (fields.size() != cols + 1) {
            std::ostringstream msg;
            msg << path << ": line " << li + 1 << ": expected " << cols + 1
                << " fields, got " << fields.size();
            throw FormatError(msg.str());
        }
        row_ids.push_back(fields[0]);
        for (std::size_t c = 1; c < fields.size(); ++c) {
            if (is_missing_token(fields[c])) {
                values.push_back(0.0);
                missing.push_back(1);
            } else {
                values.push_back(parse_value(fields[c], path, li + 1));
                missing.push_back(0);
            }
        }
    }

    OmicsMatrix m;
    if (orientation == Orientation::samples_in_rows) {
        m.sample_ids = std::move(row_ids);
        m.feature_ids = std::move(col_ids);
        m.values = std::move(values);
        m.missing = std::move(missing);
    } else {
        m.sample_ids = std::move(col_ids);
        m.feature_ids = std::move(row_ids);
        const std::size_t nf = m.feature_ids.size(), ns = m.sample_ids.size();
        m.values.resize(values.size());
        m.missing.resize(missing.size());
        for (std::size_t f = 0; f < nf; ++f) {
            for (std::size_t s = 0; s < ns; ++s) {
                m.values[s * nf + f] = values[f * ns + s];
                m.missing[s * nf + f] = missing[f * ns + s];
            }
        }
    }
    check_unique(m.sample_ids, path, "sample");
    check_unique(m.feature_ids, path, "feature");
    return m;
}

LabelTable load_labels(const std::string& path, char delimiter) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.size() < 2) throw FormatError(path + ": no label rows");
    const std::vector<std::string> header = split_line(lines[0], delimiter);
    if (header.size() != 3 || header[0] != "sample_id" || header[1] != "cohort" ||
        header[2] != "subtype") {
        throw FormatError(path + ": expected header 'sample_id<sep>cohort<sep>subtype'");
    }
    LabelTable t;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::vector<std::string> fields = split_line(lines[li], delimiter);
        if (fields.size() != 3) {
            std::ostringstream msg;
            msg << path << ": line " << li + 1 << ": expected 3 fields, got "
                << fields.size();
            throw FormatError(msg.str());
        }
        t.sample_ids.push_back(fields[0]);
        t.cohort.push_back(fields[1]);
        t.subtype.push_back(fields[2]);
    }
    check_unique(t.sample_ids, path, "sample");
    return t;
}

OmicsMatrix drop_sparse_features(const OmicsMatrix& m, double max_missing_fraction) {
    if (max_missing_fraction < 0.0 || max_missing_fraction > 1.0) {
        throw ValueError("drop_sparse_features: threshold must lie in [0, 1]");
    }
    const std::size_t ns = m.num_samples(), nf = m.num_features();
    std::vector<std::size_t> keep;
    for (std::size_t f = 0; f < nf; ++f) {
        std::size_t miss = 0;
        for (std::size_t s = 0; s < ns; ++s) miss += m.missing[s * nf + f];
        const double fraction =
            ns == 0 ? 0.0 : static_cast<double>(miss) / static_cast<double>(ns);
        // Strictly "more than": a feature at exactly the threshold is retained.
        if (fraction <= max_missing_fraction) keep.push_back(f);
    }
    OmicsMatrix out;
    out.modality = m.modality;
    out.sample_ids = m.sample_ids;
    for (std::size_t f : keep) out.feature_ids.push_back(m.feature_ids[f]);
    out.values.resize(ns * keep.size());
    out.missing.resize(ns * keep.size());
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t i = 0; i < keep.size(); ++i) {
            out.values[s * keep.size() + i] = m.values[s * nf + keep[i]];
            out.missing[s * keep.size() + i] = m.missing[s * nf + keep[i]];
        }
    }
    return out;
}

OmicsMatrix impute_median(const OmicsMatrix& m) {
    const std::size_t ns = m.num_samples(), nf = m.num_features();
    OmicsMatrix out = m;
    for (std::size_t f = 0; f < nf; ++f) {
        std::vector<double> observed;
        for (std::size_t s = 0; s < ns; ++s) {
            if (!m.missing[s * nf + f]) observed.push_back(m.values[s * nf + f]);
        }
        if (observed.empty()) {
            throw DataError("impute_median: feature '" + m.feature_ids[f] +
                            "' has no observed values");
        }
        if (observed.size() == ns) continue;
        const double med = median_of_sorted(observed);
        for (std::size_t s = 0; s < ns; ++s) {
            if (out.missing[s * nf + f]) {
                out.values[s * nf + f] = med;
                out.missing[s * nf + f] = 0;
            }
        }
    }
    return out;
}

namespace {

OmicsMatrix select_features(const OmicsMatrix& m, const std::vector<std::string>& order) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t f = 0; f < m.feature_ids.size(); ++f) index[m.feature_ids[f]] = f;
    const std::size_t ns = m.num_samples(), nf = m.num_features();
    OmicsMatrix out;
    out.modality = m.modality;
    out.sample_ids = m.sample_ids;
    out.feature_ids = order;
    out.values.resize(ns * order.size());
    out.missing.resize(ns * order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t f = index.at(order[i]);
        for (std::size_t s = 0; s < ns; ++s) {
            out.values[s * order.size() + i] = m.values[s * nf + f];
            out.missing[s * order.size() + i] = m.missing[s * nf + f];
        }
    }
    return out;
}

}  // namespace

std::vector<OmicsMatrix> intersect_features(std::span<const OmicsMatrix> cohort_matrices) {
    if (cohort_matrices.size() < 2) {
        throw ValueError("intersect_features: need at least two matrices");
    }
    for (const OmicsMatrix& m : cohort_matrices) {
        if (m.modality != cohort_matrices[0].modality) {
            throw ValueError("intersect_features: modality labels differ ('" +
                             cohort_matrices[0].modality + "' vs '" + m.modality + "')");
        }
    }
    std::set<std::string> shared(cohort_matrices[0].feature_ids.begin(),
                                 cohort_matrices[0].feature_ids.end());
    for (std::size_t i = 1; i < cohort_matrices.size(); ++i) {
        std::set<std::string> next(cohort_matrices[i].feature_ids.begin(),
                                   cohort_matrices[i].feature_ids.end());
        std::set<std::string> kept;
        std::set_intersection(shared.begin(), shared.end(), next.begin(), next.end(),
                              std::inserter(kept, kept.begin()));
        shared = std::move(kept);
    }
    if (shared.empty()) {
        throw DataError("intersect_features: no shared features for modality '" +
                        cohort_matrices[0].modality + "'");
    }
    // std::set iteration is already the canonical lexicographic order.
    const std::vector<std::string> order(shared.begin(), shared.end());
    std::vector<OmicsMatrix> out;
    out.reserve(cohort_matrices.size());
    for (const OmicsMatrix& m : cohort_matrices) out.push_back(select_features(m, order));
    return out;
}

OmicsMatrix sort_features(const OmicsMatrix& m) {
    std::vector<std::string> order = m.feature_ids;
    std::sort(order.begin(), order.end());
    return select_features(m, order);
}

std::vector<Split> make_splits(const LabelTable& labels, const SplitSpec& spec) {
    if (spec.validation_fraction <= 0.0 || spec.validation_fraction >= 1.0) {
        throw ValueError("make_splits: validation fraction must lie in (0, 1)");
    }
    const std::set<std::string> held(spec.held_out_cohorts.begin(),
                                     spec.held_out_cohorts.end());
    std::vector<Split> assignment(labels.size(), Split::train);

    // Group eligible (non-held-out) samples per subtype. Every subtype in the
    // table must keep at least 2 eligible samples so both train and
    // validation receive one.
    std::map<std::string, std::vector<std::size_t>> per_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        per_class[labels.subtype[i]];
        if (held.contains(labels.cohort[i])) {
            assignment[i] = Split::test;
        } else {
            per_class[labels.subtype[i]].push_back(i);
        }
    }
    Rng rng(spec.seed);
    for (auto& [subtype, members] : per_class) {
        if (members.size() < 2) {
            throw DataError("make_splits: class '" + subtype + "' has fewer than 2 " +
                            "samples outside the held-out cohorts");
        }
        rng.shuffle(members);
        // At least one sample lands in each of train and validation.
        const double exact = spec.validation_fraction * static_cast<double>(members.size());
        std::size_t n_val = static_cast<std::size_t>(std::llround(exact));
        n_val = std::max<std::size_t>(1, std::min(n_val, members.size() - 1));
        for (std::size_t i = 0; i < n_val; ++i) assignment[members[i]] = Split::val;
    }
    return assignment;
}

AlignedDataset standardize(const AlignedDataset& d) {
    AlignedDataset out = d;
    out.stats.clear();
    const std::vector<std::size_t> train_rows = d.indices_of(Split::train);
    if (train_rows.empty()) throw DataError("standardize: no train samples");
    for (ModalityBlock& block : out.modalities) {
        const std::size_t nf = block.num_features;
        FeatureStats stats;
        stats.mean.assign(nf, 0.0);
        stats.stddev.assign(nf, 0.0);
        for (std::size_t r : train_rows) {
            for (std::size_t f = 0; f < nf; ++f) stats.mean[f] += block.values[r * nf + f];
        }
        const double inv_n = 1.0 / static_cast<double>(train_rows.size());
        for (std::size_t f = 0; f < nf; ++f) stats.mean[f] *= inv_n;
        for (std::size_t r : train_rows) {
            for (std::size_t f = 0; f < nf; ++f) {
                const double c = block.values[r * nf + f] - stats.mean[f];
                stats.stddev[f] += c * c;
            }
        }
        for (std::size_t f = 0; f < nf; ++f) {
            stats.stddev[f] = std::sqrt(stats.stddev[f] * inv_n);  // population sigma
        }
        for (std::size_t r = 0; r < d.num_samples(); ++r) {
            for (std::size_t f = 0; f < nf; ++f) {
                double& v = block.values[r * nf + f];
                v = stats.stddev[f] < 1e-12 ? 0.0 : (v - stats.mean[f]) / stats.stddev[f];
            }
        }
        out.stats.push_back(std::move(stats));
    }
    return out;
}

PipelineResult build_dataset(std::vector<std::vector<OmicsMatrix>> per_modality_cohorts,
                             const LabelTable& labels, const PipelineConfig& cfg) {
    if (per_modality_cohorts.empty()) throw DataError("build_dataset: no modalities");

    PipelineResult result;
    // Stage 1-3 per modality: drop sparse features, impute, intersect cohorts.
    std::vector<OmicsMatrix> merged;  // one matrix per modality, cohorts stacked
    for (std::vector<OmicsMatrix>& cohorts : per_modality_cohorts) {
        if (cohorts.empty()) throw DataError("build_dataset: modality without matrices");
        ModalityStageCounts counts;
        counts.label = cohorts[0].modality;
        for (OmicsMatrix& m : cohorts) {
            counts.loaded.push_back(m.num_features());
            m = impute_median(drop_sparse_features(m, cfg.max_missing_fraction));
            counts.after_drop.push_back(m.num_features());
        }
        std::vector<OmicsMatrix> aligned =
            cohorts.size() >= 2 ? intersect_features(cohorts)
                                : std::vector<OmicsMatrix>{sort_features(cohorts[0])};
        counts.after_intersect = aligned[0].num_features();
        result.stage_counts.push_back(std::move(counts));

        // Stack cohorts along the sample axis.
        OmicsMatrix stacked;
        stacked.modality = aligned[0].modality;
        stacked.feature_ids = aligned[0].feature_ids;
        for (const OmicsMatrix& m : aligned) {
            for (const std::string& id : stacked.sample_ids) {
                for (const std::string& other : m.sample_ids) {
                    if (id == other) {
                        throw DataError("build_dataset: sample '" + id +
                                        "' appears in multiple cohort files");
                    }
                }
            }
            stacked.sample_ids.insert(stacked.sample_ids.end(), m.sample_ids.begin(),
                                      m.sample_ids.end());
            stacked.values.insert(stacked.values.end(), m.values.begin(), m.values.end());
            stacked.missing.insert(stacked.missing.end(), m.missing.begin(),
                                   m.missing.end());
        }
        merged.push_back(std::move(stacked));
    }

    // Samples usable for training appear in every modality and in the labels.
    std::set<std::string> common(merged[0].sample_ids.begin(), merged[0].sample_ids.end());
    for (std::size_t i = 1; i < merged.size(); ++i) {
        std::set<std::string> next(merged[i].sample_ids.begin(), merged[i].sample_ids.end());
        std::set<std::string> kept;
        std::set_intersection(common.begin(), common.end(), next.begin(), next.end(),
                              std::inserter(kept, kept.begin()));
        common = std::move(kept);
    }
    std::vector<std::string> aligned_ids;
    for (const std::string& id : common) {
        if (labels.find(id) != static_cast<std::size_t>(-1)) aligned_ids.push_back(id);
    }
    if (aligned_ids.empty()) {
        throw DataError("build_dataset: no samples shared by all modalities and labels");
    }
    // std::set iteration already yields lexicographic sample order.

    AlignedDataset d;
    d.sample_ids = aligned_ids;
    LabelTable aligned_labels;
    std::set<std::string> subtype_set;
    for (const std::string& id : aligned_ids) {
        const std::size_t li = labels.find(id);
        aligned_labels.sample_ids.push_back(id);
        aligned_labels.cohort.push_back(labels.cohort[li]);
        aligned_labels.subtype.push_back(labels.subtype[li]);
        subtype_set.insert(labels.subtype[li]);
    }
    d.cohorts = aligned_labels.cohort;
    d.class_names.assign(subtype_set.begin(), subtype_set.end());  // lexicographic
    for (const std::string& subtype : aligned_labels.subtype) {
        const auto it = std::lower_bound(d.class_names.begin(), d.class_names.end(), subtype);
        d.labels.push_back(static_cast<int>(it - d.class_names.begin()));
    }

    for (OmicsMatrix& m : merged) {
        std::unordered_map<std::string, std::size_t> row_of;
        for (std::size_t s = 0; s < m.sample_ids.size(); ++s) row_of[m.sample_ids[s]] = s;
        ModalityBlock block;
        block.label = m.modality;
        block.num_features = m.num_features();
        block.values.resize(aligned_ids.size() * block.num_features);
        for (std::size_t r = 0; r < aligned_ids.size(); ++r) {
            const std::size_t src = row_of.at(aligned_ids[r]);
            std::copy_n(m.values.data() + src * block.num_features, block.num_features,
                        block.values.data() + r * block.num_features);
        }
        d.modalities.push_back(std::move(block));
    }

    d.split = make_splits(aligned_labels, cfg.split);
    d.validate();
    result.dataset = standardize(d);
    return result;
}

}  // namespace moxgate
