#include "moxgate/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "moxgate/errors.hpp"
#include "moxgate/rng.hpp"

namespace moxgate {

void SyntheticSpec::validate() const {
    if (samples_per_class < 2) throw ValueError("synthetic: need >= 2 samples per class");
    if (num_classes < 2) throw ValueError("synthetic: need >= 2 classes");
    if (modality_dims.empty()) throw ValueError("synthetic: need >= 1 modality");
    for (std::size_t d : modality_dims) {
        if (d == 0) throw ValueError("synthetic: modality dims must be positive");
    }
    if (separation < 0.0) throw ValueError("synthetic: separation must be >= 0");
    if (dependency < 0.0 || dependency > 1.0) {
        throw ValueError("synthetic: dependency must lie in [0, 1]");
    }
    if (noise < 0.0) throw ValueError("synthetic: noise must be >= 0");
    if (!signal_scales.empty() && signal_scales.size() != modality_dims.size()) {
        throw ValueError("synthetic: signal_scales must match modality count");
    }
    if (validation_fraction <= 0.0 || test_fraction < 0.0 ||
        validation_fraction + test_fraction >= 1.0) {
        throw ValueError("synthetic: split fractions must leave room for training data");
    }
}

namespace {

std::vector<std::string> default_labels(std::size_t m) {
    if (m == 3) return {"gene", "methylation", "mirna"};
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < m; ++i) labels.push_back("mod" + std::to_string(i));
    return labels;
}

}  // namespace

AlignedDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t k = spec.num_classes;
    const std::size_t num_mods = spec.modality_dims.size();
    const std::size_t total = k * spec.samples_per_class;

    Rng master(spec.seed);
    Rng structure_rng = master.fork("structure");
    Rng sample_rng = master.fork("samples");
    Rng split_rng = master.fork("split");

    // Class means carry the marginal signal. The coupled signal lives on a
    // per-sample phase circle: modality m expresses the phase shifted by
    // m * (2*pi*c/K), so each marginal is phase-uniform (class-independent)
    // while the phase offsets between modalities identify the class.
    std::vector<std::vector<std::vector<double>>> means(k);  // [class][mod][dim]
    std::vector<std::vector<double>> circle_u(num_mods), circle_v(num_mods);
    for (std::size_t c = 0; c < k; ++c) {
        means[c].resize(num_mods);
        for (std::size_t m = 0; m < num_mods; ++m) {
            means[c][m].resize(spec.modality_dims[m]);
            for (double& v : means[c][m]) v = spec.separation * structure_rng.normal();
        }
    }
    for (std::size_t m = 0; m < num_mods; ++m) {
        circle_u[m].resize(spec.modality_dims[m]);
        circle_v[m].resize(spec.modality_dims[m]);
        for (double& v : circle_u[m]) v = spec.separation * structure_rng.normal();
        for (double& v : circle_v[m]) v = spec.separation * structure_rng.normal();
    }

    AlignedDataset d;
    d.class_names.reserve(k);
    for (std::size_t c = 0; c < k; ++c) d.class_names.push_back("C" + std::to_string(c));
    const std::vector<std::string> mod_labels = default_labels(num_mods);
    for (std::size_t m = 0; m < num_mods; ++m) {
        ModalityBlock block;
        block.label = mod_labels[m];
        block.num_features = spec.modality_dims[m];
        block.values.resize(total * spec.modality_dims[m]);
        d.modalities.push_back(std::move(block));
    }

    std::size_t row = 0;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
            d.sample_ids.push_back("syn" + std::to_string(row));
            d.labels.push_back(static_cast<int>(c));
            // Hidden key: a uniform phase; consecutive modalities differ by
            // the class angle 2*pi*c/K.
            const double phi = sample_rng.uniform() * 2.0 * std::numbers::pi;
            const double class_angle =
                2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
            for (std::size_t m = 0; m < num_mods; ++m) {
                const std::size_t dim = spec.modality_dims[m];
                const double sig = spec.signal_scales.empty() ? 1.0 : spec.signal_scales[m];
                const double angle = phi + static_cast<double>(m) * class_angle;
                const double cos_a = std::cos(angle), sin_a = std::sin(angle);
                double* out = d.modalities[m].values.data() + row * dim;
                for (std::size_t j = 0; j < dim; ++j) {
                    const double coupled = cos_a * circle_u[m][j] + sin_a * circle_v[m][j];
                    const double signal = (1.0 - spec.dependency) * means[c][m][j] +
                                          spec.dependency * coupled;
                    out[j] = sig * signal + spec.noise * sample_rng.normal();
                }
            }
        }
    }

    // Stratified split; cohort names encode the held-out role so a TSV export
    // remains compatible with cohort-based splitting.
    d.split.assign(total, Split::train);
    d.cohorts.assign(total, "SYNTH-TRAINVAL");
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < total; ++i) {
            if (d.labels[i] == static_cast<int>(c)) members.push_back(i);
        }
        split_rng.shuffle(members);
        const auto clamp_count = [&](double fraction) {
            const auto n = static_cast<std::size_t>(
                std::llround(fraction * static_cast<double>(members.size())));
            return std::min(n, members.size() - 2);
        };
        std::size_t n_test = spec.test_fraction == 0.0 ? 0 : std::max<std::size_t>(
                                 1, clamp_count(spec.test_fraction));
        std::size_t n_val = std::max<std::size_t>(1, clamp_count(spec.validation_fraction));
        if (n_test + n_val >= members.size()) n_test = members.size() - n_val - 1;
        for (std::size_t i = 0; i < n_test; ++i) {
            d.split[members[i]] = Split::test;
            d.cohorts[members[i]] = "SYNTH-TEST";
        }
        for (std::size_t i = n_test; i < n_test + n_val; ++i) {
            d.split[members[i]] = Split::val;
        }
    }
    d.validate();
    return d;
}

}  // namespace moxgate
