#pragma once

#include <cstdint>
#include <vector>

#include "moxgate/omics.hpp"

namespace moxgate {

// Generator for desk-scale multi-omic benchmarks. `dependency` moves class
// signal from per-modality Gaussian means (0) into a coupling where each
// modality expresses one of K shared patterns and only the pattern offsets
// between modalities identify the class (1). At dependency 1 every
// single-modality marginal is class-independent, so no single modality can
// beat chance while the joint observation is fully informative.
struct SyntheticSpec {
    std::size_t samples_per_class = 40;
    std::size_t num_classes = 5;
    std::vector<std::size_t> modality_dims = {20, 20, 20};
    double separation = 2.0;
    double dependency = 0.0;
    double noise = 1.0;
    std::vector<double> signal_scales;  // per-modality multiplier; empty = all 1
    double validation_fraction = 0.15;
    double test_fraction = 0.15;
    std::uint64_t seed = 1;

    void validate() const;
};

AlignedDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace moxgate
