#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace moxgate {

struct GradCheckItem {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckItem> items;
    double max_rel_err = 0.0;
    std::string worst_item;

    bool passed(double threshold = 1e-4) const { return max_rel_err < threshold; }
};

// Central-finite-difference verification (step 1e-5) of every differentiable
// op and of the full model (4 samples, 3 modalities, embed dim 16, 2 heads,
// 3 classes, dropout off) under the composite objective, on both attention
// axes and with the optional blocks enabled.
GradCheckReport run_gradcheck(std::uint64_t seed = 11);

}  // namespace moxgate
