#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "moxgate/tensor.hpp"

namespace moxgate {

struct AdamWConfig {
    double learning_rate = 1e-4;
    double weight_decay = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

// AdamW with decoupled weight decay. Parameters are registered once; step()
// consumes whatever gradients their tensors carry (a missing gradient counts
// as zero) and applies theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps))
//                                    - lr * wd * theta.
// Slots marked decay_exempt (the modality-weight logits) skip the decay term.
class AdamW {
  public:
    struct Slot {
        Tensor param;
        bool decay_exempt = false;
        std::vector<double> m;
        std::vector<double> v;
    };

    explicit AdamW(AdamWConfig cfg);

    void add_param(const Tensor& param, bool decay_exempt = false);

    void step();
    void zero_grad();

    std::uint64_t step_count() const { return step_count_; }
    const AdamWConfig& config() const { return cfg_; }

    // Checkpoint access.
    std::span<const Slot> slots() const { return slots_; }
    void restore_moments(std::size_t slot, std::vector<double> m, std::vector<double> v);
    void set_step_count(std::uint64_t t) { step_count_ = t; }

  private:
    AdamWConfig cfg_;
    std::vector<Slot> slots_;
    std::uint64_t step_count_ = 0;
};

}  // namespace moxgate
