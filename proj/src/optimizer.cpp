#include "moxgate/optimizer.hpp"

#include <cmath>

#include "moxgate/errors.hpp"

namespace moxgate {

void AdamWConfig::validate() const {
    if (learning_rate < 0.0) throw ValueError("adamw: learning rate must be >= 0");
    if (weight_decay < 0.0) throw ValueError("adamw: weight decay must be >= 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw ValueError("adamw: betas must lie in [0, 1)");
    }
    if (epsilon <= 0.0) throw ValueError("adamw: epsilon must be positive");
}

AdamW::AdamW(AdamWConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void AdamW::add_param(const Tensor& param, bool decay_exempt) {
    Slot slot;
    slot.param = param;
    slot.decay_exempt = decay_exempt;
    slot.m.assign(param.numel(), 0.0);
    slot.v.assign(param.numel(), 0.0);
    slots_.push_back(std::move(slot));
}

void AdamW::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (Slot& slot : slots_) {
        auto theta = slot.param.data_mut();
        const auto grad = slot.param.grad();
        const bool has_grad = !grad.empty();
        if (has_grad && grad.size() != theta.size()) {
            throw ShapeError("adamw: gradient size does not match parameter " +
                             slot.param.shape_str());
        }
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = has_grad ? grad[i] : 0.0;
            slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g;
            slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = slot.m[i] / bc1;
            const double v_hat = slot.v[i] / bc2;
            double update = cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
            if (!slot.decay_exempt) {
                update += cfg_.learning_rate * cfg_.weight_decay * theta[i];
            }
            theta[i] -= update;
        }
    }
}

void AdamW::zero_grad() {
    for (Slot& slot : slots_) slot.param.zero_grad();
}

void AdamW::restore_moments(std::size_t slot, std::vector<double> m, std::vector<double> v) {
    if (slot >= slots_.size() || m.size() != slots_[slot].m.size() ||
        v.size() != slots_[slot].v.size()) {
        throw ShapeError("adamw: moment restore does not match registered parameters");
    }
    slots_[slot].m = std::move(m);
    slots_[slot].v = std::move(v);
}

}  // namespace moxgate
