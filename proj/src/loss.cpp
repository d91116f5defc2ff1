#include "moxgate/loss.hpp"

#include <sstream>
#include <stdexcept>

#include "moxgate/errors.hpp"
#include "moxgate/ops.hpp"

namespace moxgate {

namespace {
constexpr double kProbFloor = 1e-12;
}

void FocalLossConfig::validate(std::size_t num_classes) const {
    if (gamma < 0.0) throw ValueError("focal loss: gamma must be >= 0");
    if (!alpha.empty() && alpha.size() != num_classes) {
        std::ostringstream msg;
        msg << "focal loss: alpha has " << alpha.size() << " entries for "
            << num_classes << " classes";
        throw ValueError(msg.str());
    }
    for (double a : alpha) {
        if (a <= 0.0) throw ValueError("focal loss: alpha entries must be positive");
    }
}

void RegularizerConfig::validate() const {
    if (lambda1 < 0.0 || lambda2 < 0.0) {
        throw ValueError("regularizer: lambda coefficients must be >= 0");
    }
}

Tensor focal_loss(const Tensor& probs, std::span<const int> targets,
                  const FocalLossConfig& cfg) {
    if (probs.rank() != 2) {
        throw ShapeError("focal_loss: expected probabilities of shape [N x K], got " +
                         probs.shape_str());
    }
    const std::size_t n = probs.dim(0), k = probs.dim(1);
    if (targets.size() != n) {
        std::ostringstream msg;
        msg << "focal_loss: " << targets.size() << " targets for " << n << " samples";
        throw ShapeError(msg.str());
    }
    cfg.validate(k);

    Tensor onehot = Tensor::zeros({n, k});
    Tensor alpha_col = Tensor::zeros({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
        const int c = targets[i];
        if (c < 0 || static_cast<std::size_t>(c) >= k) {
            std::ostringstream msg;
            msg << "focal_loss: target " << c << " out of range [0, " << k << ")";
            throw std::out_of_range(msg.str());
        }
        onehot.data_mut()[i * k + static_cast<std::size_t>(c)] = 1.0;
        alpha_col.data_mut()[i] = cfg.alpha.empty() ? 1.0 : cfg.alpha[static_cast<std::size_t>(c)];
    }

    Tensor p_true = ops::sum_lastdim(ops::mul(probs, onehot));      // [N x 1]
    Tensor p = ops::clamp(p_true, kProbFloor, 1.0);
    Tensor modulator = ops::pow_scalar(ops::add_scalar(ops::scale(p, -1.0), 1.0), cfg.gamma);
    Tensor weighted = ops::mul(ops::mul(modulator, ops::log(p)), alpha_col);
    return ops::scale(ops::mean(weighted), -1.0);
}

Tensor weight_balance_penalty(const Tensor& weights) {
    Tensor diff = ops::add_scalar(weights, -1.0);
    return ops::sum(ops::mul(diff, diff));
}

Tensor frobenius_penalty(std::span<const Tensor> mats) {
    Tensor total = Tensor::scalar(0.0);
    for (const Tensor& m : mats) {
        total = ops::add(total, ops::sum(ops::mul(m, m)));
    }
    return total;
}

Tensor total_loss(const Tensor& probs, std::span<const int> targets,
                  const Tensor& modality_weights, std::span<const Tensor> cross_mats,
                  const FocalLossConfig& fl, const RegularizerConfig& reg) {
    reg.validate();
    Tensor loss = focal_loss(probs, targets, fl);
    loss = ops::add(loss, ops::scale(weight_balance_penalty(modality_weights), reg.lambda1));
    loss = ops::add(loss, ops::scale(frobenius_penalty(cross_mats), reg.lambda2));
    return loss;
}

}  // namespace moxgate
