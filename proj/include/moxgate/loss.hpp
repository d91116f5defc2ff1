#pragma once

#include <span>
#include <vector>

#include "moxgate/tensor.hpp"

namespace moxgate {

// Focal loss settings. An empty alpha vector means alpha_c = 1 for every class.
struct FocalLossConfig {
    std::vector<double> alpha;
    double gamma = 2.0;

    void validate(std::size_t num_classes) const;
};

// Coefficients of the two regularization terms of the composite objective.
struct RegularizerConfig {
    double lambda1 = 1e-3;  // modality-weight balance, ||w - 1||^2
    double lambda2 = 1e-4;  // Frobenius penalty on the cross-attention maps

    void validate() const;
};

// Mean over the batch of -alpha_c * (1 - p_c)^gamma * log(p_c), where c is
// the true class. Probabilities are clamped to [1e-12, 1] before the log.
Tensor focal_loss(const Tensor& probs, std::span<const int> targets,
                  const FocalLossConfig& cfg);

// ||w - 1||^2 against the all-ones vector. Restricted to the simplex this is
// ||w||^2 + (M - 2), minimized exactly at uniform weights.
Tensor weight_balance_penalty(const Tensor& weights);

// Sum of squared entries across the given matrices.
Tensor frobenius_penalty(std::span<const Tensor> mats);

// focal + lambda1 * balance + lambda2 * frobenius.
Tensor total_loss(const Tensor& probs, std::span<const int> targets,
                  const Tensor& modality_weights, std::span<const Tensor> cross_mats,
                  const FocalLossConfig& fl, const RegularizerConfig& reg);

}  // namespace moxgate
