#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moxgate/rng.hpp"
#include "moxgate/tensor.hpp"

namespace moxgate {

// Eq. 4 as written attends over the batch axis, which makes inference
// batch-dependent; `tokens` (the default) instead reshapes each sample's
// embedding into token_count tokens and attends within the sample. The
// literal batch-axis variant is kept selectable.
enum class AttentionAxis { tokens, batch };

enum class FusionMode { cross_attention, concat };

struct ModelConfig {
    std::vector<std::size_t> modality_input_dims;
    std::size_t num_classes = 0;
    std::size_t embed_dim = 256;
    std::size_t encoder_heads = 8;
    std::size_t cross_heads = 32;
    double encoder_dropout = 0.1;
    double classifier_dropout = 0.3;
    std::size_t classifier_hidden_dim = 128;
    AttentionAxis attention_axis = AttentionAxis::tokens;
    std::size_t token_count = 8;
    FusionMode fusion_mode = FusionMode::cross_attention;
    bool use_batchnorm = false;
    bool use_skip = false;
    bool use_feedforward_attention = false;

    std::size_t num_modalities() const { return modality_input_dims.size(); }
    void validate() const;
};

// Per-modality encoder; weights are never shared across modalities.
struct ModalityEncoderParams {
    Tensor w_in;              // d_m x d
    Tensor b_in;              // d
    Tensor w_q, w_k, w_v;     // d x d
    Tensor bn_gamma, bn_beta; // d, allocated only with use_batchnorm
    std::vector<double> bn_running_mean, bn_running_var;
};

struct CrossFusionParams {
    Tensor w_q, w_k, w_v;              // d x d
    Tensor ff_w1, ff_b1, ff_w2, ff_b2; // position-wise feedforward, width 4d
};

// Learnable convex-combination coefficients over modalities; the weight
// vector is softmax(logits), so it stays on the simplex by construction.
struct ModalityWeights {
    Tensor logits;  // M
};

struct ClassifierParams {
    Tensor w_hidden, b_hidden;  // d x hidden, hidden
    Tensor w_out, b_out;        // hidden x K, K
};

struct ConcatFusionParams {
    Tensor projection;  // (M*d) x d, allocated only in concat mode
};

struct ModelParams {
    std::vector<ModalityEncoderParams> encoders;
    CrossFusionParams cross;
    ModalityWeights modality;
    ClassifierParams classifier;
    ConcatFusionParams concat;
};

// --- building blocks -----------------------------------------------------

// Multi-head scaled dot-product attention over [B x L x d]; per head
// softmax(Q K^T / sqrt(d/h)) V, heads concatenated, no output projection.
Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                           std::size_t heads);

// Linear projection + ReLU, self-attention over the configured axis with
// residual connection; dropout on the attention output in training mode.
Tensor encode_modality(const Tensor& x, const ModalityEncoderParams& params,
                       const ModelConfig& cfg, bool training, Rng& rng);

// Stacks the M per-sample modality vectors into a length-M token sequence,
// applies multi-head cross-attention (plus the optional feedforward and skip
// blocks), and returns the M fused slices.
std::vector<Tensor> cross_fuse(std::span<const Tensor> z, const CrossFusionParams& params,
                               const ModelConfig& cfg);

// Convex combination sum_i w_i * F_i; `weights` must have one entry per slice.
Tensor fuse_weighted(std::span<const Tensor> fused, const Tensor& weights);

// Concatenation baseline: [Z_1 .. Z_M] projected back to width d.
Tensor fuse_concat(std::span<const Tensor> z, const Tensor& projection);

// Hidden ReLU layer with dropout, linear output layer, softmax probabilities.
Tensor classify(const Tensor& fused, const ClassifierParams& params,
                const ModelConfig& cfg, bool training, Rng& rng);

// --- model ----------------------------------------------------------------

class Model {
  public:
    Model() = default;
    Model(ModelConfig cfg, ModelParams params)
        : cfg_(std::move(cfg)), params_(std::move(params)) {}

    // Glorot-uniform matrices, zero biases, zero modality logits (uniform
    // initial weights); deterministic under the rng seed.
    static Model init(ModelConfig cfg, Rng& rng);

    // inputs: one [N x d_m] tensor per modality, shared sample order.
    Tensor forward(std::span<const Tensor> inputs, bool training, Rng& rng);

    // softmax(logits); in concat mode a constant uniform vector.
    Tensor modality_weight_vector() const;
    // The cross-attention maps covered by the Frobenius penalty (empty in
    // concat mode).
    std::vector<Tensor> cross_matrices() const;

    // Stable name -> tensor view of every trainable parameter, in creation
    // order. `decay_exempt` marks the modality-weight logits.
    struct NamedParam {
        std::string name;
        Tensor tensor;
        bool decay_exempt;
    };
    std::vector<NamedParam> named_params() const;

    Model clone() const;

    const ModelConfig& config() const { return cfg_; }
    ModelParams& params() { return params_; }
    const ModelParams& params() const { return params_; }

  private:
    ModelConfig cfg_;
    ModelParams params_;
};

}  // namespace moxgate
