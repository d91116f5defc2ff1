#include "moxgate/model.hpp"

#include <cmath>
#include <sstream>

#include "moxgate/errors.hpp"
#include "moxgate/ops.hpp"

namespace moxgate {

namespace {

constexpr double kBnMomentum = 0.1;
constexpr double kBnEps = 1e-5;

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t = Tensor::zeros({fan_in, fan_out}, true);
    for (double& v : t.data_mut()) v = rng.uniform_range(-limit, limit);
    return t;
}

}  // namespace

void ModelConfig::validate() const {
    if (modality_input_dims.empty()) {
        throw ConfigError("model: at least one modality is required");
    }
    for (std::size_t d : modality_input_dims) {
        if (d == 0) throw ConfigError("model: modality input dims must be positive");
    }
    if (num_classes == 0) throw ConfigError("model: num_classes must be positive");
    if (embed_dim == 0 || classifier_hidden_dim == 0) {
        throw ConfigError("model: dimensions must be positive");
    }
    if (encoder_heads == 0 || cross_heads == 0 || token_count == 0) {
        throw ConfigError("model: head and token counts must be positive");
    }
    if (embed_dim % encoder_heads != 0) {
        throw ConfigError("model: embed_dim must be divisible by encoder_heads");
    }
    if (embed_dim % cross_heads != 0) {
        throw ConfigError("model: embed_dim must be divisible by cross_heads");
    }
    if (embed_dim % token_count != 0) {
        throw ConfigError("model: embed_dim must be divisible by token_count");
    }
    if (attention_axis == AttentionAxis::tokens &&
        (embed_dim / token_count) % encoder_heads != 0) {
        throw ConfigError(
            "model: token dimension embed_dim/token_count must be divisible by "
            "encoder_heads in tokens mode");
    }
    if (encoder_dropout < 0.0 || encoder_dropout >= 1.0 ||
        classifier_dropout < 0.0 || classifier_dropout >= 1.0) {
        throw ConfigError("model: dropout rates must lie in [0, 1)");
    }
}

Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                           std::size_t heads) {
    if (q.rank() != 3 || q.shape() != k.shape() || q.shape() != v.shape()) {
        throw ShapeError("multihead_attention: q/k/v must share a [B x L x d] shape, got " +
                         q.shape_str() + ", " + k.shape_str() + ", " + v.shape_str());
    }
    const std::size_t d = q.dim(2);
    if (heads == 0 || d % heads != 0) {
        std::ostringstream msg;
        msg << "multihead_attention: width " << d << " not divisible by " << heads
            << " heads";
        throw ConfigError(msg.str());
    }
    const std::size_t head_dim = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<Tensor> outputs;
    outputs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t from = h * head_dim, to = from + head_dim;
        Tensor qh = ops::slice_lastdim(q, from, to);
        Tensor kh = ops::slice_lastdim(k, from, to);
        Tensor vh = ops::slice_lastdim(v, from, to);
        Tensor scores = ops::scale(ops::bmm(qh, ops::transpose_last2(kh)), inv_sqrt);
        outputs.push_back(ops::bmm(ops::softmax_rows(scores), vh));
    }
    return ops::concat_lastdim(outputs);
}

Tensor encode_modality(const Tensor& x, const ModalityEncoderParams& params,
                       const ModelConfig& cfg, bool training, Rng& rng) {
    if (x.rank() != 2 || x.dim(1) != params.w_in.dim(0)) {
        throw ShapeError("encode_modality: input " + x.shape_str() +
                         " does not match projection " + params.w_in.shape_str());
    }
    const std::size_t n = x.dim(0), d = cfg.embed_dim;
    Tensor h = ops::relu(ops::add_rowvec(ops::matmul(x, params.w_in), params.b_in));
    Tensor q = ops::matmul(h, params.w_q);
    Tensor k = ops::matmul(h, params.w_k);
    Tensor v = ops::matmul(h, params.w_v);

    Tensor attended;
    if (cfg.attention_axis == AttentionAxis::tokens) {
        const std::size_t tokens = cfg.token_count, token_dim = d / tokens;
        Tensor a = multihead_attention(ops::reshape(q, {n, tokens, token_dim}),
                                       ops::reshape(k, {n, tokens, token_dim}),
                                       ops::reshape(v, {n, tokens, token_dim}),
                                       cfg.encoder_heads);
        attended = ops::reshape(a, {n, d});
    } else {
        Tensor a = multihead_attention(ops::reshape(q, {1, n, d}),
                                       ops::reshape(k, {1, n, d}),
                                       ops::reshape(v, {1, n, d}), cfg.encoder_heads);
        attended = ops::reshape(a, {n, d});
    }
    attended = ops::dropout(attended, cfg.encoder_dropout, rng, training);
    return ops::add(attended, h);
}

std::vector<Tensor> cross_fuse(std::span<const Tensor> z, const CrossFusionParams& params,
                               const ModelConfig& cfg) {
    if (z.empty()) throw ShapeError("cross_fuse: no modality inputs");
    const std::size_t m = z.size(), n = z[0].dim(0), d = cfg.embed_dim;
    for (const Tensor& t : z) {
        if (t.rank() != 2 || t.dim(0) != n || t.dim(1) != d) {
            throw ShapeError("cross_fuse: modality tensor " + t.shape_str() +
                             " does not match expected [" + std::to_string(n) + " x " +
                             std::to_string(d) + "]");
        }
    }
    // Stacked representation: per sample, the M modality vectors form a
    // length-M token sequence.
    Tensor stacked2 = ops::concat_lastdim(z);              // [N x M*d]
    Tensor flat = ops::reshape(stacked2, {n * m, d});      // rows = (sample, modality)
    Tensor q = ops::reshape(ops::matmul(flat, params.w_q), {n, m, d});
    Tensor k = ops::reshape(ops::matmul(flat, params.w_k), {n, m, d});
    Tensor v = ops::reshape(ops::matmul(flat, params.w_v), {n, m, d});
    Tensor fused = multihead_attention(q, k, v, cfg.cross_heads);

    if (cfg.use_feedforward_attention) {
        Tensor ff_in = ops::reshape(fused, {n * m, d});
        Tensor hidden = ops::relu(
            ops::add_rowvec(ops::matmul(ff_in, params.ff_w1), params.ff_b1));
        Tensor ff_out = ops::add_rowvec(ops::matmul(hidden, params.ff_w2), params.ff_b2);
        fused = ops::add(fused, ops::reshape(ff_out, {n, m, d}));
    }
    if (cfg.use_skip) {
        fused = ops::add(fused, ops::reshape(stacked2, {n, m, d}));
    }

    Tensor fused2 = ops::reshape(fused, {n, m * d});
    std::vector<Tensor> slices;
    slices.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        slices.push_back(ops::slice_lastdim(fused2, i * d, (i + 1) * d));
    }
    return slices;
}

Tensor fuse_weighted(std::span<const Tensor> fused, const Tensor& weights) {
    if (fused.empty() || weights.numel() != fused.size()) {
        std::ostringstream msg;
        msg << "fuse_weighted: " << weights.numel() << " weights for " << fused.size()
            << " fused tensors";
        throw ShapeError(msg.str());
    }
    Tensor acc = ops::mul_scalar_tensor(fused[0], ops::slice_lastdim(weights, 0, 1));
    for (std::size_t i = 1; i < fused.size(); ++i) {
        acc = ops::add(acc, ops::mul_scalar_tensor(fused[i],
                                                   ops::slice_lastdim(weights, i, i + 1)));
    }
    return acc;
}

Tensor fuse_concat(std::span<const Tensor> z, const Tensor& projection) {
    if (z.empty()) throw ShapeError("fuse_concat: no modality inputs");
    Tensor stacked = ops::concat_lastdim(z);
    if (projection.rank() != 2 || projection.dim(0) != stacked.dim(1)) {
        throw ShapeError("fuse_concat: projection " + projection.shape_str() +
                         " does not match concatenated width " + stacked.shape_str());
    }
    return ops::matmul(stacked, projection);
}

Tensor classify(const Tensor& fused, const ClassifierParams& params,
                const ModelConfig& cfg, bool training, Rng& rng) {
    if (fused.rank() != 2 || fused.dim(1) != params.w_hidden.dim(0)) {
        throw ShapeError("classify: input " + fused.shape_str() +
                         " does not match hidden layer " + params.w_hidden.shape_str());
    }
    Tensor hidden = ops::relu(
        ops::add_rowvec(ops::matmul(fused, params.w_hidden), params.b_hidden));
    hidden = ops::dropout(hidden, cfg.classifier_dropout, rng, training);
    Tensor logits = ops::add_rowvec(ops::matmul(hidden, params.w_out), params.b_out);
    return ops::softmax_rows(logits);
}

Model Model::init(ModelConfig cfg, Rng& rng) {
    cfg.validate();
    const std::size_t d = cfg.embed_dim;
    ModelParams params;
    for (std::size_t dm : cfg.modality_input_dims) {
        ModalityEncoderParams enc;
        enc.w_in = glorot_uniform(dm, d, rng);
        enc.b_in = Tensor::zeros({d}, true);
        enc.w_q = glorot_uniform(d, d, rng);
        enc.w_k = glorot_uniform(d, d, rng);
        enc.w_v = glorot_uniform(d, d, rng);
        if (cfg.use_batchnorm) {
            enc.bn_gamma = Tensor::full({d}, 1.0, true);
            enc.bn_beta = Tensor::zeros({d}, true);
            enc.bn_running_mean.assign(d, 0.0);
            enc.bn_running_var.assign(d, 1.0);
        }
        params.encoders.push_back(std::move(enc));
    }
    if (cfg.fusion_mode == FusionMode::cross_attention) {
        params.cross.w_q = glorot_uniform(d, d, rng);
        params.cross.w_k = glorot_uniform(d, d, rng);
        params.cross.w_v = glorot_uniform(d, d, rng);
        if (cfg.use_feedforward_attention) {
            params.cross.ff_w1 = glorot_uniform(d, 4 * d, rng);
            params.cross.ff_b1 = Tensor::zeros({4 * d}, true);
            params.cross.ff_w2 = glorot_uniform(4 * d, d, rng);
            params.cross.ff_b2 = Tensor::zeros({d}, true);
        }
        params.modality.logits = Tensor::zeros({cfg.num_modalities()}, true);
    } else {
        params.concat.projection = glorot_uniform(cfg.num_modalities() * d, d, rng);
    }
    params.classifier.w_hidden = glorot_uniform(d, cfg.classifier_hidden_dim, rng);
    params.classifier.b_hidden = Tensor::zeros({cfg.classifier_hidden_dim}, true);
    params.classifier.w_out = glorot_uniform(cfg.classifier_hidden_dim, cfg.num_classes, rng);
    params.classifier.b_out = Tensor::zeros({cfg.num_classes}, true);
    return Model(std::move(cfg), std::move(params));
}

Tensor Model::forward(std::span<const Tensor> inputs, bool training, Rng& rng) {
    if (inputs.size() != cfg_.num_modalities()) {
        std::ostringstream msg;
        msg << "forward: " << inputs.size() << " inputs for " << cfg_.num_modalities()
            << " configured modalities";
        throw ShapeError(msg.str());
    }
    const std::size_t n = inputs.empty() ? 0 : inputs[0].dim(0);
    std::vector<Tensor> encoded;
    encoded.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].dim(0) != n) {
            throw ShapeError("forward: modality batches differ in sample count");
        }
        Tensor z = encode_modality(inputs[i], params_.encoders[i], cfg_, training, rng);
        if (cfg_.use_batchnorm) {
            z = ops::batchnorm(z, params_.encoders[i].bn_gamma, params_.encoders[i].bn_beta,
                               params_.encoders[i].bn_running_mean,
                               params_.encoders[i].bn_running_var, kBnMomentum, kBnEps,
                               training);
        }
        encoded.push_back(std::move(z));
    }

    Tensor fused;
    if (cfg_.fusion_mode == FusionMode::cross_attention) {
        std::vector<Tensor> slices = cross_fuse(encoded, params_.cross, cfg_);
        fused = fuse_weighted(slices, ops::softmax_rows(params_.modality.logits));
    } else {
        fused = fuse_concat(encoded, params_.concat.projection);
    }
    return classify(fused, params_.classifier, cfg_, training, rng);
}

Tensor Model::modality_weight_vector() const {
    if (cfg_.fusion_mode == FusionMode::cross_attention) {
        return ops::softmax_rows(params_.modality.logits);
    }
    return Tensor::full({cfg_.num_modalities()},
                        1.0 / static_cast<double>(cfg_.num_modalities()));
}

std::vector<Tensor> Model::cross_matrices() const {
    if (cfg_.fusion_mode != FusionMode::cross_attention) return {};
    return {params_.cross.w_q, params_.cross.w_k, params_.cross.w_v};
}

std::vector<Model::NamedParam> Model::named_params() const {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < params_.encoders.size(); ++i) {
        const std::string prefix = "encoder." + std::to_string(i) + ".";
        const ModalityEncoderParams& enc = params_.encoders[i];
        out.push_back({prefix + "w_in", enc.w_in, false});
        out.push_back({prefix + "b_in", enc.b_in, false});
        out.push_back({prefix + "w_q", enc.w_q, false});
        out.push_back({prefix + "w_k", enc.w_k, false});
        out.push_back({prefix + "w_v", enc.w_v, false});
        if (cfg_.use_batchnorm) {
            out.push_back({prefix + "bn_gamma", enc.bn_gamma, false});
            out.push_back({prefix + "bn_beta", enc.bn_beta, false});
        }
    }
    if (cfg_.fusion_mode == FusionMode::cross_attention) {
        out.push_back({"cross.w_q", params_.cross.w_q, false});
        out.push_back({"cross.w_k", params_.cross.w_k, false});
        out.push_back({"cross.w_v", params_.cross.w_v, false});
        if (cfg_.use_feedforward_attention) {
            out.push_back({"cross.ff_w1", params_.cross.ff_w1, false});
            out.push_back({"cross.ff_b1", params_.cross.ff_b1, false});
            out.push_back({"cross.ff_w2", params_.cross.ff_w2, false});
            out.push_back({"cross.ff_b2", params_.cross.ff_b2, false});
        }
        out.push_back({"modality.logits", params_.modality.logits, true});
    } else {
        out.push_back({"concat.projection", params_.concat.projection, false});
    }
    out.push_back({"classifier.w_hidden", params_.classifier.w_hidden, false});
    out.push_back({"classifier.b_hidden", params_.classifier.b_hidden, false});
    out.push_back({"classifier.w_out", params_.classifier.w_out, false});
    out.push_back({"classifier.b_out", params_.classifier.b_out, false});
    return out;
}

Model Model::clone() const {
    ModelParams copy;
    for (const ModalityEncoderParams& enc : params_.encoders) {
        ModalityEncoderParams e;
        e.w_in = enc.w_in.clone();
        e.b_in = enc.b_in.clone();
        e.w_q = enc.w_q.clone();
        e.w_k = enc.w_k.clone();
        e.w_v = enc.w_v.clone();
        if (cfg_.use_batchnorm) {
            e.bn_gamma = enc.bn_gamma.clone();
            e.bn_beta = enc.bn_beta.clone();
            e.bn_running_mean = enc.bn_running_mean;
            e.bn_running_var = enc.bn_running_var;
        }
        copy.encoders.push_back(std::move(e));
    }
    if (cfg_.fusion_mode == FusionMode::cross_attention) {
        copy.cross.w_q = params_.cross.w_q.clone();
        copy.cross.w_k = params_.cross.w_k.clone();
        copy.cross.w_v = params_.cross.w_v.clone();
        if (cfg_.use_feedforward_attention) {
            copy.cross.ff_w1 = params_.cross.ff_w1.clone();
            copy.cross.ff_b1 = params_.cross.ff_b1.clone();
            copy.cross.ff_w2 = params_.cross.ff_w2.clone();
            copy.cross.ff_b2 = params_.cross.ff_b2.clone();
        }
        copy.modality.logits = params_.modality.logits.clone();
    } else {
        copy.concat.projection = params_.concat.projection.clone();
    }
    copy.classifier.w_hidden = params_.classifier.w_hidden.clone();
    copy.classifier.b_hidden = params_.classifier.b_hidden.clone();
    copy.classifier.w_out = params_.classifier.w_out.clone();
    copy.classifier.b_out = params_.classifier.b_out.clone();
    return Model(cfg_, std::move(copy));
}

}  // namespace moxgate
