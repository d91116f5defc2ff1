#include "moxgate/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "moxgate/loss.hpp"
#include "moxgate/model.hpp"
#include "moxgate/ops.hpp"
#include "moxgate/rng.hpp"
#include "moxgate/tensor.hpp"

namespace moxgate {

namespace {

constexpr double kStep = 1e-5;

double max_rel_err(std::span<const double> analytic, std::span<const double> fd) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double err = std::abs(analytic[i] - fd[i]) / (std::abs(fd[i]) + 1e-8);
        worst = std::max(worst, err);
    }
    return worst;
}

std::vector<double> finite_diff(Tensor& t, const std::function<double()>& f) {
    std::vector<double> g(t.numel());
    auto data = t.data_mut();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double orig = data[i];
        data[i] = orig + kStep;
        const double fp = f();
        data[i] = orig - kStep;
        const double fm = f();
        data[i] = orig;
        g[i] = (fp - fm) / (2.0 * kStep);
    }
    return g;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -2.0,
                     double hi = 2.0) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (double& v : t.data_mut()) {
        do {
            v = rng.uniform_range(lo, hi);
        } while (std::abs(v) < 5e-2);  // keep clear of relu/clamp kinks
    }
    return t;
}

class Reporter {
  public:
    explicit Reporter(GradCheckReport& report) : report_(report) {}

    void add(const std::string& name, double err) {
        report_.items.push_back({name, err});
        if (err > report_.max_rel_err) {
            report_.max_rel_err = err;
            report_.worst_item = name;
        }
    }

    // Compares tape gradients of sum(op() * projection) against central
    // finite differences for each input.
    void check_op(const std::string& name, std::vector<Tensor*> inputs,
                  const std::function<Tensor()>& forward, Rng& rng) {
        Tensor probe = forward();
        Tensor projection = Tensor::zeros(probe.shape());
        for (double& v : projection.data_mut()) v = rng.uniform_range(-1.0, 1.0);

        auto loss_value = [&] {
            Tensor out = forward();
            double acc = 0.0;
            for (std::size_t i = 0; i < out.numel(); ++i) {
                acc += out.data()[i] * projection.data()[i];
            }
            return acc;
        };
        for (Tensor* t : inputs) t->zero_grad();
        {
            Tape tape;
            tape.backward(ops::sum(ops::mul(forward(), projection)));
        }
        double err = 0.0;
        for (Tensor* t : inputs) {
            const std::vector<double> fd = finite_diff(*t, loss_value);
            err = std::max(err, max_rel_err(t->grad(), fd));
        }
        add("op." + name, err);
    }

  private:
    GradCheckReport& report_;
};

void check_all_ops(Reporter& reporter, Rng& rng) {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 5}, rng);
    reporter.check_op("matmul", {&a, &b}, [&] { return ops::matmul(a, b); }, rng);

    Tensor ba = random_tensor({2, 3, 4}, rng);
    Tensor bb = random_tensor({2, 4, 3}, rng);
    reporter.check_op("bmm", {&ba, &bb}, [&] { return ops::bmm(ba, bb); }, rng);

    Tensor t2 = random_tensor({3, 5}, rng);
    reporter.check_op("transpose", {&t2}, [&] { return ops::transpose(t2); }, rng);
    reporter.check_op("transpose_last2", {&ba}, [&] { return ops::transpose_last2(ba); },
                      rng);
    reporter.check_op("reshape", {&ba}, [&] { return ops::reshape(ba, {6, 4}); }, rng);
    reporter.check_op("slice_lastdim", {&t2}, [&] { return ops::slice_lastdim(t2, 1, 4); },
                      rng);

    Tensor c1 = random_tensor({3, 2}, rng);
    Tensor c2 = random_tensor({3, 4}, rng);
    reporter.check_op("concat_lastdim", {&c1, &c2},
                      [&] {
                          std::vector<Tensor> parts{c1, c2};
                          return ops::concat_lastdim(parts);
                      },
                      rng);

    Tensor e1 = random_tensor({2, 3}, rng);
    Tensor e2 = random_tensor({2, 3}, rng);
    reporter.check_op("add", {&e1, &e2}, [&] { return ops::add(e1, e2); }, rng);
    reporter.check_op("sub", {&e1, &e2}, [&] { return ops::sub(e1, e2); }, rng);
    reporter.check_op("mul", {&e1, &e2}, [&] { return ops::mul(e1, e2); }, rng);

    Tensor bias = random_tensor({3}, rng);
    reporter.check_op("add_rowvec", {&e1, &bias}, [&] { return ops::add_rowvec(e1, bias); },
                      rng);
    Tensor s = Tensor::scalar(1.3, true);
    reporter.check_op("mul_scalar_tensor", {&e1, &s},
                      [&] { return ops::mul_scalar_tensor(e1, s); }, rng);
    reporter.check_op("scale", {&e1}, [&] { return ops::scale(e1, -2.5); }, rng);
    reporter.check_op("add_scalar", {&e1}, [&] { return ops::add_scalar(e1, 0.75); }, rng);
    reporter.check_op("relu", {&e1}, [&] { return ops::relu(e1); }, rng);

    Tensor pos = random_tensor({2, 3}, rng, 0.2, 3.0);
    reporter.check_op("log", {&pos}, [&] { return ops::log(pos); }, rng);
    reporter.check_op("pow_scalar", {&pos}, [&] { return ops::pow_scalar(pos, 2.0); }, rng);
    reporter.check_op("clamp", {&e1}, [&] { return ops::clamp(e1, -1.25, 1.25); }, rng);
    reporter.check_op("softmax_rows", {&e1}, [&] { return ops::softmax_rows(e1); }, rng);
    reporter.check_op("sum", {&e1}, [&] { return ops::sum(e1); }, rng);
    reporter.check_op("mean", {&e1}, [&] { return ops::mean(e1); }, rng);
    reporter.check_op("sum_lastdim", {&ba}, [&] { return ops::sum_lastdim(ba); }, rng);

    Tensor gamma = random_tensor({4}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({4}, rng);
    Tensor bx = random_tensor({6, 4}, rng);
    reporter.check_op("batchnorm",
                      {&bx, &gamma, &beta},
                      [&] {
                          std::vector<double> rm(4, 0.0), rv(4, 1.0);
                          return ops::batchnorm(bx, gamma, beta, rm, rv, 0.1, 1e-5, true);
                      },
                      rng);
}

ModelConfig gradcheck_config(AttentionAxis axis, bool toggles) {
    ModelConfig cfg;
    cfg.modality_input_dims = {6, 5, 4};
    cfg.num_classes = 3;
    cfg.embed_dim = 16;
    cfg.encoder_heads = 2;
    cfg.cross_heads = 2;
    cfg.token_count = 8;
    cfg.classifier_hidden_dim = 16;
    cfg.encoder_dropout = 0.0;
    cfg.classifier_dropout = 0.0;
    cfg.attention_axis = axis;
    if (toggles) {
        cfg.use_batchnorm = true;
        cfg.use_skip = true;
        cfg.use_feedforward_attention = true;
    }
    return cfg;
}

void check_full_model(Reporter& reporter, const std::string& tag, const ModelConfig& cfg,
                      Rng& rng) {
    Rng init_rng = rng.fork("init." + tag);
    Model model = Model::init(cfg, init_rng);
    Rng data_rng = rng.fork("data." + tag);
    std::vector<Tensor> xs;
    for (std::size_t dm : cfg.modality_input_dims) {
        Tensor x = Tensor::zeros({4, dm});
        for (double& v : x.data_mut()) v = data_rng.uniform_range(-2.0, 2.0);
        xs.push_back(std::move(x));
    }
    const std::vector<int> targets{0, 2, 1, 2};
    FocalLossConfig fl;
    RegularizerConfig reg;

    // Clone per evaluation so batchnorm running-stat updates cannot leak
    // between finite-difference probes.
    auto loss_value = [&] {
        Model probe = model.clone();
        Rng unused(0);
        Tensor probs = probe.forward(xs, true, unused);
        std::vector<Tensor> cross = probe.cross_matrices();
        return total_loss(probs, targets, probe.modality_weight_vector(), cross, fl, reg)
            .value();
    };

    Model work = model.clone();
    for (auto np : work.named_params()) np.tensor.zero_grad();
    {
        Tape tape;
        Rng unused(0);
        Tensor probs = work.forward(xs, true, unused);
        std::vector<Tensor> cross = work.cross_matrices();
        tape.backward(
            total_loss(probs, targets, work.modality_weight_vector(), cross, fl, reg));
    }
    const auto model_named = model.named_params();
    const auto work_named = work.named_params();
    for (std::size_t i = 0; i < work_named.size(); ++i) {
        Tensor fd_target = model_named[i].tensor;
        const std::vector<double> fd = finite_diff(fd_target, loss_value);
        reporter.add("model." + tag + "." + work_named[i].name,
                     max_rel_err(work_named[i].tensor.grad(), fd));
    }
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed) {
    GradCheckReport report;
    Reporter reporter(report);
    Rng rng(seed);
    check_all_ops(reporter, rng);
    check_full_model(reporter, "tokens", gradcheck_config(AttentionAxis::tokens, false), rng);
    check_full_model(reporter, "batch", gradcheck_config(AttentionAxis::batch, false), rng);
    check_full_model(reporter, "blocks", gradcheck_config(AttentionAxis::tokens, true), rng);
    return report;
}

}  // namespace moxgate
