#include "moxgate/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "moxgate/errors.hpp"

namespace moxgate::ops {

namespace {

bool tracing(std::initializer_list<const Tensor*> inputs) {
    if (Tape::active() == nullptr) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

void trace(const Tensor& out, std::function<void()> backward) {
    out.impl()->requires_grad = true;
    Tape::active()->record(out, std::move(backward));
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    std::ostringstream msg;
    msg << op << ": incompatible shapes " << a.shape_str() << " and " << b.shape_str();
    throw ShapeError(msg.str());
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_fail(op, a, b);
}

// c += a . b, all row-major dense blocks.
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m x k] += a[m x n] . b[k x n]^T
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
            c[i * k + p] += acc;
        }
    }
}

// c[k x n] += a[m x k]^T . b[m x n]
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

std::size_t outer_size(const Tensor& t) {
    return t.numel() / t.shape().back();
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        shape_fail("matmul", a, b);
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n});
    gemm_nn(a.data().data(), b.data().data(), out.data_mut().data(), m, k, n);
    if (tracing({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        trace(out, [ai, bi, oi, m, k, n] {
            if (oi->grad.empty()) return;
            if (ai->requires_grad) {
                gemm_nt(oi->grad.data(), bi->data.data(), ensure_grad(*ai).data(), m, n, k);
            }
            if (bi->requires_grad) {
                gemm_tn(ai->data.data(), oi->grad.data(), ensure_grad(*bi).data(), m, k, n);
            }
        });
    }
    return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
        shape_fail("bmm", a, b);
    }
    const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    Tensor out = Tensor::zeros({batch, m, n});
    for (std::size_t s = 0; s < batch; ++s) {
        gemm_nn(a.data().data() + s * m * k, b.data().data() + s * k * n,
                out.data_mut().data() + s * m * n, m, k, n);
    }
    if (tracing({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        trace(out, [ai, bi, oi, batch, m, k, n] {
            if (oi->grad.empty()) return;
            for (std::size_t s = 0; s < batch; ++s) {
                const double* go = oi->grad.data() + s * m * n;
                if (ai->requires_grad) {
                    gemm_nt(go, bi->data.data() + s * k * n,
                            ensure_grad(*ai).data() + s * m * k, m, n, k);
                }
                if (bi->requires_grad) {
                    gemm_tn(ai->data.data() + s * m * k, go,
                            ensure_grad(*bi).data() + s * k * n, m, k, n);
                }
            }
        });
    }
    return out;
}

namespace {

void transpose_block(const double* src, double* dst, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
    }
}

void transpose_block_acc(const double* src, double* dst, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) dst[j * m + i] += src[i * n + j];
    }
}

}  // namespace

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + a.shape_str());
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::zeros({n, m});
    transpose_block(a.data().data(), out.data_mut().data(), m, n);
    if (tracing({&a})) {
        auto ai = a.impl(), oi = out.impl();
        trace(out, [ai, oi, m, n] {
            if (oi->grad.empty()) return;
            transpose_block_acc(oi->grad.data(), ensure_grad(*ai).data(), n, m);
        });
    }
    return out;
}

Tensor transpose_last2(const Tensor& a) {
    if (a.rank() != 3) {
        throw ShapeError("transpose_last2: expected rank 3, got " + a.shape_str());
    }
    const std::size_t batch = a.dim(0), m = a.dim(1), n = a.dim(2);
    Tensor out = Tensor::zeros({batch, n, m});
    for (std::size_t s = 0; s < batch; ++s) {
        transpose_block(a.data().data() + s * m * n, out.data_mut().data() + s * m * n, m, n);
    }
    if (tracing({&a})) {
        auto ai = a.impl(), oi = out.impl();
        trace(out, [ai, oi, batch, m, n] {
            if (oi->grad.empty()) return;
            auto& ga = ensure_grad(*ai);
            for (std::size_t s = 0; s < batch; ++s) {
                transpose_block_acc(oi->grad.data() + s * m * n, ga.data() + s * m * n, n, m);
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
    Tensor out(std::move(shape), {a.data().begin(), a.data().end()});
    if (out.numel() != a.numel()) {
        throw ShapeError("reshape: element count changes from " + a.shape_str() +
                         " to " + out.shape_str());
    }
    if (tracing({&a})) {
        auto ai = a.impl(), oi = out.impl();
        trace(out, [ai, oi] {
            if (oi->grad.empty()) return;
            auto& ga = ensure_grad(*ai);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += oi->grad[i];
        });
    }
    return out;
}

Tensor slice_lastdim(const Tensor& a, std::size_t from, std::size_t to) {
    const std::size_t d = a.shape().back();
    if (from >= to || to > d) {
        std::ostringstream msg;
        msg << "slice_lastdim: range [" << from << ", " << to
            << ") invalid for last dimension " << d;
        throw ShapeError(msg.str());
    }
    const std::size_t outer = outer_size(a), width = to - from;
    std::vector<std::size_t> shape = a.shape();
    shape.back() = width;
    Tensor out = Tensor::zeros(std::move(shape));
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(a.data().data() + o * d + from, width,
                    out.data_mut().data() + o * width);
    }
    if (tracing({&a})) {
        auto ai = a.impl(), oi = out.impl();
        trace(out, [ai, oi, outer, d, from, width] {
            if (oi->grad.empty()) return;
            auto& ga = ensure_grad(*ai);
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t j = 0; j < width; ++j) {
                    ga[o * d + from + j] += oi->grad[o * width + j];
                }
            }
        });
    }
    return out;
}

Tensor concat_lastdim(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_lastdim: no inputs");
    std::vector<std::size_t> lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        std::vector<std::size_t> pl(p.shape().begin(), p.shape().end() - 1);
        if (pl != lead) shape_fail("concat_lastdim", parts[0], p);
        total += p.shape().back();
    }
    std::vector<std::size_t> shape = lead;
    shape.push_back(total);
    Tensor out = Tensor::zeros(std::move(shape));
    const std::size_t outer = outer_size(out);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        const std::size_t w = p.shape().back();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(p.data().data() + o * w, w,
                        out.data_mut().data() + o * total + offset);
        }
        offset += w;
    }
    bool needs_grad = false;
    if (Tape::active() != nullptr) {
        for (const Tensor& p : parts) needs_grad = needs_grad || p.requires_grad();
    }
    if (needs_grad) {
        std::vector<std::shared_ptr<TensorImpl>> impls;
        for (const Tensor& p : parts) impls.push_back(p.impl());
        auto oi = out.impl();
        trace(out, [impls, oi, outer, total] {
            if (oi->grad.empty()) return;
            std::size_t off = 0;
            for (const auto& pi : impls) {
                const std::size_t w = pi->shape.back();
                if (pi->requires_grad) {
                    auto& gp = ensure_grad(*pi);
                    for (std::size_t o = 0; o < outer; ++o) {
                        for (std::size_t j = 0; j < w; ++j) {
                            gp[o * w + j] += oi->grad[o * total + off + j];
                        }
                    }
                }
                off += w;
            }
        });
    }
    return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const char* name, const Tensor& a, const Tensor& b,
                          Fwd fwd, Bwd bwd) {
    require_same_shape(name, a, b);
    Tensor out = Tensor::zeros(a.shape());
    auto od = out.data_mut();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = fwd(a.data()[i], b.data()[i]);
    if (tracing({&a, &b})) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        trace(out, [ai, bi, oi, bwd] {
            if (oi->grad.empty()) return;
            for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                auto [da, db] = bwd(ai->data[i], bi->data[i]);
                if (ai->requires_grad) ensure_grad(*ai)[i] += oi->grad[i] * da;
                if (bi->requires_grad) ensure_grad(*bi)[i] += oi->grad[i] * db;
            }
        });
    }
    return out;
}

struct GradPair {
    double da, db;
};

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elementwise("add", a, b,
                              [](double x, double y) { return x + y; },
                              [](double, double) { return GradPair{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elementwise("sub", a, b,
                              [](double x, double y) { return x - y; },
                              [](double, double) { return GradPair{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elementwise("mul", a, b,
                              [](double x, double y) { return x * y; },
                              [](double x, double y) { return GradPair{y, x}; });
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
    const std::size_t d = a.shape().back();
    if (bias.rank() != 1 || bias.dim(0) != d) shape_fail("add_rowvec", a, bias);
    const std::size_t outer = outer_size(a);
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < d; ++j) {
            out.data_mut()[o * d + j] = a.data()[o * d + j] + bias.data()[j];
        }
    }
    if (tracing({&a, &bias})) {
        auto ai = a.impl(), bi = bias.impl(), oi = out.impl();
        trace(out, [ai, bi, oi, outer, d] {
            if (oi->grad.empty()) return;
            if (ai->requires_grad) {
                auto& ga = ensure_grad(*ai);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += oi->grad[i];
            }
            if (bi->requires_grad) {
                auto& gb = ensure_grad(*bi);
                for (std::size_t o = 0; o < outer; ++o) {
                    for (std::size_t j = 0; j < d; ++j) gb[j] += oi->grad[o * d + j];
                }
            }
        });
    }
    return out;
}

Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s) {
    if (s.numel() != 1) {
        throw ShapeError("mul_scalar_tensor: scale must be a 1-element tensor, got " +
                         s.shape_str());
    }
    const double sv = s.data()[0];
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data_mut()[i] = a.data()[i] * sv;
    if (tracing({&a, &s})) {
        auto ai = a.impl(), si = s.impl(), oi = out.impl();
        trace(out, [ai, si, oi, sv] {
            if (oi->grad.empty()) return;
            if (ai->requires_grad) {
                auto& ga = ensure_grad(*ai);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += oi->grad[i] * sv;
            }
            if (si->requires_grad) {
                double acc = 0.0;
                for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                    acc += oi->grad[i] * ai->data[i];
                }
                ensure_grad(*si)[0] += acc;
            }
        });
    }
    return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const Tensor& a, Fwd fwd, Bwd bwd) {
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.data_mut()[i] = fwd(a.data()[i]);
    if (tracing({&a})) {
        auto ai = a.impl(), oi = out.impl();
        trace(out, [ai, oi, bwd] {
            if (oi->grad.empty()) return;
            auto& ga = ensure_grad(*ai);
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += oi->grad[i] * bwd(ai->data[i]);
            }
        });
    }
    return out;
}

}  // namespace

Tensor scale(const Tensor& a, double c) {
    return unary_elementwise(a, [c](double x) { return x * c; },
                             [c](double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary_elementwise(a, [c](double x) { return x + c; },
                             [](double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
    // Subgradient 0 at exactly 0.
    return unary_elementwise(a, [](double x) { return x > 0.0 ? x : 0.0; },
                             [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor log(const Tensor& a) {
    for (double v : a.data()) {
        if (!(v > 0.0)) {
            throw ValueError("log: input must be strictly positive");
        }
    }
    return unary_elementwise(a, [](double x) { return std::log(x); },
                             [](double x) { return 1.0 / x; });
}

Tensor pow_scalar(const Tensor& a, double e) {
    if (e == 0.0) {
        // Constant 1 with zero gradient everywhere.
        return Tensor::full(a.shape(), 1.0);
    }
    return unary_elementwise(a, [e](double x) { return std::pow(x, e); },
                             [e](double x) {
                                 if (x == 0.0 && e < 1.0) return 0.0;
                                 return e * std::pow(x, e - 1.0);
                             });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw ValueError("clamp: lo exceeds hi");
    return unary_elementwise(a,
                             [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
                             [lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor softmax_rows(const Tensor& a) {
    const std::size_t d = a.shape().back();
    const std::size_t outer = outer_size(a);
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t o = 0; o < outer; ++o) {
        const double* x = a.data().data() + o * d;
        double* y = out.data_mut().data() + o * d;
        double mx = x[0];
        for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, x[j]);
        double total = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            y[j] = std::exp(x[j] - mx);
            total += y[j];
        }
        for (std::size_t j = 0; j < d; ++j) y[j] /= total;
    }
    if (tracing({&a})) {
        auto ai = a.impl(), oi = out.impl();
        trace(out, [ai, oi, outer, d] {
            if (oi->grad.empty()) return;
            auto& ga = ensure_grad(*ai);
            for (std::size_t o = 0; o < outer; ++o) {
                const double* y = oi->data.data() + o * d;
                const double* go = oi->grad.data() + o * d;
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += go[j] * y[j];
                for (std::size_t j = 0; j < d; ++j) {
                    ga[o * d + j] += y[j] * (go[j] - dot);
                }
            }
        });
    }
    return out;
}

Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ValueError("dropout: rate must lie in [0, 1)");
    }
    if (!training || rate == 0.0) return a;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(a.numel());
    for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.data_mut()[i] = a.data()[i] * mask[i];
    }
    if (tracing({&a})) {
        auto ai = a.impl(), oi = out.impl();
        trace(out, [ai, oi, mask = std::move(mask)] {
            if (oi->grad.empty()) return;
            auto& ga = ensure_grad(*ai);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += oi->grad[i] * mask[i];
        });
    }
    return out;
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::vector<double>& running_mean, std::vector<double>& running_var,
                 double momentum, double eps, bool training) {
    if (x.rank() != 2) throw ShapeError("batchnorm: expected rank 2, got " + x.shape_str());
    const std::size_t n = x.dim(0), d = x.dim(1);
    if (gamma.numel() != d || beta.numel() != d ||
        running_mean.size() != d || running_var.size() != d) {
        throw ShapeError("batchnorm: parameter width does not match input " + x.shape_str());
    }
    std::vector<double> mu(d, 0.0), var(d, 0.0);
    if (training) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) mu[j] += x.data()[i * d + j];
        }
        for (std::size_t j = 0; j < d; ++j) mu[j] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                const double c = x.data()[i * d + j] - mu[j];
                var[j] += c * c;
            }
        }
        for (std::size_t j = 0; j < d; ++j) var[j] /= static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j) {
            running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mu[j];
            running_var[j] = (1.0 - momentum) * running_var[j] + momentum * var[j];
        }
    } else {
        mu = running_mean;
        var = running_var;
    }

    std::vector<double> inv_sigma(d);
    for (std::size_t j = 0; j < d; ++j) inv_sigma[j] = 1.0 / std::sqrt(var[j] + eps);

    std::vector<double> xhat(n * d);
    Tensor out = Tensor::zeros({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            xhat[i * d + j] = (x.data()[i * d + j] - mu[j]) * inv_sigma[j];
            out.data_mut()[i * d + j] = gamma.data()[j] * xhat[i * d + j] + beta.data()[j];
        }
    }
    if (tracing({&x, &gamma, &beta})) {
        auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
        trace(out, [xi, gi, bi, oi, n, d, training,
                    xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)] {
            if (oi->grad.empty()) return;
            const double* go = oi->grad.data();
            if (gi->requires_grad) {
                auto& gg = ensure_grad(*gi);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < d; ++j) gg[j] += go[i * d + j] * xhat[i * d + j];
                }
            }
            if (bi->requires_grad) {
                auto& gb = ensure_grad(*bi);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < d; ++j) gb[j] += go[i * d + j];
                }
            }
            if (xi->requires_grad) {
                auto& gx = ensure_grad(*xi);
                if (training) {
                    // Batch statistics participate in the gradient.
                    std::vector<double> mean_go(d, 0.0), mean_go_xhat(d, 0.0);
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < d; ++j) {
                            mean_go[j] += go[i * d + j];
                            mean_go_xhat[j] += go[i * d + j] * xhat[i * d + j];
                        }
                    }
                    for (std::size_t j = 0; j < d; ++j) {
                        mean_go[j] /= static_cast<double>(n);
                        mean_go_xhat[j] /= static_cast<double>(n);
                    }
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < d; ++j) {
                            gx[i * d + j] += gi->data[j] * inv_sigma[j] *
                                             (go[i * d + j] - mean_go[j] -
                                              xhat[i * d + j] * mean_go_xhat[j]);
                        }
                    }
                } else {
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < d; ++j) {
                            gx[i * d + j] += go[i * d + j] * gi->data[j] * inv_sigma[j];
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    Tensor out = Tensor::scalar(acc);
    if (tracing({&a})) {
        auto ai = a.impl(), oi = out.impl();
        trace(out, [ai, oi] {
            if (oi->grad.empty()) return;
            auto& ga = ensure_grad(*ai);
            for (double& g : ga) g += oi->grad[0];
        });
    }
    return out;
}

Tensor mean(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    const double inv_n = 1.0 / static_cast<double>(a.numel());
    Tensor out = Tensor::scalar(acc * inv_n);
    if (tracing({&a})) {
        auto ai = a.impl(), oi = out.impl();
        trace(out, [ai, oi, inv_n] {
            if (oi->grad.empty()) return;
            auto& ga = ensure_grad(*ai);
            for (double& g : ga) g += oi->grad[0] * inv_n;
        });
    }
    return out;
}

Tensor sum_lastdim(const Tensor& a) {
    const std::size_t d = a.shape().back();
    const std::size_t outer = outer_size(a);
    std::vector<std::size_t> shape = a.shape();
    shape.back() = 1;
    Tensor out = Tensor::zeros(std::move(shape));
    for (std::size_t o = 0; o < outer; ++o) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += a.data()[o * d + j];
        out.data_mut()[o] = acc;
    }
    if (tracing({&a})) {
        auto ai = a.impl(), oi = out.impl();
        trace(out, [ai, oi, outer, d] {
            if (oi->grad.empty()) return;
            auto& ga = ensure_grad(*ai);
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t j = 0; j < d; ++j) ga[o * d + j] += oi->grad[o];
            }
        });
    }
    return out;
}

}  // namespace moxgate::ops
