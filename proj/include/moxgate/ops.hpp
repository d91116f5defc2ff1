#pragma once

#include <span>
#include <vector>

#include "moxgate/rng.hpp"
#include "moxgate/tensor.hpp"

// Differentiable kernels. Every op computes its result eagerly and, when a
// Tape is active and an input requires gradients, records a backward rule
// that accumulates additively into the inputs' grad buffers. All kernels are
// single-threaded with a fixed reduction order, so results are deterministic.
namespace moxgate::ops {

// --- matrix products ---------------------------------------------------

// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// Batched [B x m x k] . [B x k x n] -> [B x m x n]
Tensor bmm(const Tensor& a, const Tensor& b);

// --- shape -------------------------------------------------------------

Tensor transpose(const Tensor& a);        // [m x n] -> [n x m]
Tensor transpose_last2(const Tensor& a);  // [B x m x n] -> [B x n x m]
Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);
// Columns [from, to) of the last axis.
Tensor slice_lastdim(const Tensor& a, std::size_t from, std::size_t to);
Tensor concat_lastdim(std::span<const Tensor> parts);

// --- elementwise -------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// [... x d] + [d], bias broadcast over the last axis.
Tensor add_rowvec(const Tensor& a, const Tensor& bias);
// Multiplication by a 1-element tensor, differentiable in both arguments.
Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);  // requires strictly positive input
// x^e with constant exponent; e == 0 yields ones with zero gradient.
Tensor pow_scalar(const Tensor& a, double e);
// Clamp to [lo, hi]; gradient passes through unclamped entries only.
Tensor clamp(const Tensor& a, double lo, double hi);

// --- softmax / dropout -------------------------------------------------

// Numerically stabilized softmax over the last axis (rows of a matrix).
Tensor softmax_rows(const Tensor& a);
// Inverted dropout: zero with probability `rate`, survivors scaled by
// 1/(1-rate). Identity when training is false. rate must lie in [0, 1).
Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training);

// --- batch normalization ------------------------------------------------

// Standard batchnorm over the sample axis of [N x d]. Training mode uses
// batch statistics (population variance) and updates the running buffers;
// eval mode normalizes with the running statistics.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 std::vector<double>& running_mean, std::vector<double>& running_var,
                 double momentum, double eps, bool training);

// --- reductions ----------------------------------------------------------

Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar
// [... x n] -> [... x 1]
Tensor sum_lastdim(const Tensor& a);

}  // namespace moxgate::ops
