#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "maven/rng.hpp"
#include "maven/tensor.hpp"

// Differentiable kernels. Every op records a tape node when any input
// requires grad; gradient rules are checked against central differences in
// tests/test_ops.cpp and by the gradcheck command.
namespace maven::ops {

enum class Mode { Train, Eval };

// (m x k) * (k x n). ShapeMismatch when inner extents differ.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Elementwise on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
// x * s where s is a one-element tensor (learnable gates).
Tensor scale_by(const Tensor& x, const Tensor& s);
// x (... x n) + row (n), broadcast over leading rows.
Tensor add_row(const Tensor& x, const Tensor& row);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);

// Softmax along the last axis. mask, when given, has one byte per element;
// zero bytes receive exactly zero weight (equivalent to an additive -inf).
// NonFinite on NaN/Inf input.
Tensor softmax(const Tensor& x, std::span<const unsigned char> mask = {});

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// x W + b with W (in x out) and b (out).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t offset, std::size_t width);
// out[i] = x[indices[i]]; backward scatter-adds, so repeated indices are fine.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
Tensor reshape(const Tensor& x, Shape shape);

// Mean over rows: (T x d) -> (1 x d).
Tensor mean_rows(const Tensor& x);
// Sum of all elements -> (1).
Tensor sum(const Tensor& x);

// Train: Bernoulli keep mask scaled by 1/(1-p). Eval (or p == 0): identity.
Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng);

// Rolls a row-major (grid_h*grid_w x d) token grid so that
// out[(r, c)] = x[((r + shift) mod grid_h, (c + shift) mod grid_w)].
// A positive shift moves content up/left; the negative shift undoes it.
Tensor cyclic_shift(const Tensor& x, std::size_t grid_h, std::size_t grid_w, long shift);

}  // namespace maven::ops
