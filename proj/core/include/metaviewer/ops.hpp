#pragma once

#include <span>
#include <string_view>

#include "metaviewer/autodiff.hpp"

// Differentiable primitives. Every op requires its operands to live on the
// same tape and throws ShapeError naming the op and the offending shapes.
namespace metaviewer::ops {

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// Subgradient goes to `a` on ties.
Var maximum(const Var& a, const Var& b);

Var scale(const Var& x, double s);
Var divide(const Var& x, double s);

/// (n,k) x (k,m) -> (n,m)
Var matmul(const Var& a, const Var& b);
/// x (n,in), w (in,out), b (out) -> (n,out)
Var affine(const Var& x, const Var& w, const Var& b);

/// Subgradient at 0 is 0.
Var relu(const Var& x);
Var tanh(const Var& x);
Var exp(const Var& x);
/// Requires strictly positive input.
Var log(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);
/// Reduces `axis` away.
Var sum_axis(const Var& x, std::size_t axis);
Var mean_axis(const Var& x, std::size_t axis);

/// Sum of squared differences, a scalar.
Var squared_error(const Var& a, const Var& b);

/// Pairwise row cosine similarity: a (n,d), b (m,d) -> (n,m). Zero-norm rows
/// are rejected with the row index in the message.
Var cosine_similarity(const Var& a, const Var& b);
/// Cosine of two rank-1 vectors, a scalar.
Var cosine(const Var& a, const Var& b);

/// Channel-oriented 1-d convolution with zero "same" padding:
/// x (B, C_in, L), kernel (C_out, C_in, k), bias (C_out) -> (B, C_out, L).
/// k must be odd.
Var channel_conv1d(const Var& x, const Var& kernel, const Var& bias);

/// Concatenation along `axis`; all other dims must agree.
Var concat(std::span<const Var> parts, std::size_t axis);
Var reshape(const Var& x, Shape shape);
/// [begin, begin + length) along `axis`.
Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t length);
/// Main diagonal of a square matrix.
Var diag(const Var& x);

}  // namespace metaviewer::ops
