#pragma once

#include <optional>
#include <span>
#include <vector>

#include "epf/nn/tensor.hpp"

// Differentiable tensor operations. Tensors are dense row-major arrays of
// doubles; every op allocates its output and records a backward closure when
// gradients are enabled.
namespace epf::nn {

// ---- elementwise ------------------------------------------------------------
[[nodiscard]] Tensor add(const Tensor& a, const Tensor& b);
[[nodiscard]] Tensor sub(const Tensor& a, const Tensor& b);
[[nodiscard]] Tensor mul(const Tensor& a, const Tensor& b);
[[nodiscard]] Tensor scale(const Tensor& x, double s);
[[nodiscard]] Tensor add_scalar(const Tensor& x, double s);

// b's shape must equal the trailing dims of x; b is broadcast over the rest.
[[nodiscard]] Tensor add_trailing(const Tensor& x, const Tensor& b);
[[nodiscard]] Tensor mul_trailing(const Tensor& x, const Tensor& b);

// y[i, ...] = x[i, ...] * scale[i] + shift[i] with constant per-row factors.
[[nodiscard]] Tensor affine_rows(const Tensor& x, std::span<const double> scale,
                                 std::span<const double> shift);
// y[i, ...] = x[i, ...] * s[i], differentiable in both; s has shape [x.dim(0)].
[[nodiscard]] Tensor scale_rows(const Tensor& x, const Tensor& s);

[[nodiscard]] Tensor relu(const Tensor& x);
[[nodiscard]] Tensor gelu(const Tensor& x);
[[nodiscard]] Tensor sigmoid(const Tensor& x);
[[nodiscard]] Tensor tanh(const Tensor& x);
[[nodiscard]] Tensor silu(const Tensor& x);
[[nodiscard]] Tensor softplus(const Tensor& x);
[[nodiscard]] Tensor exp(const Tensor& x);

// ---- linear algebra ---------------------------------------------------------
// [m x k] . [k x n], with optional transposes of the stored operands.
[[nodiscard]] Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false,
                            bool trans_b = false);
// Batched: [B x m x k] . [B x k x n].
[[nodiscard]] Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a = false,
                         bool trans_b = false);
// Multi-head scaled dot-product attention over [B x T x d] projections
// (d split into `heads` contiguous slices). Probabilities are recomputed in
// the backward pass instead of being stored.
[[nodiscard]] Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads);
// x [..., in] . weight [in x out] (+ bias [out]).
[[nodiscard]] Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

// ---- normalisation ------------------------------------------------------------
[[nodiscard]] Tensor softmax(const Tensor& x);  // over the last axis
[[nodiscard]] Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                double eps = 1e-5);
[[nodiscard]] Tensor rms_norm(const Tensor& x, const Tensor& gamma, double eps = 1e-5);

// ---- shape ----------------------------------------------------------------------
[[nodiscard]] Tensor reshape(const Tensor& x, Shape shape);
[[nodiscard]] Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
[[nodiscard]] Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length);
[[nodiscard]] Tensor concat(const std::vector<Tensor>& parts, int axis);
// Zero-pads (or truncates) axis 1 of [B x T x ...] to `length`.
[[nodiscard]] Tensor resize_time(const Tensor& x, std::size_t length);

// ---- reductions -------------------------------------------------------------------
[[nodiscard]] Tensor mean(const Tensor& x, int axis);  // removes the axis
[[nodiscard]] Tensor sum_all(const Tensor& x);
[[nodiscard]] Tensor mean_all(const Tensor& x);
[[nodiscard]] Tensor mse_loss(const Tensor& pred, const Tensor& target);

// ---- temporal -----------------------------------------------------------------------
enum class PadMode { Zero, Circular, Replicate };

// x [B x Cin x T], weight [Cout x Cin x K] -> [B x Cout x (T + pad_l + pad_r - K + 1)].
[[nodiscard]] Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                            std::size_t pad_left, std::size_t pad_right, PadMode mode = PadMode::Zero);
// Channels-last causal depthwise convolution: x [B x T x C], weight [C x K].
[[nodiscard]] Tensor depthwise_causal_conv1d(const Tensor& x, const Tensor& weight,
                                             const Tensor& bias);
// x [B x Cin x H x W], weight [Cout x Cin x k x k], odd k, zero "same" padding.
[[nodiscard]] Tensor conv2d_same(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Moving average along axis 1 of [B x T x C] with edge replication; odd kernel
// keeps length T.
[[nodiscard]] Tensor moving_average(const Tensor& x, std::size_t kernel);
// Non-overlapping average pooling along axis 1 of [B x T x C].
[[nodiscard]] Tensor avg_pool_time(const Tensor& x, std::size_t window);

// Mean over channels of |DFT(x)[f]| for each requested frequency.
// x [B x T x C] -> [B x freqs.size()].
[[nodiscard]] Tensor spectral_amplitude(const Tensor& x, const std::vector<std::size_t>& freqs);

// Selective state-space scan with input-dependent step and projections.
//   u, delta [B x T x D], a [D x N], b_in, c_out [B x T x N], d_skip [D]
//   h_t = exp(delta_t * a) * h_{t-1} + delta_t * b_t * u_t
//   y_t = <c_t, h_t> + d_skip * u_t            -> [B x T x D]
[[nodiscard]] Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& a,
                                    const Tensor& b_in, const Tensor& c_out, const Tensor& d_skip);

// Single LSTM layer over a whole sequence, gate order (i, f, g, o), zero
// initial state. x_proj [B x T x 4h] already holds W_ih x_t + b; w_hh [h x 4h].
// Returns every hidden state, [B x T x h].
[[nodiscard]] Tensor lstm_sequence(const Tensor& x_proj, const Tensor& w_hh);

}  // namespace epf::nn
