#pragma once

#include <utility>
#include <vector>

#include "ffnerv/tensor.hpp"

// Differentiable primitives. Images are single CxHxW tensors (no batch axis).
// Every op is instantiated for float and double storage.
namespace ffnerv {

// Element-wise, operands must have identical shapes.
template <typename T> BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> scale(const BasicTensor<T>& x, T factor);
template <typename T> BasicTensor<T> add_scalar(const BasicTensor<T>& x, T value);

template <typename T> BasicTensor<T> sigmoid(const BasicTensor<T>& x);
// Exact (erf) GELU.
template <typename T> BasicTensor<T> gelu(const BasicTensor<T>& x);

template <typename T> BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> mean(const BasicTensor<T>& x);
// mean(|a - b|)
template <typename T> BasicTensor<T> l1_mean(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Stride-1 grouped cross-correlation with zero padding.
///
/// input CxHxW, weight O x (C/groups) x k x k, bias O. Output spatial size is
/// H + 2*padding - k + 1, which preserves H when padding == k/2 for odd k.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, int groups, int padding);

// (C*S*S) x H x W -> C x (S*H) x (S*W); out[c, h*S+dy, w*S+dx] = in[c*S*S + dy*S + dx, h, w].
template <typename T> BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, int factor);

/// Samples `frame` at (x + flow[0,y,x], y + flow[1,y,x]) with bilinear
/// weights. Sample coordinates are clamped to the image border, so the
/// gradient w.r.t. flow is zero wherever the clamp is active.
template <typename T>
BasicTensor<T> bilinear_warp(const BasicTensor<T>& frame, const BasicTensor<T>& flow);

// Align-corners-false bilinear resize to a size at least as large as the input.
template <typename T>
BasicTensor<T> bilinear_upsample(const BasicTensor<T>& x, std::int64_t out_h, std::int64_t out_w);

// Per-pixel softmax across the channel axis.
template <typename T> BasicTensor<T> softmax_channels(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& parts);
template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, std::int64_t begin, std::int64_t count);
// 1xHxW -> CxHxW by repetition.
template <typename T> BasicTensor<T> expand_channels(const BasicTensor<T>& x, std::int64_t channels);

/// wa * x[a] + wb * x[b] along the leading axis; returns x[a] itself (bit
/// exact) when a == b. Used for temporal grid interpolation.
template <typename T>
BasicTensor<T> blend_slices(const BasicTensor<T>& x, std::int64_t a, T wa, std::int64_t b, T wb);

// Identity gradient; forward replaces values with `values` (same shape).
// Straight-through building block for quantizers.
template <typename T>
BasicTensor<T> straight_through(const BasicTensor<T>& x, std::vector<T> values);

}  // namespace ffnerv
