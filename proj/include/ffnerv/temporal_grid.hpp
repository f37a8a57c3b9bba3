#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ffnerv/random.hpp"
#include "ffnerv/tensor.hpp"

namespace ffnerv {

/// A learnable stack of `resolution` feature planes, values shaped s x c x h x w.
struct TemporalGrid {
    Tensor values;

    std::int64_t resolution() const { return values.dim(0); }
    std::int64_t channels() const { return values.dim(1); }
    std::int64_t height() const { return values.dim(2); }
    std::int64_t width() const { return values.dim(3); }
};

// Interpolation stencil for one frame index: value = wa*G[a] + wb*G[b].
struct GridStencil {
    std::int64_t a = 0;
    std::int64_t b = 0;
    double wa = 1.0;
    double wb = 0.0;
};

/// Computes t_hat = t*s/T, a = floor(t_hat), b = min(ceil(t_hat), s-1).
/// When a == b the stencil selects G[a] alone.
GridStencil grid_stencil(std::int64_t t, std::int64_t resolution, std::int64_t frames);

// Samples one grid at frame t of a `frames`-long video; differentiable into values.
template <typename T>
BasicTensor<T> sample_grid(const BasicTensor<T>& values, std::int64_t t, std::int64_t frames);

/// K grids with strictly increasing temporal resolutions and identical
/// (c, h, w) planes.
class GridBank {
public:
    GridBank() = default;
    GridBank(std::vector<TemporalGrid> grids, std::int64_t frames);

    // Allocates grids with values drawn uniformly from [-init_range, init_range].
    static GridBank create(const std::vector<std::int64_t>& resolutions, std::int64_t channels,
                           std::int64_t height, std::int64_t width, std::int64_t frames, Rng& rng,
                           double init_range = 1e-2);

    const std::vector<TemporalGrid>& grids() const { return grids_; }
    std::vector<TemporalGrid>& grids() { return grids_; }
    std::int64_t frames() const { return frames_; }
    std::int64_t output_channels() const;

    // Channel-wise concatenation of every grid sampled at t.
    Tensor sample(std::int64_t t) const;

private:
    std::vector<TemporalGrid> grids_;
    std::int64_t frames_ = 0;
};

/// Same as GridBank::sample but over substitute grid values (for example
/// quantized copies), given in bank order.
template <typename T>
BasicTensor<T> sample_bank(std::span<const BasicTensor<T>> grid_values, std::int64_t t,
                           std::int64_t frames);

}  // namespace ffnerv
