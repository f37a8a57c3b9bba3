#include "ffnerv/temporal_grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ffnerv/ops.hpp"

namespace ffnerv {

GridStencil grid_stencil(std::int64_t t, std::int64_t resolution, std::int64_t frames)
{
    if (frames < 1 || resolution < 1) {
        throw std::invalid_argument("grid_stencil: frames and resolution must be positive");
    }
    if (t < 0 || t >= frames) {
        throw std::out_of_range("frame index " + std::to_string(t) + " outside [0, " +
                                std::to_string(frames) + ")");
    }
    const double t_hat = static_cast<double>(t) * static_cast<double>(resolution) /
                         static_cast<double>(frames);
    GridStencil st;
    st.a = static_cast<std::int64_t>(std::floor(t_hat));
    st.b = std::min(static_cast<std::int64_t>(std::ceil(t_hat)), resolution - 1);
    if (st.a == st.b) {
        st.wa = 1.0;
        st.wb = 0.0;
    } else {
        st.wa = static_cast<double>(st.b) - t_hat;
        st.wb = t_hat - static_cast<double>(st.a);
    }
    return st;
}

template <typename T>
BasicTensor<T> sample_grid(const BasicTensor<T>& values, std::int64_t t, std::int64_t frames)
{
    if (values.rank() != 4) {
        throw ShapeError("sample_grid: grid must be s x c x h x w, got " + shape_string(values.shape()));
    }
    const auto st = grid_stencil(t, values.dim(0), frames);
    return blend_slices(values, st.a, static_cast<T>(st.wa), st.b, static_cast<T>(st.wb));
}

template <typename T>
BasicTensor<T> sample_bank(std::span<const BasicTensor<T>> grid_values, std::int64_t t,
                           std::int64_t frames)
{
    if (grid_values.empty()) {
        throw std::invalid_argument("sample_bank: empty grid bank");
    }
    std::vector<BasicTensor<T>> parts;
    parts.reserve(grid_values.size());
    for (const auto& g : grid_values) {
        parts.push_back(sample_grid(g, t, frames));
    }
    if (parts.size() == 1) {
        return parts.front();
    }
    return concat_channels(parts);
}

GridBank::GridBank(std::vector<TemporalGrid> grids, std::int64_t frames)
    : grids_(std::move(grids)), frames_(frames)
{
    if (grids_.empty()) {
        throw std::invalid_argument("GridBank: needs at least one grid");
    }
    if (frames_ < 1) {
        throw std::invalid_argument("GridBank: frame count must be positive");
    }
    for (std::size_t k = 0; k < grids_.size(); ++k) {
        const auto& g = grids_[k];
        if (g.values.rank() != 4 || g.resolution() < 1 || g.channels() < 1 || g.height() < 1 ||
            g.width() < 1) {
            throw ShapeError("GridBank: grid " + std::to_string(k) + " has invalid shape " +
                             shape_string(g.values.shape()));
        }
        if (g.channels() != grids_[0].channels() || g.height() != grids_[0].height() ||
            g.width() != grids_[0].width()) {
            throw ShapeError("GridBank: grid " + std::to_string(k) +
                             " plane shape differs from grid 0");
        }
        if (k > 0 && g.resolution() <= grids_[k - 1].resolution()) {
            throw std::invalid_argument("GridBank: temporal resolutions must be strictly increasing");
        }
    }
}

GridBank GridBank::create(const std::vector<std::int64_t>& resolutions, std::int64_t channels,
                          std::int64_t height, std::int64_t width, std::int64_t frames, Rng& rng,
                          double init_range)
{
    std::vector<TemporalGrid> grids;
    for (auto s : resolutions) {
        Shape shape{s, channels, height, width};
        std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
        for (auto& x : v) {
            x = static_cast<float>(rng.uniform(-init_range, init_range));
        }
        grids.push_back(TemporalGrid{Tensor(shape, std::move(v), true)});
    }
    return GridBank(std::move(grids), frames);
}

std::int64_t GridBank::output_channels() const
{
    return grids_.empty() ? 0 : grids_[0].channels() * static_cast<std::int64_t>(grids_.size());
}

Tensor GridBank::sample(std::int64_t t) const
{
    std::vector<Tensor> values;
    for (const auto& g : grids_) {
        values.push_back(g.values);
    }
    return sample_bank<float>(values, t, frames_);
}

template BasicTensor<float> sample_grid(const BasicTensor<float>&, std::int64_t, std::int64_t);
template BasicTensor<double> sample_grid(const BasicTensor<double>&, std::int64_t, std::int64_t);
template BasicTensor<float> sample_bank(std::span<const BasicTensor<float>>, std::int64_t, std::int64_t);
template BasicTensor<double> sample_bank(std::span<const BasicTensor<double>>, std::int64_t, std::int64_t);

}  // namespace ffnerv
