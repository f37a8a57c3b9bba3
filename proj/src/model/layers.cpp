#include "ffnerv/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "ffnerv/ops.hpp"

namespace ffnerv {

std::string to_string(BlockKind kind)
{
    return kind == BlockKind::nerv ? "nerv" : "compact";
}

BlockKind parse_block_kind(const std::string& text)
{
    if (text == "nerv") {
        return BlockKind::nerv;
    }
    if (text == "compact") {
        return BlockKind::compact;
    }
    throw std::invalid_argument("unknown block kind '" + text + "' (expected nerv or compact)");
}

void ConvBlockSpec::validate() const
{
    if (in_channels < 1 || out_channels < 1) {
        throw std::invalid_argument("conv block: channel counts must be positive");
    }
    if (scale < 1) {
        throw std::invalid_argument("conv block: scale S must be >= 1, got " + std::to_string(scale));
    }
    if (kernel < 1 || kernel % 2 == 0) {
        throw std::invalid_argument("conv block: kernel must be odd and positive");
    }
    if (kind == BlockKind::compact) {
        if (groups < 1) {
            throw std::invalid_argument("compact block: groups must be positive");
        }
        if (in_channels % groups != 0) {
            throw std::invalid_argument("compact block: input channels C1=" +
                                        std::to_string(in_channels) +
                                        " not divisible by groups g=" + std::to_string(groups));
        }
        if (expanded_channels() % groups != 0) {
            throw std::invalid_argument("compact block: C2*S^2=" +
                                        std::to_string(expanded_channels()) +
                                        " not divisible by groups g=" + std::to_string(groups));
        }
    }
}

ParamCount param_count(const ConvBlockSpec& spec)
{
    spec.validate();
    const std::int64_t k2 = static_cast<std::int64_t>(spec.kernel) * spec.kernel;
    const std::int64_t c1 = spec.in_channels;
    const std::int64_t c2 = spec.expanded_channels();
    ParamCount pc;
    if (spec.kind == BlockKind::nerv) {
        pc.weights = c1 * c2 * k2;
        pc.biases = c2;
    } else {
        const std::int64_t g = spec.groups;
        pc.weights = g * (c1 / g) * (c2 / g) * k2 + c2 * c2;
        pc.biases = 2 * c2;
    }
    return pc;
}

ConvParams init_conv(std::int64_t in_channels, std::int64_t out_channels, int kernel, int groups,
                     Rng& rng)
{
    const std::int64_t per_group = in_channels / groups;
    const double bound = 1.0 / std::sqrt(static_cast<double>(per_group * kernel * kernel));
    Shape wshape{out_channels, per_group, kernel, kernel};
    std::vector<float> w(static_cast<std::size_t>(shape_numel(wshape)));
    for (auto& v : w) {
        v = static_cast<float>(rng.uniform(-bound, bound));
    }
    std::vector<float> b(static_cast<std::size_t>(out_channels));
    for (auto& v : b) {
        v = static_cast<float>(rng.uniform(-bound, bound));
    }
    return ConvParams{Tensor(wshape, std::move(w), true), Tensor(Shape{out_channels}, std::move(b), true)};
}

ConvBlockParams init_block(const ConvBlockSpec& spec, Rng& rng)
{
    spec.validate();
    ConvBlockParams p;
    const auto c2 = spec.expanded_channels();
    if (spec.kind == BlockKind::nerv) {
        p.convs.push_back(init_conv(spec.in_channels, c2, spec.kernel, 1, rng));
    } else {
        p.convs.push_back(init_conv(spec.in_channels, c2, spec.kernel, spec.groups, rng));
        p.convs.push_back(init_conv(c2, c2, 1, 1, rng));
    }
    return p;
}

namespace {

void require_input(const Tensor& x, const ConvBlockSpec& spec)
{
    if (x.rank() != 3 || x.dim(0) != spec.in_channels) {
        throw ShapeError("conv block expects " + std::to_string(spec.in_channels) +
                         " input channels, got " + shape_string(x.shape()));
    }
}

}  // namespace

Tensor nerv_block_forward(const Tensor& x, const ConvBlockSpec& spec, const ConvBlockParams& params)
{
    if (spec.kind != BlockKind::nerv || params.convs.size() != 1) {
        throw std::invalid_argument("nerv_block_forward: spec/params are not a nerv block");
    }
    spec.validate();
    require_input(x, spec);
    const auto& c = params.convs[0];
    auto y = conv2d(x, c.weight, c.bias, 1, spec.kernel / 2);
    return gelu(pixel_shuffle(y, spec.scale));
}

Tensor compact_block_forward(const Tensor& x, const ConvBlockSpec& spec,
                             const ConvBlockParams& params)
{
    if (spec.kind != BlockKind::compact || params.convs.size() != 2) {
        throw std::invalid_argument("compact_block_forward: spec/params are not a compact block");
    }
    spec.validate();
    require_input(x, spec);
    const auto& grouped = params.convs[0];
    const auto& pointwise = params.convs[1];
    auto y = conv2d(x, grouped.weight, grouped.bias, spec.groups, spec.kernel / 2);
    y = conv2d(y, pointwise.weight, pointwise.bias, 1, 0);
    return gelu(pixel_shuffle(y, spec.scale));
}

Tensor block_forward(const Tensor& x, const ConvBlockSpec& spec, const ConvBlockParams& params)
{
    return spec.kind == BlockKind::nerv ? nerv_block_forward(x, spec, params)
                                        : compact_block_forward(x, spec, params);
}

ParamCount param_count(const HeadSpec& spec)
{
    ParamCount pc;
    pc.weights = spec.in_channels * spec.out_channels * spec.kernel * spec.kernel;
    pc.biases = spec.out_channels;
    return pc;
}

Tensor head_forward(const Tensor& x, const HeadSpec& spec, const ConvParams& params)
{
    if (x.rank() != 3 || x.dim(0) != spec.in_channels) {
        throw ShapeError("head expects " + std::to_string(spec.in_channels) +
                         " input channels, got " + shape_string(x.shape()));
    }
    return conv2d(x, params.weight, params.bias, 1, spec.kernel / 2);
}

}  // namespace ffnerv
