#include "ffnerv/model.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

#include "ffnerv/ops.hpp"

namespace ffnerv {

namespace {

std::int64_t upscale_product(const std::vector<std::int64_t>& factors, std::size_t count)
{
    std::int64_t p = 1;
    for (std::size_t i = 0; i < count && i < factors.size(); ++i) {
        p *= factors[i];
    }
    return p;
}

}  // namespace

int resolve_groups(std::int64_t in_channels, std::int64_t expanded_channels, int requested)
{
    const auto common = std::gcd(in_channels, expanded_channels);
    for (int g = std::max(requested, 1); g > 1; --g) {
        if (common % g == 0) {
            return g;
        }
    }
    return 1;
}

std::int64_t FFNeRVConfig::grid_height() const
{
    const auto p = upscale_product(upscale, upscale.size());
    return p > 0 ? height / p : 0;
}

std::int64_t FFNeRVConfig::grid_width() const
{
    const auto p = upscale_product(upscale, upscale.size());
    return p > 0 ? width / p : 0;
}

std::int64_t FFNeRVConfig::flow_height() const
{
    return grid_height() * upscale_product(upscale, static_cast<std::size_t>(flow_stage) + 1);
}

std::int64_t FFNeRVConfig::flow_width() const
{
    return grid_width() * upscale_product(upscale, static_cast<std::size_t>(flow_stage) + 1);
}

std::vector<std::int64_t> FFNeRVConfig::effective_grid_resolutions() const
{
    if (!grids_enabled) {
        return {frames};
    }
    return grid_resolutions;
}

std::int64_t FFNeRVConfig::channels_per_grid() const
{
    const auto k = static_cast<std::int64_t>(effective_grid_resolutions().size());
    return k > 0 ? latent_channels / k : 0;
}

std::vector<ConvBlockSpec> FFNeRVConfig::block_specs() const
{
    std::vector<ConvBlockSpec> specs;
    std::int64_t in = latent_channels;
    for (std::size_t b = 0; b < block_channels.size(); ++b) {
        ConvBlockSpec s;
        s.kind = (b > 0 && compact_blocks) ? BlockKind::compact : BlockKind::nerv;
        s.in_channels = in;
        s.out_channels = block_channels[b];
        s.scale = static_cast<int>(upscale.at(b));
        s.kernel = kernel;
        s.groups = s.kind == BlockKind::compact
                       ? resolve_groups(s.in_channels, s.expanded_channels(), groups)
                       : 1;
        specs.push_back(s);
        in = block_channels[b];
    }
    return specs;
}

HeadSpec FFNeRVConfig::flow_head() const
{
    HeadSpec h;
    h.attach_stage = flow_stage;
    h.in_channels = block_channels.at(static_cast<std::size_t>(flow_stage));
    h.out_channels = 3 * static_cast<std::int64_t>(neighbors.size());
    h.kernel = head_kernel;
    return h;
}

HeadSpec FFNeRVConfig::color_head() const
{
    HeadSpec h;
    h.attach_stage = static_cast<int>(block_channels.size()) - 1;
    h.in_channels = block_channels.back();
    h.out_channels = 5;
    h.kernel = head_kernel;
    return h;
}

std::string FFNeRVConfig::ablation_mode() const
{
    if (flow_enabled && grids_enabled) {
        return "full";
    }
    if (flow_enabled) {
        return "flow-only";
    }
    if (grids_enabled) {
        return "grids-only";
    }
    return "baseline";
}

void FFNeRVConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ConfigError("invalid model config: " + msg); };
    if (frames < 1 || height < 1 || width < 1) {
        fail("video dimensions T, H, W must be positive");
    }
    if (neighbors.empty()) {
        fail("neighbor set must not be empty");
    }
    for (auto n : neighbors) {
        if (n == 0) {
            fail("neighbor offsets must not contain 0");
        }
    }
    if (upscale.empty() || upscale.size() != block_channels.size()) {
        fail("need one upscale factor per block (" + std::to_string(upscale.size()) +
             " factors, " + std::to_string(block_channels.size()) + " blocks)");
    }
    for (auto s : upscale) {
        if (s < 1) {
            fail("upscale factors must be >= 1");
        }
    }
    const auto p = upscale_product(upscale, upscale.size());
    if (height % p != 0 || width % p != 0) {
        fail("frame size " + std::to_string(height) + "x" + std::to_string(width) +
             " is not a multiple of the total upscale " + std::to_string(p));
    }
    const auto res = effective_grid_resolutions();
    if (res.empty()) {
        fail("need at least one grid");
    }
    for (std::size_t k = 0; k < res.size(); ++k) {
        if (res[k] < 1) {
            fail("grid temporal resolutions must be >= 1");
        }
        if (k > 0 && res[k] <= res[k - 1]) {
            fail("grid temporal resolutions must be strictly increasing");
        }
    }
    if (latent_channels < 1 || latent_channels % static_cast<std::int64_t>(res.size()) != 0) {
        fail("latent channels " + std::to_string(latent_channels) + " must split evenly over " +
             std::to_string(res.size()) + " grids");
    }
    for (auto c : block_channels) {
        if (c < 1) {
            fail("block channels must be positive");
        }
    }
    if (flow_stage < 0 || flow_stage >= static_cast<int>(block_channels.size())) {
        fail("flow_stage " + std::to_string(flow_stage) + " is not a block index");
    }
    if (kernel < 1 || kernel % 2 == 0 || head_kernel < 1 || head_kernel % 2 == 0) {
        fail("kernel sizes must be odd");
    }
    if (groups < 1) {
        fail("groups must be positive");
    }
    for (const auto& s : block_specs()) {
        s.validate();
    }
}

KeyValues FFNeRVConfig::to_key_values() const
{
    KeyValues kv;
    kv.set("frames", std::to_string(frames));
    kv.set("height", std::to_string(height));
    kv.set("width", std::to_string(width));
    kv.set("neighbors", join_ints(neighbors));
    kv.set("upscale", join_ints(upscale));
    kv.set("grid_resolutions", join_ints(grid_resolutions));
    kv.set("latent_channels", std::to_string(latent_channels));
    kv.set("block_channels", join_ints(block_channels));
    kv.set("compact_blocks", compact_blocks ? "true" : "false");
    kv.set("groups", std::to_string(groups));
    kv.set("kernel", std::to_string(kernel));
    kv.set("head_kernel", std::to_string(head_kernel));
    kv.set("flow_stage", std::to_string(flow_stage));
    kv.set("flow", flow_enabled ? "true" : "false");
    kv.set("grids", grids_enabled ? "true" : "false");
    return kv;
}

FFNeRVConfig FFNeRVConfig::from_key_values(const KeyValues& kv)
{
    FFNeRVConfig c;
    c.frames = kv.get_int("frames");
    c.height = kv.get_int("height");
    c.width = kv.get_int("width");
    c.neighbors = kv.get_int_list("neighbors");
    c.upscale = kv.get_int_list("upscale");
    c.grid_resolutions = kv.get_int_list("grid_resolutions");
    c.latent_channels = kv.get_int("latent_channels");
    c.block_channels = kv.get_int_list("block_channels");
    c.compact_blocks = kv.get_bool("compact_blocks");
    c.groups = static_cast<int>(kv.get_int("groups"));
    c.kernel = static_cast<int>(kv.get_int("kernel"));
    c.head_kernel = static_cast<int>(kv.get_int("head_kernel"));
    c.flow_stage = static_cast<int>(kv.get_int("flow_stage"));
    c.flow_enabled = kv.get_bool("flow");
    c.grids_enabled = kv.get_bool("grids");
    return c;
}

std::vector<LayerShape> layer_shapes(const FFNeRVConfig& config)
{
    config.validate();
    std::vector<LayerShape> rows;
    std::int64_t h = config.grid_height();
    std::int64_t w = config.grid_width();
    rows.push_back({"0", "Multi-resolution grids", {config.latent_channels, h, w}});
    const auto specs = config.block_specs();
    for (std::size_t b = 0; b < specs.size(); ++b) {
        h *= specs[b].scale;
        w *= specs[b].scale;
        const std::string label = std::to_string(b + 1);
        rows.push_back({label,
                        specs[b].kind == BlockKind::nerv ? "Conv block" : "Compact conv block",
                        {specs[b].out_channels, h, w}});
        if (static_cast<int>(b) == config.flow_stage) {
            rows.push_back({label + "'", "Head layer (M, wM)", {config.flow_head().out_channels, h, w}});
        }
    }
    rows.push_back({std::to_string(specs.size()) + "'", "Head layer (I, wA, wI)",
                    {config.color_head().out_channels, h, w}});
    rows.push_back({"", "Aggregation", {3, h, w}});
    return rows;
}

FrameBuffer::FrameBuffer(std::int64_t frames, std::int64_t height, std::int64_t width)
    : height_(height), width_(width), slots_(static_cast<std::size_t>(frames))
{
}

void FrameBuffer::check_index(std::int64_t t) const
{
    if (t < 0 || t >= size()) {
        throw std::out_of_range("frame buffer index " + std::to_string(t) + " outside [0, " +
                                std::to_string(size()) + ")");
    }
}

bool FrameBuffer::initialized(std::int64_t t) const
{
    check_index(t);
    return slots_[static_cast<std::size_t>(t)].has_value();
}

const Tensor& FrameBuffer::read(std::int64_t t) const
{
    check_index(t);
    const auto& slot = slots_[static_cast<std::size_t>(t)];
    if (!slot) {
        throw std::logic_error("frame buffer slot " + std::to_string(t) + " is not initialized");
    }
    return *slot;
}

void FrameBuffer::update(std::span<const std::int64_t> indices, std::span<const Tensor> frames)
{
    if (indices.size() != frames.size()) {
        throw std::invalid_argument("frame buffer update: index/frame count mismatch");
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
        check_index(indices[i]);
        const Shape expected{3, height_, width_};
        if (frames[i].shape() != expected) {
            throw ShapeError("frame buffer update: frame shape " + shape_string(frames[i].shape()) +
                             ", expected " + shape_string(expected));
        }
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
        slots_[static_cast<std::size_t>(indices[i])] = frames[i].detach();
    }
}

namespace {
constexpr float kIndependentLogitInit = 15.0F;
}  // namespace

FFNeRVModel FFNeRVModel::create(const FFNeRVConfig& config, std::uint64_t seed)
{
    config.validate();
    Rng rng(seed);
    FFNeRVModel m;
    m.config_ = config;
    m.grids_ = GridBank::create(config.effective_grid_resolutions(), config.channels_per_grid(),
                                config.grid_height(), config.grid_width(), config.frames, rng);
    m.block_specs_ = config.block_specs();
    for (const auto& spec : m.block_specs_) {
        m.blocks_.push_back(init_block(spec, rng));
    }
    const auto fh = config.flow_head();
    const auto ch = config.color_head();
    m.flow_head_ = init_conv(fh.in_channels, fh.out_channels, fh.kernel, 1, rng);
    m.color_head_ = init_conv(ch.in_channels, ch.out_channels, ch.kernel, 1, rng);
    // Start with f ~= I; the optimizer anneals the aggregated frame in.
    m.color_head_.bias.mutable_data()[4] += kIndependentLogitInit;
    return m;
}

std::vector<NamedParam> FFNeRVModel::parameters() const
{
    std::vector<NamedParam> out;
    for (std::size_t k = 0; k < grids_.grids().size(); ++k) {
        out.push_back({"grid" + std::to_string(k), ParamKind::grid, grids_.grids()[k].values});
    }
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        for (std::size_t c = 0; c < blocks_[b].convs.size(); ++c) {
            const auto base = "block" + std::to_string(b) + ".conv" + std::to_string(c);
            out.push_back({base + ".weight", ParamKind::conv_weight, blocks_[b].convs[c].weight});
            out.push_back({base + ".bias", ParamKind::bias, blocks_[b].convs[c].bias});
        }
    }
    out.push_back({"flow_head.weight", ParamKind::conv_weight, flow_head_.weight});
    out.push_back({"flow_head.bias", ParamKind::bias, flow_head_.bias});
    out.push_back({"color_head.weight", ParamKind::conv_weight, color_head_.weight});
    out.push_back({"color_head.bias", ParamKind::bias, color_head_.bias});
    return out;
}

std::int64_t FFNeRVModel::parameter_count() const
{
    std::int64_t n = 0;
    for (const auto& p : parameters()) {
        n += static_cast<std::int64_t>(p.tensor.numel());
    }
    return n;
}

FFNeRVModel FFNeRVModel::with_parameters(std::span<const Tensor> values) const
{
    const auto current = parameters();
    if (values.size() != current.size()) {
        throw std::invalid_argument("with_parameters: expected " + std::to_string(current.size()) +
                                    " tensors, got " + std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].shape() != current[i].tensor.shape()) {
            throw ShapeError("with_parameters: " + current[i].name + " has shape " +
                             shape_string(current[i].tensor.shape()) + ", replacement is " +
                             shape_string(values[i].shape()));
        }
    }
    FFNeRVModel m = *this;
    std::size_t i = 0;
    for (auto& g : m.grids_.grids()) {
        g.values = values[i++];
    }
    for (auto& block : m.blocks_) {
        for (auto& conv : block.convs) {
            conv.weight = values[i++];
            conv.bias = values[i++];
        }
    }
    m.flow_head_.weight = values[i++];
    m.flow_head_.bias = values[i++];
    m.color_head_.weight = values[i++];
    m.color_head_.bias = values[i++];
    return m;
}

FFNeRVModel FFNeRVModel::clone() const
{
    std::vector<Tensor> copies;
    for (const auto& p : parameters()) {
        auto c = p.tensor.detach();
        c.set_requires_grad(p.tensor.requires_grad());
        copies.push_back(std::move(c));
    }
    return with_parameters(copies);
}

Tensor FFNeRVModel::decoder_features(std::int64_t t, Tensor* flow_features) const
{
    if (t < 0 || t >= config_.frames) {
        throw std::out_of_range("frame index " + std::to_string(t) + " outside [0, " +
                                std::to_string(config_.frames) + ")");
    }
    Tensor x = grids_.sample(t);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        x = block_forward(x, block_specs_[b], blocks_[b]);
        if (flow_features && static_cast<int>(b) == config_.flow_stage) {
            *flow_features = x;
        }
    }
    return x;
}

FrameComponents FFNeRVModel::forward_components(std::int64_t t) const
{
    const bool flow = config_.flow_enabled;
    Tensor flow_features;
    Tensor features = decoder_features(t, flow ? &flow_features : nullptr);
    auto color = head_forward(features, config_.color_head(), color_head_);

    FrameComponents comp;
    comp.independent = sigmoid(slice_channels(color, 0, 3));
    comp.weight_aggregated = slice_channels(color, 3, 1);
    comp.weight_independent = slice_channels(color, 4, 1);
    if (flow) {
        auto logits = head_forward(flow_features, config_.flow_head(), flow_head_);
        const auto n = static_cast<std::int64_t>(config_.neighbors.size());
        for (std::int64_t i = 0; i < n; ++i) {
            comp.flows.push_back(slice_channels(logits, 2 * i, 2));
            comp.flow_weights.push_back(slice_channels(logits, 2 * n + i, 1));
        }
    }
    return comp;
}

Tensor FFNeRVModel::forward_independent(std::int64_t t) const
{
    Tensor features = decoder_features(t, nullptr);
    auto color = head_forward(features, config_.color_head(), color_head_);
    return sigmoid(slice_channels(color, 0, 3));
}

std::vector<std::int64_t> FFNeRVModel::neighbor_indices(std::int64_t t, std::int64_t limit) const
{
    if (limit < 0) {
        limit = config_.frames - 1;
    }
    std::vector<std::int64_t> out;
    for (auto i : config_.neighbors) {
        out.push_back(std::clamp<std::int64_t>(t + i, 0, limit));
    }
    return out;
}

std::vector<Tensor> warp_neighbors(const FrameComponents& comp, std::span<const Tensor> neighbor_frames)
{
    if (comp.flows.size() != neighbor_frames.size()) {
        throw std::invalid_argument("warp_neighbors: need one frame per flow");
    }
    const auto h = comp.independent.dim(1);
    const auto w = comp.independent.dim(2);
    std::vector<Tensor> warped;
    for (std::size_t i = 0; i < comp.flows.size(); ++i) {
        warped.push_back(bilinear_warp(neighbor_frames[i], bilinear_upsample(comp.flows[i], h, w)));
    }
    return warped;
}

Tensor aggregate(const FrameComponents& comp, std::span<const Tensor> neighbor_frames)
{
    const auto n = comp.flows.size();
    if (n == 0 || comp.flow_weights.size() != n || neighbor_frames.size() != n) {
        throw std::invalid_argument("aggregate: need one flow, weight and frame per neighbor");
    }
    const auto h = comp.independent.dim(1);
    const auto w = comp.independent.dim(2);
    const auto warped = warp_neighbors(comp, neighbor_frames);
    std::vector<Tensor> logits;
    for (std::size_t i = 0; i < n; ++i) {
        logits.push_back(bilinear_upsample(comp.flow_weights[i], h, w));
    }
    auto weights = softmax_channels(concat_channels(logits));
    Tensor acc;
    for (std::size_t i = 0; i < n; ++i) {
        const auto wi = expand_channels(slice_channels(weights, static_cast<std::int64_t>(i), 1),
                                        warped[i].dim(0));
        auto term = mul(wi, warped[i]);
        acc = i == 0 ? term : add(acc, term);
    }
    return acc;
}

Tensor aggregate(const FrameComponents& comp, const FrameBuffer& buffer,
                 std::span<const std::int64_t> neighbor_indices)
{
    std::vector<Tensor> frames;
    for (auto j : neighbor_indices) {
        frames.push_back(buffer.read(j));
    }
    return aggregate(comp, frames);
}

Tensor final_frame(const FrameComponents& comp, const Tensor& aggregated)
{
    auto pair = softmax_channels(concat_channels(
        std::vector<Tensor>{comp.weight_aggregated, comp.weight_independent}));
    const auto c = comp.independent.dim(0);
    auto a = expand_channels(slice_channels(pair, 0, 1), c);
    auto b = expand_channels(slice_channels(pair, 1, 1), c);
    return add(mul(a, aggregated), mul(b, comp.independent));
}

Tensor decode_frame(const FFNeRVModel& model, std::int64_t t, BufferMode mode,
                    const FrameBuffer* buffer)
{
    NoGradGuard no_grad;
    auto comp = model.forward_components(t);
    if (!model.config().flow_enabled) {
        return comp.independent;
    }
    const auto idx = model.neighbor_indices(t);
    std::vector<Tensor> frames;
    for (auto j : idx) {
        if (mode == BufferMode::stored) {
            if (!buffer) {
                throw std::invalid_argument("decode_frame: stored mode needs a frame buffer");
            }
            frames.push_back(buffer->read(j));
        } else {
            frames.push_back(j == t ? comp.independent : model.forward_independent(j));
        }
    }
    return final_frame(comp, aggregate(comp, frames));
}

namespace {

template <typename F>
void parallel_for(std::size_t count, int jobs, F&& body)
{
    const auto workers = static_cast<std::size_t>(std::clamp<std::int64_t>(jobs, 1, std::max<std::size_t>(count, 1)));
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        NoGradGuard no_grad;
        for (std::size_t i = next++; i < count; i = next++) {
            body(i);
        }
    };
    if (workers == 1) {
        run();
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k) {
        pool.emplace_back(run);
    }
    for (auto& th : pool) {
        th.join();
    }
}

}  // namespace

std::vector<Tensor> decode_frames(const FFNeRVModel& model, std::int64_t begin, std::int64_t end,
                                  int jobs)
{
    const auto frames = model.config().frames;
    if (begin < 0 || end > frames || begin >= end) {
        throw std::out_of_range("decode range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") invalid for " + std::to_string(frames) +
                                " frames");
    }
    const auto count = static_cast<std::size_t>(end - begin);
    std::vector<Tensor> out(count);
    if (!model.config().flow_enabled) {
        parallel_for(count, jobs, [&](std::size_t k) {
            out[k] = model.forward_independent(begin + static_cast<std::int64_t>(k));
        });
        return out;
    }

    // Each neighbor frame is computed once; the values equal what a
    // per-frame live decode would recompute.
    std::set<std::int64_t> needed;
    for (auto t = begin; t < end; ++t) {
        for (auto j : model.neighbor_indices(t)) {
            needed.insert(j);
        }
    }
    const std::vector<std::int64_t> needed_list(needed.begin(), needed.end());
    std::vector<Tensor> independent(static_cast<std::size_t>(frames));
    parallel_for(needed_list.size(), jobs, [&](std::size_t k) {
        const auto j = needed_list[k];
        independent[static_cast<std::size_t>(j)] = model.forward_independent(j);
    });
    parallel_for(count, jobs, [&](std::size_t k) {
        const auto t = begin + static_cast<std::int64_t>(k);
        auto comp = model.forward_components(t);
        std::vector<Tensor> nbr;
        for (auto j : model.neighbor_indices(t)) {
            nbr.push_back(j == t ? comp.independent : independent[static_cast<std::size_t>(j)]);
        }
        out[k] = final_frame(comp, aggregate(comp, nbr));
    });
    return out;
}

}  // namespace ffnerv
