#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ffnerv/key_value.hpp"
#include "ffnerv/layers.hpp"
#include "ffnerv/temporal_grid.hpp"
#include "ffnerv/tensor.hpp"

namespace ffnerv {

/// Architecture and video geometry.
///
/// Block b reads the output of block b-1 (block 0 reads the grid features)
/// and scales it by upscale[b]. The flow head reads block `flow_stage`, the
/// color head reads the last block.
struct FFNeRVConfig {
    std::int64_t frames = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;

    std::vector<std::int64_t> neighbors{-2, -1, 1, 2};
    std::vector<std::int64_t> upscale;
    std::vector<std::int64_t> grid_resolutions;
    std::int64_t latent_channels = 0;  // split equally across grids
    std::vector<std::int64_t> block_channels;
    bool compact_blocks = true;        // every block after the first is compact
    int groups = 8;
    int kernel = 3;
    int head_kernel = 3;
    int flow_stage = 0;

    bool flow_enabled = true;
    bool grids_enabled = true;  // false: one grid with s = frames

    std::int64_t grid_height() const;
    std::int64_t grid_width() const;
    std::int64_t flow_height() const;
    std::int64_t flow_width() const;
    std::vector<std::int64_t> effective_grid_resolutions() const;
    std::int64_t channels_per_grid() const;
    std::vector<ConvBlockSpec> block_specs() const;
    HeadSpec flow_head() const;
    HeadSpec color_head() const;
    std::string ablation_mode() const;

    void validate() const;

    KeyValues to_key_values() const;
    static FFNeRVConfig from_key_values(const KeyValues& kv);
};

// Largest group count <= requested that divides both channel counts.
int resolve_groups(std::int64_t in_channels, std::int64_t expanded_channels, int requested);

struct LayerShape {
    std::string layer;
    std::string module;
    Shape shape;
};

// The model's layer output table, computed from the configuration alone.
std::vector<LayerShape> layer_shapes(const FFNeRVConfig& config);

enum class ParamKind { grid, conv_weight, bias };

struct NamedParam {
    std::string name;
    ParamKind kind;
    Tensor tensor;
};

/// Outputs of one forward evaluation at time t.
struct FrameComponents {
    Tensor independent;                // I(t), 3 x H x W, in [0, 1]
    std::vector<Tensor> flows;         // per neighbor, 2 x H' x W' (x then y displacement)
    std::vector<Tensor> flow_weights;  // per neighbor, 1 x H' x W' logits
    Tensor weight_aggregated;          // 1 x H x W logit for the aggregated frame
    Tensor weight_independent;         // 1 x H x W logit for I(t)
};

/// Gradient-free cache of independent frames, one slot per video frame.
class FrameBuffer {
public:
    FrameBuffer() = default;
    FrameBuffer(std::int64_t frames, std::int64_t height, std::int64_t width);

    std::int64_t size() const { return static_cast<std::int64_t>(slots_.size()); }
    bool initialized(std::int64_t t) const;
    const Tensor& read(std::int64_t t) const;
    // Overwrites exactly the listed slots with detached copies.
    void update(std::span<const std::int64_t> indices, std::span<const Tensor> frames);

private:
    void check_index(std::int64_t t) const;

    std::int64_t height_ = 0;
    std::int64_t width_ = 0;
    std::vector<std::optional<Tensor>> slots_;
};

class FFNeRVModel {
public:
    FFNeRVModel() = default;
    static FFNeRVModel create(const FFNeRVConfig& config, std::uint64_t seed);

    const FFNeRVConfig& config() const { return config_; }
    const GridBank& grids() const { return grids_; }

    /// Every learnable tensor in a fixed order: grids, blocks (weight then
    /// bias per conv), flow head, color head. Handles share storage with
    /// the model.
    std::vector<NamedParam> parameters() const;
    std::int64_t parameter_count() const;

    /// Shallow copy whose parameters are replaced, in parameters() order.
    /// Used to run the forward pass on quantized stand-ins.
    FFNeRVModel with_parameters(std::span<const Tensor> values) const;
    // Deep copy with independent storage.
    FFNeRVModel clone() const;

    FrameComponents forward_components(std::int64_t t) const;
    // I(t) only; skips the flow head.
    Tensor forward_independent(std::int64_t t) const;

    // clamp(t + i, 0, limit) for each neighbor offset; limit defaults to T-1.
    std::vector<std::int64_t> neighbor_indices(std::int64_t t, std::int64_t limit = -1) const;

private:
    Tensor decoder_features(std::int64_t t, Tensor* flow_features) const;

    FFNeRVConfig config_;
    GridBank grids_;
    std::vector<ConvBlockSpec> block_specs_;
    std::vector<ConvBlockParams> blocks_;
    ConvParams flow_head_;
    ConvParams color_head_;
};

// Neighbor frames warped by their up-sampled flows.
std::vector<Tensor> warp_neighbors(const FrameComponents& comp, std::span<const Tensor> neighbor_frames);

/// Softmax-weighted sum of neighbor frames warped by the up-sampled flows.
/// `neighbor_frames[i]` is the independent frame at the i-th neighbor index.
Tensor aggregate(const FrameComponents& comp, std::span<const Tensor> neighbor_frames);
// Reads the neighbor frames from the buffer.
Tensor aggregate(const FrameComponents& comp, const FrameBuffer& buffer,
                 std::span<const std::int64_t> neighbor_indices);

// a * aggregated + b * I with (a, b) the per-pixel softmax of the two weight logits.
Tensor final_frame(const FrameComponents& comp, const Tensor& aggregated);

enum class BufferMode { live, stored };

/// Reconstructs frame t. Live mode recomputes neighbor independent frames;
/// stored mode reads them from `buffer`. With flow disabled this is I(t).
Tensor decode_frame(const FFNeRVModel& model, std::int64_t t, BufferMode mode = BufferMode::live,
                    const FrameBuffer* buffer = nullptr);

/// Decodes [begin, end) with `jobs` worker threads; output index k holds
/// frame begin + k. Results do not depend on the job count.
std::vector<Tensor> decode_frames(const FFNeRVModel& model, std::int64_t begin, std::int64_t end,
                                  int jobs = 1);

}  // namespace ffnerv
