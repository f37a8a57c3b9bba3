#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffnerv/random.hpp"
#include "ffnerv/tensor.hpp"

namespace ffnerv {

enum class BlockKind { nerv, compact };

std::string to_string(BlockKind kind);
BlockKind parse_block_kind(const std::string& text);

/// One up-scaling decoder block.
///
/// nerv:    conv k x k (in -> out*S^2) -> pixel_shuffle(S) -> GELU
/// compact: grouped conv k x k (in -> out*S^2, g groups)
///          -> pointwise conv (out*S^2 -> out*S^2) -> pixel_shuffle(S) -> GELU
struct ConvBlockSpec {
    BlockKind kind = BlockKind::nerv;
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    int scale = 1;
    int kernel = 3;
    int groups = 1;

    // Channels produced before the pixel shuffle, out * S^2.
    std::int64_t expanded_channels() const { return out_channels * scale * scale; }
    void validate() const;
};

struct ParamCount {
    std::int64_t weights = 0;
    std::int64_t biases = 0;
    std::int64_t total() const { return weights + biases; }
};

ParamCount param_count(const ConvBlockSpec& spec);

struct ConvParams {
    Tensor weight;  // O x C/g x k x k
    Tensor bias;    // O
};

// nerv blocks own one conv, compact blocks two (grouped then pointwise).
struct ConvBlockParams {
    std::vector<ConvParams> convs;
};

ConvParams init_conv(std::int64_t in_channels, std::int64_t out_channels, int kernel, int groups,
                     Rng& rng);
ConvBlockParams init_block(const ConvBlockSpec& spec, Rng& rng);

Tensor nerv_block_forward(const Tensor& x, const ConvBlockSpec& spec, const ConvBlockParams& params);
Tensor compact_block_forward(const Tensor& x, const ConvBlockSpec& spec,
                             const ConvBlockParams& params);
// Dispatches on spec.kind.
Tensor block_forward(const Tensor& x, const ConvBlockSpec& spec, const ConvBlockParams& params);

/// A k x k output conv reading the features produced by block `attach_stage`
/// (0-based). Emits raw logits.
struct HeadSpec {
    int attach_stage = 0;
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    int kernel = 3;
};

ParamCount param_count(const HeadSpec& spec);
Tensor head_forward(const Tensor& x, const HeadSpec& spec, const ConvParams& params);

}  // namespace ffnerv
