#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ffnerv/compression.hpp"
#include "ffnerv/presets.hpp"

namespace ffnerv {

using Json = nlohmann::json;

// Console sink; commands never print directly.
using LogFn = std::function<void(const std::string&)>;

/// Command-line overrides applied on top of a loaded configuration.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> prune_ratio;
    std::optional<int> qat_bits;
    bool no_flow = false;
    bool no_grids = false;
    std::optional<std::int64_t> epochs;
};

void apply_overrides(CodecConfig& config, const Overrides& o);

struct EncodeOptions {
    std::string frames_dir;
    std::string config = "tiny";  // preset name or config file
    std::string out;              // .ffnv path
    Overrides overrides;
    int jobs = 1;
    LogFn log;
};

/// Trains, prunes, quantizes and entropy-codes a clip. Writes the
/// bitstream, `<out stem>.manifest.json` and `<out stem>.metrics.jsonl`
/// and returns the manifest.
Json cmd_encode(const EncodeOptions& opts);

struct DecodeOptions {
    std::string bitstream;
    std::string out_dir;
    std::optional<std::int64_t> begin;
    std::optional<std::int64_t> end;
    std::optional<std::string> reference_dir;  // adds per-frame PSNR
    int jobs = 1;
    LogFn log;
};

// Writes frame_<t>.png for t in [begin, end) plus manifest.json.
Json cmd_decode(const DecodeOptions& opts);

struct FrameScore {
    std::int64_t t = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalReport {
    std::string bitstream;
    std::string frames_dir;
    std::uint64_t bytes = 0;
    double bpp = 0.0;
    std::vector<FrameScore> frames;
    double average_psnr = 0.0;
    double average_ssim = 0.0;

    Json to_json() const;
    // Validates the schema; throws std::invalid_argument on violations.
    static EvalReport from_json(const Json& j);
};

struct EvalOptions {
    std::string bitstream;
    std::string frames_dir;
    int jobs = 1;
    LogFn log;
};

EvalReport cmd_eval(const EvalOptions& opts);

struct InterpOptions {
    std::string frames_dir;
    std::string config = "tiny";
    Overrides overrides;
    int jobs = 1;
    LogFn log;
};

/// Trains on even frame indices and scores the odd ones. The neighbor
/// offsets are doubled so that training frames reference training frames.
Json cmd_interp(const InterpOptions& opts);

/// Grid resolutions used by cmd_interp: each capped at the number of
/// training frames, duplicates dropped. A slice that no training frame
/// reaches would otherwise keep its initial values.
std::vector<std::int64_t> interp_grid_resolutions(const std::vector<std::int64_t>& resolutions,
                                                  std::int64_t train_frames);

struct InspectOptions {
    std::string bitstream;
    std::int64_t t = 0;
    std::string out_dir;
    LogFn log;
};

/// Dumps I, every warped neighbor, the weight maps a and b, the aggregated
/// frame and f as PNGs. Weight maps are min-max normalized (uniform maps
/// become mid gray).
Json cmd_inspect(const InspectOptions& opts);

// Per-pixel min-max normalization of a 1 x H x W map into a 3 x H x W gray image.
Tensor weight_map_image(const Tensor& map);

// JSON number, or the string "inf" for non-finite values.
Json json_number(double v);
double number_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace ffnerv
