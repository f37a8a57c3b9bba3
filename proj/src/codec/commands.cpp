#include "ffnerv/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ffnerv/image_io.hpp"
#include "ffnerv/metrics.hpp"
#include "ffnerv/ops.hpp"

namespace ffnerv {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void say(const LogFn& log, const std::string& line)
{
    if (log) {
        log(line);
    }
}

// Same digits as the JSON value, so console and manifest agree.
std::string number_text(double v)
{
    return std::isfinite(v) ? format_double(v) : "inf";
}

Json kv_json(const KeyValues& kv)
{
    Json j = Json::object();
    for (const auto& [k, v] : kv.entries()) {
        j[k] = v;
    }
    return j;
}

void fit_to_frames(CodecConfig& config, const std::vector<Tensor>& frames)
{
    config.model.frames = static_cast<std::int64_t>(frames.size());
    config.model.height = frames.front().dim(1);
    config.model.width = frames.front().dim(2);
    config.validate();
}

QuantMode mode_of(const TrainConfig& t)
{
    return t.qat ? QuantMode::qat : QuantMode::minmax;
}

std::vector<FrameScore> score(const std::vector<Tensor>& decoded, const std::vector<Tensor>& reference,
                              std::int64_t first)
{
    std::vector<FrameScore> out;
    NoGradGuard no_grad;
    for (std::size_t k = 0; k < decoded.size(); ++k) {
        const auto& ref = reference[static_cast<std::size_t>(first) + k];
        out.push_back({first + static_cast<std::int64_t>(k), psnr(decoded[k], ref),
                       ssim(decoded[k], ref).item()});
    }
    return out;
}

Json scores_json(const std::vector<FrameScore>& scores)
{
    Json arr = Json::array();
    for (const auto& s : scores) {
        arr.push_back({{"t", s.t}, {"psnr", json_number(s.psnr)}, {"ssim", s.ssim}});
    }
    return arr;
}

double mean_of(const std::vector<FrameScore>& scores, double FrameScore::*field)
{
    std::vector<double> v;
    for (const auto& s : scores) {
        v.push_back(s.*field);
    }
    return average(v);
}

fs::path sibling(const std::string& out, const std::string& suffix)
{
    fs::path p(out);
    return p.parent_path() / (p.stem().string() + suffix);
}

}  // namespace

Json json_number(double v)
{
    return std::isfinite(v) ? Json(v) : Json("inf");
}

double number_from_json(const Json& j)
{
    if (j.is_number()) {
        return j.get<double>();
    }
    if (j.is_string() && j.get<std::string>() == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    throw std::invalid_argument("expected a number or \"inf\", got " + j.dump());
}

Json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    return Json::parse(in);
}

void write_json_file(const std::string& path, const Json& j)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    out << j.dump(2) << '\n';
}

void apply_overrides(CodecConfig& config, const Overrides& o)
{
    if (o.seed) config.train.seed = *o.seed;
    if (o.prune_ratio) config.prune_ratio = *o.prune_ratio;
    if (o.qat_bits) config.train.qat_bits = *o.qat_bits;
    if (o.epochs) config.train.epochs = *o.epochs;
    if (o.no_flow) config.model.flow_enabled = false;
    if (o.no_grids) config.model.grids_enabled = false;
}

Json cmd_encode(const EncodeOptions& opts)
{
    const auto frames = read_frames(opts.frames_dir);
    auto config = load_config_spec(opts.config);
    apply_overrides(config, opts.overrides);
    fit_to_frames(config, frames);
    if (opts.out.empty()) {
        throw std::invalid_argument("encode: output path is required");
    }
    const auto manifest_path = sibling(opts.out, ".manifest.json");
    const auto log_path = sibling(opts.out, ".metrics.jsonl");

    auto model = FFNeRVModel::create(config.model, config.train.seed);
    std::ofstream metrics(log_path, std::ios::trunc);
    if (!metrics) {
        throw std::runtime_error("cannot open '" + log_path.string() + "' for writing");
    }
    TrainOptions topts;
    topts.on_epoch = [&](const EpochMetrics& m) { metrics << to_log_line(m) << '\n'; };

    const auto t_train = Clock::now();
    const auto history = train(model, frames, config.train, topts);
    const double train_s = seconds_since(t_train);

    const auto t_compress = Clock::now();
    const auto pruned = config.prune_ratio > 0.0 ? prune(model, config.prune_ratio) : 0;
    const auto qm = quantize_model(model, mode_of(config.train), config.train.qat_bits);
    const auto bytes = serialize(qm);
    write_file(opts.out, bytes);
    const double compress_s = seconds_since(t_compress);

    // score what a decoder will see: the stream read back from disk
    const auto t_decode = Clock::now();
    const auto decoded_model = dequantize_model(deserialize(read_file(opts.out)));
    const auto decoded = decode_frames(decoded_model, 0, config.model.frames, opts.jobs);
    const double decode_s = seconds_since(t_decode);
    const auto scores = score(decoded, frames, 0);

    const double bpp = bits_per_pixel(bytes.size(), config.model.frames, config.model.height,
                                      config.model.width);
    Json classes = Json::array();
    for (const auto& c : class_stats(qm)) {
        classes.push_back({{"name", c.name},
                           {"symbols", c.symbols},
                           {"table_bytes", c.table_bytes},
                           {"payload_bytes", c.payload_bytes},
                           {"entropy_bits", c.entropy_bits}});
    }
    Json m;
    m["command"] = "encode";
    m["config"] = kv_json(config.to_key_values());
    m["seed"] = config.train.seed;
    m["ablation_mode"] = config.model.ablation_mode();
    m["quant_mode"] = to_string(qm.mode);
    m["qat_bits"] = qm.bits;
    m["parameters"] = model.parameter_count();
    m["pruned_weights"] = pruned;
    m["bytes"] = bytes.size();
    m["bpp"] = bpp;
    m["classes"] = classes;
    m["artifacts"] = {{"frames_dir", opts.frames_dir},
                      {"bitstream", opts.out},
                      {"manifest", manifest_path.string()},
                      {"metrics_log", log_path.string()}};
    m["timings"] = {{"train_s", train_s}, {"compress_s", compress_s}, {"decode_s", decode_s}};
    m["final_train_psnr"] = json_number(history.empty() ? 0.0 : history.back().psnr);
    m["frames"] = scores_json(scores);
    m["average_psnr"] = json_number(mean_of(scores, &FrameScore::psnr));
    m["average_ssim"] = mean_of(scores, &FrameScore::ssim);
    write_json_file(manifest_path.string(), m);

    say(opts.log, "parameters " + std::to_string(model.parameter_count()) + ", pruned " +
                      std::to_string(pruned));
    say(opts.log, "wrote " + opts.out + ": " + std::to_string(bytes.size()) + " bytes, bpp " +
                      format_double(bpp));
    say(opts.log, "psnr " + number_text(mean_of(scores, &FrameScore::psnr)) + " dB, ssim " +
                      format_double(mean_of(scores, &FrameScore::ssim)));
    say(opts.log, "train " + format_double(train_s) + " s, compress " + format_double(compress_s) +
                      " s, decode " + format_double(decode_s) + " s");
    return m;
}

Json cmd_decode(const DecodeOptions& opts)
{
    const auto model = dequantize_model(deserialize(read_file(opts.bitstream)));
    const auto total = model.config().frames;
    const auto begin = opts.begin.value_or(0);
    const auto end = opts.end.value_or(total);
    fs::create_directories(opts.out_dir);

    const auto t0 = Clock::now();
    const auto decoded = decode_frames(model, begin, end, opts.jobs);
    const double decode_s = seconds_since(t0);
    for (std::size_t k = 0; k < decoded.size(); ++k) {
        write_png((fs::path(opts.out_dir) / frame_file_name(begin + static_cast<std::int64_t>(k))).string(),
                  decoded[k]);
    }
    const double fps = decode_s > 0.0 ? static_cast<double>(decoded.size()) / decode_s : 0.0;

    Json m;
    m["command"] = "decode";
    m["bitstream"] = opts.bitstream;
    m["out_dir"] = opts.out_dir;
    m["begin"] = begin;
    m["end"] = end;
    m["frames_written"] = decoded.size();
    m["jobs"] = opts.jobs;
    m["decode_s"] = decode_s;
    m["fps"] = fps;
    if (opts.reference_dir) {
        const auto reference = read_frames(*opts.reference_dir);
        if (static_cast<std::int64_t>(reference.size()) != total) {
            throw std::invalid_argument("reference has " + std::to_string(reference.size()) +
                                        " frames, the stream encodes " + std::to_string(total));
        }
        const auto scores = score(decoded, reference, begin);
        m["frames"] = scores_json(scores);
        m["average_psnr"] = json_number(mean_of(scores, &FrameScore::psnr));
    }
    write_json_file((fs::path(opts.out_dir) / "manifest.json").string(), m);
    say(opts.log, "decoded " + std::to_string(decoded.size()) + " frames in " + format_double(decode_s) +
                      " s (" + format_double(fps) + " fps)");
    return m;
}

Json EvalReport::to_json() const
{
    Json j;
    j["bitstream"] = bitstream;
    j["frames_dir"] = frames_dir;
    j["bytes"] = bytes;
    j["bpp"] = bpp;
    j["frames"] = scores_json(frames);
    j["average_psnr"] = json_number(average_psnr);
    j["average_ssim"] = average_ssim;
    return j;
}

EvalReport EvalReport::from_json(const Json& j)
{
    auto require = [&](const char* key, bool ok) {
        if (!j.contains(key) || !ok) {
            throw std::invalid_argument(std::string("eval report: missing or invalid '") + key + "'");
        }
    };
    require("bitstream", j.contains("bitstream") && j["bitstream"].is_string());
    require("frames_dir", j.contains("frames_dir") && j["frames_dir"].is_string());
    require("bytes", j.contains("bytes") && j["bytes"].is_number_unsigned());
    require("bpp", j.contains("bpp") && j["bpp"].is_number());
    require("frames", j.contains("frames") && j["frames"].is_array());
    require("average_psnr", j.contains("average_psnr"));
    require("average_ssim", j.contains("average_ssim") && j["average_ssim"].is_number());
    EvalReport r;
    r.bitstream = j["bitstream"].get<std::string>();
    r.frames_dir = j["frames_dir"].get<std::string>();
    r.bytes = j["bytes"].get<std::uint64_t>();
    r.bpp = j["bpp"].get<double>();
    for (const auto& f : j["frames"]) {
        if (!f.is_object() || !f.contains("t") || !f["t"].is_number_integer() || !f.contains("psnr") ||
            !f.contains("ssim") || !f["ssim"].is_number()) {
            throw std::invalid_argument("eval report: malformed frame entry " + f.dump());
        }
        r.frames.push_back({f["t"].get<std::int64_t>(), number_from_json(f["psnr"]), f["ssim"].get<double>()});
    }
    r.average_psnr = number_from_json(j["average_psnr"]);
    r.average_ssim = j["average_ssim"].get<double>();
    return r;
}

EvalReport cmd_eval(const EvalOptions& opts)
{
    const auto bytes = read_file(opts.bitstream);
    const auto model = dequantize_model(deserialize(bytes));
    const auto& mc = model.config();
    const auto reference = read_frames(opts.frames_dir);
    if (static_cast<std::int64_t>(reference.size()) != mc.frames) {
        throw std::invalid_argument("frame count mismatch: '" + opts.frames_dir + "' has " +
                                    std::to_string(reference.size()) + " frames, the stream encodes " +
                                    std::to_string(mc.frames));
    }
    if (reference.front().dim(1) != mc.height || reference.front().dim(2) != mc.width) {
        throw std::invalid_argument("frame size mismatch: reference is " + shape_string(reference.front().shape()) +
                                    ", the stream encodes 3x" + std::to_string(mc.height) + "x" +
                                    std::to_string(mc.width));
    }
    const auto decoded = decode_frames(model, 0, mc.frames, opts.jobs);
    EvalReport r;
    r.bitstream = opts.bitstream;
    r.frames_dir = opts.frames_dir;
    r.bytes = bytes.size();
    r.bpp = bits_per_pixel(bytes.size(), mc.frames, mc.height, mc.width);
    r.frames = score(decoded, reference, 0);
    r.average_psnr = mean_of(r.frames, &FrameScore::psnr);
    r.average_ssim = mean_of(r.frames, &FrameScore::ssim);
    say(opts.log, "psnr " + number_text(r.average_psnr) + " dB, ssim " + number_text(r.average_ssim) + ", bpp " +
                      format_double(r.bpp));
    return r;
}

Json cmd_interp(const InterpOptions& opts)
{
    const auto frames = read_frames(opts.frames_dir);
    if (frames.size() < 4) {
        throw std::invalid_argument("interp needs at least 4 frames, got " + std::to_string(frames.size()));
    }
    auto config = load_config_spec(opts.config);
    apply_overrides(config, opts.overrides);
    for (auto& n : config.model.neighbors) {
        n *= 2;
    }
    fit_to_frames(config, frames);
    const auto train_count = (static_cast<std::int64_t>(frames.size()) + 1) / 2;
    config.model.grid_resolutions = interp_grid_resolutions(config.model.effective_grid_resolutions(), train_count);
    config.model.grids_enabled = true;
    if (config.model.latent_channels % static_cast<std::int64_t>(config.model.grid_resolutions.size()) != 0) {
        throw ConfigError("interp: latent channels do not split over the capped grids");
    }
    config.validate();

    std::vector<std::int64_t> seen;
    std::vector<std::int64_t> unseen;
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(frames.size()); ++t) {
        (t % 2 == 0 ? seen : unseen).push_back(t);
    }
    auto model = FFNeRVModel::create(config.model, config.train.seed);
    TrainOptions topts;
    topts.indices = seen;
    const auto t0 = Clock::now();
    train(model, frames, config.train, topts);
    const double train_s = seconds_since(t0);

    const auto coded = dequantize_model(quantize_model(model, mode_of(config.train), config.train.qat_bits));
    const auto decoded = decode_frames(coded, 0, config.model.frames, opts.jobs);
    const auto scores = score(decoded, frames, 0);
    std::vector<FrameScore> seen_scores;
    std::vector<FrameScore> unseen_scores;
    for (const auto& s : scores) {
        (s.t % 2 == 0 ? seen_scores : unseen_scores).push_back(s);
    }
    Json m;
    m["command"] = "interp";
    m["config"] = kv_json(config.to_key_values());
    m["ablation_mode"] = config.model.ablation_mode();
    m["split_rule"] = "even indices train, odd indices validate";
    m["seen"] = scores_json(seen_scores);
    m["unseen"] = scores_json(unseen_scores);
    m["seen_psnr"] = json_number(mean_of(seen_scores, &FrameScore::psnr));
    m["unseen_psnr"] = json_number(mean_of(unseen_scores, &FrameScore::psnr));
    m["train_s"] = train_s;
    say(opts.log, "seen psnr " + number_text(mean_of(seen_scores, &FrameScore::psnr)) + " dB, unseen psnr " +
                      number_text(mean_of(unseen_scores, &FrameScore::psnr)) + " dB");
    return m;
}

std::vector<std::int64_t> interp_grid_resolutions(const std::vector<std::int64_t>& resolutions,
                                                  std::int64_t train_frames)
{
    std::vector<std::int64_t> out;
    for (auto r : resolutions) {
        const auto capped = std::min(r, train_frames);
        if (out.empty() || capped > out.back()) {
            out.push_back(capped);
        }
    }
    return out;
}

Tensor weight_map_image(const Tensor& map)
{
    auto v = map.data();
    float lo = v.empty() ? 0.0F : v[0];
    float hi = lo;
    for (float x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    std::vector<float> gray(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        gray[i] = hi > lo ? (v[i] - lo) / (hi - lo) : 0.5F;
    }
    const auto g = Tensor(map.shape(), std::move(gray));
    return concat_channels(std::vector<Tensor>{g, g, g});
}

Json cmd_inspect(const InspectOptions& opts)
{
    NoGradGuard no_grad;
    const auto model = dequantize_model(deserialize(read_file(opts.bitstream)));
    const auto& mc = model.config();
    if (opts.t < 0 || opts.t >= mc.frames) {
        throw std::out_of_range("frame " + std::to_string(opts.t) + " outside [0, " +
                                std::to_string(mc.frames) + ")");
    }
    fs::create_directories(opts.out_dir);
    Json files = Json::object();
    auto dump = [&](const std::string& name, const Tensor& image) {
        const auto path = (fs::path(opts.out_dir) / (name + ".png")).string();
        write_png(path, image);
        files[name] = path;
    };

    const auto comp = model.forward_components(opts.t);
    dump("independent", comp.independent);
    if (mc.flow_enabled) {
        std::vector<Tensor> neighbors;
        for (auto j : model.neighbor_indices(opts.t)) {
            neighbors.push_back(j == opts.t ? comp.independent : model.forward_independent(j));
        }
        const auto warped = warp_neighbors(comp, neighbors);
        for (std::size_t i = 0; i < warped.size(); ++i) {
            const auto off = mc.neighbors[i];
            dump("warped_" + std::string(off < 0 ? "m" : "p") + std::to_string(std::abs(off)), warped[i]);
        }
        const auto aggregated = aggregate(comp, neighbors);
        const auto pair = softmax_channels(
            concat_channels(std::vector<Tensor>{comp.weight_aggregated, comp.weight_independent}));
        dump("weight_aggregated", weight_map_image(slice_channels(pair, 0, 1)));
        dump("weight_independent", weight_map_image(slice_channels(pair, 1, 1)));
        dump("aggregated", aggregated);
        dump("final", final_frame(comp, aggregated));
    } else {
        dump("final", comp.independent);
    }
    Json m;
    m["command"] = "inspect";
    m["bitstream"] = opts.bitstream;
    m["t"] = opts.t;
    m["components"] = files;
    write_json_file((fs::path(opts.out_dir) / "components.json").string(), m);
    say(opts.log, "wrote " + std::to_string(files.size()) + " component images to " + opts.out_dir);
    return m;
}

}  // namespace ffnerv
