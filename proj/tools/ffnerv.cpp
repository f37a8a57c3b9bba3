#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ffnerv/commands.hpp"
#include "ffnerv/image_io.hpp"

using namespace ffnerv;

namespace {

enum ExitCode {
    exit_ok = 0,
    exit_internal = 1,
    exit_usage = 2,
    exit_config = 3,
    exit_io = 4,
    exit_bitstream = 5,
    exit_training = 6,
    exit_argument = 7,
};

int report(const char* category, const std::string& what, int code)
{
    std::cerr << "ffnerv: " << category << " error: " << what << '\n';
    return code;
}

void add_overrides(CLI::App* cmd, Overrides& o, std::string& config)
{
    cmd->add_option("--config", config, "preset name (tiny, paper-720p, paper-1080p) or config file")
        ->capture_default_str();
    cmd->add_option("--seed", o.seed, "seed for initialization and batch order");
    cmd->add_option("--prune-ratio", o.prune_ratio, "fraction of conv weights to prune")
        ->check(CLI::Range(0.0, 0.999999));
    cmd->add_option("--qat-bits", o.qat_bits, "quantization bit width")->check(CLI::Range(2, 16));
    cmd->add_option("--epochs", o.epochs, "override the epoch count")->check(CLI::PositiveNumber);
    cmd->add_flag("--no-flow", o.no_flow, "disable flow-guided aggregation");
    cmd->add_flag("--no-grids", o.no_grids, "single grid with one slice per frame");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"FFNeRV video codec"};
    app.require_subcommand(1);
    LogFn log = [](const std::string& line) { std::cout << line << '\n'; };

    EncodeOptions enc;
    auto* encode = app.add_subcommand("encode", "train on a frame directory and write a .ffnv stream");
    encode->add_option("--frames", enc.frames_dir, "directory of PNG frames")->required();
    encode->add_option("--out", enc.out, "output .ffnv path")->required();
    encode->add_option("--jobs", enc.jobs, "decode threads for scoring")->check(CLI::PositiveNumber);
    add_overrides(encode, enc.overrides, enc.config);

    DecodeOptions dec;
    auto* decode = app.add_subcommand("decode", "reconstruct frames from a .ffnv stream");
    decode->add_option("stream", dec.bitstream, ".ffnv file")->required();
    decode->add_option("--out", dec.out_dir, "output directory")->required();
    decode->add_option("--begin", dec.begin, "first frame index");
    decode->add_option("--end", dec.end, "one past the last frame index");
    decode->add_option("--frames", dec.reference_dir, "reference frames for per-frame PSNR");
    decode->add_option("--jobs", dec.jobs, "decode threads")->check(CLI::PositiveNumber);

    EvalOptions ev;
    std::string eval_out;
    auto* eval = app.add_subcommand("eval", "score a .ffnv stream against reference frames");
    eval->add_option("stream", ev.bitstream, ".ffnv file")->required();
    eval->add_option("--frames", ev.frames_dir, "reference frame directory")->required();
    eval->add_option("--out", eval_out, "JSON report path");
    eval->add_option("--jobs", ev.jobs, "decode threads")->check(CLI::PositiveNumber);

    InterpOptions ip;
    std::string interp_out;
    auto* interp = app.add_subcommand("interp", "train on even frames, score the odd ones");
    interp->add_option("--frames", ip.frames_dir, "directory of PNG frames")->required();
    interp->add_option("--out", interp_out, "JSON report path");
    interp->add_option("--jobs", ip.jobs, "decode threads")->check(CLI::PositiveNumber);
    add_overrides(interp, ip.overrides, ip.config);

    InspectOptions in;
    auto* inspect = app.add_subcommand("inspect", "dump the reconstruction components of one frame");
    inspect->add_option("stream", in.bitstream, ".ffnv file")->required();
    inspect->add_option("-t,--frame", in.t, "frame index")->required();
    inspect->add_option("--out", in.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (encode->parsed()) {
            enc.log = log;
            cmd_encode(enc);
        } else if (decode->parsed()) {
            dec.log = log;
            cmd_decode(dec);
        } else if (eval->parsed()) {
            ev.log = log;
            const auto r = cmd_eval(ev);
            if (!eval_out.empty()) {
                write_json_file(eval_out, r.to_json());
            } else {
                std::cout << r.to_json().dump(2) << '\n';
            }
        } else if (interp->parsed()) {
            ip.log = log;
            const auto r = cmd_interp(ip);
            if (!interp_out.empty()) {
                write_json_file(interp_out, r);
            }
        } else if (inspect->parsed()) {
            in.log = log;
            cmd_inspect(in);
        }
    } catch (const BitstreamError& e) {
        return report(("bitstream/" + to_string(e.kind())).c_str(), e.what(), exit_bitstream);
    } catch (const ConfigError& e) {
        return report("config", e.what(), exit_config);
    } catch (const TrainingError& e) {
        return report("training", e.what(), exit_training);
    } catch (const ImageError& e) {
        return report("io", e.what(), exit_io);
    } catch (const std::filesystem::filesystem_error& e) {
        return report("io", e.what(), exit_io);
    } catch (const std::invalid_argument& e) {
        return report("argument", e.what(), exit_argument);
    } catch (const std::out_of_range& e) {
        return report("argument", e.what(), exit_argument);
    } catch (const std::exception& e) {
        return report("internal", e.what(), exit_internal);
    }
    return exit_ok;
}
