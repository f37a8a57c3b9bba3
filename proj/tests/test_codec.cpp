#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "clips.hpp"
#include "ffnerv/commands.hpp"
#include "ffnerv/image_io.hpp"
#include "ffnerv/metrics.hpp"

using namespace ffnerv;
namespace fs = std::filesystem;

namespace {

std::string work_dir(const std::string& name)
{
    const auto dir = fs::path(testing::TempDir()) / ("ffnerv_codec_" + name);
    fs::create_directories(dir);
    return dir.string();
}

class Codec : public testing::Test {
protected:
    static void SetUpTestSuite()
    {
        root_ = work_dir("suite_" + std::to_string(::getpid()));
        frames_dir_ = root_ + "/frames";
        reference_ = clips::write_dir(frames_dir_, clips::translating());
        stream_ = root_ + "/clip.ffnv";
        EncodeOptions o;
        o.frames_dir = frames_dir_;
        o.out = stream_;
        o.overrides.epochs = 20;
        o.overrides.seed = 3;
        manifest_ = cmd_encode(o);
    }

    static std::string root_;
    static std::string frames_dir_;
    static std::string stream_;
    static std::vector<Tensor> reference_;
    static Json manifest_;
};

std::string Codec::root_;
std::string Codec::frames_dir_;
std::string Codec::stream_;
std::vector<Tensor> Codec::reference_;
Json Codec::manifest_;

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(FFNERV_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Presets, NamesAndUnknownKeys)
{
    EXPECT_EQ(preset_names(), (std::vector<std::string>{"tiny", "paper-720p", "paper-1080p"}));
    EXPECT_THROW(load_config_spec("huge"), ConfigError);
    EXPECT_THROW(load_config(KeyValues::parse("preset = tiny\nlearning_rte = 1")), ConfigError);
    const auto c = load_config(KeyValues::parse("preset = tiny\nepochs = 7"));
    EXPECT_EQ(c.train.epochs, 7);
    EXPECT_EQ(c.model.height, 32);
}

TEST(Presets, OverridesApply)
{
    auto c = load_config_spec("tiny");
    Overrides o;
    o.seed = 11;
    o.prune_ratio = 0.25;
    o.qat_bits = 6;
    o.no_flow = true;
    o.epochs = 3;
    apply_overrides(c, o);
    EXPECT_EQ(c.train.seed, 11U);
    EXPECT_DOUBLE_EQ(c.prune_ratio, 0.25);
    EXPECT_EQ(c.train.qat_bits, 6);
    EXPECT_FALSE(c.model.flow_enabled);
    EXPECT_EQ(c.train.epochs, 3);
}

TEST(ImageIo, PngRoundTripIsExactOnEightBitValues)
{
    const auto dir = work_dir("png");
    std::vector<float> v(3 * 5 * 7);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i % 256) / 255.0F;
    const Tensor img({3, 5, 7}, v);
    write_png(dir + "/a.png", img);
    const auto back = read_png(dir + "/a.png");
    ASSERT_EQ(back.shape(), img.shape());
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_FLOAT_EQ(back.data()[i], v[i]);
    EXPECT_EQ(frame_file_name(3), "frame_00003.png");
    EXPECT_THROW(read_png(dir + "/missing.png"), ImageError);
    fs::create_directories(dir + "/empty");
    EXPECT_THROW(read_frames(dir + "/empty"), ImageError);
}

TEST_F(Codec, ManifestAgreesWithEval)
{
    EXPECT_EQ(manifest_["command"], "encode");
    EXPECT_EQ(manifest_["bytes"].get<std::uint64_t>(), fs::file_size(stream_));
    EXPECT_TRUE(fs::exists(root_ + "/clip.manifest.json"));
    EXPECT_TRUE(fs::exists(root_ + "/clip.metrics.jsonl"));
    EvalOptions e;
    e.bitstream = stream_;
    e.frames_dir = frames_dir_;
    const auto report = cmd_eval(e);
    ASSERT_EQ(report.frames.size(), 8U);
    EXPECT_NEAR(report.average_psnr, number_from_json(manifest_["average_psnr"]), 1e-9);
    EXPECT_NEAR(report.bpp, bits_per_pixel(report.bytes, 8, 32, 32), 1e-15);
    EXPECT_DOUBLE_EQ(report.bpp, manifest_["bpp"].get<double>());
}

TEST_F(Codec, DecodeMatchesEvalAndJobCount)
{
    DecodeOptions d;
    d.bitstream = stream_;
    d.out_dir = root_ + "/decoded1";
    d.reference_dir = frames_dir_;
    const auto m1 = cmd_decode(d);
    d.out_dir = root_ + "/decoded4";
    d.jobs = 4;
    cmd_decode(d);
    EvalOptions e;
    e.bitstream = stream_;
    e.frames_dir = frames_dir_;
    EXPECT_NEAR(number_from_json(m1["average_psnr"]), cmd_eval(e).average_psnr, 1e-6);
    EXPECT_EQ(m1["frames_written"], 8);
    for (std::int64_t t = 0; t < 8; ++t) {
        const auto a = read_png(root_ + "/decoded1/" + frame_file_name(t));
        const auto b = read_png(root_ + "/decoded4/" + frame_file_name(t));
        EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin())) << t;
    }
}

TEST_F(Codec, DecodeRangeWritesOnlyThatRange)
{
    DecodeOptions d;
    d.bitstream = stream_;
    d.out_dir = root_ + "/range";
    d.begin = 2;
    d.end = 5;
    const auto m = cmd_decode(d);
    EXPECT_EQ(m["frames_written"], 3);
    EXPECT_TRUE(fs::exists(d.out_dir + "/" + frame_file_name(2)));
    EXPECT_FALSE(fs::exists(d.out_dir + "/" + frame_file_name(5)));
    d.end = 9;
    EXPECT_THROW(cmd_decode(d), std::out_of_range);
}

TEST_F(Codec, EncodeIsDeterministic)
{
    EncodeOptions o;
    o.frames_dir = frames_dir_;
    o.out = root_ + "/again.ffnv";
    o.overrides.epochs = 20;
    o.overrides.seed = 3;
    cmd_encode(o);
    EXPECT_EQ(read_file(o.out), read_file(stream_));
}

TEST_F(Codec, EvalRejectsFrameCountMismatch)
{
    const auto dir = root_ + "/short";
    clips::write_dir(dir, clips::translating(5));
    EvalOptions e;
    e.bitstream = stream_;
    e.frames_dir = dir;
    EXPECT_THROW(cmd_eval(e), std::invalid_argument);
}

TEST_F(Codec, EvalReportJsonRoundTrip)
{
    EvalOptions e;
    e.bitstream = stream_;
    e.frames_dir = frames_dir_;
    const auto r = cmd_eval(e);
    const auto j = r.to_json();
    const auto back = EvalReport::from_json(Json::parse(j.dump()));
    EXPECT_EQ(back.to_json(), j);
    auto broken = j;
    broken.erase("bytes");
    EXPECT_THROW(EvalReport::from_json(broken), std::invalid_argument);
    broken = j;
    broken["frames"] = "none";
    EXPECT_THROW(EvalReport::from_json(broken), std::invalid_argument);
    EXPECT_EQ(json_number(INFINITY), "inf");
    EXPECT_TRUE(std::isinf(number_from_json(Json("inf"))));
}

TEST_F(Codec, InspectComponentsMatchDecode)
{
    InspectOptions in;
    in.bitstream = stream_;
    in.t = 3;
    in.out_dir = root_ + "/inspect";
    const auto m = cmd_inspect(in);
    const auto& comps = m["components"];
    // I, one warped image per neighbor, two weight maps, aggregated and final.
    const auto config = deserialize(read_file(stream_)).config;
    EXPECT_EQ(comps.size(), config.neighbors.size() + 5);
    DecodeOptions d;
    d.bitstream = stream_;
    d.out_dir = root_ + "/inspect_decode";
    cmd_decode(d);
    const auto f = read_png(comps["final"].get<std::string>());
    const auto decoded = read_png(d.out_dir + "/" + frame_file_name(3));
    EXPECT_TRUE(std::equal(f.data().begin(), f.data().end(), decoded.data().begin()));
    in.t = 8;
    EXPECT_THROW(cmd_inspect(in), std::out_of_range);
}

TEST(Inspect, UniformWeightMapIsMidGray)
{
    const auto img = weight_map_image(Tensor::full({1, 3, 4}, 0.7F));
    EXPECT_EQ(img.shape(), (Shape{3, 3, 4}));
    for (float v : img.data()) EXPECT_FLOAT_EQ(v, 0.5F);
    const auto dir = work_dir("gray");
    write_png(dir + "/g.png", img);
    // 0.5 * 255 rounds to 128.
    const auto gray = read_png(dir + "/g.png");
    for (float v : gray.data()) EXPECT_FLOAT_EQ(v, 128.0F / 255.0F);
}

TEST(Interp, ReportsSeenAndUnseenFrames)
{
    const auto dir = work_dir("interp") + "/frames";
    clips::write_dir(dir, clips::translating());
    InterpOptions o;
    o.frames_dir = dir;
    o.overrides.epochs = 10;
    const auto m = cmd_interp(o);
    ASSERT_EQ(m["seen"].size(), 4U);
    ASSERT_EQ(m["unseen"].size(), 4U);
    for (const auto& f : m["unseen"]) {
        EXPECT_EQ(f["t"].get<int>() % 2, 1);
        EXPECT_TRUE(std::isfinite(number_from_json(f["psnr"])));
    }
    EXPECT_EQ(interp_grid_resolutions({4, 8, 16}, 4), (std::vector<std::int64_t>{4}));
    EXPECT_EQ(interp_grid_resolutions({2, 4, 8}, 5), (std::vector<std::int64_t>{2, 4, 5}));
}

TEST(Cli, ExitCodes)
{
    const auto dir = work_dir("cli");
    clips::write_dir(dir + "/frames", clips::translating(4, 16, 16));
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli(""), 2);
    EXPECT_EQ(run_cli("encode --frames " + dir + "/frames"), 2);
    EXPECT_EQ(run_cli("bogus"), 2);
    EXPECT_EQ(run_cli("encode --frames " + dir + "/frames --out " + dir + "/a.ffnv --config nope"), 3);
    EXPECT_EQ(run_cli("encode --frames " + dir + "/missing --out " + dir + "/a.ffnv"), 4);
    {
        std::ofstream junk(dir + "/junk.ffnv", std::ios::binary);
        junk << "not a stream";
    }
    EXPECT_EQ(run_cli("decode " + dir + "/junk.ffnv --out " + dir + "/dec"), 5);
    EXPECT_EQ(run_cli("encode --frames " + dir + "/frames --out " + dir + "/a.ffnv --epochs 2 --seed 1 --prune-ratio 0.2 --qat-bits 8 --no-flow"), 0);
    EXPECT_EQ(run_cli("inspect " + dir + "/a.ffnv -t 9 --out " + dir + "/ins"), 7);
    EXPECT_EQ(run_cli("eval " + dir + "/a.ffnv --frames " + dir + "/frames --out " + dir + "/report.json"), 0);
    const auto report = EvalReport::from_json(read_json_file(dir + "/report.json"));
    EXPECT_EQ(report.frames.size(), 4U);
}
