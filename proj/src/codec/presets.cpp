#include "ffnerv/presets.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace ffnerv {

namespace {

struct Level {
    std::int64_t c1;
    std::int64_t c2;
    std::int64_t s;
};

// (C1, C2, S) rows for 600- and 300-frame videos.
constexpr std::array<Level, 6> kLevels600{{{24, 192, 16}, {48, 392, 24}, {64, 512, 32},
                                           {80, 640, 48}, {96, 768, 48}, {112, 896, 54}}};
constexpr std::array<Level, 6> kLevels300{{{16, 128, 16}, {32, 256, 24}, {48, 384, 32},
                                           {56, 448, 48}, {64, 512, 48}, {80, 640, 54}}};

const std::set<std::string>& known_keys()
{
    static const std::set<std::string> keys = [] {
        std::set<std::string> k;
        const auto model = FFNeRVConfig{}.to_key_values();
        const auto train = TrainConfig{}.to_key_values();
        for (const auto& [key, value] : model.entries()) k.insert(key);
        for (const auto& [key, value] : train.entries()) k.insert(key);
        k.insert({"prune_ratio", "preset", "level"});
        return k;
    }();
    return keys;
}

void set_train(KeyValues& kv, std::int64_t epochs, double lr)
{
    TrainConfig t;
    t.epochs = epochs;
    t.lr = lr;
    const auto train = t.to_key_values();
    for (const auto& [k, v] : train.entries()) {
        kv.set(k, v);
    }
}

KeyValues tiny()
{
    FFNeRVConfig c;
    c.frames = 8;
    c.height = 32;
    c.width = 32;
    c.upscale = {2, 2, 2};
    c.grid_resolutions = {4, 8};
    c.latent_channels = 32;
    c.block_channels = {24, 24, 16};
    c.compact_blocks = true;
    c.groups = 8;
    c.flow_stage = 0;
    auto kv = c.to_key_values();
    set_train(kv, 250, 5e-3);
    kv.set("prune_ratio", "0");
    return kv;
}

KeyValues paper_720p()
{
    FFNeRVConfig c;
    c.frames = 600;
    c.height = 1280;
    c.width = 720;
    c.upscale = {5, 2, 2, 2, 2};
    c.grid_resolutions = {64, 128, 256, 512};
    c.latent_channels = 156;
    c.block_channels = {156, 96, 96, 96, 96};
    c.compact_blocks = false;
    c.flow_stage = 2;
    auto kv = c.to_key_values();
    set_train(kv, 300, 5e-4);
    kv.set("prune_ratio", "0");
    return kv;
}

KeyValues paper_1080p(int level, std::int64_t frames)
{
    if (level < 1 || level > 6) {
        throw ConfigError("paper-1080p level must be in 1..6, got " + std::to_string(level));
    }
    const bool short_video = frames <= 300;
    const auto& row = (short_video ? kLevels300 : kLevels600)[static_cast<std::size_t>(level - 1)];
    FFNeRVConfig c;
    c.frames = frames;
    c.height = 1920;
    c.width = 1080;
    c.upscale = {5, 3, 2, 2, 2};
    c.grid_resolutions = short_video ? std::vector<std::int64_t>{150, 300}
                                     : std::vector<std::int64_t>{300, 600};
    c.latent_channels = row.c1;
    c.block_channels = {row.c2};
    for (std::int64_t d : {2, 4, 8, 16}) {
        c.block_channels.push_back(std::max(row.c2 / d, row.s));
    }
    c.compact_blocks = true;
    c.flow_stage = 2;
    auto kv = c.to_key_values();
    set_train(kv, 600, 5e-4);
    kv.set("prune_ratio", "0.2");
    return kv;
}

}  // namespace

KeyValues CodecConfig::to_key_values() const
{
    auto kv = model.to_key_values();
    const auto train_kv = train.to_key_values();
    for (const auto& [k, v] : train_kv.entries()) {
        kv.set(k, v);
    }
    kv.set("prune_ratio", format_double(prune_ratio));
    return kv;
}

void CodecConfig::validate() const
{
    model.validate();
    train.validate();
    if (!(prune_ratio >= 0.0 && prune_ratio < 1.0)) {
        throw ConfigError("invalid config: prune_ratio must be in [0, 1)");
    }
}

std::vector<std::string> preset_names()
{
    return {"tiny", "paper-720p", "paper-1080p"};
}

KeyValues preset_key_values(const std::string& name, int level)
{
    if (name == "tiny") return tiny();
    if (name == "paper-720p") return paper_720p();
    if (name == "paper-1080p") return paper_1080p(level, 600);
    throw ConfigError("unknown preset '" + name + "' (expected tiny, paper-720p or paper-1080p)");
}

CodecConfig load_config(const KeyValues& kv)
{
    for (const auto& [k, v] : kv.entries()) {
        if (!known_keys().count(k)) {
            throw ConfigError("unknown config key '" + k + "'");
        }
    }
    KeyValues merged;
    if (kv.has("preset")) {
        const auto level = kv.has("level") ? static_cast<int>(kv.get_int("level")) : 3;
        const auto& name = kv.get("preset");
        merged = name == "paper-1080p" && kv.has("frames")
                     ? paper_1080p(level, kv.get_int("frames"))
                     : preset_key_values(name, level);
    } else {
        merged = tiny();
    }
    for (const auto& [k, v] : kv.entries()) {
        if (k != "preset" && k != "level") {
            merged.set(k, v);
        }
    }
    CodecConfig c;
    c.model = FFNeRVConfig::from_key_values(merged);
    c.train = TrainConfig::from_key_values(merged);
    c.prune_ratio = merged.get_double("prune_ratio");
    return c;
}

CodecConfig load_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file '" + path + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return load_config(KeyValues::parse(text.str()));
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

CodecConfig load_config_spec(const std::string& spec)
{
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), spec) != names.end() &&
        !std::filesystem::exists(spec)) {
        KeyValues kv;
        kv.set("preset", spec);
        return load_config(kv);
    }
    return load_config_file(spec);
}

}  // namespace ffnerv
