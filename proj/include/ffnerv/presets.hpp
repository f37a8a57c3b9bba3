#pragma once

#include <string>
#include <vector>

#include "ffnerv/key_value.hpp"
#include "ffnerv/model.hpp"
#include "ffnerv/trainer.hpp"

namespace ffnerv {

/// Everything an encode run needs besides the frames.
struct CodecConfig {
    FFNeRVConfig model;
    TrainConfig train;
    double prune_ratio = 0.0;

    // Model and training keys merged into one flat table.
    KeyValues to_key_values() const;
    void validate() const;
};

std::vector<std::string> preset_names();

/// Key-value table of a named preset. `level` selects the (C1, C2, S)
/// row of paper-1080p (1-6, for the preset's frame count) and is ignored
/// by the other presets.
KeyValues preset_key_values(const std::string& name, int level = 3);

/// Builds a configuration from a table. A `preset` key (with optional
/// `level`) supplies the base values; every other key overrides it.
/// frames, height and width may be left for the caller to fill in.
CodecConfig load_config(const KeyValues& kv);
CodecConfig load_config_file(const std::string& path);
// A path to a config file, or a bare preset name.
CodecConfig load_config_spec(const std::string& spec);

}  // namespace ffnerv
