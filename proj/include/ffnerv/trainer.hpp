#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ffnerv/key_value.hpp"
#include "ffnerv/loss.hpp"
#include "ffnerv/model.hpp"
#include "ffnerv/optimizer.hpp"

namespace ffnerv {

struct TrainConfig {
    std::int64_t epochs = 300;
    std::int64_t batch = 1;
    double lr = 5e-4;
    double warmup = 0.1;
    ScheduleKind schedule = ScheduleKind::cosine;
    bool qat = true;
    int qat_bits = 8;
    std::uint64_t seed = 1;
    LossWeights loss;

    void validate() const;
    KeyValues to_key_values() const;
    // Reads the keys present in kv, keeping `defaults` for the rest.
    static TrainConfig from_key_values(const KeyValues& kv, TrainConfig defaults);
    static TrainConfig from_key_values(const KeyValues& kv) { return from_key_values(kv, TrainConfig{}); }
};

struct EpochMetrics {
    std::int64_t epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

// One line-delimited JSON record.
std::string to_log_line(const EpochMetrics& m);

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensors substituted for the model parameters during a forward pass:
/// quantized stand-ins for grids and conv weights when `qat_bits` > 0,
/// the parameters themselves otherwise. Biases are never quantized.
std::vector<Tensor> forward_parameters(const FFNeRVModel& model, int qat_bits);

// Model whose parameters are the quantized values (no graph, no latent copy).
FFNeRVModel quantized_copy(const FFNeRVModel& model, int qat_bits);

struct TrainOptions {
    // Frame indices used for training; empty means all frames.
    std::vector<std::int64_t> indices;
    std::function<void(const EpochMetrics&)> on_epoch;
    // Receives the frame buffer as it stands after the last step.
    FrameBuffer* final_buffer = nullptr;
};

/// Fits `model` in place to `frames` (one 3xHxW tensor per frame index, in
/// [0, 1]). Each step: forward with quantized weights, refresh the frame
/// buffer for the batch, aggregate neighbors from the buffer, take the
/// composite loss, back-propagate and apply Adam.
std::vector<EpochMetrics> train(FFNeRVModel& model, const std::vector<Tensor>& frames,
                                const TrainConfig& cfg, const TrainOptions& opts = {});

}  // namespace ffnerv
