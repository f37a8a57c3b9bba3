#include "ffnerv/trainer.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ffnerv/metrics.hpp"
#include "ffnerv/ops.hpp"
#include "ffnerv/quantize.hpp"
#include "ffnerv/random.hpp"

namespace ffnerv {

void TrainConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ConfigError("invalid training config: " + msg); };
    if (epochs < 1) fail("epochs must be >= 1");
    if (batch < 1) fail("batch must be >= 1");
    if (!(lr >= 0.0)) fail("learning rate must be >= 0");
    if (!(warmup >= 0.0 && warmup < 1.0)) fail("warmup fraction must be in [0, 1)");
    if (qat_bits < 2 || qat_bits > 16) fail("qat_bits must be in [2, 16]");
    if (!(loss.alpha >= 0.0 && loss.alpha <= 1.0)) fail("alpha must be in [0, 1]");
    if (!(loss.lambda1 >= 0.0) || !(loss.lambda2 >= 0.0)) fail("lambda weights must be >= 0");
}

KeyValues TrainConfig::to_key_values() const
{
    KeyValues kv;
    kv.set("epochs", std::to_string(epochs));
    kv.set("batch", std::to_string(batch));
    kv.set("lr", format_double(lr));
    kv.set("warmup", format_double(warmup));
    kv.set("schedule", to_string(schedule));
    kv.set("qat", qat ? "true" : "false");
    kv.set("qat_bits", std::to_string(qat_bits));
    kv.set("seed", std::to_string(seed));
    kv.set("alpha", format_double(loss.alpha));
    kv.set("lambda1", format_double(loss.lambda1));
    kv.set("lambda2", format_double(loss.lambda2));
    return kv;
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv, TrainConfig c)
{
    if (kv.has("epochs")) c.epochs = kv.get_int("epochs");
    if (kv.has("batch")) c.batch = kv.get_int("batch");
    if (kv.has("lr")) c.lr = kv.get_double("lr");
    if (kv.has("warmup")) c.warmup = kv.get_double("warmup");
    if (kv.has("schedule")) c.schedule = parse_schedule(kv.get("schedule"));
    if (kv.has("qat")) c.qat = kv.get_bool("qat");
    if (kv.has("qat_bits")) c.qat_bits = static_cast<int>(kv.get_int("qat_bits"));
    if (kv.has("seed")) c.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
    if (kv.has("alpha")) c.loss.alpha = kv.get_double("alpha");
    if (kv.has("lambda1")) c.loss.lambda1 = kv.get_double("lambda1");
    if (kv.has("lambda2")) c.loss.lambda2 = kv.get_double("lambda2");
    return c;
}

std::string to_log_line(const EpochMetrics& m)
{
    nlohmann::json j;
    j["epoch"] = m.epoch;
    j["lr"] = m.lr;
    j["loss"] = m.loss;
    j["psnr"] = std::isfinite(m.psnr) ? nlohmann::json(m.psnr) : nlohmann::json("inf");
    j["ssim"] = m.ssim;
    return j.dump();
}

std::vector<Tensor> forward_parameters(const FFNeRVModel& model, int qat_bits)
{
    std::vector<Tensor> out;
    for (const auto& p : model.parameters()) {
        if (qat_bits > 0 && p.kind != ParamKind::bias) {
            out.push_back(qat_quantize(p.tensor, qat_bits));
        } else {
            out.push_back(p.tensor);
        }
    }
    return out;
}

FFNeRVModel quantized_copy(const FFNeRVModel& model, int qat_bits)
{
    NoGradGuard no_grad;
    auto values = forward_parameters(model, qat_bits);
    for (auto& v : values) {
        v = v.detach();
    }
    return model.with_parameters(values);
}

std::vector<EpochMetrics> train(FFNeRVModel& model, const std::vector<Tensor>& frames,
                                const TrainConfig& cfg, const TrainOptions& opts)
{
    cfg.validate();
    const auto& mc = model.config();
    if (static_cast<std::int64_t>(frames.size()) != mc.frames) {
        throw std::invalid_argument("train: model expects " + std::to_string(mc.frames) +
                                    " frames, got " + std::to_string(frames.size()));
    }
    const Shape frame_shape{3, mc.height, mc.width};
    for (const auto& f : frames) {
        if (f.shape() != frame_shape) {
            throw ShapeError("train: frame shape " + shape_string(f.shape()) + ", expected " +
                             shape_string(frame_shape));
        }
    }
    std::vector<std::int64_t> indices = opts.indices;
    if (indices.empty()) {
        for (std::int64_t t = 0; t < mc.frames; ++t) {
            indices.push_back(t);
        }
    }
    for (auto t : indices) {
        if (t < 0 || t >= mc.frames) {
            throw std::invalid_argument("train: frame index " + std::to_string(t) + " outside [0, " +
                                        std::to_string(mc.frames) + ")");
        }
    }
    const std::int64_t limit = *std::max_element(indices.begin(), indices.end());
    if (mc.flow_enabled) {
        // Neighbors are read from the buffer, which only holds training frames.
        const std::set<std::int64_t> listed(indices.begin(), indices.end());
        for (auto t : indices) {
            for (auto j : model.neighbor_indices(t, limit)) {
                if (!listed.count(j)) {
                    throw std::invalid_argument("train: frame " + std::to_string(t) + " has neighbor " +
                                                std::to_string(j) + ", which is not a training frame");
                }
            }
        }
    }
    const int bits = cfg.qat ? cfg.qat_bits : 0;

    std::vector<Tensor> params;
    for (const auto& p : model.parameters()) {
        params.push_back(p.tensor);
    }
    Adam adam(params);
    const auto steps_per_epoch =
        (static_cast<std::int64_t>(indices.size()) + cfg.batch - 1) / cfg.batch;
    LrSchedule schedule{cfg.lr, steps_per_epoch * cfg.epochs, cfg.warmup, cfg.schedule};

    FrameBuffer buffer(mc.frames, mc.height, mc.width);
    if (mc.flow_enabled) {
        NoGradGuard no_grad;
        const auto view = model.with_parameters(forward_parameters(model, bits));
        std::vector<Tensor> initial;
        for (auto t : indices) {
            initial.push_back(view.forward_independent(t));
        }
        buffer.update(indices, initial);
    }

    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<EpochMetrics> log;
    std::int64_t step = 0;
    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = indices;
        rng.shuffle(order);
        double loss_sum = 0.0, psnr_sum = 0.0, ssim_sum = 0.0;
        std::int64_t seen = 0;
        double lr = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch)) {
            const auto end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch));
            const std::vector<std::int64_t> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                                  order.begin() + static_cast<std::ptrdiff_t>(end));
            adam.zero_grad();
            const auto view = model.with_parameters(forward_parameters(model, bits));
            std::vector<FrameComponents> comps;
            std::vector<Tensor> independents;
            for (auto t : batch) {
                comps.push_back(view.forward_components(t));
                independents.push_back(comps.back().independent);
            }
            if (mc.flow_enabled) {
                buffer.update(batch, independents);
            }
            Tensor total;
            for (std::size_t b = 0; b < batch.size(); ++b) {
                const auto t = batch[b];
                const auto& target = frames[static_cast<std::size_t>(t)];
                Tensor prediction;
                Tensor loss;
                if (mc.flow_enabled) {
                    const auto nbr = model.neighbor_indices(t, limit);
                    auto agg = aggregate(comps[b], buffer, nbr);
                    prediction = final_frame(comps[b], agg);
                    loss = composite_loss(prediction, agg, comps[b].independent, target, cfg.loss);
                } else {
                    prediction = comps[b].independent;
                    loss = frame_loss(prediction, target, cfg.loss.alpha);
                }
                total = b == 0 ? loss : add(total, loss);
                psnr_sum += psnr(prediction, target);
                {
                    NoGradGuard no_grad;
                    ssim_sum += ssim(prediction, target).item();
                }
                ++seen;
            }
            total = scale(total, 1.0f / static_cast<float>(batch.size()));
            const double loss_value = total.item();
            if (!std::isfinite(loss_value)) {
                std::ostringstream os;
                os << "non-finite loss " << loss_value << " at epoch " << epoch << ", step " << step
                   << ", frames";
                for (auto t : batch) os << ' ' << t;
                throw TrainingError(os.str());
            }
            loss_sum += loss_value * static_cast<double>(batch.size());
            total.backward();
            lr = schedule.at(step);
            adam.step(lr);
            ++step;
        }
        EpochMetrics m{epoch, lr, loss_sum / static_cast<double>(seen),
                       psnr_sum / static_cast<double>(seen), ssim_sum / static_cast<double>(seen)};
        log.push_back(m);
        if (opts.on_epoch) {
            opts.on_epoch(m);
        }
    }
    if (opts.final_buffer) {
        *opts.final_buffer = buffer;
    }
    return log;
}

}  // namespace ffnerv
