#include "ffnerv/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ffnerv {

Adam::Adam(std::vector<Tensor> params, AdamOptions opts) : params_(std::move(params)), opts_(opts)
{
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0f);
        v_.emplace_back(p.numel(), 0.0f);
    }
}

void Adam::zero_grad()
{
    for (auto& p : params_) {
        p.zero_grad();
    }
}

void Adam::step(double lr)
{
    ++steps_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(steps_));
    const auto b1 = static_cast<float>(opts_.beta1);
    const auto b2 = static_cast<float>(opts_.beta2);
    const auto step_size = static_cast<float>(lr / bc1);
    const auto inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
    const auto eps = static_cast<float>(opts_.eps);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k];
        if (!p.has_grad()) {
            continue;
        }
        auto g = p.grad();
        auto w = p.mutable_data();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            w[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
        }
    }
}

ScheduleKind parse_schedule(const std::string& text)
{
    if (text == "cosine") {
        return ScheduleKind::cosine;
    }
    if (text == "constant") {
        return ScheduleKind::constant;
    }
    throw std::invalid_argument("unknown schedule '" + text + "' (expected cosine or constant)");
}

std::string to_string(ScheduleKind kind)
{
    return kind == ScheduleKind::cosine ? "cosine" : "constant";
}

double LrSchedule::at(std::int64_t step) const
{
    if (kind == ScheduleKind::constant) {
        return base_lr;
    }
    const auto warmup = static_cast<std::int64_t>(std::floor(warmup_fraction * static_cast<double>(total_steps)));
    if (step < warmup) {
        return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    const auto span = std::max<std::int64_t>(total_steps - warmup, 1);
    const double progress = std::clamp(static_cast<double>(step - warmup) / static_cast<double>(span), 0.0, 1.0);
    return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace ffnerv
