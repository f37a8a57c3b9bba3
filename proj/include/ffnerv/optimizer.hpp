#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffnerv/tensor.hpp"

namespace ffnerv {

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(std::vector<Tensor> params, AdamOptions opts = {});

    void zero_grad();
    // One update with learning rate `lr`; parameters without gradients are skipped.
    void step(double lr);
    std::int64_t steps() const { return steps_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    AdamOptions opts_;
    std::int64_t steps_ = 0;
};

enum class ScheduleKind { cosine, constant };

ScheduleKind parse_schedule(const std::string& text);
std::string to_string(ScheduleKind kind);

/// Linear warmup over the first `warmup_fraction` of steps, then cosine
/// annealing to zero (or a constant rate).
struct LrSchedule {
    double base_lr = 5e-4;
    std::int64_t total_steps = 1;
    double warmup_fraction = 0.1;
    ScheduleKind kind = ScheduleKind::cosine;

    double at(std::int64_t step) const;
};

}  // namespace ffnerv
