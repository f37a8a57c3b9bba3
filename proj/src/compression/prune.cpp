#include <algorithm>
#include <cmath>
#include <numeric>

#include "ffnerv/compression.hpp"

namespace ffnerv {

std::int64_t prune(FFNeRVModel& model, double ratio)
{
    if (!(ratio >= 0.0 && ratio < 1.0)) {
        throw std::invalid_argument("prune ratio must be in [0, 1)");
    }
    std::vector<std::span<float>> tensors;
    for (auto& p : model.parameters()) {
        if (p.kind == ParamKind::conv_weight) {
            tensors.push_back(p.tensor.mutable_data());
        }
    }
    std::vector<float*> weights;
    for (auto& t : tensors) {
        for (auto& w : t) {
            weights.push_back(&w);
        }
    }
    const auto n = static_cast<std::int64_t>(weights.size());
    // the epsilon keeps 0.2 * 100 from landing on 19
    const auto count = std::min<std::int64_t>(
        n, static_cast<std::int64_t>(std::floor(ratio * static_cast<double>(n) + 1e-9)));
    if (count == 0) {
        return 0;
    }
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::int64_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        return std::abs(*weights[static_cast<std::size_t>(a)]) <
               std::abs(*weights[static_cast<std::size_t>(b)]);
    });
    for (std::int64_t i = 0; i < count; ++i) {
        *weights[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 0.0F;
    }
    return count;
}

}  // namespace ffnerv
