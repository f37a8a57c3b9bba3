#pragma once

#include "ffnerv/metrics.hpp"
#include "ffnerv/tensor.hpp"

namespace ffnerv {

struct LossWeights {
    double alpha = 0.7;
    double lambda1 = 0.1;  // aggregated frame term
    double lambda2 = 0.1;  // independent frame term
};

// alpha * L1(pred, target) + (1 - alpha) * (1 - SSIM(pred, target))
template <typename T>
BasicTensor<T> frame_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, double alpha);

/// lambda1 * l(aggregated, F) + lambda2 * l(independent, F) + l(final, F)
template <typename T>
BasicTensor<T> composite_loss(const BasicTensor<T>& final_frame, const BasicTensor<T>& aggregated,
                              const BasicTensor<T>& independent, const BasicTensor<T>& target,
                              const LossWeights& w);

}  // namespace ffnerv
