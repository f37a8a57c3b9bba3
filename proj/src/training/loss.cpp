#include "ffnerv/loss.hpp"

#include "ffnerv/ops.hpp"

namespace ffnerv {

template <typename T>
BasicTensor<T> frame_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, double alpha)
{
    const T a = static_cast<T>(alpha);
    auto l1 = l1_mean(pred, target);
    auto structural = add_scalar(scale(ssim(pred, target), T(-1)), T(1));
    return add(scale(l1, a), scale(structural, T(1) - a));
}

template <typename T>
BasicTensor<T> composite_loss(const BasicTensor<T>& final_frame, const BasicTensor<T>& aggregated,
                              const BasicTensor<T>& independent, const BasicTensor<T>& target,
                              const LossWeights& w)
{
    auto total = frame_loss(final_frame, target, w.alpha);
    total = add(total, scale(frame_loss(aggregated, target, w.alpha), static_cast<T>(w.lambda1)));
    total = add(total, scale(frame_loss(independent, target, w.alpha), static_cast<T>(w.lambda2)));
    return total;
}

template BasicTensor<float> frame_loss(const BasicTensor<float>&, const BasicTensor<float>&, double);
template BasicTensor<double> frame_loss(const BasicTensor<double>&, const BasicTensor<double>&, double);
template BasicTensor<float> composite_loss(const BasicTensor<float>&, const BasicTensor<float>&,
                                           const BasicTensor<float>&, const BasicTensor<float>&,
                                           const LossWeights&);
template BasicTensor<double> composite_loss(const BasicTensor<double>&, const BasicTensor<double>&,
                                            const BasicTensor<double>&, const BasicTensor<double>&,
                                            const LossWeights&);

}  // namespace ffnerv
