#pragma once

#include <vector>

#include "ffnerv/tensor.hpp"

namespace ffnerv {

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> gaussian_window(int size, double sigma);

/// Mean SSIM over channels and all valid (fully inside) window positions.
/// Differentiable w.r.t. both inputs. Images smaller than the window shrink
/// the window to the smaller image side.
template <typename T>
BasicTensor<T> ssim(const BasicTensor<T>& x, const BasicTensor<T>& y, const SsimParams& p = {});

// Mean squared error in double precision.
double mse(const Tensor& x, const Tensor& y);

/// 10*log10(1/MSE) for signals in [0, 1]; +infinity when MSE == 0.
double psnr(const Tensor& x, const Tensor& y);
double psnr_from_mse(double mse_value);

// Mean of per-frame values (per-video average). Infinite entries propagate.
double average(const std::vector<double>& values);

}  // namespace ffnerv
