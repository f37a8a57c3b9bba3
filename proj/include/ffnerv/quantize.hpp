#pragma once

#include <cstdint>

#include "ffnerv/tensor.hpp"

namespace ffnerv {

// N = 2^(bits-1) - 1, the largest symbol magnitude.
std::int32_t qat_levels(int bits);

/// Symbol of the tanh quantizer: sign(w) * floor(N * tanh|w|). The interval
/// |w| < atanh(1/N) maps to 0, twice the width of the other bins.
std::int32_t qat_symbol(double w, int bits);

// symbol / N, the weight value the forward pass actually uses.
float qat_dequantize(std::int32_t symbol, int bits);

/// Straight-through quantizer: forward sign(w)*floor(N*tanh|w|)/N,
/// backward passes dL/dw' to w unchanged.
template <typename T>
BasicTensor<T> qat_quantize(const BasicTensor<T>& w, int bits);

}  // namespace ffnerv
