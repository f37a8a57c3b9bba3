#include "ffnerv/quantize.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ffnerv/ops.hpp"

namespace ffnerv {

std::int32_t qat_levels(int bits)
{
    if (bits < 2 || bits > 16) {
        throw std::invalid_argument("quantization bit width must be in [2, 16], got " +
                                    std::to_string(bits));
    }
    return (std::int32_t{1} << (bits - 1)) - 1;
}

std::int32_t qat_symbol(double w, int bits)
{
    const auto n = qat_levels(bits);
    const double mag = std::floor(static_cast<double>(n) * std::tanh(std::abs(w)));
    const auto q = static_cast<std::int32_t>(mag);
    return w < 0.0 ? -q : q;
}

float qat_dequantize(std::int32_t symbol, int bits)
{
    return static_cast<float>(symbol) / static_cast<float>(qat_levels(bits));
}

template <typename T>
BasicTensor<T> qat_quantize(const BasicTensor<T>& w, int bits)
{
    const auto n = static_cast<T>(qat_levels(bits));
    auto src = w.data();
    std::vector<T> values(src.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<T>(qat_symbol(static_cast<double>(src[i]), bits)) / n;
    }
    return straight_through(w, std::move(values));
}

template BasicTensor<float> qat_quantize(const BasicTensor<float>&, int);
template BasicTensor<double> qat_quantize(const BasicTensor<double>&, int);

}  // namespace ffnerv
