#include <algorithm>
#include <cmath>

#include "ffnerv/compression.hpp"
#include "ffnerv/quantize.hpp"

namespace ffnerv {

namespace {

const char* class_name(ParamKind kind)
{
    return kind == ParamKind::grid ? "grid" : "conv";
}

}  // namespace

std::string to_string(QuantMode mode)
{
    return mode == QuantMode::qat ? "qat" : "minmax";
}

QuantMode parse_quant_mode(const std::string& text)
{
    if (text == "qat") return QuantMode::qat;
    if (text == "minmax") return QuantMode::minmax;
    throw std::invalid_argument("unknown quantization mode '" + text + "' (expected qat or minmax)");
}

float minmax_step(float lo, float hi, int bits)
{
    const double levels = std::ldexp(1.0, bits) - 1.0;
    return static_cast<float>((static_cast<double>(hi) - static_cast<double>(lo)) / levels);
}

std::int32_t minmax_zero_point(float lo, float hi, int bits)
{
    const double step = minmax_step(lo, hi, bits);
    if (step <= 0.0) {
        return 0;
    }
    const auto top = static_cast<double>((std::int32_t{1} << bits) - 1);
    return static_cast<std::int32_t>(std::clamp(std::round(-static_cast<double>(lo) / step), 0.0, top));
}

std::int32_t minmax_symbol(float w, float lo, float hi, int bits)
{
    const double step = minmax_step(lo, hi, bits);
    if (step <= 0.0) {
        return 0;
    }
    const auto top = static_cast<double>((std::int32_t{1} << bits) - 1);
    const double q = std::round(static_cast<double>(w) / step) + minmax_zero_point(lo, hi, bits);
    return static_cast<std::int32_t>(std::clamp(q, 0.0, top));
}

float minmax_dequantize(std::int32_t symbol, float lo, float hi, int bits)
{
    const double step = minmax_step(lo, hi, bits);
    if (step <= 0.0) {
        return lo;
    }
    return static_cast<float>(static_cast<double>(symbol - minmax_zero_point(lo, hi, bits)) * step);
}

QuantizedModel quantize_model(const FFNeRVModel& model, QuantMode mode, int bits)
{
    qat_levels(bits);  // validates the width
    QuantizedModel qm;
    qm.config = model.config();
    qm.mode = mode;
    qm.bits = bits;
    qm.classes = {SymbolClass{"grid", {}, 0.0F, 0.0F}, SymbolClass{"conv", {}, 0.0F, 0.0F}};
    const auto params = model.parameters();

    if (mode == QuantMode::minmax) {
        for (auto& cls : qm.classes) {
            bool any = false;
            for (const auto& p : params) {
                if (p.kind == ParamKind::bias || cls.name != class_name(p.kind)) continue;
                for (float w : p.tensor.data()) {
                    cls.lo = any ? std::min(cls.lo, w) : w;
                    cls.hi = any ? std::max(cls.hi, w) : w;
                    any = true;
                }
            }
        }
    }
    for (const auto& p : params) {
        if (p.kind == ParamKind::bias) {
            auto d = p.tensor.data();
            qm.biases.insert(qm.biases.end(), d.begin(), d.end());
            continue;
        }
        auto& cls = p.kind == ParamKind::grid ? qm.classes[0] : qm.classes[1];
        for (float w : p.tensor.data()) {
            cls.symbols.push_back(mode == QuantMode::qat
                                      ? qat_symbol(static_cast<double>(w), bits)
                                      : minmax_symbol(w, cls.lo, cls.hi, bits));
        }
    }
    return qm;
}

FFNeRVModel dequantize_model(const QuantizedModel& qm)
{
    qat_levels(qm.bits);
    const auto skeleton = FFNeRVModel::create(qm.config, 0);
    const auto params = skeleton.parameters();
    std::vector<std::size_t> cursor(qm.classes.size(), 0);
    std::size_t bias_cursor = 0;
    std::vector<Tensor> values;
    for (const auto& p : params) {
        const auto n = static_cast<std::size_t>(p.tensor.numel());
        std::vector<float> v(n);
        if (p.kind == ParamKind::bias) {
            if (bias_cursor + n > qm.biases.size()) {
                throw BitstreamError(BitstreamError::Kind::malformed, "too few bias values for the configuration");
            }
            std::copy_n(qm.biases.begin() + static_cast<std::ptrdiff_t>(bias_cursor), n, v.begin());
            bias_cursor += n;
        } else {
            const std::string name = class_name(p.kind);
            auto it = std::find_if(qm.classes.begin(), qm.classes.end(),
                                   [&](const SymbolClass& c) { return c.name == name; });
            if (it == qm.classes.end()) {
                throw BitstreamError(BitstreamError::Kind::malformed, "missing symbol class '" + name + "'");
            }
            auto& pos = cursor[static_cast<std::size_t>(it - qm.classes.begin())];
            if (pos + n > it->symbols.size()) {
                throw BitstreamError(BitstreamError::Kind::malformed, "too few symbols in class '" + name + "'");
            }
            for (std::size_t i = 0; i < n; ++i) {
                const auto s = it->symbols[pos + i];
                v[i] = qm.mode == QuantMode::qat ? qat_dequantize(s, qm.bits)
                                                 : minmax_dequantize(s, it->lo, it->hi, qm.bits);
            }
            pos += n;
        }
        values.emplace_back(p.tensor.shape(), std::move(v));
    }
    if (bias_cursor != qm.biases.size()) {
        throw BitstreamError(BitstreamError::Kind::malformed, "extra bias values for the configuration");
    }
    for (std::size_t c = 0; c < qm.classes.size(); ++c) {
        if (cursor[c] != qm.classes[c].symbols.size()) {
            throw BitstreamError(BitstreamError::Kind::malformed,
                                 "extra symbols in class '" + qm.classes[c].name + "'");
        }
    }
    return skeleton.with_parameters(values);
}

}  // namespace ffnerv
