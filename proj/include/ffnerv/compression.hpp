#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ffnerv/model.hpp"

namespace ffnerv {

/// Global magnitude pruning over every conv weight (grids and biases are
/// exempt). Zeroes the floor(ratio * n) smallest |w|; ties go to the
/// earlier weight in parameter order. Returns the number of weights zeroed.
std::int64_t prune(FFNeRVModel& model, double ratio);

// ---------------------------------------------------------------- entropy coding

// Canonical prefix code, entries sorted by (length, symbol).
struct CodeTable {
    std::vector<std::int32_t> symbols;
    std::vector<std::uint8_t> lengths;
};

struct EncodedStream {
    std::uint64_t count = 0;  // number of symbols
    CodeTable table;          // one entry of length 0 for a single-symbol alphabet
    std::vector<std::uint8_t> payload;  // MSB-first bits, zero padded
};

inline constexpr int kMaxCodeLength = 24;

/// Huffman code lengths for `frequencies` (zero entries get length 0),
/// limited to `max_length` by halving counts and rebuilding.
std::vector<std::uint8_t> huffman_code_lengths(std::span<const std::uint64_t> frequencies,
                                               int max_length = kMaxCodeLength);

EncodedStream entropy_encode(std::span<const std::int32_t> symbols);
// Throws BitstreamError(malformed) on an invalid table or short payload.
std::vector<std::int32_t> entropy_decode(const EncodedStream& stream);

// Empirical Shannon entropy in bits per symbol.
double symbol_entropy(std::span<const std::int32_t> symbols);

// ---------------------------------------------------------------- quantized model

enum class QuantMode : std::uint8_t { qat = 0, minmax = 1 };

std::string to_string(QuantMode mode);
QuantMode parse_quant_mode(const std::string& text);

/// Symbols of one parameter class, concatenated in parameter order.
/// qat: symbols in [-N, N], value symbol / N.
/// minmax: symbols in [0, 2^bits - 1] on a uniform grid over [lo, hi]
/// shifted so that 0 is representable; value (symbol - zero_point) * step.
struct SymbolClass {
    std::string name;
    std::vector<std::int32_t> symbols;
    float lo = 0.0F;
    float hi = 0.0F;
};

struct QuantizedModel {
    FFNeRVConfig config;
    QuantMode mode = QuantMode::qat;
    int bits = 8;
    std::vector<SymbolClass> classes;  // "grid", then "conv"
    std::vector<float> biases;         // raw, in parameter order
};

QuantizedModel quantize_model(const FFNeRVModel& model, QuantMode mode, int bits);
// Rebuilds a model holding the dequantized values.
FFNeRVModel dequantize_model(const QuantizedModel& qm);

float minmax_step(float lo, float hi, int bits);
std::int32_t minmax_zero_point(float lo, float hi, int bits);
std::int32_t minmax_symbol(float w, float lo, float hi, int bits);
float minmax_dequantize(std::int32_t symbol, float lo, float hi, int bits);

// ---------------------------------------------------------------- bitstream

inline constexpr std::uint16_t kFormatVersion = 1;

class BitstreamError : public std::runtime_error {
public:
    enum class Kind { bad_magic, bad_version, truncated, bad_checksum, malformed };

    BitstreamError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

std::string to_string(BitstreamError::Kind kind);

std::vector<std::uint8_t> serialize(const QuantizedModel& qm);
QuantizedModel deserialize(std::span<const std::uint8_t> bytes);

struct ClassStats {
    std::string name;
    std::uint64_t symbols = 0;
    std::uint64_t table_bytes = 0;
    std::uint64_t payload_bytes = 0;
    double entropy_bits = 0.0;  // per symbol
};

std::vector<ClassStats> class_stats(const QuantizedModel& qm);

// Total bits over T * H * W.
double bits_per_pixel(std::uint64_t bytes, std::int64_t frames, std::int64_t height,
                      std::int64_t width);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace ffnerv
