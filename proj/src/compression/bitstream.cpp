#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "ffnerv/compression.hpp"

namespace ffnerv {

namespace {

using Kind = BitstreamError::Kind;

constexpr char kMagic[4] = {'F', 'F', 'N', 'V'};
constexpr std::size_t kHeaderSize = 4 + 2 + 8;  // magic, version, body length
constexpr std::size_t kCrcSize = 4;

class Writer {
public:
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void varint(std::uint64_t v)
    {
        while (v >= 0x80) {
            u8(static_cast<std::uint8_t>(v | 0x80));
            v >>= 7;
        }
        u8(static_cast<std::uint8_t>(v));
    }
    void zigzag(std::int32_t v)
    {
        const auto u = static_cast<std::uint32_t>(v);
        varint((u << 1) ^ (v < 0 ? 0xFFFFFFFFU : 0U));
    }
    void raw(std::span<const std::uint8_t> data) { bytes.insert(bytes.end(), data.begin(), data.end()); }

    std::vector<std::uint8_t> bytes;

private:
    void le(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i) {
            bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::uint64_t varint()
    {
        std::uint64_t v = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            const auto b = u8();
            v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
            if ((b & 0x80) == 0) {
                return v;
            }
        }
        throw BitstreamError(Kind::malformed, "varint too long");
    }
    std::int32_t zigzag()
    {
        const auto v = varint();
        if (v > 0xFFFFFFFFULL) {
            throw BitstreamError(Kind::malformed, "symbol out of 32-bit range");
        }
        const auto u = static_cast<std::uint32_t>(v);
        return static_cast<std::int32_t>((u >> 1) ^ (~(u & 1) + 1));
    }
    std::span<const std::uint8_t> raw(std::uint64_t n)
    {
        need(n);
        auto out = data_.subspan(pos_, static_cast<std::size_t>(n));
        pos_ += static_cast<std::size_t>(n);
        return out;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::uint64_t n) const
    {
        if (n > data_.size() - pos_) {
            throw BitstreamError(Kind::malformed, "field extends past the end of the body");
        }
    }
    std::uint64_t le(int n)
    {
        need(static_cast<std::uint64_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> data)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t done = 0;
    while (done < data.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - done, 1U << 30));
        crc = crc32(crc, data.data() + done, chunk);
        done += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

void write_stream(Writer& w, const EncodedStream& s)
{
    w.varint(s.table.symbols.size());
    for (std::size_t i = 0; i < s.table.symbols.size(); ++i) {
        w.zigzag(s.table.symbols[i]);
        w.u8(s.table.lengths[i]);
    }
    w.u64(s.payload.size());
    w.raw(s.payload);
}

EncodedStream read_stream(Reader& r, std::uint64_t count)
{
    EncodedStream s;
    s.count = count;
    const auto entries = r.varint();
    if (entries > (std::uint64_t{1} << 32)) {
        throw BitstreamError(Kind::malformed, "code table too large");
    }
    for (std::uint64_t i = 0; i < entries; ++i) {
        s.table.symbols.push_back(r.zigzag());
        s.table.lengths.push_back(r.u8());
    }
    const auto n = r.u64();
    auto payload = r.raw(n);
    s.payload.assign(payload.begin(), payload.end());
    return s;
}

}  // namespace

std::string to_string(BitstreamError::Kind kind)
{
    switch (kind) {
    case Kind::bad_magic: return "bad magic";
    case Kind::bad_version: return "unsupported version";
    case Kind::truncated: return "truncated";
    case Kind::bad_checksum: return "checksum mismatch";
    case Kind::malformed: return "malformed";
    }
    return "unknown";
}

std::vector<std::uint8_t> serialize(const QuantizedModel& qm)
{
    Writer body;
    const auto config_text = qm.config.to_key_values().to_text();
    body.u32(static_cast<std::uint32_t>(config_text.size()));
    body.raw({reinterpret_cast<const std::uint8_t*>(config_text.data()), config_text.size()});
    body.u8(static_cast<std::uint8_t>(qm.mode));
    body.u8(static_cast<std::uint8_t>(qm.bits));
    body.u32(static_cast<std::uint32_t>(qm.classes.size()));
    for (const auto& cls : qm.classes) {
        body.u8(static_cast<std::uint8_t>(cls.name.size()));
        body.raw({reinterpret_cast<const std::uint8_t*>(cls.name.data()), cls.name.size()});
        body.u64(cls.symbols.size());
        body.f32(cls.lo);
        body.f32(cls.hi);
        write_stream(body, entropy_encode(cls.symbols));
    }
    body.u64(qm.biases.size());
    for (float b : qm.biases) {
        body.f32(b);
    }

    Writer out;
    out.raw({reinterpret_cast<const std::uint8_t*>(kMagic), 4});
    out.u16(kFormatVersion);
    out.u64(body.bytes.size());
    out.raw(body.bytes);
    out.u32(crc32_of(out.bytes));
    return std::move(out.bytes);
}

QuantizedModel deserialize(std::span<const std::uint8_t> bytes)
{
    const auto magic_len = std::min<std::size_t>(bytes.size(), 4);
    if (std::memcmp(bytes.data(), kMagic, magic_len) != 0) {
        throw BitstreamError(Kind::bad_magic, "not an FFNV stream (bad magic)");
    }
    if (bytes.size() < kHeaderSize) {
        throw BitstreamError(Kind::truncated, "stream truncated inside the header");
    }
    Reader header(bytes.subspan(4, kHeaderSize - 4));
    const auto version = header.u16();
    if (version != kFormatVersion) {
        throw BitstreamError(Kind::bad_version, "unsupported format version " + std::to_string(version) +
                                                    " (expected " + std::to_string(kFormatVersion) + ")");
    }
    const auto body_len = header.u64();
    const auto available = bytes.size() - kHeaderSize;
    if (body_len > available || available - body_len < kCrcSize) {
        throw BitstreamError(Kind::truncated, "stream truncated: declared body of " + std::to_string(body_len) +
                                                  " bytes, " + std::to_string(available) +
                                                  " bytes follow the header");
    }
    if (available - body_len > kCrcSize) {
        throw BitstreamError(Kind::malformed, "trailing bytes after the checksum");
    }
    const auto covered = bytes.subspan(0, kHeaderSize + static_cast<std::size_t>(body_len));
    Reader crc_reader(bytes.subspan(covered.size(), kCrcSize));
    if (crc_reader.u32() != crc32_of(covered)) {
        throw BitstreamError(Kind::bad_checksum, "checksum mismatch");
    }

    Reader r(bytes.subspan(kHeaderSize, static_cast<std::size_t>(body_len)));
    QuantizedModel qm;
    const auto config_len = r.u32();
    const auto config_bytes = r.raw(config_len);
    try {
        qm.config = FFNeRVConfig::from_key_values(
            KeyValues::parse(std::string(config_bytes.begin(), config_bytes.end())));
    } catch (const BitstreamError&) {
        throw;
    } catch (const std::exception& e) {
        throw BitstreamError(Kind::malformed, std::string("invalid embedded config: ") + e.what());
    }
    const auto mode = r.u8();
    if (mode > 1) {
        throw BitstreamError(Kind::malformed, "unknown quantization mode " + std::to_string(mode));
    }
    qm.mode = static_cast<QuantMode>(mode);
    qm.bits = r.u8();
    if (qm.bits < 2 || qm.bits > 16) {
        throw BitstreamError(Kind::malformed, "bit width out of range");
    }
    const auto classes = r.u32();
    if (classes > 16) {
        throw BitstreamError(Kind::malformed, "too many symbol classes");
    }
    for (std::uint32_t c = 0; c < classes; ++c) {
        SymbolClass cls;
        const auto name_len = r.u8();
        const auto name = r.raw(name_len);
        cls.name.assign(name.begin(), name.end());
        const auto count = r.u64();
        cls.lo = r.f32();
        cls.hi = r.f32();
        cls.symbols = entropy_decode(read_stream(r, count));
        qm.classes.push_back(std::move(cls));
    }
    const auto bias_count = r.u64();
    if (bias_count > body_len / 4) {
        throw BitstreamError(Kind::malformed, "bias count exceeds the body size");
    }
    qm.biases.reserve(static_cast<std::size_t>(bias_count));
    for (std::uint64_t i = 0; i < bias_count; ++i) {
        qm.biases.push_back(r.f32());
    }
    if (!r.done()) {
        throw BitstreamError(Kind::malformed, "unparsed bytes at the end of the body");
    }
    return qm;
}

std::vector<ClassStats> class_stats(const QuantizedModel& qm)
{
    std::vector<ClassStats> out;
    for (const auto& cls : qm.classes) {
        const auto s = entropy_encode(cls.symbols);
        Writer table;
        table.varint(s.table.symbols.size());
        for (std::size_t i = 0; i < s.table.symbols.size(); ++i) {
            table.zigzag(s.table.symbols[i]);
            table.u8(s.table.lengths[i]);
        }
        out.push_back({cls.name, cls.symbols.size(), table.bytes.size(), s.payload.size(),
                       symbol_entropy(cls.symbols)});
    }
    return out;
}

double bits_per_pixel(std::uint64_t bytes, std::int64_t frames, std::int64_t height, std::int64_t width)
{
    if (frames <= 0 || height <= 0 || width <= 0) {
        throw std::invalid_argument("bits_per_pixel: video dimensions must be positive");
    }
    return static_cast<double>(bytes) * 8.0 /
           (static_cast<double>(frames) * static_cast<double>(height) * static_cast<double>(width));
}

std::vector<std::uint8_t> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "' for reading");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write to '" + path + "' failed");
    }
}

}  // namespace ffnerv
