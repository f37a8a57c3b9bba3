#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <tuple>

#include "ffnerv/compression.hpp"

namespace ffnerv {

namespace {

using Kind = BitstreamError::Kind;

struct HuffNode {
    std::uint64_t weight;
    std::size_t order;  // smallest leaf index below, for deterministic ties
    int left;
    int right;
};

std::vector<std::uint8_t> build_lengths(const std::vector<std::uint64_t>& freq)
{
    std::vector<HuffNode> nodes;
    using Item = std::tuple<std::uint64_t, std::size_t, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (std::size_t i = 0; i < freq.size(); ++i) {
        if (freq[i] > 0) {
            nodes.push_back({freq[i], i, -1, -1});
            heap.emplace(freq[i], i, static_cast<int>(nodes.size() - 1));
        }
    }
    std::vector<std::uint8_t> lengths(freq.size(), 0);
    if (nodes.size() < 2) {
        if (nodes.size() == 1) {
            lengths[nodes[0].order] = 1;
        }
        return lengths;
    }
    while (heap.size() > 1) {
        auto [wa, oa, a] = heap.top();
        heap.pop();
        auto [wb, ob, b] = heap.top();
        heap.pop();
        nodes.push_back({wa + wb, std::min(oa, ob), a, b});
        heap.emplace(wa + wb, std::min(oa, ob), static_cast<int>(nodes.size() - 1));
    }
    std::vector<std::pair<int, int>> stack{{std::get<2>(heap.top()), 0}};
    while (!stack.empty()) {
        auto [id, depth] = stack.back();
        stack.pop_back();
        const auto& node = nodes[static_cast<std::size_t>(id)];
        if (node.left < 0) {
            lengths[node.order] = static_cast<std::uint8_t>(std::min(depth, 255));
        } else {
            stack.emplace_back(node.left, depth + 1);
            stack.emplace_back(node.right, depth + 1);
        }
    }
    return lengths;
}

// Canonical codes in table order.
std::vector<std::uint32_t> canonical_codes(const CodeTable& table)
{
    std::vector<std::uint32_t> codes(table.lengths.size());
    std::uint32_t code = 0;
    int prev = 0;
    for (std::size_t i = 0; i < table.lengths.size(); ++i) {
        const int len = table.lengths[i];
        if (i > 0) {
            ++code;
        }
        code <<= (len - prev);
        prev = len;
        codes[i] = code;
    }
    return codes;
}

class BitWriter {
public:
    void put(std::uint32_t code, int length)
    {
        for (int b = length - 1; b >= 0; --b) {
            acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((code >> b) & 1U));
            if (++fill_ == 8) {
                bytes_.push_back(acc_);
                acc_ = 0;
                fill_ = 0;
            }
        }
    }
    std::vector<std::uint8_t> finish()
    {
        if (fill_ > 0) {
            bytes_.push_back(static_cast<std::uint8_t>(acc_ << (8 - fill_)));
        }
        return std::move(bytes_);
    }

private:
    std::vector<std::uint8_t> bytes_;
    std::uint8_t acc_ = 0;
    int fill_ = 0;
};

void check_table(const CodeTable& table, std::uint64_t count)
{
    if (table.symbols.size() != table.lengths.size()) {
        throw BitstreamError(Kind::malformed, "code table: symbol/length count mismatch");
    }
    if (count == 0) {
        if (!table.symbols.empty()) {
            throw BitstreamError(Kind::malformed, "code table present for an empty stream");
        }
        return;
    }
    if (table.symbols.empty()) {
        throw BitstreamError(Kind::malformed, "code table is empty");
    }
    if (table.symbols.size() == 1) {
        if (table.lengths[0] != 0) {
            throw BitstreamError(Kind::malformed, "single-symbol table must have length 0");
        }
        return;
    }
    double kraft = 0.0;
    for (std::size_t i = 0; i < table.lengths.size(); ++i) {
        const int len = table.lengths[i];
        if (len < 1 || len > kMaxCodeLength) {
            throw BitstreamError(Kind::malformed, "code length out of range");
        }
        if (i > 0 && std::tie(table.lengths[i - 1], table.symbols[i - 1]) >=
                          std::tie(table.lengths[i], table.symbols[i])) {
            throw BitstreamError(Kind::malformed, "code table not in canonical order");
        }
        kraft += std::ldexp(1.0, -len);
    }
    if (kraft > 1.0) {
        throw BitstreamError(Kind::malformed, "code lengths violate the Kraft inequality");
    }
}

}  // namespace

std::vector<std::uint8_t> huffman_code_lengths(std::span<const std::uint64_t> frequencies,
                                               int max_length)
{
    if (max_length < 1) {
        throw std::invalid_argument("max code length must be positive");
    }
    std::vector<std::uint64_t> freq(frequencies.begin(), frequencies.end());
    const auto used = std::count_if(freq.begin(), freq.end(), [](auto f) { return f > 0; });
    if (max_length < 64 && static_cast<std::uint64_t>(used) > (std::uint64_t{1} << max_length)) {
        throw std::invalid_argument("alphabet too large for the code length limit");
    }
    for (;;) {
        auto lengths = build_lengths(freq);
        if (*std::max_element(lengths.begin(), lengths.end(), [](auto a, auto b) { return a < b; }) <=
            max_length) {
            return lengths;
        }
        for (auto& f : freq) {
            if (f > 0) {
                f = std::max<std::uint64_t>(1, f / 2);
            }
        }
    }
}

EncodedStream entropy_encode(std::span<const std::int32_t> symbols)
{
    EncodedStream out;
    out.count = symbols.size();
    if (symbols.empty()) {
        return out;
    }
    std::map<std::int32_t, std::uint64_t> histogram;
    for (auto s : symbols) {
        ++histogram[s];
    }
    if (histogram.size() == 1) {
        out.table.symbols = {histogram.begin()->first};
        out.table.lengths = {0};
        return out;
    }
    std::vector<std::int32_t> alphabet;
    std::vector<std::uint64_t> freq;
    for (auto [s, f] : histogram) {
        alphabet.push_back(s);
        freq.push_back(f);
    }
    const auto lengths = huffman_code_lengths(freq);
    std::vector<std::size_t> order(alphabet.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(lengths[a], alphabet[a]) < std::tie(lengths[b], alphabet[b]);
    });
    for (auto i : order) {
        out.table.symbols.push_back(alphabet[i]);
        out.table.lengths.push_back(lengths[i]);
    }
    const auto codes = canonical_codes(out.table);
    std::map<std::int32_t, std::pair<std::uint32_t, int>> lookup;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        lookup[out.table.symbols[i]] = {codes[i], out.table.lengths[i]};
    }
    BitWriter writer;
    for (auto s : symbols) {
        const auto& [code, len] = lookup[s];
        writer.put(code, len);
    }
    out.payload = writer.finish();
    return out;
}

std::vector<std::int32_t> entropy_decode(const EncodedStream& stream)
{
    check_table(stream.table, stream.count);
    std::vector<std::int32_t> out;
    if (stream.count == 0) {
        return out;
    }
    const auto& table = stream.table;
    if (table.symbols.size() == 1) {
        if (!stream.payload.empty()) {
            throw BitstreamError(Kind::malformed, "run-length stream carries a payload");
        }
        out.assign(stream.count, table.symbols[0]);
        return out;
    }
    // first code, count and table offset per length
    std::vector<std::uint32_t> first(kMaxCodeLength + 2, 0);
    std::vector<std::uint32_t> count(kMaxCodeLength + 2, 0);
    std::vector<std::size_t> offset(kMaxCodeLength + 2, 0);
    const auto codes = canonical_codes(table);
    for (std::size_t i = table.lengths.size(); i-- > 0;) {
        const int len = table.lengths[i];
        first[static_cast<std::size_t>(len)] = codes[i];
        offset[static_cast<std::size_t>(len)] = i;
        ++count[static_cast<std::size_t>(len)];
    }
    const std::uint64_t total_bits = stream.payload.size() * 8;
    if (stream.count > total_bits) {
        throw BitstreamError(Kind::malformed, "payload too short for the symbol count");
    }
    out.reserve(stream.count);
    std::uint64_t pos = 0;
    while (out.size() < stream.count) {
        std::uint32_t code = 0;
        int len = 0;
        for (;;) {
            if (pos >= total_bits) {
                throw BitstreamError(Kind::malformed, "payload ended inside a code word");
            }
            const auto byte = stream.payload[static_cast<std::size_t>(pos >> 3)];
            code = (code << 1) | ((byte >> (7 - (pos & 7))) & 1U);
            ++pos;
            ++len;
            if (len > kMaxCodeLength) {
                throw BitstreamError(Kind::malformed, "invalid code word in payload");
            }
            const auto l = static_cast<std::size_t>(len);
            if (count[l] > 0 && code >= first[l] && code - first[l] < count[l]) {
                out.push_back(table.symbols[offset[l] + (code - first[l])]);
                break;
            }
        }
    }
    if ((total_bits - pos) >= 8) {
        throw BitstreamError(Kind::malformed, "payload has trailing bytes");
    }
    return out;
}

double symbol_entropy(std::span<const std::int32_t> symbols)
{
    if (symbols.empty()) {
        return 0.0;
    }
    std::map<std::int32_t, std::uint64_t> histogram;
    for (auto s : symbols) {
        ++histogram[s];
    }
    const double n = static_cast<double>(symbols.size());
    double h = 0.0;
    for (auto [s, f] : histogram) {
        const double p = static_cast<double>(f) / n;
        h -= p * std::log2(p);
    }
    return h;
}

}  // namespace ffnerv
