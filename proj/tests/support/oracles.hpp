#pragma once

// Reference implementations written independently of the library, used as
// test oracles. Plain loops over std::vector<double>, CHW layout.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline std::size_t idx3(std::int64_t c, std::int64_t y, std::int64_t x, std::int64_t h, std::int64_t w)
{
    return static_cast<std::size_t>((c * h + y) * w + x);
}

// Dense cross-correlation, weight O x C x k x k, zero padding, stride 1.
inline Vec conv_dense(const Vec& in, std::int64_t c_in, std::int64_t h, std::int64_t w, const Vec& weight,
                      const Vec& bias, std::int64_t c_out, std::int64_t k, std::int64_t pad)
{
    const auto oh = h + 2 * pad - k + 1;
    const auto ow = w + 2 * pad - k + 1;
    Vec out(static_cast<std::size_t>(c_out * oh * ow), 0.0);
    for (std::int64_t o = 0; o < c_out; ++o)
        for (std::int64_t y = 0; y < oh; ++y)
            for (std::int64_t x = 0; x < ow; ++x) {
                double acc = bias[static_cast<std::size_t>(o)];
                for (std::int64_t c = 0; c < c_in; ++c)
                    for (std::int64_t ky = 0; ky < k; ++ky)
                        for (std::int64_t kx = 0; kx < k; ++kx) {
                            const auto iy = y + ky - pad;
                            const auto ix = x + kx - pad;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += in[idx3(c, iy, ix, h, w)] *
                                   weight[static_cast<std::size_t>(((o * c_in + c) * k + ky) * k + kx)];
                        }
                out[idx3(o, y, x, oh, ow)] = acc;
            }
    return out;
}

/// Grouped weight O x (C/g) x k x k expanded into a dense O x C x k x k
/// block-diagonal weight (zeros outside each group's block).
inline Vec block_diagonal(const Vec& grouped, std::int64_t c_in, std::int64_t c_out, std::int64_t k,
                          std::int64_t groups)
{
    const auto cg = c_in / groups;
    const auto og = c_out / groups;
    Vec dense(static_cast<std::size_t>(c_out * c_in * k * k), 0.0);
    for (std::int64_t o = 0; o < c_out; ++o) {
        const auto g = o / og;
        for (std::int64_t ci = 0; ci < cg; ++ci)
            for (std::int64_t t = 0; t < k * k; ++t)
                dense[static_cast<std::size_t>((o * c_in + g * cg + ci) * k * k + t)] =
                    grouped[static_cast<std::size_t>((o * cg + ci) * k * k + t)];
    }
    return dense;
}

// (C*S*S) x H x W -> C x (H*S) x (W*S) by explicit index remapping.
inline Vec pixel_shuffle(const Vec& in, std::int64_t c_out, std::int64_t h, std::int64_t w, std::int64_t s)
{
    Vec out(in.size());
    for (std::int64_t c = 0; c < c_out; ++c)
        for (std::int64_t y = 0; y < h * s; ++y)
            for (std::int64_t x = 0; x < w * s; ++x) {
                const auto src_c = c * s * s + (y % s) * s + (x % s);
                out[idx3(c, y, x, h * s, w * s)] = in[idx3(src_c, y / s, x / s, h, w)];
            }
    return out;
}

// Bilinear sample of one channel at (sx, sy), coordinates clamped to the border.
inline double bilinear_at(const Vec& img, std::int64_t c, std::int64_t h, std::int64_t w, double sx, double sy)
{
    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    const auto x0 = static_cast<std::int64_t>(std::floor(sx));
    const auto y0 = static_cast<std::int64_t>(std::floor(sy));
    const auto x1 = std::min(x0 + 1, w - 1);
    const auto y1 = std::min(y0 + 1, h - 1);
    const double fx = sx - static_cast<double>(x0);
    const double fy = sy - static_cast<double>(y0);
    return (1 - fy) * ((1 - fx) * img[idx3(c, y0, x0, h, w)] + fx * img[idx3(c, y0, x1, h, w)]) +
           fy * ((1 - fx) * img[idx3(c, y1, x0, h, w)] + fx * img[idx3(c, y1, x1, h, w)]);
}

inline Vec warp(const Vec& img, std::int64_t c, std::int64_t h, std::int64_t w, const Vec& flow)
{
    Vec out(img.size());
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) {
                const double dx = flow[idx3(0, y, x, h, w)];
                const double dy = flow[idx3(1, y, x, h, w)];
                out[idx3(ch, y, x, h, w)] = bilinear_at(img, ch, h, w, static_cast<double>(x) + dx,
                                                        static_cast<double>(y) + dy);
            }
    return out;
}

// Half-pixel-centre resize (align_corners = false), border clamped.
inline Vec upsample(const Vec& img, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t oh,
                    std::int64_t ow)
{
    Vec out(static_cast<std::size_t>(c * oh * ow));
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y < oh; ++y)
            for (std::int64_t x = 0; x < ow; ++x) {
                const double sy = (static_cast<double>(y) + 0.5) * static_cast<double>(h) / static_cast<double>(oh) - 0.5;
                const double sx = (static_cast<double>(x) + 0.5) * static_cast<double>(w) / static_cast<double>(ow) - 0.5;
                out[idx3(ch, y, x, oh, ow)] = bilinear_at(img, ch, h, w, sx, sy);
            }
    return out;
}

inline Vec softmax_channels(const Vec& in, std::int64_t c, std::int64_t h, std::int64_t w)
{
    Vec out(in.size());
    for (std::int64_t p = 0; p < h * w; ++p) {
        double denom = 0.0;
        for (std::int64_t ch = 0; ch < c; ++ch) denom += std::exp(in[static_cast<std::size_t>(ch * h * w + p)]);
        for (std::int64_t ch = 0; ch < c; ++ch)
            out[static_cast<std::size_t>(ch * h * w + p)] = std::exp(in[static_cast<std::size_t>(ch * h * w + p)]) / denom;
    }
    return out;
}

/// SSIM by brute force: for every window position compute the Gaussian
/// weighted statistics directly from the 2-D window; average over channels
/// and positions.
inline double ssim(const Vec& a, const Vec& b, std::int64_t c, std::int64_t h, std::int64_t w, int win = 11,
                   double sigma = 1.5)
{
    win = static_cast<int>(std::min<std::int64_t>({win, h, w}));
    std::vector<double> g(static_cast<std::size_t>(win));
    double gs = 0.0;
    for (int i = 0; i < win; ++i) {
        const double d = i - (win - 1) / 2.0;
        g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * sigma * sigma));
        gs += g[static_cast<std::size_t>(i)];
    }
    for (auto& v : g) v /= gs;
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    double total = 0.0;
    std::int64_t count = 0;
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y + win <= h; ++y)
            for (std::int64_t x = 0; x + win <= w; ++x) {
                double ma = 0, mb = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double wt = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
                        ma += wt * a[idx3(ch, y + i, x + j, h, w)];
                        mb += wt * b[idx3(ch, y + i, x + j, h, w)];
                    }
                double va = 0, vb = 0, cov = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double wt = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
                        const double da = a[idx3(ch, y + i, x + j, h, w)] - ma;
                        const double db = b[idx3(ch, y + i, x + j, h, w)] - mb;
                        va += wt * da * da;
                        vb += wt * db * db;
                        cov += wt * da * db;
                    }
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
    return total / static_cast<double>(count);
}

}  // namespace oracle
