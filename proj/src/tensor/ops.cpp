#include "ffnerv/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace ffnerv {

namespace {

template <typename T>
using ImplPtr = std::shared_ptr<detail::TensorImpl<T>>;

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op)
{
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
    }
}

template <typename T>
void require_rank3(const BasicTensor<T>& x, const char* op, const char* name)
{
    if (x.rank() != 3) {
        throw ShapeError(std::string(op) + ": " + name + " must be CxHxW, got " +
                         shape_string(x.shape()));
    }
}

// Adds g into the gradient buffer of `impl` if it tracks gradients.
template <typename T, typename F>
void accumulate(const ImplPtr<T>& impl, F&& fill)
{
    if (!impl->requires_grad) {
        return;
    }
    fill(impl->grad_buffer());
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b)
{
    require_same_shape(a, b, "add");
    auto da = a.data();
    auto db = b.data();
    std::vector<T> out(da.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = da[i] + db[i];
    }
    auto ia = a.impl();
    auto ib = b.impl();
    return detail::make_result<T>(a.shape(), std::move(out), {ia, ib}, [ia, ib](std::span<const T> g) {
        accumulate<T>(ia, [&](auto& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
        accumulate<T>(ib, [&](auto& gb) { for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i]; });
    });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b)
{
    require_same_shape(a, b, "sub");
    auto da = a.data();
    auto db = b.data();
    std::vector<T> out(da.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = da[i] - db[i];
    }
    auto ia = a.impl();
    auto ib = b.impl();
    return detail::make_result<T>(a.shape(), std::move(out), {ia, ib}, [ia, ib](std::span<const T> g) {
        accumulate<T>(ia, [&](auto& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
        accumulate<T>(ib, [&](auto& gb) { for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i]; });
    });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b)
{
    require_same_shape(a, b, "mul");
    auto da = a.data();
    auto db = b.data();
    std::vector<T> out(da.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = da[i] * db[i];
    }
    auto ia = a.impl();
    auto ib = b.impl();
    return detail::make_result<T>(a.shape(), std::move(out), {ia, ib}, [ia, ib](std::span<const T> g) {
        accumulate<T>(ia, [&](auto& ga) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * ib->data[i];
        });
        accumulate<T>(ib, [&](auto& gb) {
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ia->data[i];
        });
    });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor)
{
    auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = src[i] * factor;
    }
    auto ix = x.impl();
    return detail::make_result<T>(x.shape(), std::move(out), {ix}, [ix, factor](std::span<const T> g) {
        accumulate<T>(ix, [&](auto& gx) { for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor; });
    });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, T value)
{
    auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = src[i] + value;
    }
    auto ix = x.impl();
    return detail::make_result<T>(x.shape(), std::move(out), {ix}, [ix](std::span<const T> g) {
        accumulate<T>(ix, [&](auto& gx) { for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i]; });
    });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x)
{
    auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = T(1) / (T(1) + std::exp(-src[i]));
    }
    auto ix = x.impl();
    std::vector<T> saved = out;
    return detail::make_result<T>(x.shape(), std::move(out), {ix},
                                  [ix, saved = std::move(saved)](std::span<const T> g) {
        accumulate<T>(ix, [&](auto& gx) {
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * saved[i] * (T(1) - saved[i]);
        });
    });
}

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x)
{
    const T inv_sqrt2 = T(1) / std::sqrt(T(2));
    auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = T(0.5) * src[i] * (T(1) + std::erf(src[i] * inv_sqrt2));
    }
    auto ix = x.impl();
    return detail::make_result<T>(x.shape(), std::move(out), {ix}, [ix, inv_sqrt2](std::span<const T> g) {
        const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
        accumulate<T>(ix, [&](auto& gx) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const T v = ix->data[i];
                const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
                const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
                gx[i] += g[i] * (cdf + v * pdf);
            }
        });
    });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x)
{
    auto src = x.data();
    // Accumulate in double so float sums do not drift with size.
    double acc = 0.0;
    for (auto v : src) {
        acc += static_cast<double>(v);
    }
    auto ix = x.impl();
    return detail::make_result<T>(Shape{}, std::vector<T>{static_cast<T>(acc)}, {ix},
                                  [ix](std::span<const T> g) {
        accumulate<T>(ix, [&](auto& gx) { for (auto& v : gx) v += g[0]; });
    });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x)
{
    if (x.numel() == 0) {
        throw ShapeError("mean of an empty tensor");
    }
    return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
BasicTensor<T> l1_mean(const BasicTensor<T>& a, const BasicTensor<T>& b)
{
    require_same_shape(a, b, "l1_mean");
    if (a.numel() == 0) {
        throw ShapeError("l1_mean of empty tensors");
    }
    auto da = a.data();
    auto db = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        acc += std::abs(static_cast<double>(da[i]) - static_cast<double>(db[i]));
    }
    const T inv_n = T(1) / static_cast<T>(da.size());
    auto ia = a.impl();
    auto ib = b.impl();
    return detail::make_result<T>(Shape{}, std::vector<T>{static_cast<T>(acc / da.size())}, {ia, ib},
                                  [ia, ib, inv_n](std::span<const T> g) {
        const std::size_t n = ia->data.size();
        auto sign_of = [&](std::size_t i) {
            const T d = ia->data[i] - ib->data[i];
            return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
        };
        accumulate<T>(ia, [&](auto& ga) { for (std::size_t i = 0; i < n; ++i) ga[i] += g[0] * inv_n * sign_of(i); });
        accumulate<T>(ib, [&](auto& gb) { for (std::size_t i = 0; i < n; ++i) gb[i] -= g[0] * inv_n * sign_of(i); });
    });
}

namespace {

struct ConvGeom {
    std::int64_t c, h, w, o, cg, og, k, pad, oh, ow;
    int groups;
};

// Valid output range along one axis for kernel tap `kk`: out index i reads
// input i + kk - pad, which must land in [0, in).
inline void tap_range(std::int64_t kk, std::int64_t pad, std::int64_t in, std::int64_t out,
                      std::int64_t& lo, std::int64_t& hi)
{
    lo = std::max<std::int64_t>(0, pad - kk);
    hi = std::min<std::int64_t>(out, in + pad - kk);
}

template <typename T>
void conv_forward(const ConvGeom& g, const T* in, const T* wt, const T* bias, T* out)
{
    const std::int64_t plane = g.oh * g.ow;
    for (std::int64_t o = 0; o < g.o; ++o) {
        T* op = out + o * plane;
        std::fill(op, op + plane, bias[o]);
        const std::int64_t grp = o / g.og;
        for (std::int64_t ci = 0; ci < g.cg; ++ci) {
            const T* ip = in + (grp * g.cg + ci) * g.h * g.w;
            const T* wp = wt + (o * g.cg + ci) * g.k * g.k;
            for (std::int64_t ky = 0; ky < g.k; ++ky) {
                std::int64_t ylo, yhi;
                tap_range(ky, g.pad, g.h, g.oh, ylo, yhi);
                for (std::int64_t kx = 0; kx < g.k; ++kx) {
                    const T wv = wp[ky * g.k + kx];
                    std::int64_t xlo, xhi;
                    tap_range(kx, g.pad, g.w, g.ow, xlo, xhi);
                    for (std::int64_t y = ylo; y < yhi; ++y) {
                        T* orow = op + y * g.ow;
                        const T* irow = ip + (y + ky - g.pad) * g.w + (kx - g.pad);
                        for (std::int64_t x = xlo; x < xhi; ++x) {
                            orow[x] += wv * irow[x];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv_backward(const ConvGeom& g, const T* in, const T* wt, const T* gout, T* gin, T* gw, T* gb)
{
    const std::int64_t plane = g.oh * g.ow;
    for (std::int64_t o = 0; o < g.o; ++o) {
        const T* gp = gout + o * plane;
        if (gb) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < plane; ++i) {
                acc += gp[i];
            }
            gb[o] += static_cast<T>(acc);
        }
        const std::int64_t grp = o / g.og;
        for (std::int64_t ci = 0; ci < g.cg; ++ci) {
            const std::int64_t c = grp * g.cg + ci;
            const T* ip = in + c * g.h * g.w;
            T* gip = gin ? gin + c * g.h * g.w : nullptr;
            const T* wp = wt + (o * g.cg + ci) * g.k * g.k;
            T* gwp = gw ? gw + (o * g.cg + ci) * g.k * g.k : nullptr;
            for (std::int64_t ky = 0; ky < g.k; ++ky) {
                std::int64_t ylo, yhi;
                tap_range(ky, g.pad, g.h, g.oh, ylo, yhi);
                for (std::int64_t kx = 0; kx < g.k; ++kx) {
                    std::int64_t xlo, xhi;
                    tap_range(kx, g.pad, g.w, g.ow, xlo, xhi);
                    const T wv = wp[ky * g.k + kx];
                    T wacc = 0;
                    for (std::int64_t y = ylo; y < yhi; ++y) {
                        const T* grow = gp + y * g.ow;
                        const std::int64_t off = (y + ky - g.pad) * g.w + (kx - g.pad);
                        const T* irow = ip + off;
                        if (gip) {
                            T* girow = gip + off;
                            for (std::int64_t x = xlo; x < xhi; ++x) {
                                girow[x] += wv * grow[x];
                            }
                        }
                        if (gwp) {
                            for (std::int64_t x = xlo; x < xhi; ++x) {
                                wacc += grow[x] * irow[x];
                            }
                        }
                    }
                    if (gwp) {
                        gwp[ky * g.k + kx] += wacc;
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, int groups, int padding)
{
    require_rank3(input, "conv2d", "input");
    if (weight.rank() != 4) {
        throw ShapeError("conv2d: weight must be O x C/g x k x k, got " + shape_string(weight.shape()));
    }
    if (groups < 1) {
        throw ShapeError("conv2d: groups must be positive, got " + std::to_string(groups));
    }
    if (padding < 0) {
        throw ShapeError("conv2d: padding must be non-negative");
    }
    ConvGeom g{};
    g.groups = groups;
    g.c = input.dim(0);
    g.h = input.dim(1);
    g.w = input.dim(2);
    g.o = weight.dim(0);
    g.k = weight.dim(2);
    g.pad = padding;
    if (g.c % groups != 0) {
        throw ShapeError("conv2d: input channels C=" + std::to_string(g.c) +
                         " not divisible by groups=" + std::to_string(groups));
    }
    if (g.o % groups != 0) {
        throw ShapeError("conv2d: output channels O=" + std::to_string(g.o) +
                         " not divisible by groups=" + std::to_string(groups));
    }
    g.cg = g.c / groups;
    g.og = g.o / groups;
    if (weight.dim(1) != g.cg) {
        throw ShapeError("conv2d: weight dim 1 (C/g) is " + std::to_string(weight.dim(1)) +
                         ", expected " + std::to_string(g.cg));
    }
    if (weight.dim(3) != g.k) {
        throw ShapeError("conv2d: kernel must be square, got " + shape_string(weight.shape()));
    }
    if (bias.rank() != 1 || bias.dim(0) != g.o) {
        throw ShapeError("conv2d: bias must have O=" + std::to_string(g.o) + " entries, got " +
                         shape_string(bias.shape()));
    }
    g.oh = g.h + 2 * g.pad - g.k + 1;
    g.ow = g.w + 2 * g.pad - g.k + 1;
    if (g.oh <= 0 || g.ow <= 0) {
        throw ShapeError("conv2d: kernel larger than padded input");
    }

    std::vector<T> out(static_cast<std::size_t>(g.o * g.oh * g.ow));
    conv_forward(g, input.data().data(), weight.data().data(), bias.data().data(), out.data());

    auto ii = input.impl();
    auto iw = weight.impl();
    auto ib = bias.impl();
    return detail::make_result<T>(Shape{g.o, g.oh, g.ow}, std::move(out), {ii, iw, ib},
                                  [ii, iw, ib, g](std::span<const T> gout) {
        T* gin = ii->requires_grad ? ii->grad_buffer().data() : nullptr;
        T* gw = iw->requires_grad ? iw->grad_buffer().data() : nullptr;
        T* gb = ib->requires_grad ? ib->grad_buffer().data() : nullptr;
        conv_backward(g, ii->data.data(), iw->data.data(), gout.data(), gin, gw, gb);
    });
}

template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, int factor)
{
    require_rank3(x, "pixel_shuffle", "input");
    if (factor < 1) {
        throw ShapeError("pixel_shuffle: factor must be positive");
    }
    const std::int64_t s = factor;
    const std::int64_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (cin % (s * s) != 0) {
        throw ShapeError("pixel_shuffle: channels " + std::to_string(cin) +
                         " not divisible by S^2=" + std::to_string(s * s));
    }
    const std::int64_t c = cin / (s * s);
    const std::int64_t oh = h * s, ow = w * s;
    // index[o] = source offset of output element o.
    std::vector<std::int64_t> index(static_cast<std::size_t>(cin * h * w));
    for (std::int64_t cc = 0; cc < c; ++cc) {
        for (std::int64_t y = 0; y < oh; ++y) {
            for (std::int64_t xx = 0; xx < ow; ++xx) {
                const std::int64_t src_c = cc * s * s + (y % s) * s + (xx % s);
                index[static_cast<std::size_t>((cc * oh + y) * ow + xx)] =
                    (src_c * h + y / s) * w + xx / s;
            }
        }
    }
    auto src = x.data();
    std::vector<T> out(index.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = src[static_cast<std::size_t>(index[i])];
    }
    auto ix = x.impl();
    return detail::make_result<T>(Shape{c, oh, ow}, std::move(out), {ix},
                                  [ix, index = std::move(index)](std::span<const T> g) {
        accumulate<T>(ix, [&](auto& gx) {
            for (std::size_t i = 0; i < g.size(); ++i) gx[static_cast<std::size_t>(index[i])] += g[i];
        });
    });
}

namespace {

// Bilinear taps for a clamped coordinate along one axis.
template <typename T>
struct Tap {
    std::int64_t i0, i1;
    T w1;          // weight of i1; i0 gets 1 - w1
    bool clamped;  // coordinate hit the border clamp
};

template <typename T>
Tap<T> make_tap(T coord, std::int64_t extent)
{
    const T hi = static_cast<T>(extent - 1);
    Tap<T> tap{};
    tap.clamped = coord < T(0) || coord > hi;
    const T c = std::clamp(coord, T(0), hi);
    const T fl = std::floor(c);
    tap.i0 = static_cast<std::int64_t>(fl);
    tap.i1 = std::min(tap.i0 + 1, extent - 1);
    tap.w1 = c - fl;
    return tap;
}

}  // namespace

template <typename T>
BasicTensor<T> bilinear_warp(const BasicTensor<T>& frame, const BasicTensor<T>& flow)
{
    require_rank3(frame, "bilinear_warp", "frame");
    require_rank3(flow, "bilinear_warp", "flow");
    const std::int64_t c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
    if (flow.dim(0) != 2 || flow.dim(1) != h || flow.dim(2) != w) {
        throw ShapeError("bilinear_warp: flow must be 2x" + std::to_string(h) + "x" +
                         std::to_string(w) + ", got " + shape_string(flow.shape()));
    }
    const std::int64_t plane = h * w;
    auto fd = frame.data();
    auto fl = flow.data();
    std::vector<Tap<T>> tx(static_cast<std::size_t>(plane)), ty(static_cast<std::size_t>(plane));
    std::vector<T> out(static_cast<std::size_t>(c * plane));
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            const std::int64_t p = y * w + x;
            tx[p] = make_tap(static_cast<T>(x) + fl[p], w);
            ty[p] = make_tap(static_cast<T>(y) + fl[plane + p], h);
        }
    }
    for (std::int64_t ch = 0; ch < c; ++ch) {
        const T* src = fd.data() + ch * plane;
        for (std::int64_t p = 0; p < plane; ++p) {
            const auto& a = tx[p];
            const auto& b = ty[p];
            const T top = (T(1) - a.w1) * src[b.i0 * w + a.i0] + a.w1 * src[b.i0 * w + a.i1];
            const T bot = (T(1) - a.w1) * src[b.i1 * w + a.i0] + a.w1 * src[b.i1 * w + a.i1];
            out[ch * plane + p] = (T(1) - b.w1) * top + b.w1 * bot;
        }
    }
    auto iframe = frame.impl();
    auto iflow = flow.impl();
    return detail::make_result<T>(frame.shape(), std::move(out), {iframe, iflow},
                                  [iframe, iflow, tx = std::move(tx), ty = std::move(ty), c, w, plane](std::span<const T> g) {
        accumulate<T>(iframe, [&](auto& gf) {
            for (std::int64_t ch = 0; ch < c; ++ch) {
                T* dst = gf.data() + ch * plane;
                const T* gp = g.data() + ch * plane;
                for (std::int64_t p = 0; p < plane; ++p) {
                    const auto& a = tx[p];
                    const auto& b = ty[p];
                    const T gv = gp[p];
                    dst[b.i0 * w + a.i0] += gv * (T(1) - b.w1) * (T(1) - a.w1);
                    dst[b.i0 * w + a.i1] += gv * (T(1) - b.w1) * a.w1;
                    dst[b.i1 * w + a.i0] += gv * b.w1 * (T(1) - a.w1);
                    dst[b.i1 * w + a.i1] += gv * b.w1 * a.w1;
                }
            }
        });
        accumulate<T>(iflow, [&](auto& gfl) {
            const auto& fd = iframe->data;
            for (std::int64_t p = 0; p < plane; ++p) {
                const auto& a = tx[p];
                const auto& b = ty[p];
                T dx = 0, dy = 0;
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const T* src = fd.data() + ch * plane;
                    const T v00 = src[b.i0 * w + a.i0], v01 = src[b.i0 * w + a.i1];
                    const T v10 = src[b.i1 * w + a.i0], v11 = src[b.i1 * w + a.i1];
                    const T gv = g[ch * plane + p];
                    dx += gv * ((T(1) - b.w1) * (v01 - v00) + b.w1 * (v11 - v10));
                    dy += gv * ((T(1) - a.w1) * (v10 - v00) + a.w1 * (v11 - v01));
                }
                if (!a.clamped) gfl[p] += dx;
                if (!b.clamped) gfl[plane + p] += dy;
            }
        });
    });
}

namespace {

// Source taps for align-corners-false resizing along one axis.
template <typename T>
std::vector<Tap<T>> resize_taps(std::int64_t in, std::int64_t out)
{
    std::vector<Tap<T>> taps(static_cast<std::size_t>(out));
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::int64_t i = 0; i < out; ++i) {
        double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const double fl = std::floor(src);
        Tap<T> t{};
        t.i0 = static_cast<std::int64_t>(fl);
        t.i1 = std::min(t.i0 + 1, in - 1);
        t.w1 = static_cast<T>(src - fl);
        taps[static_cast<std::size_t>(i)] = t;
    }
    return taps;
}

}  // namespace

template <typename T>
BasicTensor<T> bilinear_upsample(const BasicTensor<T>& x, std::int64_t out_h, std::int64_t out_w)
{
    require_rank3(x, "bilinear_upsample", "input");
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (out_h < h || out_w < w) {
        throw ShapeError("bilinear_upsample: target " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " is smaller than source " + std::to_string(h) +
                         "x" + std::to_string(w));
    }
    auto ty = resize_taps<T>(h, out_h);
    auto tx = resize_taps<T>(w, out_w);
    auto src = x.data();
    std::vector<T> out(static_cast<std::size_t>(c * out_h * out_w));
    for (std::int64_t ch = 0; ch < c; ++ch) {
        const T* sp = src.data() + ch * h * w;
        T* op = out.data() + ch * out_h * out_w;
        for (std::int64_t y = 0; y < out_h; ++y) {
            const auto& b = ty[y];
            for (std::int64_t xx = 0; xx < out_w; ++xx) {
                const auto& a = tx[xx];
                const T top = (T(1) - a.w1) * sp[b.i0 * w + a.i0] + a.w1 * sp[b.i0 * w + a.i1];
                const T bot = (T(1) - a.w1) * sp[b.i1 * w + a.i0] + a.w1 * sp[b.i1 * w + a.i1];
                op[y * out_w + xx] = (T(1) - b.w1) * top + b.w1 * bot;
            }
        }
    }
    auto ix = x.impl();
    return detail::make_result<T>(Shape{c, out_h, out_w}, std::move(out), {ix},
                                  [ix, tx = std::move(tx), ty = std::move(ty), c, h, w, out_h,
                                   out_w](std::span<const T> g) {
        accumulate<T>(ix, [&](auto& gx) {
            for (std::int64_t ch = 0; ch < c; ++ch) {
                T* dst = gx.data() + ch * h * w;
                const T* gp = g.data() + ch * out_h * out_w;
                for (std::int64_t y = 0; y < out_h; ++y) {
                    const auto& b = ty[y];
                    for (std::int64_t xx = 0; xx < out_w; ++xx) {
                        const auto& a = tx[xx];
                        const T gv = gp[y * out_w + xx];
                        dst[b.i0 * w + a.i0] += gv * (T(1) - b.w1) * (T(1) - a.w1);
                        dst[b.i0 * w + a.i1] += gv * (T(1) - b.w1) * a.w1;
                        dst[b.i1 * w + a.i0] += gv * b.w1 * (T(1) - a.w1);
                        dst[b.i1 * w + a.i1] += gv * b.w1 * a.w1;
                    }
                }
            }
        });
    });
}

template <typename T>
BasicTensor<T> softmax_channels(const BasicTensor<T>& x)
{
    require_rank3(x, "softmax_channels", "input");
    const std::int64_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
    if (c < 1) {
        throw ShapeError("softmax_channels: needs at least one channel");
    }
    auto src = x.data();
    std::vector<T> out(src.size());
    for (std::int64_t p = 0; p < plane; ++p) {
        T mx = src[p];
        for (std::int64_t ch = 1; ch < c; ++ch) {
            mx = std::max(mx, src[ch * plane + p]);
        }
        T total = 0;
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const T e = std::exp(src[ch * plane + p] - mx);
            out[ch * plane + p] = e;
            total += e;
        }
        for (std::int64_t ch = 0; ch < c; ++ch) {
            out[ch * plane + p] /= total;
        }
    }
    auto ix = x.impl();
    std::vector<T> saved = out;
    return detail::make_result<T>(x.shape(), std::move(out), {ix},
                                  [ix, saved = std::move(saved), c, plane](std::span<const T> g) {
        accumulate<T>(ix, [&](auto& gx) {
            for (std::int64_t p = 0; p < plane; ++p) {
                T dot = 0;
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    dot += g[ch * plane + p] * saved[ch * plane + p];
                }
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const auto i = ch * plane + p;
                    gx[i] += saved[i] * (g[i] - dot);
                }
            }
        });
    });
}

template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& parts)
{
    if (parts.empty()) {
        throw ShapeError("concat_channels: no inputs");
    }
    std::int64_t channels = 0;
    for (const auto& p : parts) {
        require_rank3(p, "concat_channels", "part");
        if (p.dim(1) != parts[0].dim(1) || p.dim(2) != parts[0].dim(2)) {
            throw ShapeError("concat_channels: spatial mismatch " + shape_string(p.shape()) +
                             " vs " + shape_string(parts[0].shape()));
        }
        channels += p.dim(0);
    }
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(channels * parts[0].dim(1) * parts[0].dim(2)));
    std::vector<ImplPtr<T>> inputs;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(out.size());
        out.insert(out.end(), p.data().begin(), p.data().end());
        inputs.push_back(p.impl());
    }
    auto captured = inputs;
    return detail::make_result<T>(Shape{channels, parts[0].dim(1), parts[0].dim(2)}, std::move(out),
                                  std::move(inputs),
                                  [captured, offsets](std::span<const T> g) {
        for (std::size_t k = 0; k < captured.size(); ++k) {
            accumulate<T>(captured[k], [&](auto& gp) {
                for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[k] + i];
            });
        }
    });
}

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, std::int64_t begin, std::int64_t count)
{
    require_rank3(x, "slice_channels", "input");
    if (begin < 0 || count < 1 || begin + count > x.dim(0)) {
        throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + std::to_string(x.dim(0)) +
                         " channels");
    }
    const std::int64_t plane = x.dim(1) * x.dim(2);
    auto src = x.data();
    std::vector<T> out(src.begin() + begin * plane, src.begin() + (begin + count) * plane);
    auto ix = x.impl();
    const std::size_t offset = static_cast<std::size_t>(begin * plane);
    return detail::make_result<T>(Shape{count, x.dim(1), x.dim(2)}, std::move(out), {ix},
                                  [ix, offset](std::span<const T> g) {
        accumulate<T>(ix, [&](auto& gx) {
            for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
        });
    });
}

template <typename T>
BasicTensor<T> expand_channels(const BasicTensor<T>& x, std::int64_t channels)
{
    require_rank3(x, "expand_channels", "input");
    if (x.dim(0) != 1 || channels < 1) {
        throw ShapeError("expand_channels: needs a 1xHxW input, got " + shape_string(x.shape()));
    }
    const auto src = x.data();
    std::vector<T> out;
    out.reserve(src.size() * static_cast<std::size_t>(channels));
    for (std::int64_t ch = 0; ch < channels; ++ch) {
        out.insert(out.end(), src.begin(), src.end());
    }
    auto ix = x.impl();
    return detail::make_result<T>(Shape{channels, x.dim(1), x.dim(2)}, std::move(out), {ix},
                                  [ix](std::span<const T> g) {
        accumulate<T>(ix, [&](auto& gx) {
            for (std::size_t i = 0; i < g.size(); ++i) gx[i % gx.size()] += g[i];
        });
    });
}

template <typename T>
BasicTensor<T> blend_slices(const BasicTensor<T>& x, std::int64_t a, T wa, std::int64_t b, T wb)
{
    if (x.rank() < 1) {
        throw ShapeError("blend_slices: needs at least one axis");
    }
    const std::int64_t n = x.dim(0);
    if (a < 0 || a >= n || b < 0 || b >= n) {
        throw ShapeError("blend_slices: slice index outside [0, " + std::to_string(n) + ")");
    }
    Shape out_shape(x.shape().begin() + 1, x.shape().end());
    const std::size_t len = static_cast<std::size_t>(shape_numel(out_shape));
    auto src = x.data();
    const T* pa = src.data() + static_cast<std::size_t>(a) * len;
    const T* pb = src.data() + static_cast<std::size_t>(b) * len;
    std::vector<T> out(len);
    if (a == b) {
        std::copy(pa, pa + len, out.begin());
        wa = T(1);
        wb = T(0);
    } else {
        for (std::size_t i = 0; i < len; ++i) {
            out[i] = wa * pa[i] + wb * pb[i];
        }
    }
    auto ix = x.impl();
    return detail::make_result<T>(std::move(out_shape), std::move(out), {ix},
                                  [ix, a, b, wa, wb, len](std::span<const T> g) {
        accumulate<T>(ix, [&](auto& gx) {
            T* ga = gx.data() + static_cast<std::size_t>(a) * len;
            T* gb = gx.data() + static_cast<std::size_t>(b) * len;
            for (std::size_t i = 0; i < len; ++i) {
                ga[i] += wa * g[i];
            }
            if (a != b) {
                for (std::size_t i = 0; i < len; ++i) {
                    gb[i] += wb * g[i];
                }
            }
        });
    });
}

template <typename T>
BasicTensor<T> straight_through(const BasicTensor<T>& x, std::vector<T> values)
{
    if (values.size() != x.numel()) {
        throw ShapeError("straight_through: value count mismatch");
    }
    auto ix = x.impl();
    return detail::make_result<T>(x.shape(), std::move(values), {ix}, [ix](std::span<const T> g) {
        accumulate<T>(ix, [&](auto& gx) { for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i]; });
    });
}

#define FFNERV_INSTANTIATE_OPS(T)                                                                 \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template BasicTensor<T> scale(const BasicTensor<T>&, T);                                      \
    template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                                 \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                       \
    template BasicTensor<T> gelu(const BasicTensor<T>&);                                          \
    template BasicTensor<T> sum(const BasicTensor<T>&);                                           \
    template BasicTensor<T> mean(const BasicTensor<T>&);                                          \
    template BasicTensor<T> l1_mean(const BasicTensor<T>&, const BasicTensor<T>&);                \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                   const BasicTensor<T>&, int, int);                              \
    template BasicTensor<T> pixel_shuffle(const BasicTensor<T>&, int);                            \
    template BasicTensor<T> bilinear_warp(const BasicTensor<T>&, const BasicTensor<T>&);          \
    template BasicTensor<T> bilinear_upsample(const BasicTensor<T>&, std::int64_t, std::int64_t); \
    template BasicTensor<T> softmax_channels(const BasicTensor<T>&);                              \
    template BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>&);                  \
    template BasicTensor<T> slice_channels(const BasicTensor<T>&, std::int64_t, std::int64_t);    \
    template BasicTensor<T> expand_channels(const BasicTensor<T>&, std::int64_t);                 \
    template BasicTensor<T> blend_slices(const BasicTensor<T>&, std::int64_t, T, std::int64_t, T);\
    template BasicTensor<T> straight_through(const BasicTensor<T>&, std::vector<T>);

FFNERV_INSTANTIATE_OPS(float)
FFNERV_INSTANTIATE_OPS(double)

#undef FFNERV_INSTANTIATE_OPS

}  // namespace ffnerv
