#include "ffnerv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace ffnerv {

std::vector<double> gaussian_window(int size, double sigma)
{
    std::vector<double> taps(static_cast<std::size_t>(size));
    const double center = (size - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - center;
        taps[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        total += taps[i];
    }
    for (auto& t : taps) {
        t /= total;
    }
    return taps;
}

namespace {

// Separable valid-mode filter of one plane: out[i][j] = sum_ab g[a] g[b] in[i+a][j+b].
void filter_valid(const double* in, std::int64_t h, std::int64_t w, const std::vector<double>& g,
                  double* out, std::vector<double>& scratch)
{
    const auto k = static_cast<std::int64_t>(g.size());
    const std::int64_t oh = h - k + 1, ow = w - k + 1;
    scratch.assign(static_cast<std::size_t>(h * ow), 0.0);
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::int64_t b = 0; b < k; ++b) {
                acc += g[b] * in[y * w + x + b];
            }
            scratch[y * ow + x] = acc;
        }
    }
    for (std::int64_t y = 0; y < oh; ++y) {
        for (std::int64_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::int64_t a = 0; a < k; ++a) {
                acc += g[a] * scratch[(y + a) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
}

// Adjoint of filter_valid: scatters `grad` (oh x ow) back to h x w, adding into `out`.
void filter_valid_adjoint(const double* grad, std::int64_t h, std::int64_t w,
                          const std::vector<double>& g, double* out, std::vector<double>& scratch)
{
    const auto k = static_cast<std::int64_t>(g.size());
    const std::int64_t oh = h - k + 1, ow = w - k + 1;
    scratch.assign(static_cast<std::size_t>(h * ow), 0.0);
    for (std::int64_t y = 0; y < oh; ++y) {
        for (std::int64_t a = 0; a < k; ++a) {
            for (std::int64_t x = 0; x < ow; ++x) {
                scratch[(y + a) * ow + x] += g[a] * grad[y * ow + x];
            }
        }
    }
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < ow; ++x) {
            const double v = scratch[y * ow + x];
            for (std::int64_t b = 0; b < k; ++b) {
                out[y * w + x + b] += g[b] * v;
            }
        }
    }
}

}  // namespace

template <typename T>
BasicTensor<T> ssim(const BasicTensor<T>& x, const BasicTensor<T>& y, const SsimParams& p)
{
    if (x.shape() != y.shape() || x.rank() != 3) {
        throw ShapeError("ssim: inputs must be matching CxHxW tensors, got " +
                         shape_string(x.shape()) + " and " + shape_string(y.shape()));
    }
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int win = static_cast<int>(std::min<std::int64_t>({p.window, h, w}));
    if (win < 1) {
        throw ShapeError("ssim: empty image");
    }
    const auto g = gaussian_window(win, p.sigma);
    const std::int64_t oh = h - win + 1, ow = w - win + 1;
    const std::int64_t plane = h * w, oplane = oh * ow;
    const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
    const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
    const double inv_count = 1.0 / static_cast<double>(c * oplane);

    // Per-position partial derivatives of the SSIM map w.r.t. the local
    // moments (mx, my, exx, eyy, exy), pre-scaled by 1/count.
    std::vector<double> d_mx(c * oplane), d_my(c * oplane), d_exx(c * oplane), d_eyy(c * oplane),
        d_exy(c * oplane);
    std::vector<double> xs(plane), ys(plane), prod(plane);
    std::vector<double> mx(oplane), my(oplane), exx(oplane), eyy(oplane), exy(oplane), scratch;
    double total = 0.0;
    auto xd = x.data();
    auto yd = y.data();
    for (std::int64_t ch = 0; ch < c; ++ch) {
        for (std::int64_t i = 0; i < plane; ++i) {
            xs[i] = static_cast<double>(xd[ch * plane + i]);
            ys[i] = static_cast<double>(yd[ch * plane + i]);
        }
        filter_valid(xs.data(), h, w, g, mx.data(), scratch);
        filter_valid(ys.data(), h, w, g, my.data(), scratch);
        for (std::int64_t i = 0; i < plane; ++i) prod[i] = xs[i] * xs[i];
        filter_valid(prod.data(), h, w, g, exx.data(), scratch);
        for (std::int64_t i = 0; i < plane; ++i) prod[i] = ys[i] * ys[i];
        filter_valid(prod.data(), h, w, g, eyy.data(), scratch);
        for (std::int64_t i = 0; i < plane; ++i) prod[i] = xs[i] * ys[i];
        filter_valid(prod.data(), h, w, g, exy.data(), scratch);
        for (std::int64_t i = 0; i < oplane; ++i) {
            const double a1 = 2.0 * mx[i] * my[i] + c1;
            const double a2 = 2.0 * (exy[i] - mx[i] * my[i]) + c2;
            const double b1 = mx[i] * mx[i] + my[i] * my[i] + c1;
            const double b2 = (exx[i] - mx[i] * mx[i]) + (eyy[i] - my[i] * my[i]) + c2;
            const double s = (a1 * a2) / (b1 * b2);
            total += s;
            const double sc = s * inv_count;
            const auto o = ch * oplane + i;
            d_mx[o] = sc * (2.0 * my[i] / a1 - 2.0 * my[i] / a2 - 2.0 * mx[i] / b1 + 2.0 * mx[i] / b2);
            d_my[o] = sc * (2.0 * mx[i] / a1 - 2.0 * mx[i] / a2 - 2.0 * my[i] / b1 + 2.0 * my[i] / b2);
            d_exx[o] = -sc / b2;
            d_eyy[o] = -sc / b2;
            d_exy[o] = sc * 2.0 / a2;
        }
    }
    const double value = total / static_cast<double>(c * oplane);

    auto ix = x.impl();
    auto iy = y.impl();
    auto backward = [ix, iy, g, c, h, w, plane, oplane, d_mx = std::move(d_mx), d_my = std::move(d_my),
                     d_exx = std::move(d_exx), d_eyy = std::move(d_eyy),
                     d_exy = std::move(d_exy)](std::span<const T> gout) {
        std::vector<double> scratch, gm(plane), gsq(plane), gcross(plane);
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const auto o = ch * oplane;
            const auto base = ch * plane;
            auto push = [&](const std::shared_ptr<detail::TensorImpl<T>>& self,
                            const std::shared_ptr<detail::TensorImpl<T>>& other,
                            const std::vector<double>& dm, const std::vector<double>& dsq) {
                if (!self->requires_grad) {
                    return;
                }
                std::fill(gm.begin(), gm.end(), 0.0);
                std::fill(gsq.begin(), gsq.end(), 0.0);
                std::fill(gcross.begin(), gcross.end(), 0.0);
                filter_valid_adjoint(dm.data() + o, h, w, g, gm.data(), scratch);
                filter_valid_adjoint(dsq.data() + o, h, w, g, gsq.data(), scratch);
                filter_valid_adjoint(d_exy.data() + o, h, w, g, gcross.data(), scratch);
                auto& gx = self->grad_buffer();
                for (std::int64_t i = 0; i < plane; ++i) {
                    const double v = static_cast<double>(self->data[base + i]);
                    const double u = static_cast<double>(other->data[base + i]);
                    const double d = gm[i] + 2.0 * v * gsq[i] + u * gcross[i];
                    gx[base + i] += static_cast<T>(static_cast<double>(gout[0]) * d);
                }
            };
            push(ix, iy, d_mx, d_exx);
            push(iy, ix, d_my, d_eyy);
        }
    };
    return detail::make_result<T>(Shape{}, std::vector<T>{static_cast<T>(value)}, {ix, iy},
                                  std::move(backward));
}

double mse(const Tensor& x, const Tensor& y)
{
    if (x.shape() != y.shape()) {
        throw ShapeError("mse: shape mismatch " + shape_string(x.shape()) + " vs " +
                         shape_string(y.shape()));
    }
    auto a = x.data();
    auto b = y.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return a.empty() ? 0.0 : acc / static_cast<double>(a.size());
}

double psnr_from_mse(double mse_value)
{
    if (mse_value <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(1.0 / mse_value);
}

double psnr(const Tensor& x, const Tensor& y)
{
    return psnr_from_mse(mse(x, y));
}

double average(const std::vector<double>& values)
{
    if (values.empty()) {
        return 0.0;
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

template BasicTensor<float> ssim(const BasicTensor<float>&, const BasicTensor<float>&, const SsimParams&);
template BasicTensor<double> ssim(const BasicTensor<double>&, const BasicTensor<double>&, const SsimParams&);

}  // namespace ffnerv
