#include "suites.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>

#include "ffnerv/loss.hpp"
#include "ffnerv/metrics.hpp"
#include "ffnerv/model.hpp"
#include "ffnerv/ops.hpp"
#include "ffnerv/temporal_grid.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace suites {

namespace {

using namespace ffnerv;
using gradcheck::project;
using gradcheck::random_tensor;

using Gen = std::mt19937_64;
using Vec = std::vector<double>;

std::int64_t pick(Gen& g, std::int64_t lo, std::int64_t hi)
{
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(g);
}

double uni(Gen& g, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(g);
}

Tensor64 fixed(const Shape& shape, Gen& g)
{
    return random_tensor(shape, g, -1.0, 1.0, false);
}

// Keeps `coord + d` at least `margin` away from every integer, where the
// bilinear weights and the border clamp have kinks.
double away_from_integers(double coord, double d, double margin = 0.02)
{
    const double s = coord + d;
    const double frac = s - std::floor(s);
    if (frac < margin) return d + margin * 2.5;
    if (frac > 1.0 - margin) return d - margin * 2.5;
    return d;
}

// b with |a - b| >= 0.05 element-wise, so L1 stays away from its kink.
Tensor64 separated(const Tensor64& a, Gen& g)
{
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double gap = uni(g, 0.05, 0.4);
        v[i] = a.data()[i] + (uni(g, 0, 1) < 0.5 ? -gap : gap);
    }
    return Tensor64(a.shape(), std::move(v), true);
}

gradcheck::Result unary(Gen& g, const std::function<Tensor64(const Tensor64&)>& op, double lo = -2, double hi = 2)
{
    const Shape s{pick(g, 1, 3), pick(g, 1, 5), pick(g, 1, 5)};
    auto x = random_tensor(s, g, lo, hi);
    auto wts = fixed(op(x.detach()).shape(), g);
    return gradcheck::check([&](const std::vector<Tensor64>& in) { return project(op(in[0]), wts); }, {x});
}

gradcheck::Result binary(Gen& g, const std::function<Tensor64(const Tensor64&, const Tensor64&)>& op)
{
    const Shape s{pick(g, 1, 3), pick(g, 1, 5), pick(g, 1, 5)};
    auto a = random_tensor(s, g);
    auto b = random_tensor(s, g);
    auto wts = fixed(s, g);
    return gradcheck::check([&](const std::vector<Tensor64>& in) { return project(op(in[0], in[1]), wts); },
                            {a, b});
}

gradcheck::Result conv_instance(Gen& g)
{
    const std::int64_t groups = pick(g, 1, 3);
    const std::int64_t c = groups * pick(g, 1, 2);
    const std::int64_t o = groups * pick(g, 1, 2);
    const int k = pick(g, 0, 1) == 0 ? 1 : 3;
    const int pad = pick(g, 0, 3) == 0 ? 0 : k / 2;
    const std::int64_t h = pick(g, k, 5);
    const std::int64_t w = pick(g, k, 5);
    auto x = random_tensor({c, h, w}, g);
    auto wt = random_tensor({o, c / groups, k, k}, g);
    auto b = random_tensor({o}, g);
    auto out_shape = conv2d(x.detach(), wt.detach(), b.detach(), static_cast<int>(groups), pad).shape();
    auto wts = fixed(out_shape, g);
    return gradcheck::check(
        [&](const std::vector<Tensor64>& in) {
            return project(conv2d(in[0], in[1], in[2], static_cast<int>(groups), pad), wts);
        },
        {x, wt, b});
}

gradcheck::Result warp_instance(Gen& g)
{
    const std::int64_t c = pick(g, 1, 3);
    const std::int64_t h = pick(g, 1, 5);
    const std::int64_t w = pick(g, 2, 5);
    auto frame = random_tensor({c, h, w}, g, 0, 1);
    std::vector<double> flow(static_cast<std::size_t>(2 * h * w));
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            const auto i = static_cast<std::size_t>(y * w + x);
            flow[i] = away_from_integers(static_cast<double>(x), uni(g, -1.8, 1.8));
            flow[i + static_cast<std::size_t>(h * w)] = away_from_integers(static_cast<double>(y), uni(g, -1.8, 1.8));
        }
    Tensor64 fl({2, h, w}, std::move(flow), true);
    auto wts = fixed({c, h, w}, g);
    return gradcheck::check(
        [&](const std::vector<Tensor64>& in) { return project(bilinear_warp(in[0], in[1]), wts); }, {frame, fl});
}

gradcheck::Result upsample_instance(Gen& g)
{
    const std::int64_t c = pick(g, 1, 3);
    const std::int64_t h = pick(g, 1, 4);
    const std::int64_t w = pick(g, 1, 4);
    const std::int64_t oh = pick(g, h, 5);
    const std::int64_t ow = pick(g, w, 5);
    auto x = random_tensor({c, h, w}, g);
    auto wts = fixed({c, oh, ow}, g);
    return gradcheck::check(
        [&](const std::vector<Tensor64>& in) { return project(bilinear_upsample(in[0], oh, ow), wts); }, {x});
}

gradcheck::Result ssim_instance(Gen& g, int index)
{
    const std::int64_t c = pick(g, 1, 3);
    // Mostly small images (shrunken window); every fourth uses the full 11x11 window.
    const std::int64_t h = index % 4 == 3 ? pick(g, 11, 13) : pick(g, 2, 5);
    const std::int64_t w = index % 4 == 3 ? pick(g, 11, 13) : pick(g, 2, 5);
    auto x = random_tensor({c, h, w}, g, 0, 1);
    auto y = random_tensor({c, h, w}, g, 0, 1);
    return gradcheck::check([&](const std::vector<Tensor64>& in) { return ssim(in[0], in[1]); }, {x, y});
}

gradcheck::Result frame_loss_instance(Gen& g)
{
    const Shape s{pick(g, 1, 3), pick(g, 2, 5), pick(g, 2, 5)};
    auto target = random_tensor(s, g, 0, 1, false);
    auto pred = separated(target, g);
    const double alpha = uni(g, 0, 1);
    return gradcheck::check(
        [&](const std::vector<Tensor64>& in) { return frame_loss(in[0], target, alpha); }, {pred});
}

gradcheck::Result composite_loss_instance(Gen& g)
{
    const Shape s{3, pick(g, 2, 5), pick(g, 2, 5)};
    auto target = random_tensor(s, g, 0, 1, false);
    LossWeights lw;
    lw.alpha = uni(g, 0, 1);
    lw.lambda1 = uni(g, 0, 0.5);
    lw.lambda2 = uni(g, 0, 0.5);
    return gradcheck::check(
        [&](const std::vector<Tensor64>& in) { return composite_loss(in[0], in[1], in[2], target, lw); },
        {separated(target, g), separated(target, g), separated(target, g)});
}

gradcheck::Result sample_grid_instance(Gen& g)
{
    const std::int64_t s = pick(g, 1, 5);
    const std::int64_t frames = pick(g, 1, 9);
    const std::int64_t t = pick(g, 0, frames - 1);
    const Shape shape{s, pick(g, 1, 3), pick(g, 1, 4), pick(g, 1, 4)};
    auto v = random_tensor(shape, g);
    auto wts = fixed({shape[1], shape[2], shape[3]}, g);
    return gradcheck::check(
        [&](const std::vector<Tensor64>& in) { return project(sample_grid(in[0], t, frames), wts); }, {v});
}

gradcheck::Result blend_instance(Gen& g)
{
    const std::int64_t s = pick(g, 1, 4);
    const Shape shape{s, pick(g, 1, 3), pick(g, 1, 4), pick(g, 1, 4)};
    const auto a = pick(g, 0, s - 1);
    const auto b = pick(g, 0, s - 1);
    const double wa = uni(g, 0, 1);
    auto v = random_tensor(shape, g);
    auto wts = fixed({shape[1], shape[2], shape[3]}, g);
    return gradcheck::check(
        [&](const std::vector<Tensor64>& in) { return project(blend_slices(in[0], a, wa, b, 1.0 - wa), wts); }, {v});
}

gradcheck::Result concat_instance(Gen& g)
{
    const std::int64_t h = pick(g, 1, 4);
    const std::int64_t w = pick(g, 1, 4);
    std::vector<Tensor64> parts;
    std::int64_t total = 0;
    for (std::int64_t i = 0, n = pick(g, 1, 3); i < n; ++i) {
        const auto c = pick(g, 1, 3);
        total += c;
        parts.push_back(random_tensor({c, h, w}, g));
    }
    auto wts = fixed({total, h, w}, g);
    return gradcheck::check([&](const std::vector<Tensor64>& in) { return project(concat_channels(in), wts); },
                            parts);
}

gradcheck::Result slice_instance(Gen& g)
{
    const std::int64_t c = pick(g, 1, 5);
    const auto begin = pick(g, 0, c - 1);
    const auto count = pick(g, 1, c - begin);
    auto x = random_tensor({c, pick(g, 1, 4), pick(g, 1, 4)}, g);
    auto wts = fixed({count, x.dim(1), x.dim(2)}, g);
    return gradcheck::check(
        [&](const std::vector<Tensor64>& in) { return project(slice_channels(in[0], begin, count), wts); }, {x});
}

gradcheck::Result expand_instance(Gen& g)
{
    const std::int64_t c = pick(g, 1, 4);
    auto x = random_tensor({1, pick(g, 1, 4), pick(g, 1, 4)}, g);
    auto wts = fixed({c, x.dim(1), x.dim(2)}, g);
    return gradcheck::check(
        [&](const std::vector<Tensor64>& in) { return project(expand_channels(in[0], c), wts); }, {x});
}

// conv -> GELU -> pixel_shuffle -> L1 against a fixed target.
gradcheck::Result composite_graph_instance(Gen& g)
{
    const std::int64_t s = pick(g, 1, 2);
    const std::int64_t c = pick(g, 1, 3);
    const std::int64_t o = pick(g, 1, 2) * s * s;
    const std::int64_t h = pick(g, 2, 4);
    const std::int64_t w = pick(g, 2, 4);
    auto x = random_tensor({c, h, w}, g);
    auto wt = random_tensor({o, c, 3, 3}, g);
    auto b = random_tensor({o}, g);
    Tensor64 out;
    {
        NoGradGuard guard;
        out = pixel_shuffle(gelu(conv2d(x, wt, b, 1, 1)), static_cast<int>(s));
    }
    // Target offset from the starting output so the L1 kinks are out of reach.
    auto target = separated(out, g).detach();
    return gradcheck::check(
        [&](const std::vector<Tensor64>& in) {
            return l1_mean(pixel_shuffle(gelu(conv2d(in[0], in[1], in[2], 1, 1)), static_cast<int>(s)), target);
        },
        {x, wt, b});
}

// Neighbor aggregation built from primitives: upsampled flows, warps and a
// channel softmax over upsampled weight logits.
gradcheck::Result aggregation_graph_instance(Gen& g)
{
    const std::int64_t n = pick(g, 1, 3);
    const std::int64_t fh = pick(g, 1, 2);
    const std::int64_t fw = pick(g, 1, 2);
    const std::int64_t h = fh * 2;
    const std::int64_t w = fw * 2;
    std::vector<Tensor64> inputs;
    for (std::int64_t i = 0; i < n; ++i) inputs.push_back(random_tensor({3, h, w}, g, 0, 1));
    for (std::int64_t i = 0; i < n; ++i) inputs.push_back(random_tensor({1, fh, fw}, g));
    // Flows are fixed, so the graph is smooth in every checked input.
    for (std::int64_t i = 0; i < n; ++i) inputs.push_back(random_tensor({2, fh, fw}, g, -2, 2, false));
    auto wts = fixed({3, h, w}, g);
    return gradcheck::check(
        [&](const std::vector<Tensor64>& in) {
            std::vector<Tensor64> logits;
            for (std::int64_t i = 0; i < n; ++i) logits.push_back(bilinear_upsample(in[static_cast<std::size_t>(n + i)], h, w));
            auto weights = softmax_channels(concat_channels(logits));
            Tensor64 acc;
            for (std::int64_t i = 0; i < n; ++i) {
                auto flow = bilinear_upsample(in[static_cast<std::size_t>(2 * n + i)], h, w);
                auto warped = bilinear_warp(in[static_cast<std::size_t>(i)], flow);
                auto term = mul(expand_channels(slice_channels(weights, i, 1), 3), warped);
                acc = i == 0 ? term : add(acc, term);
            }
            return project(acc, wts);
        },
        inputs);
}

}  // namespace

std::vector<GradReport> gradient_suite(int instances, std::uint64_t seed)
{
    std::vector<std::pair<std::string, std::function<gradcheck::Result(Gen&, int)>>> ops = {
        {"add", [](Gen& g, int) { return binary(g, [](auto& a, auto& b) { return add(a, b); }); }},
        {"sub", [](Gen& g, int) { return binary(g, [](auto& a, auto& b) { return sub(a, b); }); }},
        {"mul", [](Gen& g, int) { return binary(g, [](auto& a, auto& b) { return mul(a, b); }); }},
        {"scale", [](Gen& g, int) { const double f = uni(g, -3, 3); return unary(g, [f](auto& x) { return scale(x, f); }); }},
        {"add_scalar", [](Gen& g, int) { const double v = uni(g, -3, 3); return unary(g, [v](auto& x) { return add_scalar(x, v); }); }},
        {"sigmoid", [](Gen& g, int) { return unary(g, [](auto& x) { return sigmoid(x); }, -4, 4); }},
        {"gelu", [](Gen& g, int) { return unary(g, [](auto& x) { return gelu(x); }, -3, 3); }},
        {"sum", [](Gen& g, int) {
             auto x = random_tensor({pick(g, 1, 3), pick(g, 1, 5), pick(g, 1, 5)}, g);
             return gradcheck::check([](const std::vector<Tensor64>& in) { return sum(mul(in[0], in[0])); }, {x});
         }},
        {"mean", [](Gen& g, int) {
             auto x = random_tensor({pick(g, 1, 3), pick(g, 1, 5), pick(g, 1, 5)}, g);
             return gradcheck::check([](const std::vector<Tensor64>& in) { return mean(mul(in[0], in[0])); }, {x});
         }},
        {"l1_mean", [](Gen& g, int) {
             auto a = random_tensor({pick(g, 1, 3), pick(g, 1, 5), pick(g, 1, 5)}, g);
             auto b = separated(a, g);
             return gradcheck::check([](const std::vector<Tensor64>& in) { return l1_mean(in[0], in[1]); }, {a, b});
         }},
        {"conv2d", [](Gen& g, int) { return conv_instance(g); }},
        {"pixel_shuffle", [](Gen& g, int) {
             const int s = static_cast<int>(pick(g, 1, 2));
             const std::int64_t c = pick(g, 1, 2) * s * s;
             auto x = random_tensor({c, pick(g, 1, 3), pick(g, 1, 3)}, g);
             auto wts = fixed({c / (s * s), x.dim(1) * s, x.dim(2) * s}, g);
             return gradcheck::check(
                 [&](const std::vector<Tensor64>& in) { return project(pixel_shuffle(in[0], s), wts); }, {x});
         }},
        {"bilinear_warp", [](Gen& g, int) { return warp_instance(g); }},
        {"bilinear_upsample", [](Gen& g, int) { return upsample_instance(g); }},
        {"softmax_channels", [](Gen& g, int) { return unary(g, [](auto& x) { return softmax_channels(x); }, -3, 3); }},
        {"concat_channels", [](Gen& g, int) { return concat_instance(g); }},
        {"slice_channels", [](Gen& g, int) { return slice_instance(g); }},
        {"expand_channels", [](Gen& g, int) { return expand_instance(g); }},
        {"blend_slices", [](Gen& g, int) { return blend_instance(g); }},
        {"sample_grid", [](Gen& g, int) { return sample_grid_instance(g); }},
        {"ssim", [](Gen& g, int i) { return ssim_instance(g, i); }},
        {"frame_loss", [](Gen& g, int) { return frame_loss_instance(g); }},
        {"composite_loss", [](Gen& g, int) { return composite_loss_instance(g); }},
        {"conv_gelu_shuffle_l1", [](Gen& g, int) { return composite_graph_instance(g); }},
        {"aggregation_graph", [](Gen& g, int) { return aggregation_graph_instance(g); }},
    };
    std::vector<GradReport> out;
    Gen gen(seed);
    for (const auto& [name, make] : ops) {
        GradReport r{name, 0, 0.0};
        for (int i = 0; i < instances; ++i) {
            const auto res = make(gen, i);
            r.max_rel_err = std::max(r.max_rel_err, res.max_rel_err);
            ++r.instances;
        }
        out.push_back(r);
    }
    return out;
}

namespace {

double max_abs(std::span<const double> a, const Vec& b)
{
    double m = a.size() == b.size() ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Vec values(const Tensor64& t)
{
    return {t.data().begin(), t.data().end()};
}

Vec values(const Tensor& t)
{
    return {t.data().begin(), t.data().end()};
}

Tensor64 tensor(const Shape& shape, Vec v)
{
    return Tensor64(shape, std::move(v));
}

}  // namespace

std::vector<OracleReport> oracle_suite(std::uint64_t seed)
{
    Gen g(seed);
    std::vector<OracleReport> out;
    auto report = [&](const std::string& name, double d) { out.push_back({name, d}); };

    {
        auto x = random_tensor({3, 5, 5}, g, -1, 1, false);
        auto w = random_tensor({4, 3, 3, 3}, g, -1, 1, false);
        auto b = random_tensor({4}, g, -1, 1, false);
        const auto ref = oracle::conv_dense(values(x), 3, 5, 5, values(w), values(b), 4, 3, 1);
        report("conv2d vs nested loops", max_abs(conv2d(x, w, b, 1, 1).data(), ref));
        // The same check in 32-bit storage.
        const auto f = conv2d(cast<float>(x), cast<float>(w), cast<float>(b), 1, 1);
        report("conv2d float32 vs nested loops", max_abs(Tensor64(cast<double>(f)).data(), ref));
    }
    {
        double worst = 0.0;
        for (const auto& [c, o, groups, k] : std::vector<std::array<std::int64_t, 4>>{
                 {8, 8, 4, 3}, {4, 12, 4, 3}, {6, 4, 2, 1}, {9, 6, 3, 3}}) {
            auto x = random_tensor({c, 5, 6}, g, -1, 1, false);
            auto w = random_tensor({o, c / groups, k, k}, g, -1, 1, false);
            auto b = random_tensor({o}, g, -1, 1, false);
            const auto dense = oracle::block_diagonal(values(w), c, o, k, groups);
            const auto ref = oracle::conv_dense(values(x), c, 5, 6, dense, values(b), o, k, k / 2);
            worst = std::max(worst, max_abs(conv2d(x, w, b, static_cast<int>(groups), static_cast<int>(k / 2)).data(), ref));
        }
        report("grouped conv2d vs block-diagonal dense conv", worst);
    }
    {
        auto x = random_tensor({8, 3, 3}, g, -1, 1, false);
        report("pixel_shuffle vs index remap", max_abs(pixel_shuffle(x, 2).data(), oracle::pixel_shuffle(values(x), 2, 3, 3, 2)));
    }
    {
        double worst = 0.0;
        auto v = random_tensor({4, 2, 3, 3}, g, -1, 1, false);
        const auto vals = values(v);
        auto slice = [&](std::int64_t k) { return Vec(vals.begin() + k * 18, vals.begin() + (k + 1) * 18); };
        auto mix = [&](std::int64_t a, double wa, std::int64_t b, double wb) {
            Vec r(18);
            for (std::size_t i = 0; i < 18; ++i) r[i] = wa * slice(a)[i] + wb * slice(b)[i];
            return r;
        };
        // s=4, T=8: t=5 -> t_hat 2.5 -> halfway between slices 2 and 3.
        worst = std::max(worst, max_abs(sample_grid(v, 5, 8).data(), mix(2, 0.5, 3, 0.5)));
        // t=7 -> t_hat 3.5, ceil clamps to the last slice.
        worst = std::max(worst, max_abs(sample_grid(v, 7, 8).data(), slice(3)));
        // Integer t_hat selects one slice.
        worst = std::max(worst, max_abs(sample_grid(v, 4, 8).data(), slice(2)));
        worst = std::max(worst, max_abs(sample_grid(v, 0, 8).data(), slice(0)));
        // T=6: t=1 -> t_hat 2/3.
        worst = std::max(worst, max_abs(sample_grid(v, 1, 6).data(), mix(0, 1.0 / 3.0, 1, 2.0 / 3.0)));
        // s > T: t=2, T=3 -> t_hat 8/3.
        worst = std::max(worst, max_abs(sample_grid(v, 2, 3).data(), mix(2, 1.0 / 3.0, 3, 2.0 / 3.0)));
        report("sample_grid vs hand interpolation", worst);
    }
    {
        double worst = 0.0;
        // Constant flow (+0.5, 0) on a 1x1x2 frame (a, b): first pixel (a + b) / 2.
        auto f = tensor({1, 1, 2}, {0.3, 0.9});
        auto w = bilinear_warp(f, tensor({2, 1, 2}, {0.5, 0.5, 0.0, 0.0}));
        worst = std::max(worst, std::abs(w.data()[0] - 0.6));
        worst = std::max(worst, std::abs(w.data()[1] - 0.9));
        for (int i = 0; i < 5; ++i) {
            auto frame = random_tensor({3, 5, 6}, g, 0, 1, false);
            auto flow = random_tensor({2, 5, 6}, g, -3, 3, false);
            worst = std::max(worst, max_abs(bilinear_warp(frame, flow).data(), oracle::warp(values(frame), 3, 5, 6, values(flow))));
        }
        report("bilinear_warp vs hand bilinear", worst);
    }
    {
        auto x = random_tensor({1, 2, 2}, g, -1, 1, false);
        const auto v = values(x);
        // Closed form per output pixel of a 2x2 -> 4x4 resize: source coordinate
        // (i + 0.5) / 2 - 0.5 is -0.25, 0.25, 0.75, 1.25, clamped to [0, 1].
        const double src[4] = {0.0, 0.25, 0.75, 1.0};
        Vec ref(16);
        for (int y = 0; y < 4; ++y)
            for (int xx = 0; xx < 4; ++xx) {
                const double fy = src[y];
                const double fx = src[xx];
                ref[static_cast<std::size_t>(y * 4 + xx)] = (1 - fy) * ((1 - fx) * v[0] + fx * v[1]) + fy * ((1 - fx) * v[2] + fx * v[3]);
            }
        double worst = max_abs(bilinear_upsample(x, 4, 4).data(), ref);
        auto y = random_tensor({2, 3, 4}, g, -1, 1, false);
        worst = std::max(worst, max_abs(bilinear_upsample(y, 7, 9).data(), oracle::upsample(values(y), 2, 3, 4, 7, 9)));
        report("bilinear_upsample vs closed form", worst);
    }
    {
        auto s = softmax_channels(tensor({2, 1, 1}, {0.0, std::log(3.0)}));
        double worst = std::max(std::abs(s.data()[0] - 0.25), std::abs(s.data()[1] - 0.75));
        auto x = random_tensor({4, 3, 3}, g, -5, 5, false);
        worst = std::max(worst, max_abs(softmax_channels(x).data(), oracle::softmax_channels(values(x), 4, 3, 3)));
        report("softmax_channels vs exp ratio", worst);
    }
    {
        double worst = 0.0;
        for (const auto& [c, h, w] : std::vector<std::array<std::int64_t, 3>>{{3, 16, 16}, {1, 12, 20}, {2, 6, 8}}) {
            auto x = random_tensor({c, h, w}, g, 0, 1, false);
            auto y = random_tensor({c, h, w}, g, 0, 1, false);
            worst = std::max(worst, std::abs(ssim(x, y).item() - oracle::ssim(values(x), values(y), c, h, w)));
        }
        // x = 0, y = 1 everywhere: C1 / (1 + C1).
        const double c1 = 1e-4;
        auto zero = Tensor64::zeros({1, 11, 11});
        auto one = Tensor64::full({1, 11, 11}, 1.0);
        worst = std::max(worst, std::abs(ssim(zero, one).item() - c1 / (1 + c1)));
        report("ssim vs sliding window", worst);
    }
    {
        // Two pixels (1 x 2), two neighbors, flows at full resolution.
        //   neighbor 0 = [0.2, 0.6], flow dx = (+0.5, -1.0): samples x=0.5 and x=0
        //     -> [0.4, 0.2]
        //   neighbor 1 = [0.8, 0.4], flow dx = (+0.25, -0.25): samples x=0.25 and x=0.75
        //     -> [0.7, 0.5]
        //   weight logits pixel 0: (0, ln 3) -> (0.25, 0.75); pixel 1: (ln 2, 0) -> (2/3, 1/3)
        //   aggregated: [0.25*0.4 + 0.75*0.7, 2/3*0.2 + 1/3*0.5] = [0.625, 0.3]
        auto one_channel = [](float a, float b) { return Tensor({1, 1, 2}, {a, b}); };
        auto rgb = [](float a, float b) { return Tensor({3, 1, 2}, {a, b, a, b, a, b}); };
        FrameComponents comp;
        comp.independent = rgb(0.5F, 0.5F);
        comp.flows = {Tensor({2, 1, 2}, {0.5F, -1.0F, 0.0F, 0.0F}), Tensor({2, 1, 2}, {0.25F, -0.25F, 0.0F, 0.0F})};
        comp.flow_weights = {one_channel(0.0F, static_cast<float>(std::log(2.0))),
                             one_channel(static_cast<float>(std::log(3.0)), 0.0F)};
        comp.weight_aggregated = one_channel(0.0F, 0.0F);
        comp.weight_independent = one_channel(0.0F, static_cast<float>(std::log(3.0)));
        const std::vector<Tensor> neighbors{rgb(0.2F, 0.6F), rgb(0.8F, 0.4F)};
        const auto agg = aggregate(comp, neighbors);
        const Vec expected_agg{0.625, 0.3, 0.625, 0.3, 0.625, 0.3};
        double worst = max_abs(Tensor64(cast<double>(agg)).data(), expected_agg);
        // final: pixel 0 (a, b) = (0.5, 0.5), pixel 1 (0.25, 0.75), I = 0.5
        //   -> [0.5*0.625 + 0.5*0.5, 0.25*0.3 + 0.75*0.5] = [0.5625, 0.45]
        const auto fin = final_frame(comp, agg);
        const Vec expected_final{0.5625, 0.45, 0.5625, 0.45, 0.5625, 0.45};
        worst = std::max(worst, max_abs(Tensor64(cast<double>(fin)).data(), expected_final));
        report("aggregation two-pixel hand case", worst);
    }
    return out;
}

}  // namespace suites
