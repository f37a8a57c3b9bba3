#pragma once

// Central finite-difference gradient check in double precision.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ffnerv/ops.hpp"
#include "ffnerv/tensor.hpp"

namespace gradcheck {

using ffnerv::Shape;
using ffnerv::Tensor64;

using ScalarFn = std::function<Tensor64(const std::vector<Tensor64>&)>;

struct Result {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

inline Tensor64 random_tensor(const Shape& shape, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0,
                              bool requires_grad = true)
{
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(ffnerv::shape_numel(shape)));
    for (auto& x : v) x = dist(gen);
    return Tensor64(shape, std::move(v), requires_grad);
}

/// Compares the analytic gradient of f w.r.t. every input that requires
/// gradients against (f(x+h) - f(x-h)) / 2h. Relative error uses the
/// denominator max(|analytic|, |numeric|, floor).
inline Result check(const ScalarFn& f, std::vector<Tensor64> inputs, double step = 1e-3, double floor = 1e-4)
{
    for (auto& in : inputs) in.zero_grad();
    f(inputs).backward();
    Result r;
    for (auto& in : inputs) {
        if (!in.requires_grad()) continue;
        std::vector<double> analytic(in.numel(), 0.0);
        if (in.has_grad()) std::copy(in.grad().begin(), in.grad().end(), analytic.begin());
        auto data = in.mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double orig = data[i];
            double plus = 0.0;
            double minus = 0.0;
            {
                ffnerv::NoGradGuard guard;
                data[i] = orig + step;
                plus = f(inputs).item();
                data[i] = orig - step;
                minus = f(inputs).item();
            }
            data[i] = orig;
            const double numeric = (plus - minus) / (2.0 * step);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
            r.max_rel_err = std::max(r.max_rel_err, std::abs(analytic[i] - numeric) / denom);
            ++r.checked;
        }
    }
    return r;
}

// Scalar reduction sum(out * weights) with fixed random weights.
inline Tensor64 project(const Tensor64& out, const Tensor64& weights)
{
    return ffnerv::sum(ffnerv::mul(out, weights));
}

}  // namespace gradcheck
