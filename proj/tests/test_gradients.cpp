#include <chrono>

#include <gtest/gtest.h>

#include "ffnerv/ops.hpp"
#include "ffnerv/quantize.hpp"
#include "suites.hpp"

TEST(GradientSuite, EveryOpMatchesFiniteDifferences)
{
    const auto start = std::chrono::steady_clock::now();
    const auto reports = suites::gradient_suite(20);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ASSERT_FALSE(reports.empty());
    for (const auto& r : reports) {
        EXPECT_GE(r.instances, 20) << r.op;
        EXPECT_LE(r.max_rel_err, 1e-3) << r.op;
    }
    EXPECT_LE(seconds, 60.0);
}

TEST(GradientSuite, DifferentSeedsAlsoPass)
{
    for (const auto& r : suites::gradient_suite(5, 99)) {
        EXPECT_LE(r.max_rel_err, 1e-3) << r.op;
    }
}

// The quantizer is piecewise constant, so finite differences do not apply;
// its backward is the identity by definition.
TEST(GradientSuite, QatQuantizerIsStraightThrough)
{
    ffnerv::Tensor64 w({1, 1, 4}, {0.3, -0.7, 0.001, 2.0}, true);
    ffnerv::Tensor64 up({1, 1, 4}, {1.5, -2.0, 3.0, 0.25});
    ffnerv::sum(ffnerv::mul(ffnerv::qat_quantize(w, 8), up)).backward();
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(w.grad()[i], up.data()[i]);
}
