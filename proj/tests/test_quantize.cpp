#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ffnerv/quantize.hpp"

using namespace ffnerv;

TEST(Qat, Levels)
{
    EXPECT_EQ(qat_levels(8), 127);
    EXPECT_EQ(qat_levels(2), 1);
    EXPECT_EQ(qat_levels(16), 32767);
    EXPECT_THROW(qat_levels(1), std::invalid_argument);
    EXPECT_THROW(qat_levels(17), std::invalid_argument);
}

TEST(Qat, HalfMapsTo58Over127)
{
    EXPECT_EQ(qat_symbol(0.5, 8), 58);
    EXPECT_EQ(qat_symbol(-0.5, 8), -58);
    EXPECT_FLOAT_EQ(qat_dequantize(58, 8), 58.0F / 127.0F);
    auto q = qat_quantize(Tensor64({1}, {0.5}), 8);
    EXPECT_NEAR(q.item(), 58.0 / 127.0, 1e-7);
    EXPECT_NEAR(q.item(), 0.456693, 1e-6);
}

TEST(Qat, ZeroBinBoundary)
{
    const double edge = std::atanh(1.0 / 127.0);
    EXPECT_NEAR(edge, 0.007874, 1e-6);
    EXPECT_EQ(qat_symbol(edge - 1e-9, 8), 0);
    EXPECT_EQ(qat_symbol(-(edge - 1e-9), 8), 0);
    EXPECT_EQ(qat_symbol(edge + 1e-9, 8), 1);
    EXPECT_EQ(qat_symbol(-(edge + 1e-9), 8), -1);
    EXPECT_EQ(qat_symbol(0.0, 8), 0);
}

TEST(Qat, PropertiesOverRandomWeights)
{
    std::mt19937_64 g(1);
    std::uniform_real_distribution<double> u(-4, 4);
    for (int bits : {2, 4, 8, 12}) {
        const auto n = qat_levels(bits);
        const double edge = std::atanh(1.0 / n);
        for (int i = 0; i < 20000; ++i) {
            const double w = i % 2 == 0 ? u(g) : u(g) * 0.01;
            const auto s = qat_symbol(w, bits);
            const double v = static_cast<double>(qat_dequantize(s, bits));
            EXPECT_LE(std::abs(v), (n - 1.0) / n + 1e-7);
            EXPECT_EQ(s == 0, std::abs(w) < edge) << w;
            if (s != 0) EXPECT_EQ(s > 0, w > 0) << w;
        }
    }
}

TEST(Qat, MonotoneAndOdd)
{
    std::int32_t prev = qat_symbol(-5.0, 8);
    for (double w = -5.0; w <= 5.0; w += 1e-3) {
        const auto s = qat_symbol(w, 8);
        EXPECT_GE(s, prev);
        EXPECT_EQ(s, -qat_symbol(-w, 8));
        prev = s;
    }
}

TEST(Qat, TensorForwardMatchesScalarPath)
{
    std::mt19937_64 g(2);
    std::uniform_real_distribution<float> u(-1, 1);
    std::vector<float> v(257);
    for (auto& x : v) x = u(g);
    const auto q = qat_quantize(Tensor({257}, v), 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_EQ(q.data()[i], qat_dequantize(qat_symbol(v[i], 8), 8));
    }
}
