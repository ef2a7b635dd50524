#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "distkm/error.hpp"
#include "distkm/kernels.hpp"
#include "distkm/rng.hpp"
#include "distkm/simd/dispatch.hpp"

using namespace distkm;
using namespace distkm::simd;

namespace {

struct Points {
    std::vector<double> data, weights;
    std::size_t dim, count;
    PointsView view() const { return {data, dim, count, weights}; }
};

Points random_points(std::size_t dim, std::size_t count, bool weighted, Rng& rng) {
    Points p{std::vector<double>(dim * count), {}, dim, count};
    for (auto& v : p.data) v = uniform(rng, -4, 4);
    if (weighted) {
        p.weights.resize(count);
        for (auto& w : p.weights) w = 1 + rng() % 5;
    }
    return p;
}

}  // namespace

TEST(Simd, RadialPairSumAvx2MatchesScalar) {
    if (!isa_supported(Isa::Avx2)) GTEST_SKIP() << "CPU lacks AVX2/FMA";
    Rng rng(42);
    const RadialTerm terms[] = {{RadialKind::Gaussian, 0.5}, {RadialKind::Gaussian, 3.0}, {RadialKind::Laplace, 1.0},
                                {RadialKind::Power, 0.25}, {RadialKind::Power, 0.5}, {RadialKind::Power, 0.75}};
    for (std::size_t dim : {1u, 2u, 3u}) {
        // sizes around the vector width to exercise remainders
        for (std::size_t n : {1u, 3u, 4u, 5u, 17u, 64u, 257u}) {
            const auto x = random_points(dim, n, n % 2 == 1, rng);
            const auto y = random_points(dim, n + 2, false, rng);
            for (const auto& t : terms) {
                const double a = scalar::radial_pair_sum(t, x.view(), y.view());
                const double b = avx2::radial_pair_sum(t, x.view(), y.view());
                EXPECT_NEAR(b, a, 1e-12 * std::abs(a)) << "dim " << dim << " n " << n;
                // self pairs: Power terms have a zero diagonal that must stay exact
                const double sa = scalar::radial_pair_sum(t, x.view(), x.view());
                const double sb = avx2::radial_pair_sum(t, x.view(), x.view());
                EXPECT_NEAR(sb, sa, 1e-12 * std::abs(sa) + 1e-300);
            }
        }
    }
}

TEST(Simd, RadialPairSumScalarIsTheDefinition) {
    Rng rng(1);
    const auto x = random_points(2, 7, true, rng), y = random_points(2, 5, false, rng);
    const RadialTerm t{RadialKind::Laplace, 0.8};
    double ref = 0;
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            const double dx = x.data[i] - y.data[j], dy = x.data[7 + i] - y.data[5 + j];
            ref += x.weights[i] * eval_radial(t, dx * dx + dy * dy);
        }
    EXPECT_NEAR(scalar::radial_pair_sum(t, x.view(), y.view()), ref, 1e-13 * ref);
}

TEST(Simd, SobelAvx2IsBitExact) {
    if (!isa_supported(Isa::Avx2)) GTEST_SKIP() << "CPU lacks AVX2/FMA";
    Rng rng(3);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{3, 3}, {3, 7}, {9, 4}, {17, 33}, {64, 61}}) {
        std::vector<double> img(h * w);
        for (auto& v : img) v = static_cast<double>(rng() % 65536);
        std::vector<double> a((h - 2) * (w - 2)), b(a.size());
        scalar::sobel_norm(img, h, w, a);
        avx2::sobel_norm(img, h, w, b);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]) << h << "x" << w << " at " << i;
    }
}

TEST(Simd, DispatchOverride) {
    const Isa before = active_isa();
    set_isa_override(Isa::Scalar);
    EXPECT_EQ(active_isa(), Isa::Scalar);
    if (!isa_supported(Isa::Avx2)) {
        EXPECT_THROW(set_isa_override(Isa::Avx2), ConfigError);
    }
    set_isa_override(std::nullopt);
    EXPECT_EQ(active_isa(), best_isa());
    EXPECT_EQ(active_isa(), before);
    EXPECT_EQ(isa_name(Isa::Scalar), "scalar");
}
