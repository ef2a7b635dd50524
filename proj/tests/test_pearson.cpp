#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "distkm/error.hpp"
#include "distkm/pearson.hpp"

using namespace distkm;

namespace {

struct Frozen {
    const char* name;
    PearsonParams params;
    PearsonType type;
    std::array<double, 5> std_quantiles;  // at q = 0.01, 0.1, 0.5, 0.9, 0.99
};

// scipy.stats reference members with these moments (tests/oracles/oracles.py):
// t(5), gamma(4), beta(2, 5), betaprime(3, 12), invgamma(9), standardized.
const Frozen kFrozen[] = {
    {"t5", {0, 1, 0, 9}, PearsonType::VII, {-2.60646356938, -1.14321486843, 0.0, 1.14321486843, 2.60646356938}},
    {"gamma4", {0, 1, 1, 4.5}, PearsonType::III, {-1.58837565683, -1.12761521859, -0.163969625575, 1.34039153413, 3.02255875742}},
    {"beta25", {0, 1, 0.59628479399994394, 2.88}, PearsonType::I, {-1.62129030087, -1.20911636069, -0.133135591966, 1.40623108213, 2.62944090056}},
    {"betaprime", {0, 1, 1.8433668044583409, 9.4841269841269806}, PearsonType::VI, {-1.28035307256, -0.987732846983, -0.233538327193, 1.26701685301, 3.4563799203}},
    {"invgamma", {0, 1, 1.7638342073763937, 9.8}, PearsonType::V, {-1.42949936087, -1.01693404789, -0.204162929914, 1.25045392411, 3.38882583089}},
};
const double kQs[] = {0.01, 0.1, 0.5, 0.9, 0.99};

}  // namespace

TEST(Pearson, Classification) {
    EXPECT_EQ(classify_pearson(0, 3), PearsonType::Normal);
    EXPECT_EQ(classify_pearson(0, 2.5), PearsonType::II);
    EXPECT_EQ(classify_pearson(0, 9), PearsonType::VII);
    EXPECT_EQ(classify_pearson(1, 4.5), PearsonType::III);
    EXPECT_EQ(classify_pearson(0.5, 3.5), PearsonType::IV);
    EXPECT_EQ(classify_pearson(-0.05, 3.10), PearsonType::IV);
}

TEST(Pearson, FrozenQuantilesMatchReference) {
    for (const auto& f : kFrozen) {
        const PearsonDistribution d(f.params);
        EXPECT_EQ(d.type(), f.type) << f.name;
        for (int k = 0; k < 5; ++k) EXPECT_NEAR(d.quantile(kQs[k]), f.std_quantiles[k], 2e-6) << f.name << " q=" << kQs[k];
        // location-scale and mirror symmetry
        PearsonParams shifted = f.params;
        shifted.mean = 3;
        shifted.std_dev = 2;
        const PearsonDistribution ds(shifted);
        PearsonParams mirrored = f.params;
        mirrored.skewness = -mirrored.skewness;
        const PearsonDistribution dm(mirrored);
        for (int k = 0; k < 5; ++k) {
            EXPECT_NEAR(ds.quantile(kQs[k]), 3 + 2 * f.std_quantiles[k], 4e-6) << f.name;
            EXPECT_NEAR(dm.quantile(1 - kQs[k]), -f.std_quantiles[k], 2e-6) << f.name;
        }
    }
}

TEST(Pearson, CdfQuantileRoundTripAllTypes) {
    const PearsonParams cases[] = {{0, 1, 0, 3},       {0, 1, 0, 2.2},    {0, 1, 0, 9},   {1, 2, 1, 4.5},
                                   {0, 1, 0.6, 2.88},  {0, 1, 0.5, 3.5},  {-4.8, 12, -0.05, 3.10},
                                   {0, 1, 1.84, 9.48}, {0, 1, 1.76, 9.8}, {0, 1, -1.2, 6.0}};
    for (const auto& p : cases) {
        const PearsonDistribution d(p);
        for (int k = 1; k < 200; ++k) {
            const double q = k / 200.0;
            EXPECT_NEAR(d.cdf(d.quantile(q)), q, 1e-6) << pearson_type_name(d.type()) << " q=" << q;
        }
        EXPECT_NEAR(d.cdf(d.quantile(1e-5)), 1e-5, 1e-6);
        EXPECT_NEAR(d.cdf(d.quantile(1 - 1e-5)), 1 - 1e-5, 1e-6);
    }
}

TEST(Pearson, Feasibility) {
    EXPECT_THROW(PearsonDistribution({0, 1, 1.0, 1.5}), InputError);
    EXPECT_THROW(PearsonDistribution({0, 0, 0, 3}), InputError);
    EXPECT_FALSE((PearsonParams{0, 1, 2, 4}).feasible());
    EXPECT_TRUE((PearsonParams{0, 1, 2, 5.1}).feasible());
}

TEST(Pearson, StandardNormalSample) {
    Rng rng(1);
    const std::size_t n = 200000;
    const auto x = sample_pearson({0, 1, 0, 3}, n, rng);
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
    EXPECT_LT(std::abs(m), 4 / std::sqrt(double(n)));
}

TEST(Pearson, HeavyTailExcessKurtosis) {
    Rng rng(2);
    const auto x = sample_pearson({0, 1, 0, 9}, 400000, rng);
    double m2 = 0, m4 = 0;
    for (double v : x) {
        m2 += v * v;
        m4 += v * v * v * v;
    }
    m2 /= x.size();
    m4 /= x.size();
    EXPECT_GT(m4 / (m2 * m2), 4.0);
}

TEST(Pearson, Deterministic) {
    Rng a(7), b(7);
    EXPECT_EQ(sample_pearson({1, 2, 0.5, 3.5}, 100, a), sample_pearson({1, 2, 0.5, 3.5}, 100, b));
}
