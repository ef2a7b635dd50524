#include <gtest/gtest.h>

#include <numeric>

#include "distkm/error.hpp"
#include "distkm/kmeans.hpp"
#include "distkm/simgen.hpp"
#include "distkm/validity.hpp"
#include "test_util.hpp"

using namespace distkm;
using distkm::testing::mixture_record;

namespace {

std::vector<UniformMixture> two_groups() {
    std::vector<UniformMixture> s;
    for (int i = 0; i < 5; ++i) s.push_back(UniformMixture::uniform(0, 1));
    for (int i = 0; i < 5; ++i) s.push_back(UniformMixture::uniform(10, 11));
    return s;
}

GramMatrix random_gram(Rng& rng, std::size_t n) {
    std::vector<UniformMixture> s;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = uniform(rng, -3, 3);
        s.push_back(UniformMixture::uniform(a, a + uniform(rng, 0.1, 3)));
    }
    return gram_exact(std::span<const UniformMixture>(s), KernelSpec::energy(0.5));
}

double brute_force(const GramMatrix& g, std::size_t K) {
    const std::size_t n = g.size();
    std::vector<std::size_t> a(n, 0);
    double best = INFINITY;
    while (true) {
        std::vector<bool> used(K);
        for (auto x : a) used[x] = true;
        if (std::all_of(used.begin(), used.end(), [](bool b) { return b; })) best = std::min(best, kernel_wcss(g, a, K));
        std::size_t i = 0;
        while (i < n && ++a[i] == K) a[i++] = 0;
        if (i == n) break;
    }
    return best;
}

}  // namespace

TEST(KernelKMeans, TotalScatterWithOneCluster) {
    Rng rng(1);
    const auto g = random_gram(rng, 9);
    const auto p = kernel_kmeans(g, 1, 3, 7);
    double diag = 0, all = 0;
    for (std::size_t i = 0; i < 9; ++i) {
        diag += g(i, i);
        for (std::size_t l = 0; l < 9; ++l) all += g(i, l);
    }
    EXPECT_NEAR(p.wcss, diag - all / 9, 1e-10);
}

TEST(KernelKMeans, EveryPointItsOwnCluster) {
    Rng rng(2);
    const auto g = random_gram(rng, 6);
    const auto p = kernel_kmeans(g, 6, 2, 3);
    EXPECT_NEAR(p.wcss, 0.0, 1e-12);
    std::vector<std::size_t> sorted = p.assignments;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(KernelKMeans, RecoversSeparatedGroups) {
    const auto s = two_groups();
    const auto g = gram_exact(std::span<const UniformMixture>(s), KernelSpec::gaussian(1));
    const std::vector<std::size_t> truth{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    for (std::uint64_t seed : {0u, 1u, 2u, 99u}) {
        const auto p = kernel_kmeans(g, 2, 1, seed);
        EXPECT_EQ(accuracy(p, truth), 1.0);
        EXPECT_NEAR(p.wcss, brute_force(g, 2), 1e-12);
    }
}

TEST(KernelKMeans, InvariantsOnRandomGrams) {
    Rng rng(3);
    int optimal = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 6 + t % 4, K = 2 + t % 2;
        const auto g = random_gram(rng, n);
        std::vector<Partition> log;
        KMeansOptions opt;
        opt.K = K;
        opt.restarts = 50;
        opt.seed = t;
        opt.restart_log = &log;
        const auto p = kernel_kmeans(g, opt);
        ASSERT_EQ(log.size(), 50u);
        for (const auto& r : log) EXPECT_TRUE(trace_nonincreasing(r.wcss_trace));
        EXPECT_TRUE(is_fixed_point(g, p));
        EXPECT_NEAR(p.wcss, kernel_wcss(g, p.assignments, K), 1e-9);
        std::vector<bool> used(K);
        for (auto a : p.assignments) used[a] = true;
        EXPECT_TRUE(std::all_of(used.begin(), used.end(), [](bool b) { return b; }));
        if (p.wcss <= brute_force(g, K) + 1e-9) ++optimal;
    }
    EXPECT_GE(optimal, 95);
}

TEST(KernelKMeans, DeterministicAndRestartDominance) {
    Rng rng(4);
    const auto g = random_gram(rng, 30);
    const auto a = kernel_kmeans(g, 3, 10, 42), b = kernel_kmeans(g, 3, 10, 42);
    EXPECT_EQ(a.assignments, b.assignments);
    EXPECT_EQ(a.wcss, b.wcss);
    EXPECT_EQ(a.wcss_trace, b.wcss_trace);
    double prev = INFINITY;
    for (std::size_t r = 1; r <= 20; ++r) {
        const double w = kernel_kmeans(g, 3, r, 42).wcss;
        EXPECT_LE(w, prev);
        prev = w;
    }
}

TEST(KernelKMeans, ParallelRestartsMatchSerial) {
    Rng rng(6);
    const auto g = random_gram(rng, 40);
    KMeansOptions opt;
    opt.K = 4;
    opt.restarts = 12;
    opt.seed = 5;
    const auto a = kernel_kmeans(g, opt);
    opt.jobs = 3;
    const auto b = kernel_kmeans(g, opt);
    EXPECT_EQ(a.assignments, b.assignments);
    EXPECT_EQ(a.restart, b.restart);
}

TEST(KernelKMeans, Errors) {
    Rng rng(5);
    const auto g = random_gram(rng, 4);
    EXPECT_THROW(kernel_kmeans(g, 5, 1, 0), InputError);
    EXPECT_THROW(kernel_kmeans(g, 2, 0, 0), ConfigError);
    EXPECT_THROW(kernel_kmeans(g, 0, 1, 0), ConfigError);
}

TEST(KernelKMeans, TraceToleranceIsRelative) {
    const double ok[] = {1e5, 1e5 + 1e-5, 9e4};
    EXPECT_TRUE(trace_nonincreasing(ok));
    const double bad[] = {1.0, 1.0 + 1e-6};
    EXPECT_FALSE(trace_nonincreasing(bad));
}

TEST(KernelKMeans, PartitionJsonRoundTrip) {
    Rng rng(8);
    const auto p = kernel_kmeans(random_gram(rng, 12), 3, 4, 11);
    const auto q = partition_from_json(partition_to_json(p));
    EXPECT_EQ(q.assignments, p.assignments);
    EXPECT_EQ(q.K, p.K);
    EXPECT_EQ(q.wcss, p.wcss);
    EXPECT_EQ(q.wcss_trace, p.wcss_trace);
    EXPECT_EQ(q.seed, p.seed);
    auto j = partition_to_json(p);
    j["assignments"][0] = 7;
    EXPECT_THROW(partition_from_json(j), InputError);
}

TEST(WassersteinKMeans, RecoversSeparatedGroupsAndSingleCluster) {
    std::vector<DistributionRecord> s;
    for (const auto& m : two_groups()) s.push_back(mixture_record(m));
    const std::vector<std::size_t> truth{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    for (auto mode : {CentroidMode::QuantileMean, CentroidMode::MixtureMean}) {
        KMeansOptions opt;
        opt.K = 2;
        opt.restarts = 3;
        const auto p = wasserstein_kmeans(s, opt, mode, 256);
        EXPECT_EQ(accuracy(p, truth), 1.0);
        EXPECT_TRUE(is_fixed_point(s, p, mode, 256));
    }
    // K = 1, quantile mean: WCSS is the spread around the averaged quantile
    // function; halves at 0.5 and 10.5 average to 5.5 everywhere.
    KMeansOptions one;
    one.K = 1;
    const auto p = wasserstein_kmeans(s, one, CentroidMode::QuantileMean, 256);
    EXPECT_NEAR(p.wcss, 10 * 25.0, 1e-9);
}

TEST(WassersteinKMeans, SeparableModelRow) {
    Rng rng(derive_seed(1, 0));
    const auto s = generate_univariate(UnivariateModelConfig::preset("default", 0.5), rng);
    std::vector<std::string> labels;
    for (const auto& r : s) labels.push_back(*r.label);
    KMeansOptions opt;
    opt.K = 2;
    opt.restarts = 10;
    const auto p = wasserstein_kmeans(s, opt);
    EXPECT_EQ(accuracy(p, encode_labels(labels)), 1.0);
}

TEST(WassersteinKMeans, RejectsMultivariate) {
    std::vector<DistributionRecord> s{distkm::testing::empirical_record(
                                          EmpiricalDistribution(2, std::vector<double>{1, 2, 3, 4})),
                                      distkm::testing::empirical_record(
                                          EmpiricalDistribution(2, std::vector<double>{1, 2, 5, 4}))};
    KMeansOptions opt;
    opt.K = 1;
    EXPECT_THROW(wasserstein_kmeans(s, opt), ModeError);
}

TEST(KernelKMeans, IndefiniteGramIsShiftedAndMonotone) {
    // feature Gram of three groups minus a random diagonal, like an estimated Gram
    const std::size_t n = 45;
    Rng rng(12);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> x(n * 3);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < 3; ++d) x[i * 3 + d] = (d == i % 3 ? 3.0 : 0.0) + z(rng);
    std::vector<double> v(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < n; ++l)
            for (std::size_t d = 0; d < 3; ++d) v[i * n + l] += x[i * 3 + d] * x[l * 3 + d];
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] -= 6.0 * uniform01(rng);
    const GramMatrix g(n, v, GramMode::Estimated, KernelSpec::energy(0.5));

    const double s = lloyd_diagonal_shift(g);
    EXPECT_GT(s, 0.0);

    KMeansOptions opt;
    opt.K = 3;
    opt.restarts = 300;
    opt.seed = 5;
    std::vector<Partition> log;
    opt.restart_log = &log;
    const Partition best = kernel_kmeans(g, opt);
    ASSERT_EQ(log.size(), 300u);
    for (const auto& p : log) {
        EXPECT_TRUE(trace_nonincreasing(p.wcss_trace));
        EXPECT_TRUE(is_fixed_point(g, p));
    }

    // reported WCSS is the unshifted quadratic form
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) q += g(i, i);
    for (const auto& members : best.clusters()) {
        double sum = 0.0;
        for (auto i : members)
            for (auto l : members) sum += g(i, l);
        q -= sum / static_cast<double>(members.size());
    }
    EXPECT_NEAR(best.wcss, q, 1e-9 * std::abs(q));
}

TEST(KernelKMeans, NoShiftForPsdGram) {
    const std::size_t n = 12;
    Rng rng(3);
    std::vector<double> pts(n);
    for (auto& p : pts) p = uniform01(rng);
    std::vector<double> v(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < n; ++l) v[i * n + l] = std::exp(-(pts[i] - pts[l]) * (pts[i] - pts[l]));
    EXPECT_EQ(lloyd_diagonal_shift(GramMatrix(n, v, GramMode::Exact, KernelSpec::gaussian(1.0))), 0.0);
}
