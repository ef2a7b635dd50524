// Acceptance checks: one PASS/FAIL/SKIP line per criterion.
//
//   distkm_acceptance [--only 1,5,9] [--expected-fail 4] [--jobs N]
//
// Exit status is 0 when the set of failing criteria equals the expected-fail
// set (among the criteria that ran), 1 otherwise.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <spdlog/spdlog.h>

#include "distkm/experiment.hpp"
#include "distkm/gram.hpp"
#include "distkm/kmeans.hpp"
#include "distkm/parallel.hpp"
#include "distkm/pearson.hpp"
#include "distkm/sar.hpp"
#include "distkm/simgen.hpp"
#include "distkm/validity.hpp"

using namespace distkm;
using Clock = std::chrono::steady_clock;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
    Status status = Status::Pass;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

std::string sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

Outcome check(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

int g_jobs = 1;
LloydDiagnostics g_lloyd;  // accumulated over every acceptance run

void absorb(const LloydDiagnostics& d) {
    g_lloyd.restarts += d.restarts;
    g_lloyd.trace_violations += d.trace_violations;
    g_lloyd.non_fixed_points += d.non_fixed_points;
    g_lloyd.returned += d.returned;
    g_lloyd.non_converged += d.non_converged;
}

double mean_acc(const ExperimentResult& r, const std::string& param, const std::string& method) {
    const auto* row = r.table.find(param, method);
    return row ? row->mean_accuracy : std::nan("");
}

// --- 1-2: univariate model, table1 preset ------------------------------------

std::optional<ExperimentResult> g_table1;

const ExperimentResult& table1() {
    if (!g_table1) {
        auto cfg = ExperimentConfig::preset("table1");
        cfg.source.lambdas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.9};
        cfg.replications = 20;
        cfg.jobs = g_jobs;
        g_table1 = run_experiment(cfg);
        absorb(g_table1->lloyd);
    }
    return *g_table1;
}

Outcome criterion1() {
    const auto t0 = Clock::now();
    const auto& r = table1();
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::vector<std::string> misses;
    std::size_t cells = 0;
    for (const auto& row : r.table.rows) {
        if (row.param == "0.9") continue;
        ++cells;
        if (!(row.mean_accuracy == 1.0) || row.failed > 0)
            misses.push_back(row.param + "/" + row.method + "=" + fmt(row.mean_accuracy));
    }
    std::string detail = std::to_string(cells) + " cells (lambda 0.0-0.5 x 8 methods, 20 reps) ";
    if (misses.empty())
        detail += "all exactly 1.0";
    else
        for (const auto& m : misses) detail += m + " ";
    detail += "; run time " + fmt(secs, 1) + " s (includes lambda 0.9)";
    return check(misses.empty() && cells == 48 && secs < 600.0, detail);
}

Outcome criterion2() {
    const auto& r = table1();
    const double mg3 = mean_acc(r, "0.9", "mg(alpha=3)");
    const double ga = mean_acc(r, "0.9", "gaussian(sigma*)");
    const double la = mean_acc(r, "0.9", "laplace(sigma*)");
    const double e75 = mean_acc(r, "0.9", "energy(alpha=0.75)");
    const bool ok = mg3 >= 0.95 && ga <= 0.60 && la <= 0.60 && e75 >= 0.50 && e75 <= 0.70;
    return check(ok, "lambda 0.9: MG3 " + fmt(mg3) + " (>= 0.95), Gaussian " + fmt(ga) + " / Laplace " + fmt(la) +
                         " (<= 0.60), Energy 0.75 " + fmt(e75) + " (in [0.50, 0.70])");
}

// --- 3: Variation 1 ----------------------------------------------------------

Outcome criterion3() {
    auto cfg = ExperimentConfig::preset("table2");
    cfg.source.lambdas = {0.0};
    cfg.methods = {MethodSpec::wasserstein(), MethodSpec::of_kernel(KernelSpec::auto_sigma(KernelFamily::Laplace))};
    cfg.replications = 20;
    cfg.jobs = g_jobs;
    const auto r = run_experiment(cfg);
    absorb(r.lloyd);
    const double w = mean_acc(r, "0", "2-W");
    const double la = mean_acc(r, "0", "laplace(sigma*)");
    return check(la - w >= 0.10, "Variation 1, lambda 0: Laplace " + fmt(la) + " vs 2-W " + fmt(w) +
                                     ", gap " + fmt(la - w) + " (>= 0.10)");
}

// --- 4: bivariate dependence model, table7 preset -----------------------------

Outcome criterion4() {
    const auto t0 = Clock::now();
    auto cfg = ExperimentConfig::preset("table7");
    cfg.methods = {MethodSpec::of_kernel(KernelSpec::energy(0.25)),
                   MethodSpec::of_kernel(KernelSpec::modified_gaussian(2)),
                   MethodSpec::of_kernel(KernelSpec::modified_gaussian(3))};
    cfg.replications = 10;
    cfg.restarts = 50;
    cfg.jobs = g_jobs;
    const auto r = run_experiment(cfg);
    absorb(r.lloyd);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const double e = mean_acc(r, "-", "energy(alpha=0.25)");
    const double mg2 = mean_acc(r, "-", "mg(alpha=2)");
    const double mg3 = mean_acc(r, "-", "mg(alpha=3)");
    const bool ok = e >= 0.95 && mg2 <= 0.60 && mg3 <= 0.60 && secs < 1800.0;
    return check(ok, "10 reps, restarts 50, N 1000: Energy 0.25 " + fmt(e) + " (>= 0.95), MG2 " + fmt(mg2) +
                         ", MG3 " + fmt(mg3) + " (both <= 0.60); run time " + fmt(secs, 1) + " s");
}

// --- 5: energy alpha = 0.5 identity -------------------------------------------

// 2 * integral (F_P - F_Q)^2 on the union of breakpoints; exact because both
// CDFs are linear between consecutive breakpoints.
double cdf_l2_oracle(const UniformMixture& p, const UniformMixture& q) {
    std::vector<double> knots;
    for (const auto* m : {&p, &q})
        for (const auto& c : m->components()) {
            knots.push_back(c.a);
            knots.push_back(c.b);
        }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    auto cdf = [](const UniformMixture& m, double t) {
        double s = 0.0;
        for (const auto& c : m.components()) s += c.weight * std::clamp((t - c.a) / (c.b - c.a), 0.0, 1.0);
        return s;
    };
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double d0 = cdf(p, knots[k]) - cdf(q, knots[k]);
        const double d1 = cdf(p, knots[k + 1]) - cdf(q, knots[k + 1]);
        total += (knots[k + 1] - knots[k]) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    }
    return 2.0 * total;
}

UniformMixture random_mixture(Rng& rng) {
    const int m = 1 + static_cast<int>(rng() % 3);
    std::vector<double> w(m);
    for (auto& x : w) x = 0.2 + uniform01(rng);
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    std::vector<MixtureComponent> comps;
    double used = 0.0;
    for (int k = 0; k < m; ++k) {
        const double a = uniform(rng, -3.0, 5.0);
        const double wk = k + 1 == m ? 1.0 - used : w[k] / s;
        used += wk;
        comps.push_back({wk, a, a + uniform(rng, 0.1, 3.0)});
    }
    return UniformMixture(comps);
}

double exact_mmd2(const UniformMixture& p, const UniformMixture& q, const KernelSpec& k) {
    return exact_inner_product(p, p, k) + exact_inner_product(q, q, k) - 2.0 * exact_inner_product(p, q, k);
}

Outcome criterion5() {
    const auto k = KernelSpec::energy(0.5);
    Rng rng(20240501);
    double worst = 0.0, worst_half = 0.0;
    for (int t = 0; t < 50; ++t) {
        const auto p = random_mixture(rng), q = random_mixture(rng);
        const double mmd2 = exact_mmd2(p, q, k), l2 = cdf_l2_oracle(p, q);
        worst = std::max(worst, std::abs(mmd2 - l2));
        worst_half = std::max(worst_half, std::abs(mmd2 - 0.5 * l2));
    }
    const double pinned = exact_mmd2(UniformMixture::uniform(0, 1), UniformMixture::uniform(0.5, 1.5), k);
    const double pin_err = std::abs(pinned - 5.0 / 12.0);
    // With the 1/2-scaled energy kernel MMD^2 is half the energy distance, so
    // the measured value is int (F_P - F_Q)^2; the second figure shows that.
    return check(worst <= 1e-6 && pin_err <= 1e-8,
                 "50 random pairs: max |MMD^2 - 2 int (F_P - F_Q)^2| = " + sci(worst) +
                     " (<= 1e-6); U(0,1) vs U(0.5,1.5): " + fmt(pinned, 12) + " vs 5/12, error " + sci(pin_err) +
                     " (<= 1e-8); observed: max |MMD^2 - int (F_P - F_Q)^2| = " + sci(worst_half) +
                     ", i.e. off by exactly a factor 2");
}

// --- 6: estimator unbiasedness ------------------------------------------------

Outcome criterion6() {
    const UniformMixture p({{0.5, 0.0, 1.0}, {0.5, 2.0, 3.0}});
    const UniformMixture q({{0.3, 0.5, 2.5}, {0.7, 1.0, 1.5}});
    const std::vector<std::pair<std::string, KernelSpec>> kernels{{"gaussian(sigma=1)", KernelSpec::gaussian(1.0)},
                                                                  {"energy(alpha=0.5)", KernelSpec::energy(0.5)}};
    const int reps = 500;
    const std::size_t N = 200;
    bool ok = true;
    std::string detail;
    for (const auto& [name, k] : kernels) {
        Rng rng(777);
        std::vector<double> cross(reps), self(reps);
        for (int r = 0; r < reps; ++r) {
            const auto xp = sample_mixture(p, N, rng), xq = sample_mixture(q, N, rng);
            cross[r] = estimated_cross(xp, xq, k);
            self[r] = estimated_self(xp, k);
        }
        for (auto [label, values, exact] : {std::tuple{"K12", &cross, exact_inner_product(p, q, k)},
                                            std::tuple{"K11", &self, exact_inner_product(p, p, k)}}) {
            const double m = std::accumulate(values->begin(), values->end(), 0.0) / reps;
            double ss = 0.0;
            for (double v : *values) ss += (v - m) * (v - m);
            const double se = std::sqrt(ss / (reps - 1) / reps);
            const double z = (m - exact) / se;
            ok = ok && std::abs(z) <= 3.0;
            detail += name + " " + label + ": |z| " + fmt(std::abs(z), 2) + "; ";
        }
    }
    return check(ok, detail + "500 resamples, N 200 (|z| <= 3)");
}

// --- 7: Lloyd invariants ------------------------------------------------------

double brute_force_wcss(const GramMatrix& g) {
    const std::size_t n = g.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 1; mask < (1u << (n - 1)); ++mask) {  // point n-1 always in cluster 0
        std::vector<std::size_t> a(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = (mask >> i) & 1u;
        best = std::min(best, kernel_wcss(g, a, 2));
    }
    return best;
}

Outcome criterion7() {
    Rng rng(4242);
    int optimal = 0;
    LloydDiagnostics local;
    const KernelSpec kernels[] = {KernelSpec::energy(0.5), KernelSpec::gaussian(1.0), KernelSpec::laplace(2.0)};
    for (int t = 0; t < 100; ++t) {
        std::vector<UniformMixture> mix;
        for (int i = 0; i < 8; ++i) mix.push_back(random_mixture(rng));
        const auto g = gram_exact(std::span<const UniformMixture>(mix), kernels[t % 3]);
        std::vector<Partition> log;
        KMeansOptions opt;
        opt.K = 2;
        opt.restarts = 50;
        opt.seed = derive_seed(99, t);
        opt.restart_log = &log;
        const auto p = kernel_kmeans(g, opt);
        const double bf = brute_force_wcss(g);
        if (p.wcss <= bf + 1e-9 * std::max(1.0, std::abs(bf))) ++optimal;
        for (const auto& r : log) {
            ++local.restarts;
            if (!trace_nonincreasing(r.wcss_trace)) ++local.trace_violations;
        }
        ++local.returned;
        if (!is_fixed_point(g, p)) ++local.non_fixed_points;
    }
    absorb(local);
    const bool ok = optimal >= 95 && g_lloyd.trace_violations == 0 && g_lloyd.non_fixed_points == 0;
    return check(ok, "brute-force optimum found in " + std::to_string(optimal) + "/100 (>= 95); over " +
                         std::to_string(g_lloyd.restarts) + " restarts of all runs so far: " +
                         std::to_string(g_lloyd.trace_violations) + " WCSS trace increases (tol 1e-9), " +
                         std::to_string(g_lloyd.non_fixed_points) + " of " + std::to_string(g_lloyd.returned) +
                         " returned partitions not fixed points");
}

// --- 8: Gram trick ------------------------------------------------------------

Outcome criterion8() {
    Rng rng(8080);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 2 + rng() % 29, d = 1 + rng() % 6;
        std::vector<double> phi(n * d);
        for (auto& x : phi) x = uniform(rng, -2.0, 2.0);
        std::vector<double> k(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < n; ++l) {
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c) s += phi[i * d + c] * phi[l * d + c];
                k[i * n + l] = s;
            }
        const GramMatrix g(n, k, GramMode::Exact, KernelSpec::energy(0.5));
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (rng() % 2) members.push_back(i);
        if (members.empty()) members.push_back(rng() % n);
        const std::size_t i = rng() % n;
        double oracle = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            double mean = 0.0;
            for (auto m : members) mean += phi[m * d + c];
            mean /= static_cast<double>(members.size());
            oracle += (phi[i * d + c] - mean) * (phi[i * d + c] - mean);
        }
        worst = std::max(worst, std::abs(dist_sq_to_centroid(g, i, members) - oracle));
    }
    return check(worst <= 1e-12, "1000 random instances: max |Gram trick - explicit| = " + sci(worst) + " (<= 1e-12)");
}

// --- 9: external indices ------------------------------------------------------

std::vector<std::size_t> random_labels(std::size_t n, std::size_t K, Rng& rng) {
    std::vector<std::size_t> a(n);
    for (auto& x : a) x = rng() % K;
    return a;
}

Outcome criterion9() {
    Rng rng(909);
    bool self_ok = true, sym_ok = true, perm_ok = true;
    double ari_sum = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const auto p = random_labels(200, 2 + rng() % 4, rng);
        const auto q = random_labels(200, 2 + rng() % 4, rng);
        self_ok = self_ok && std::abs(adjusted_rand_index(p, p) - 1.0) <= 1e-12;
        sym_ok = sym_ok && std::abs(adjusted_rand_index(p, q) - adjusted_rand_index(q, p)) <= 1e-12;
        ari_sum += adjusted_rand_index(p, q);
    }
    const double mean_ari = ari_sum / 1000.0;
    for (std::size_t K = 1; K <= 4; ++K) {
        for (int t = 0; t < 25; ++t) {
            const auto truth = random_labels(30, K, rng);
            const auto pred = random_labels(30, K, rng);
            const double base = accuracy(pred, truth);
            std::vector<std::size_t> perm(K);
            std::iota(perm.begin(), perm.end(), 0);
            do {
                std::vector<std::size_t> relabeled(pred.size());
                for (std::size_t i = 0; i < pred.size(); ++i) relabeled[i] = perm[pred[i]];
                perm_ok = perm_ok && accuracy(relabeled, truth) == base;
            } while (std::next_permutation(perm.begin(), perm.end()));
        }
    }
    const bool ok = self_ok && sym_ok && perm_ok && std::abs(mean_ari) <= 0.02;
    return check(ok, std::string("ARI(P,P)=1 ") + (self_ok ? "yes" : "NO") + ", symmetric " + (sym_ok ? "yes" : "NO") +
                         ", mean ARI of random partitions " + fmt(mean_ari) + " (|.| <= 0.02), accuracy permutation-invariant (K <= 4, exhaustive) " +
                         (perm_ok ? "yes" : "NO"));
}

// --- 10: internal indices -----------------------------------------------------

Outcome criterion10() {
    Rng rng(1010);
    bool ranges_ok = true;
    int sil_two = 0, db_max = 0;
    const std::vector<std::size_t> ks{2, 3, 4};
    for (int t = 0; t < 100; ++t) {
        std::vector<UniformMixture> mix;
        std::vector<std::size_t> truth;
        for (int grp = 0; grp < 2; ++grp)
            for (int i = 0; i < 20; ++i) {
                const double c = (grp ? 10.0 : 0.0) + uniform01(rng);
                mix.push_back(UniformMixture::uniform(c, c + 1.0));
                truth.push_back(grp);
            }
        const GramMatrix gm = gram_exact(std::span<const UniformMixture>(mix), KernelSpec::energy(0.5));
        const auto g = GeometryHandle::from_gram(gm);
        std::map<std::size_t, Partition> memo;
        auto runner = [&](std::size_t K) {
            if (auto it = memo.find(K); it != memo.end()) return it->second;
            return memo.emplace(K, kernel_kmeans(gm, K, 10, derive_seed(t, K))).first->second;
        };
        if (select_k(g, runner, ks, Criterion::Silhouette).chosen == 2) ++sil_two;
        if (select_k(g, runner, ks, Criterion::DBStar).chosen == 4) ++db_max;
        for (auto K : ks) {
            const auto& p = runner(K);
            const auto s = silhouette(g, p), ch = calinski_harabasz(g, p), db = davies_bouldin_star(g, p);
            ranges_ok = ranges_ok && s.value >= -1.0 && s.value <= 1.0 && ch.value >= 0.0 && db.value >= 0.0;
        }
        // a random partition as well, to exercise negative silhouettes
        Partition rnd;
        rnd.K = 3;
        rnd.assignments = random_labels(mix.size(), 3, rng);
        for (std::size_t j = 0; j < 3; ++j) rnd.assignments[j] = j;
        const auto s = silhouette(g, rnd), ch = calinski_harabasz(g, rnd), db = davies_bouldin_star(g, rnd);
        ranges_ok = ranges_ok && s.value >= -1.0 && s.value <= 1.0 && ch.value >= 0.0 && db.value >= 0.0;
    }
    const bool ok = ranges_ok && sil_two >= 90 && db_max >= 90;
    return check(ok, std::string("index ranges ") + (ranges_ok ? "ok" : "VIOLATED") + "; two-group toy set: silhouette picks K=2 in " +
                         std::to_string(sil_two) + "/100 (>= 90), DB* picks K=4 in " + std::to_string(db_max) +
                         "/100 (>= 90)");
}

// --- 11: Sobel pin ------------------------------------------------------------

Outcome criterion11() {
    SarImage img;
    img.height = img.width = 3;
    img.pixels = {0, 0, 65535, 0, 0, 65535, 0, 65535, 65535};
    const auto v = sobel_gradient_norm(img);
    const double expect = 65535.0 * std::sqrt(5.0) / 2.0;
    const int level = discretize_filter_value(v.at(0), 200);
    const bool ok = v.size() == 1 && std::abs(v[0] - expect) <= 4 * std::numeric_limits<double>::epsilon() * expect &&
                    level == 200;
    char buf[128];
    std::snprintf(buf, sizeof buf, "C_max response %.10f vs 65535*sqrt(5)/2 = %.10f; discretized (M2=200) -> %d", v[0],
                  expect, level);
    return check(ok, buf);
}

// --- 12: Pearson fidelity -----------------------------------------------------

Outcome criterion12() {
    std::vector<std::pair<std::string, PearsonParams>> centers;
    const auto add = [&](const std::string& tag, const BivariateModelConfig& cfg) {
        for (std::size_t c = 0; c < cfg.clusters.size(); ++c)
            for (std::size_t v = 0; v < 2; ++v) {
                const auto& s = cfg.clusters[c].vars[v];
                centers.push_back({tag + " c" + std::to_string(c + 1) + " X" + std::to_string(v + 1),
                                   {s.mean.mean, s.std_dev.mean, s.skewness.mean, s.kurtosis.mean}});
            }
    };
    add("indep", BivariateModelConfig::table3());
    add("copula", BivariateModelConfig::table6());
    const std::size_t batches = 100, per = 10000;
    bool ok = true;
    double worst = 0.0;
    std::string worst_at;
    std::vector<double> zmax(centers.size(), 0.0);
    parallel_for(centers.size(), g_jobs, [&](std::size_t ci) {
        const auto& target = centers[ci].second;
        const PearsonDistribution dist(target);
        Rng rng(derive_seed(1212, ci));
        // per-batch central-moment statistics
        std::vector<std::array<double, 4>> stats(batches);
        double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
        std::vector<double> all;
        all.reserve(batches * per);
        for (std::size_t b = 0; b < batches; ++b) {
            std::vector<double> x(per);
            for (auto& v : x) v = dist.sample(rng);
            double m = 0;
            for (double v : x) m += v;
            m /= per;
            double c2 = 0, c3 = 0, c4 = 0;
            for (double v : x) {
                const double d = v - m;
                c2 += d * d;
                c3 += d * d * d;
                c4 += d * d * d * d;
            }
            c2 /= per;
            c3 /= per;
            c4 /= per;
            stats[b] = {m, std::sqrt(c2), c3 / std::pow(c2, 1.5), c4 / (c2 * c2)};
            all.insert(all.end(), x.begin(), x.end());
        }
        double m = 0;
        for (double v : all) m += v;
        m /= static_cast<double>(all.size());
        for (double v : all) {
            const double d = v - m;
            s2 += d * d;
            s3 += d * d * d;
            s4 += d * d * d * d;
        }
        s1 = m;
        const double n = static_cast<double>(all.size());
        s2 /= n;
        s3 /= n;
        s4 /= n;
        const std::array<double, 4> overall{s1, std::sqrt(s2), s3 / std::pow(s2, 1.5), s4 / (s2 * s2)};
        const std::array<double, 4> goal{target.mean, target.std_dev, target.skewness, target.kurtosis};
        double z = 0.0;
        for (int k = 0; k < 4; ++k) {
            double bm = 0, bs = 0;
            for (const auto& s : stats) bm += s[k];
            bm /= batches;
            for (const auto& s : stats) bs += (s[k] - bm) * (s[k] - bm);
            const double se = std::sqrt(bs / (batches - 1)) / std::sqrt(static_cast<double>(batches));
            z = std::max(z, std::abs(overall[k] - goal[k]) / se);
        }
        zmax[ci] = z;
    });
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        ok = ok && zmax[ci] <= 5.0;
        if (zmax[ci] > worst) {
            worst = zmax[ci];
            worst_at = centers[ci].first;
        }
    }
    return check(ok, std::to_string(centers.size()) + " parameter centers, n = 1e6 each: worst |moment - target| = " +
                         fmt(worst, 2) + " batched SE at " + worst_at + " (<= 5)");
}

// --- 13: SAR integration (optional) --------------------------------------------

Outcome criterion13() {
    const char* root = std::getenv("DISTKM_SAR_ROOT");
    if (!root || !*root) return {Status::Skip, "DISTKM_SAR_ROOT not set; external TenGeoP-SARwv data required"};
    ExperimentConfig cfg;
    cfg.name = "sar_FM";
    cfg.source.kind = SourceSpec::Kind::Sar;
    cfg.source.sar_root = root;
    cfg.source.pairings = {{"F", "M"}};
    cfg.source.per_class = 100;
    cfg.methods = {MethodSpec::of_kernel(KernelSpec::auto_sigma(KernelFamily::Gaussian)),
                   MethodSpec::of_kernel(KernelSpec::auto_sigma(KernelFamily::Laplace)),
                   MethodSpec::of_kernel(KernelSpec::energy(0.25)), MethodSpec::of_kernel(KernelSpec::energy(0.5)),
                   MethodSpec::of_kernel(KernelSpec::energy(0.75))};
    cfg.K = 2;
    cfg.restarts = 10;
    const char* reps = std::getenv("DISTKM_SAR_REPS");
    cfg.replications = reps ? std::stoul(reps) : 5;
    cfg.seed = 13;
    cfg.jobs = g_jobs;
    const auto r = run_experiment(cfg);
    absorb(r.lloyd);
    bool ok = true;
    std::string detail = "(F,M), " + std::to_string(cfg.replications) + " reps:";
    for (const auto& row : r.table.rows) {
        ok = ok && row.mean_accuracy > 0.95;
        detail += " " + row.method + " " + fmt(row.mean_accuracy);
    }
    return check(ok, detail + " (each > 0.95)");
}

std::set<int> parse_set(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.insert(std::stoi(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only, expected_fail;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc)
            only = parse_set(argv[++i]);
        else if (a == "--expected-fail" && i + 1 < argc)
            expected_fail = parse_set(argv[++i]);
        else if (a == "--jobs" && i + 1 < argc)
            g_jobs = std::stoi(argv[++i]);
        else {
            std::fprintf(stderr, "usage: %s [--only 1,2] [--expected-fail 4] [--jobs N]\n", argv[0]);
            return 2;
        }
    }
    if (g_jobs <= 0) g_jobs = default_jobs();
    spdlog::set_level(spdlog::level::warn);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"separable regime, table1 preset, lambda 0.0-0.5", criterion1},
        {"hard regime, table1 preset, lambda 0.9", criterion2},
        {"variation 1 ordering, table2 preset, lambda 0.0", criterion3},
        {"bivariate dependence model, table7 preset", criterion4},
        {"energy alpha=0.5 CDF identity", criterion5},
        {"estimator unbiasedness", criterion6},
        {"Lloyd invariants", criterion7},
        {"Gram-trick correctness", criterion8},
        {"external indices", criterion9},
        {"internal indices and K selection", criterion10},
        {"Sobel pin", criterion11},
        {"Pearson fidelity", criterion12},
        {"SAR integration (optional)", criterion13},
    };
    // criterion 7 reports invariants over every run, so it goes last among those run
    std::vector<int> order;
    for (int c = 1; c <= 13; ++c)
        if (c != 7) order.push_back(c);
    order.insert(order.end() - 1, 7);

    std::set<int> failed, ran;
    for (int c : order) {
        if (!only.empty() && !only.count(c)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[c - 1].second();
        } catch (const std::exception& e) {
            o = {Status::Fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
        std::string note;
        if (o.status == Status::Fail && expected_fail.count(c)) note = " [expected failure, documented]";
        std::printf("[%s] criterion %2d: %s: %s (%.1f s)%s\n", tag, c, criteria[c - 1].first.c_str(), o.detail.c_str(),
                    secs, note.c_str());
        std::fflush(stdout);
        if (o.status != Status::Skip) ran.insert(c);
        if (o.status == Status::Fail) failed.insert(c);
    }
    std::set<int> expected_ran;
    for (int c : expected_fail)
        if (ran.count(c)) expected_ran.insert(c);
    const bool ok = failed == expected_ran;
    std::printf("summary: %zu run, %zu failed", ran.size(), failed.size());
    if (!expected_ran.empty()) std::printf(" (expected failures:");
    for (int c : expected_ran) std::printf(" %d", c);
    if (!expected_ran.empty()) std::printf(")");
    std::printf(" -> %s\n", ok ? "OK" : "UNEXPECTED");
    return ok ? 0 : 1;
}
