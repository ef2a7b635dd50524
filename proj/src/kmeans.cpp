#include "distkm/kmeans.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>

#include "distkm/error.hpp"
#include "distkm/parallel.hpp"
#include "distkm/rng.hpp"
#include "distkm/wasserstein.hpp"

namespace distkm {

std::vector<std::vector<std::size_t>> Partition::clusters() const {
    std::vector<std::vector<std::size_t>> c(K);
    for (std::size_t i = 0; i < assignments.size(); ++i) c.at(assignments[i]).push_back(i);
    return c;
}

Json partition_to_json(const Partition& p) {
    return Json{{"assignments", p.assignments}, {"K", p.K},           {"wcss", p.wcss},
                {"n_iterations", p.n_iterations}, {"seed", p.seed}, {"restart", p.restart},
                {"converged", p.converged},       {"wcss_trace", p.wcss_trace}};
}

Partition partition_from_json(const Json& j) {
    try {
        Partition p;
        p.assignments = j.at("assignments").get<std::vector<std::size_t>>();
        p.K = j.at("K").get<std::size_t>();
        p.wcss = j.value("wcss", 0.0);
        p.n_iterations = j.value("n_iterations", std::size_t{0});
        p.seed = j.value("seed", std::uint64_t{0});
        p.restart = j.value("restart", std::size_t{0});
        p.converged = j.value("converged", true);
        p.wcss_trace = j.value("wcss_trace", std::vector<double>{});
        for (auto a : p.assignments)
            if (a >= p.K) throw InputError("partition: cluster id out of range");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid partition: ") + e.what());
    }
}

void write_assignments_csv(const std::filesystem::path& path, const Partition& p, std::span<const std::string> ids) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << "index,id,cluster\n";
    for (std::size_t i = 0; i < p.size(); ++i)
        f << i << ',' << (i < ids.size() ? ids[i] : std::string()) << ',' << p.assignments[i] << '\n';
}

std::string centroid_mode_name(CentroidMode m) {
    return m == CentroidMode::QuantileMean ? "quantile_mean" : "mixture_mean";
}

CentroidMode parse_centroid_mode(const std::string& s) {
    if (s == "quantile_mean") return CentroidMode::QuantileMean;
    if (s == "mixture_mean") return CentroidMode::MixtureMean;
    throw ConfigError("unknown centroid mode '" + s + "' (quantile_mean | mixture_mean)");
}

namespace {

using Clusters = std::vector<std::vector<std::size_t>>;

// Gram geometry: d2(i, j) = K_ii - 2/n_j sum_l K_il + S_j / n_j^2.
class GramLloyd {
public:
    explicit GramLloyd(const GramMatrix& g) : g_(g) {}

    void update(const Clusters& c) {
        const std::size_t n = g_.size(), K = c.size();
        cross_.assign(n * K, 0.0);
        self_.assign(K, 0.0);
        size_.assign(K, 0.0);
        for (std::size_t j = 0; j < K; ++j) {
            size_[j] = static_cast<double>(c[j].size());
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (std::size_t l : c[j]) s += g_(i, l);
                cross_[i * K + j] = s;
            }
            for (std::size_t l : c[j]) self_[j] += cross_[l * K + j];
        }
    }

    double dist2(std::size_t i, std::size_t j) const {
        const std::size_t K = size_.size();
        if (size_[j] == 0.0) return std::numeric_limits<double>::infinity();
        double v = g_(i, i) - 2.0 * cross_[i * K + j] / size_[j] + self_[j] / (size_[j] * size_[j]);
        return std::max(0.0, v);
    }

private:
    const GramMatrix& g_;
    std::vector<double> cross_, self_, size_;
};

// W2 geometry on quantile profiles: d2 = mean_k (P_ik - C_jk)^2.
class WassersteinLloyd {
public:
    WassersteinLloyd(std::span<const DistributionRecord> sample, const std::vector<std::vector<double>>& prof,
                     CentroidMode mode, std::size_t grid)
        : sample_(sample), prof_(prof), mode_(mode), grid_(grid) {}

    void update(const Clusters& c) {
        cent_.assign(c.size(), {});
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (c[j].empty()) continue;
            if (mode_ == CentroidMode::QuantileMean) {
                std::vector<double> m(grid_, 0.0);
                for (std::size_t i : c[j])
                    for (std::size_t k = 0; k < grid_; ++k) m[k] += prof_[i][k];
                for (double& v : m) v /= static_cast<double>(c[j].size());
                cent_[j] = std::move(m);
            } else {
                std::vector<const DistributionRecord*> ptrs;
                for (std::size_t i : c[j]) ptrs.push_back(&sample_[i]);
                cent_[j] = mixture_mean_profile(ptrs, grid_);
            }
        }
    }

    double dist2(std::size_t i, std::size_t j) const {
        if (cent_[j].empty()) return std::numeric_limits<double>::infinity();
        double s = 0.0;
        for (std::size_t k = 0; k < grid_; ++k) {
            double d = prof_[i][k] - cent_[j][k];
            s += d * d;
        }
        return s / static_cast<double>(grid_);
    }

private:
    std::span<const DistributionRecord> sample_;
    const std::vector<std::vector<double>>& prof_;
    CentroidMode mode_;
    std::size_t grid_;
    std::vector<std::vector<double>> cent_;
};

Clusters to_clusters(const std::vector<std::size_t>& a, std::size_t K) {
    Clusters c(K);
    for (std::size_t i = 0; i < a.size(); ++i) c[a[i]].push_back(i);
    return c;
}

template <class Geo>
double wcss_of(const Geo& geo, const std::vector<std::size_t>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += geo.dist2(i, a[i]);
    return s;
}

// Moves the point farthest from its own centroid (taken from clusters with
// at least two members) into each empty cluster.
template <class Geo>
void repair_empty(Geo& geo, std::vector<std::size_t>& a, std::size_t K) {
    for (;;) {
        Clusters c = to_clusters(a, K);
        auto empty = std::find_if(c.begin(), c.end(), [](const auto& m) { return m.empty(); });
        if (empty == c.end()) return;
        geo.update(c);
        std::size_t best = a.size();
        double best_d = -1.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (c[a[i]].size() < 2) continue;
            double d = geo.dist2(i, a[i]);
            if (d > best_d) {
                best_d = d;
                best = i;
            }
        }
        if (best == a.size()) throw InputError("kmeans: cannot repair empty cluster (K > n)");
        a[best] = static_cast<std::size_t>(empty - c.begin());
    }
}

template <class Geo>
Partition lloyd(Geo& geo, std::size_t n, std::size_t K, const std::vector<std::size_t>& centers,
                std::size_t max_iter) {
    Partition p;
    p.K = K;
    Clusters c(K);
    for (std::size_t j = 0; j < K; ++j) c[j] = {centers[j]};
    geo.update(c);
    std::vector<std::size_t> a(n, K);  // K marks "unassigned"
    p.converged = false;
    for (std::size_t it = 0; it < max_iter; ++it) {
        std::vector<std::size_t> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t arg = 0;
            double best = geo.dist2(i, 0);
            for (std::size_t j = 1; j < K; ++j) {
                double d = geo.dist2(i, j);
                if (d < best) {
                    best = d;
                    arg = j;
                }
            }
            next[i] = arg;
        }
        repair_empty(geo, next, K);
        bool changed = next != a;
        a = std::move(next);
        geo.update(to_clusters(a, K));
        p.wcss_trace.push_back(wcss_of(geo, a));
        p.n_iterations = it + 1;
        if (!changed) {
            p.converged = true;
            break;
        }
    }
    p.assignments = std::move(a);
    p.wcss = p.wcss_trace.back();
    return p;
}

std::vector<std::size_t> random_centers(std::size_t n, std::size_t K, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t j = 0; j < K; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, n - 1);
        std::swap(idx[j], idx[pick(rng)]);
    }
    idx.resize(K);
    return idx;
}

// D^2 seeding with squared distances supplied by d2(i, l).
template <class D2>
std::vector<std::size_t> plusplus_centers(std::size_t n, std::size_t K, Rng& rng, D2&& d2) {
    std::vector<std::size_t> centers{std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)};
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = d2(i, centers[0]);
    while (centers.size() < K) {
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i)
            w[i] = std::find(centers.begin(), centers.end(), i) == centers.end() ? nearest[i] : 0.0;
        double total = std::accumulate(w.begin(), w.end(), 0.0);
        if (total <= 0.0)  // all remaining points coincide with a center
            for (std::size_t i = 0; i < n; ++i)
                w[i] = std::find(centers.begin(), centers.end(), i) == centers.end() ? 1.0 : 0.0;
        std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
        std::size_t c = pick(rng);
        centers.push_back(c);
        for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], d2(i, c));
    }
    return centers;
}

void check_options(std::size_t n, const KMeansOptions& opt) {
    if (opt.K < 1) throw ConfigError("kmeans: K must be >= 1");
    if (opt.K > n) throw InputError("kmeans: K = " + std::to_string(opt.K) + " exceeds n = " + std::to_string(n));
    if (opt.restarts < 1) throw ConfigError("kmeans: restarts must be >= 1");
    if (opt.max_iter < 1) throw ConfigError("kmeans: max_iter must be >= 1");
}

template <class Run>
Partition best_of_restarts(const KMeansOptions& opt, Run&& run) {
    std::vector<Partition> results(opt.restarts);
    parallel_for(opt.restarts, opt.jobs, [&](std::size_t r) {
        Rng rng(derive_seed(opt.seed, r));
        results[r] = run(rng);
        results[r].seed = opt.seed;
        results[r].restart = r;
    });
    if (opt.restart_log) *opt.restart_log = results;
    std::size_t best = 0;
    for (std::size_t r = 1; r < results.size(); ++r)
        if (results[r].wcss < results[best].wcss) best = r;
    for (const auto& p : results)
        if (!p.converged)
            spdlog::warn("kmeans: restart {} did not converge within {} iterations", p.restart, opt.max_iter);
    return std::move(results[best]);
}

template <class Geo>
bool fixed_point_of(Geo& geo, const Partition& p) {
    if (p.K == 0 || p.assignments.empty()) return false;
    for (auto x : p.assignments)
        if (x >= p.K) return false;
    geo.update(to_clusters(p.assignments, p.K));
    for (std::size_t i = 0; i < p.assignments.size(); ++i) {
        const double own = geo.dist2(i, p.assignments[i]);
        for (std::size_t j = 0; j < p.K; ++j) {
            const double d = geo.dist2(i, j);
            if (d < own - 1e-12 * std::max(1.0, std::abs(own))) return false;
        }
    }
    return true;
}

}  // namespace

bool trace_nonincreasing(std::span<const double> trace, double tol) {
    for (std::size_t t = 1; t < trace.size(); ++t)
        if (trace[t] > trace[t - 1] + tol * std::max(1.0, std::abs(trace[t - 1]))) return false;
    return true;
}

double lloyd_diagonal_shift(const GramMatrix& g) {
    const auto n = static_cast<Eigen::Index>(g.size());
    if (n == 0) return 0.0;
    Eigen::Map<const Eigen::MatrixXd> m(g.values().data(), n, n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(n - 1);
    return lo < -1e-10 * std::max(std::abs(hi), std::numeric_limits<double>::min()) ? -lo : 0.0;
}

namespace {

GramMatrix shifted(const GramMatrix& g, double s) {
    std::vector<double> v(g.values().begin(), g.values().end());
    for (std::size_t i = 0; i < g.size(); ++i) v[i * g.size() + i] += s;
    return GramMatrix(g.size(), std::move(v), g.mode(), g.kernel());
}

}  // namespace

bool is_fixed_point(const GramMatrix& g, const Partition& p) {
    if (p.assignments.size() != g.size()) throw InputError("is_fixed_point: partition size mismatch");
    const double s = lloyd_diagonal_shift(g);
    if (s == 0.0) {
        GramLloyd geo(g);
        return fixed_point_of(geo, p);
    }
    const GramMatrix gs = shifted(g, s);
    GramLloyd geo(gs);
    return fixed_point_of(geo, p);
}

bool is_fixed_point(std::span<const DistributionRecord> sample, const Partition& p, CentroidMode mode,
                    std::size_t grid) {
    if (p.assignments.size() != sample.size()) throw InputError("is_fixed_point: partition size mismatch");
    std::vector<std::vector<double>> prof(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) prof[i] = quantile_profile(sample[i], grid);
    WassersteinLloyd geo(sample, prof, mode, grid);
    return fixed_point_of(geo, p);
}

double kernel_wcss(const GramMatrix& g, std::span<const std::size_t> assignments, std::size_t K) {
    if (assignments.size() != g.size()) throw InputError("kernel_wcss: assignment length mismatch");
    std::vector<std::size_t> a(assignments.begin(), assignments.end());
    for (auto x : a)
        if (x >= K) throw InputError("kernel_wcss: cluster id out of range");
    GramLloyd geo(g);
    geo.update(to_clusters(a, K));
    return wcss_of(geo, a);
}

Partition kernel_kmeans(const GramMatrix& g, const KMeansOptions& opt) {
    const std::size_t n = g.size();
    check_options(n, opt);
    const double s = lloyd_diagonal_shift(g);
    std::optional<GramMatrix> gs;
    if (s > 0.0) {
        gs = shifted(g, s);
        spdlog::debug("kernel_kmeans: indefinite Gram, diagonal shift {:.6g}", s);
    }
    const double offset = s * static_cast<double>(n - opt.K);
    return best_of_restarts(opt, [&](Rng& rng) {
        auto centers = opt.init == KMeansInit::PlusPlus
                           ? plusplus_centers(n, opt.K, rng,
                                              [&](std::size_t i, std::size_t l) {
                                                  return std::max(0.0, mmd_squared(g, i, l));
                                              })
                           : random_centers(n, opt.K, rng);
        GramLloyd geo(gs ? *gs : g);
        Partition p = lloyd(geo, n, opt.K, centers, opt.max_iter);
        if (offset != 0.0) {
            for (double& w : p.wcss_trace) w -= offset;
            p.wcss = p.wcss_trace.back();
        }
        return p;
    });
}

Partition kernel_kmeans(const GramMatrix& g, std::size_t K, std::size_t restarts, std::uint64_t seed,
                        std::size_t max_iter) {
    KMeansOptions opt;
    opt.K = K;
    opt.restarts = restarts;
    opt.seed = seed;
    opt.max_iter = max_iter;
    return kernel_kmeans(g, opt);
}

Partition wasserstein_kmeans(std::span<const DistributionRecord> sample, const KMeansOptions& opt, CentroidMode mode,
                             std::size_t grid) {
    const std::size_t n = sample.size();
    check_options(n, opt);
    check_wasserstein_args(2.0, grid);
    std::vector<std::vector<double>> prof(n);
    for (std::size_t i = 0; i < n; ++i) prof[i] = quantile_profile(sample[i], grid);
    return best_of_restarts(opt, [&](Rng& rng) {
        auto centers = opt.init == KMeansInit::PlusPlus
                           ? plusplus_centers(n, opt.K, rng,
                                              [&](std::size_t i, std::size_t l) {
                                                  double d = profile_distance(prof[i], prof[l], 2.0);
                                                  return d * d;
                                              })
                           : random_centers(n, opt.K, rng);
        WassersteinLloyd geo(sample, prof, mode, grid);
        return lloyd(geo, n, opt.K, centers, opt.max_iter);
    });
}

}  // namespace distkm
