#include "distkm/validity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "distkm/error.hpp"
#include "distkm/parallel.hpp"

namespace distkm {

std::vector<std::size_t> encode_labels(std::span<const std::string> labels) {
    std::map<std::string, std::size_t> ids;
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (const auto& s : labels) out.push_back(ids.try_emplace(s, ids.size()).first->second);
    return out;
}

namespace {

std::size_t count_classes(std::span<const std::size_t> v) {
    return v.empty() ? 0 : *std::max_element(v.begin(), v.end()) + 1;
}

std::vector<std::vector<double>> contingency(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
    if (pred.size() != truth.size()) throw InputError("partition and labels differ in length");
    std::vector<std::vector<double>> t(count_classes(pred), std::vector<double>(count_classes(truth), 0.0));
    for (std::size_t i = 0; i < pred.size(); ++i) t[pred[i]][truth[i]] += 1.0;
    return t;
}

// Minimum-cost assignment on a square cost matrix (Kuhn-Munkres with
// potentials). Returns the column matched to each row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            std::size_t i0 = p[j0], j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<std::size_t> row_to_col(n);
    for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

double choose2(double x) { return 0.5 * x * (x - 1.0); }

}  // namespace

double accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
    if (pred.empty()) throw InputError("accuracy of an empty partition");
    auto table = contingency(pred, truth);
    const std::size_t m = std::max(table.size(), table.front().size());
    std::vector<std::vector<double>> cost(m, std::vector<double>(m, 0.0));
    for (std::size_t r = 0; r < table.size(); ++r)
        for (std::size_t c = 0; c < table[r].size(); ++c) cost[r][c] = -table[r][c];
    auto match = hungarian(cost);
    double hits = 0.0;
    for (std::size_t r = 0; r < m; ++r) hits -= cost[r][match[r]];
    return hits / static_cast<double>(pred.size());
}

double accuracy(const Partition& pred, std::span<const std::size_t> truth) { return accuracy(pred.assignments, truth); }

double adjusted_rand_index(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
    auto table = contingency(pred, truth);
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    std::vector<double> col(table.empty() ? 0 : table.front().size(), 0.0);
    for (const auto& row : table) {
        double a = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            sum_ij += choose2(row[c]);
            a += row[c];
            col[c] += row[c];
        }
        sum_a += choose2(a);
    }
    for (double b : col) sum_b += choose2(b);
    const double total = choose2(static_cast<double>(pred.size()));
    if (total == 0.0) return 0.0;
    const double expected = sum_a * sum_b / total;
    const double denom = 0.5 * (sum_a + sum_b) - expected;
    if (denom == 0.0) return 0.0;
    return (sum_ij - expected) / denom;
}

double adjusted_rand_index(const Partition& pred, std::span<const std::size_t> truth) {
    return adjusted_rand_index(pred.assignments, truth);
}

// ---------------------------------------------------------------------------

GeometryHandle GeometryHandle::from_gram(GramMatrix g) {
    GeometryHandle h;
    h.n_ = g.size();
    h.pair_.assign(h.n_ * h.n_, 0.0);
    for (std::size_t i = 0; i < h.n_; ++i)
        for (std::size_t l = i + 1; l < h.n_; ++l) h.pair_[i * h.n_ + l] = h.pair_[l * h.n_ + i] = mmd_dist(g, i, l);
    h.gram_ = std::make_shared<const GramMatrix>(std::move(g));
    return h;
}

GeometryHandle GeometryHandle::from_wasserstein(std::span<const DistributionRecord> sample, double alpha,
                                                std::size_t grid, int jobs) {
    check_wasserstein_args(alpha, grid);
    GeometryHandle h;
    h.n_ = sample.size();
    h.alpha_ = alpha;
    h.grid_ = grid;
    h.records_ = std::make_shared<const std::vector<DistributionRecord>>(sample.begin(), sample.end());
    h.profiles_.resize(h.n_);
    parallel_for(h.n_, jobs, [&](std::size_t i) { h.profiles_[i] = quantile_profile(sample[i], grid); });
    h.pair_.assign(h.n_ * h.n_, 0.0);
    for (std::size_t i = 0; i < h.n_; ++i)
        for (std::size_t l = i + 1; l < h.n_; ++l)
            h.pair_[i * h.n_ + l] = h.pair_[l * h.n_ + i] = profile_distance(h.profiles_[i], h.profiles_[l], alpha);
    return h;
}

GeometryHandle::Centroid GeometryHandle::centroid(std::span<const std::size_t> members) const {
    if (members.empty()) throw InputError("centroid of an empty cluster");
    Centroid c;
    c.members.assign(members.begin(), members.end());
    for (auto i : members)
        if (i >= n_) throw InputError("centroid member out of range");
    if (gram_) {
        c.self_sum = cluster_gram_sum(*gram_, members);
    } else {
        std::vector<const DistributionRecord*> ptrs;
        for (auto i : members) ptrs.push_back(&(*records_)[i]);
        c.profile = mixture_mean_profile(ptrs, grid_);
    }
    return c;
}

double GeometryHandle::dist_to_centroid(std::size_t i, const Centroid& c) const {
    if (gram_) {
        const auto& g = *gram_;
        const double m = static_cast<double>(c.members.size());
        double cross = 0.0;
        for (auto l : c.members) cross += g(i, l);
        return std::sqrt(std::max(0.0, g(i, i) - 2.0 * cross / m + c.self_sum / (m * m)));
    }
    return profile_distance(profiles_[i], c.profile, alpha_);
}

double GeometryHandle::centroid_dist(const Centroid& a, const Centroid& b) const {
    if (gram_) {
        const auto& g = *gram_;
        const double ma = static_cast<double>(a.members.size()), mb = static_cast<double>(b.members.size());
        double cross = 0.0;
        for (auto i : a.members)
            for (auto l : b.members) cross += g(i, l);
        return std::sqrt(std::max(0.0, a.self_sum / (ma * ma) + b.self_sum / (mb * mb) - 2.0 * cross / (ma * mb)));
    }
    return profile_distance(a.profile, b.profile, alpha_);
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::vector<std::size_t>> checked_clusters(const GeometryHandle& geo, const Partition& part) {
    if (part.size() != geo.size()) throw InputError("partition size does not match the geometry");
    if (part.K < 2) throw InputError("validity index needs K >= 2");
    auto c = part.clusters();
    for (const auto& m : c)
        if (m.empty()) throw InputError("validity index: partition has an empty cluster");
    return c;
}

}  // namespace

IndexResult calinski_harabasz(const GeometryHandle& geo, const Partition& part) {
    auto clusters = checked_clusters(geo, part);
    const double n = static_cast<double>(geo.size()), K = static_cast<double>(part.K);
    if (!(n > K)) throw InputError("Calinski-Harabasz needs n > K");
    std::vector<std::size_t> all(geo.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto grand = geo.centroid(all);
    double B = 0.0, W = 0.0;
    for (const auto& m : clusters) {
        auto c = geo.centroid(m);
        double d = geo.centroid_dist(c, grand);
        B += static_cast<double>(m.size()) * d * d;
        for (auto i : m) {
            double e = geo.dist_to_centroid(i, c);
            W += e * e;
        }
    }
    if (W == 0.0) return {kInf, true};
    return {B / W * (n - K) / (K - 1.0), false};
}

IndexResult silhouette(const GeometryHandle& geo, const Partition& part) {
    auto clusters = checked_clusters(geo, part);
    double total = 0.0;
    for (std::size_t i = 0; i < geo.size(); ++i) {
        const std::size_t own = part.assignments[i];
        if (clusters[own].size() < 2) continue;  // singleton: 0
        double a = 0.0;
        for (auto l : clusters[own])
            if (l != i) a += geo.dist(i, l);
        a /= static_cast<double>(clusters[own].size() - 1);
        double b = kInf;
        for (std::size_t j = 0; j < clusters.size(); ++j) {
            if (j == own) continue;
            double s = 0.0;
            for (auto l : clusters[j]) s += geo.dist(i, l);
            b = std::min(b, s / static_cast<double>(clusters[j].size()));
        }
        double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return {total / static_cast<double>(geo.size()), false};
}

IndexResult davies_bouldin_star(const GeometryHandle& geo, const Partition& part) {
    auto clusters = checked_clusters(geo, part);
    const std::size_t K = clusters.size();
    std::vector<GeometryHandle::Centroid> cent;
    std::vector<double> S(K, 0.0);
    for (std::size_t j = 0; j < K; ++j) {
        cent.push_back(geo.centroid(clusters[j]));
        for (auto i : clusters[j]) S[j] += geo.dist_to_centroid(i, cent[j]);
        S[j] /= static_cast<double>(clusters[j].size());
    }
    std::vector<double> cd(K * K, 0.0);
    for (std::size_t j = 0; j < K; ++j)
        for (std::size_t l = j + 1; l < K; ++l) cd[j * K + l] = cd[l * K + j] = geo.centroid_dist(cent[j], cent[l]);
    double total = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
        double num = 0.0, den = 0.0;
        for (std::size_t l = 0; l < K; ++l) {
            if (l == j) continue;
            num = std::max(num, S[j] + S[l]);
            den = std::max(den, cd[j * K + l]);
        }
        if (den == 0.0) return {kInf, true};
        total += num / den;
    }
    return {total / static_cast<double>(K), false};
}

std::string criterion_name(Criterion c) {
    switch (c) {
        case Criterion::CH: return "ch";
        case Criterion::Silhouette: return "silhouette";
        case Criterion::DBStar: return "dbstar";
    }
    return "?";
}

Criterion parse_criterion(const std::string& s) {
    if (s == "ch" || s == "CH" || s == "calinski_harabasz") return Criterion::CH;
    if (s == "silhouette" || s == "sil" || s == "Sil") return Criterion::Silhouette;
    if (s == "dbstar" || s == "DBstar" || s == "db*" || s == "DB*") return Criterion::DBStar;
    throw ConfigError("unknown validity criterion '" + s + "' (ch | silhouette | dbstar)");
}

bool criterion_maximized(Criterion c) { return c != Criterion::DBStar; }

IndexResult score(Criterion c, const GeometryHandle& geo, const Partition& part) {
    switch (c) {
        case Criterion::CH: return calinski_harabasz(geo, part);
        case Criterion::Silhouette: return silhouette(geo, part);
        case Criterion::DBStar: return davies_bouldin_star(geo, part);
    }
    throw ConfigError("unknown criterion");
}

KSelection select_k(const GeometryHandle& geo, const std::function<Partition(std::size_t)>& runner,
                    std::span<const std::size_t> k_range, Criterion criterion) {
    if (k_range.empty()) throw ConfigError("select_k: empty K range");
    std::vector<std::size_t> ks(k_range.begin(), k_range.end());
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    KSelection sel;
    const bool maximize = criterion_maximized(criterion);
    for (auto K : ks) {
        if (K < 2 || K + 1 > geo.size()) throw ConfigError("select_k: K must lie in [2, n-1]");
        KScore s{K, score(criterion, geo, runner(K))};
        bool better = sel.scores.empty() ||
                      (maximize ? s.value.value > sel.scores[sel.chosen].value.value
                                : s.value.value < sel.scores[sel.chosen].value.value);
        sel.scores.push_back(s);
        if (better) sel.chosen = sel.scores.size() - 1;
    }
    sel.chosen = sel.scores[sel.chosen].K;
    return sel;
}

}  // namespace distkm
