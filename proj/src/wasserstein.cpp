#include "distkm/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "distkm/error.hpp"
#include "distkm/gram.hpp"
#include "distkm/json_io.hpp"
#include "distkm/parallel.hpp"

namespace distkm {

void check_wasserstein_args(double alpha, std::size_t grid) {
    if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw ConfigError("Wasserstein alpha must be a finite number >= 1");
    if (grid < 2) throw ConfigError("Wasserstein grid must have at least 2 points");
}

void check_univariate(const DistributionRecord& r) {
    if (r.dim() != 1) throw ModeError("Wasserstein distances are only supported for univariate records");
}

std::vector<double> midpoint_grid(std::size_t grid) {
    std::vector<double> q(grid);
    for (std::size_t k = 0; k < grid; ++k) q[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(grid);
    return q;
}

std::vector<double> quantile_profile(const DistributionRecord& r, std::size_t grid) {
    check_univariate(r);
    if (grid < 2) throw ConfigError("Wasserstein grid must have at least 2 points");
    auto q = midpoint_grid(grid);
    for (double& v : q) v = record_quantile(r, v);
    return q;
}

std::vector<double> mixture_mean_profile(std::span<const DistributionRecord* const> members, std::size_t grid) {
    if (members.empty()) throw InputError("mixture mean of an empty member set");
    if (grid < 2) throw ConfigError("Wasserstein grid must have at least 2 points");
    for (const auto* r : members) check_univariate(*r);
    if (members.size() == 1) return quantile_profile(*members.front(), grid);

    const double m = static_cast<double>(members.size());
    bool all_mixtures = std::all_of(members.begin(), members.end(), [](const auto* r) { return r->is_mixture(); });
    if (all_mixtures) {
        std::vector<MixtureComponent> comps;
        for (const auto* r : members)
            for (const auto& c : r->mixture().components()) comps.push_back({c.weight / m, c.a, c.b});
        UniformMixture mean(std::move(comps));
        auto q = midpoint_grid(grid);
        for (double& v : q) v = mixture_quantile(mean, v);
        return q;
    }

    double lo = INFINITY, hi = -INFINITY;
    for (const auto* r : members) {
        auto [a, b] = record_support(*r);
        lo = std::min(lo, a);
        hi = std::max(hi, b);
    }
    auto cdf = [&](double t) {
        double s = 0.0;
        for (const auto* r : members) s += record_cdf(*r, t);
        return s / m;
    };
    auto q = midpoint_grid(grid);
    double left = lo;  // quantiles are nondecreasing in q
    for (double& v : q) {
        double a = left, b = hi;
        if (cdf(a) >= v) {
            v = a;
            continue;
        }
        while (b - a > 1e-10) {
            double mid = 0.5 * (a + b);
            if (mid <= a || mid >= b) break;
            if (cdf(mid) >= v)
                b = mid;
            else
                a = mid;
        }
        v = b;
        left = a;
    }
    return q;
}

double profile_distance(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() != b.size() || a.empty()) throw InputError("profile_distance: profiles differ in length");
    double s = 0.0;
    if (alpha == 2.0) {
        for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
        return std::sqrt(s / static_cast<double>(a.size()));
    }
    for (std::size_t k = 0; k < a.size(); ++k) s += std::pow(std::abs(a[k] - b[k]), alpha);
    return std::pow(s / static_cast<double>(a.size()), 1.0 / alpha);
}

double wasserstein(const DistributionRecord& a, const DistributionRecord& b, double alpha, std::size_t grid) {
    check_wasserstein_args(alpha, grid);
    return profile_distance(quantile_profile(a, grid), quantile_profile(b, grid), alpha);
}

double wasserstein_to_mixture_mean(const DistributionRecord& a, std::span<const DistributionRecord> members,
                                   double alpha, std::size_t grid) {
    check_wasserstein_args(alpha, grid);
    std::vector<const DistributionRecord*> ptrs;
    for (const auto& r : members) ptrs.push_back(&r);
    return profile_distance(quantile_profile(a, grid), mixture_mean_profile(ptrs, grid), alpha);
}

DistanceMatrix wasserstein_matrix(std::span<const DistributionRecord> sample, double alpha, std::size_t grid,
                                  int jobs) {
    check_wasserstein_args(alpha, grid);
    const std::size_t n = sample.size();
    std::vector<std::vector<double>> prof(n);
    parallel_for(n, jobs, [&](std::size_t i) { prof[i] = quantile_profile(sample[i], grid); });
    DistanceMatrix d{n, std::vector<double>(n * n, 0.0), alpha, grid};
    parallel_for(n, jobs, [&](std::size_t i) {
        for (std::size_t l = i + 1; l < n; ++l) {
            double v = profile_distance(prof[i], prof[l], alpha);
            d.values[i * n + l] = v;
            d.values[l * n + i] = v;
        }
    });
    return d;
}

void save_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& d) {
    MatrixFile m{d.n, MatrixFile::kModeWasserstein, MatrixFile::kNoKernel, d.values};
    write_matrix_file(path, m);
    std::ofstream f(path.string() + ".json");
    if (!f) throw DataError("cannot write sidecar for " + path.string());
    f << Json{{"metric", "wasserstein"}, {"alpha", d.alpha}, {"grid", d.grid}, {"n", d.n}}.dump(2) << '\n';
}

DistanceMatrix load_distance_matrix(const std::filesystem::path& path) {
    MatrixFile m = read_matrix_file(path);
    if (m.mode != MatrixFile::kModeWasserstein) throw ModeError("matrix file does not hold Wasserstein distances");
    DistanceMatrix d{m.n, std::move(m.values), 2.0, 1024};
    std::ifstream side(path.string() + ".json");
    if (side) {
        auto j = Json::parse(side, nullptr, false);
        if (!j.is_discarded()) {
            d.alpha = j.value("alpha", 2.0);
            d.grid = j.value("grid", std::size_t{1024});
        }
    }
    return d;
}

}  // namespace distkm
