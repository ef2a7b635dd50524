#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "distkm/distributions.hpp"

namespace distkm {

/// Midpoints (k + 1/2)/grid of the uniform q-grid.
std::vector<double> midpoint_grid(std::size_t grid);

/// F^{-1} at the midpoint grid (inf convention for samples).
std::vector<double> quantile_profile(const DistributionRecord& r, std::size_t grid);

/// Quantile profile of the mixture mean (1/m) sum_i F_i of the members.
/// Mixture-only member sets are inverted exactly (the mean is again a
/// uniform mixture); otherwise each grid point is bisected to 1e-10 in t.
std::vector<double> mixture_mean_profile(std::span<const DistributionRecord* const> members, std::size_t grid);

/// (mean_k |a_k - b_k|^alpha)^(1/alpha).
double profile_distance(std::span<const double> a, std::span<const double> b, double alpha);

double wasserstein(const DistributionRecord& a, const DistributionRecord& b, double alpha = 2.0,
                   std::size_t grid = 1024);

double wasserstein_to_mixture_mean(const DistributionRecord& a, std::span<const DistributionRecord> members,
                                   double alpha = 2.0, std::size_t grid = 1024);

/// Throws ConfigError / ModeError unless alpha >= 1, grid >= 2 and r is univariate.
void check_wasserstein_args(double alpha, std::size_t grid);
void check_univariate(const DistributionRecord& r);

struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> values;  // row-major, symmetric, zero diagonal
    double alpha = 2.0;
    std::size_t grid = 1024;
    double operator()(std::size_t i, std::size_t l) const { return values[i * n + l]; }
};

DistanceMatrix wasserstein_matrix(std::span<const DistributionRecord> sample, double alpha = 2.0,
                                  std::size_t grid = 1024, int jobs = 1);

/// Binary container with the Wasserstein mode tag plus a `<path>.json` sidecar.
void save_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& d);
DistanceMatrix load_distance_matrix(const std::filesystem::path& path);

}  // namespace distkm
