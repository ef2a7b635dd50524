#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "distkm/distributions.hpp"
#include "distkm/gram.hpp"
#include "distkm/json_io.hpp"

namespace distkm {

struct Partition {
    std::vector<std::size_t> assignments;
    std::size_t K = 0;
    double wcss = 0.0;
    std::size_t n_iterations = 0;
    std::uint64_t seed = 0;       // master seed of the run
    std::size_t restart = 0;      // restart index that produced this partition
    bool converged = true;
    std::vector<double> wcss_trace;

    std::size_t size() const noexcept { return assignments.size(); }
    /// Member indices per cluster, ascending.
    std::vector<std::vector<std::size_t>> clusters() const;
};

Json partition_to_json(const Partition& p);
Partition partition_from_json(const Json& j);
/// One row per input record: index, optional id, cluster.
void write_assignments_csv(const std::filesystem::path& path, const Partition& p,
                           std::span<const std::string> ids = {});

enum class KMeansInit { Random, PlusPlus };

struct KMeansOptions {
    std::size_t K = 2;
    std::size_t restarts = 10;
    std::uint64_t seed = 0;
    std::size_t max_iter = 100;
    KMeansInit init = KMeansInit::Random;
    int jobs = 1;
    /// When set, receives every restart's partition in restart order.
    std::vector<Partition>* restart_log = nullptr;
};

/// True when the first `count - 1` steps of the trace never increase by more
/// than tol * max(1, |previous|).
bool trace_nonincreasing(std::span<const double> trace, double tol = 1e-9);

/// Diagonal shift applied before Lloyd: -lambda_min(g) when the Gram has an
/// eigenvalue below -1e-10 * lambda_max (estimated Grams need not be PSD),
/// else 0. Shifting by s adds s * (n - K) to the WCSS of every partition
/// with K non-empty clusters, so the objective keeps its minimisers while
/// Lloyd on the shifted matrix decreases it monotonically.
double lloyd_diagonal_shift(const GramMatrix& g);

/// Lloyd K-means in the RKHS embedding defined by a Gram matrix. Runs on the
/// shifted Gram (see lloyd_diagonal_shift); reported WCSS values are those
/// of the unshifted matrix.
Partition kernel_kmeans(const GramMatrix& g, const KMeansOptions& opt);
Partition kernel_kmeans(const GramMatrix& g, std::size_t K, std::size_t restarts, std::uint64_t seed,
                        std::size_t max_iter = 100);

/// True when no point is strictly closer (beyond roundoff) to another
/// cluster's centroid than to its own, i.e. one more Lloyd step changes
/// nothing. Uses the same diagonal shift as kernel_kmeans.
bool is_fixed_point(const GramMatrix& g, const Partition& p);

/// sum_j sum_{i in C_j} ||mu_i - mean_j||^2 from the Gram matrix.
double kernel_wcss(const GramMatrix& g, std::span<const std::size_t> assignments, std::size_t K);

enum class CentroidMode { QuantileMean, MixtureMean };
std::string centroid_mode_name(CentroidMode m);
CentroidMode parse_centroid_mode(const std::string& s);

/// Lloyd K-means under W2 on univariate records; quantile profiles on a
/// shared midpoint grid.
Partition wasserstein_kmeans(std::span<const DistributionRecord> sample, const KMeansOptions& opt,
                             CentroidMode mode = CentroidMode::QuantileMean, std::size_t grid = 1024);

bool is_fixed_point(std::span<const DistributionRecord> sample, const Partition& p,
                    CentroidMode mode = CentroidMode::QuantileMean, std::size_t grid = 1024);

}  // namespace distkm
