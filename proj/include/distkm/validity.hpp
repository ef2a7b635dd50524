#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "distkm/gram.hpp"
#include "distkm/kmeans.hpp"
#include "distkm/wasserstein.hpp"

namespace distkm {

/// Class labels as dense integers 0..C-1 (first-appearance order).
std::vector<std::size_t> encode_labels(std::span<const std::string> labels);

/// Best injective cluster-to-class matching (Hungarian on the padded
/// contingency table), as a fraction of points.
double accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth);
double accuracy(const Partition& pred, std::span<const std::size_t> truth);

/// Hubert-Arabie adjusted Rand index; 0 when the denominator vanishes.
double adjusted_rand_index(std::span<const std::size_t> pred, std::span<const std::size_t> truth);
double adjusted_rand_index(const Partition& pred, std::span<const std::size_t> truth);

/// Distances between distributions and between mixture-mean centroids,
/// either from Gram algebra or from W_alpha on quantile profiles.
class GeometryHandle {
public:
    /// Opaque mixture mean of a member set.
    struct Centroid {
        std::vector<std::size_t> members;
        double self_sum = 0.0;         // Gram: sum of K over members x members
        std::vector<double> profile;   // Wasserstein: quantile profile
    };

    static GeometryHandle from_gram(GramMatrix g);
    static GeometryHandle from_wasserstein(std::span<const DistributionRecord> sample, double alpha = 2.0,
                                           std::size_t grid = 1024, int jobs = 1);

    std::size_t size() const noexcept { return n_; }
    bool is_gram() const noexcept { return static_cast<bool>(gram_); }

    double dist(std::size_t i, std::size_t l) const { return pair_[i * n_ + l]; }
    Centroid centroid(std::span<const std::size_t> members) const;
    double dist_to_centroid(std::size_t i, const Centroid& c) const;
    double centroid_dist(const Centroid& a, const Centroid& b) const;

private:
    std::size_t n_ = 0;
    std::vector<double> pair_;
    std::shared_ptr<const GramMatrix> gram_;
    std::shared_ptr<const std::vector<DistributionRecord>> records_;
    std::vector<std::vector<double>> profiles_;
    double alpha_ = 2.0;
    std::size_t grid_ = 1024;
};

/// An index value; `flagged` marks a degenerate configuration reported as +inf.
struct IndexResult {
    double value = 0.0;
    bool flagged = false;
};

IndexResult calinski_harabasz(const GeometryHandle& geo, const Partition& part);
IndexResult silhouette(const GeometryHandle& geo, const Partition& part);
IndexResult davies_bouldin_star(const GeometryHandle& geo, const Partition& part);

enum class Criterion { CH, Silhouette, DBStar };
std::string criterion_name(Criterion c);
Criterion parse_criterion(const std::string& s);
IndexResult score(Criterion c, const GeometryHandle& geo, const Partition& part);
/// Maximized for CH and silhouette, minimized for DB*.
bool criterion_maximized(Criterion c);

struct KScore {
    std::size_t K = 0;
    IndexResult value;
};

struct KSelection {
    std::size_t chosen = 0;
    std::vector<KScore> scores;
};

/// Clusters with `runner(K)` for every K in k_range and picks the best
/// index value; ties go to the smaller K.
KSelection select_k(const GeometryHandle& geo, const std::function<Partition(std::size_t)>& runner,
                    std::span<const std::size_t> k_range, Criterion criterion);

}  // namespace distkm
