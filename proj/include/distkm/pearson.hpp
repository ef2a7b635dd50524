#pragma once

#include <memory>
#include <string>
#include <vector>

#include "distkm/rng.hpp"

namespace distkm {

/// Four moment targets; kurtosis is the raw (non-excess) fourth standardized moment.
struct PearsonParams {
    double mean = 0.0;
    double std_dev = 1.0;
    double skewness = 0.0;
    double kurtosis = 3.0;

    /// std_dev > 0 and kurtosis > skewness^2 + 1.
    bool feasible() const noexcept;
    /// Throws InputError naming the violated constraint.
    void validate() const;
};

enum class PearsonType { Normal, I, II, III, IV, V, VI, VII };
std::string pearson_type_name(PearsonType t);

/// Pearson type from (skewness, kurtosis) via the kappa criterion.
PearsonType classify_pearson(double skewness, double kurtosis);

/// Moment-matched member of the Pearson system with quantile and CDF.
/// Every type is sampled by inversion, Q(U).
class PearsonDistribution {
public:
    explicit PearsonDistribution(const PearsonParams& p);

    PearsonType type() const noexcept { return type_; }
    const PearsonParams& params() const noexcept { return params_; }

    double quantile(double q) const;
    double cdf(double x) const;
    double sample(Rng& rng) const;
    std::vector<double> sample(std::size_t n, Rng& rng) const;

    struct InverseTable;

private:
    // Standardized variable for skewness |gamma| (mirrored when gamma < 0).
    double std_quantile(double q) const;
    double std_cdf(double z) const;
    double beta_quantile(double q) const;
    double beta_cdf(double u) const;

    PearsonParams params_;
    PearsonType type_;
    bool mirrored_ = false;
    double p1_ = 0.0, p2_ = 0.0;          // shape parameters
    double loc_ = 0.0, scale_ = 1.0;      // z = loc + scale * (standard variate)
    std::shared_ptr<const InverseTable> table_;  // tabulated inverse CDF (types I/II/IV/VI)
};

std::vector<double> sample_pearson(const PearsonParams& p, std::size_t n, Rng& rng);

}  // namespace distkm
