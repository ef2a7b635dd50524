#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "distkm/rng.hpp"

namespace distkm {

/// Empirical sample of N points in R^p.
///
/// Points are stored as distinct "atoms" in column-major (SoA) order with an
/// optional multiplicity per atom. An unweighted sample has one atom per
/// observation. Multiplicities let discretized data (SAR gray levels) be held
/// compactly without changing any statistic: every estimator treats an atom of
/// count c exactly like c repeated observations.
class EmpiricalDistribution {
public:
    EmpiricalDistribution() = default;

    /// `rows` holds N*p values, row-major (one observation per row).
    EmpiricalDistribution(std::size_t dim, std::span<const double> rows);

    /// Atoms row-major plus positive integer multiplicities.
    static EmpiricalDistribution with_counts(std::size_t dim, std::span<const double> atom_rows,
                                             std::span<const double> counts);

    /// Univariate convenience constructor.
    static EmpiricalDistribution univariate(std::span<const double> values);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t atom_count() const noexcept { return atoms_; }
    /// N: number of observations (sum of multiplicities).
    std::size_t sample_size() const noexcept { return sample_size_; }
    bool weighted() const noexcept { return !counts_.empty(); }

    std::span<const double> column(std::size_t d) const {
        return {columns_.data() + d * atoms_, atoms_};
    }
    /// All coordinates, column-major (coordinate d of atom i at d*atoms + i).
    std::span<const double> column_data() const noexcept { return columns_; }
    /// Empty when unweighted.
    std::span<const double> counts() const noexcept { return counts_; }
    double count(std::size_t atom) const { return counts_.empty() ? 1.0 : counts_[atom]; }
    double value(std::size_t atom, std::size_t d) const { return columns_[d * atoms_ + atom]; }

    /// Merges identical observations into counted atoms (lexicographic order).
    EmpiricalDistribution compressed() const;

    /// Row-major observations with multiplicities expanded (N*p values).
    std::vector<double> expanded_rows() const;

    /// Sorted atom values and cumulative counts; univariate only.
    std::span<const double> sorted_values() const { return sorted_values_; }
    std::span<const double> cumulative_counts() const { return cumulative_counts_; }

private:
    void finalize();

    std::size_t dim_ = 0;
    std::size_t atoms_ = 0;
    std::size_t sample_size_ = 0;
    std::vector<double> columns_;
    std::vector<double> counts_;
    std::vector<double> sorted_values_;
    std::vector<double> cumulative_counts_;
};

struct MixtureComponent {
    double weight = 1.0;
    double a = 0.0;
    double b = 1.0;
    friend bool operator==(const MixtureComponent&, const MixtureComponent&) = default;
};

/// Finite mixture of univariate uniform laws U(a, b).
class UniformMixture {
public:
    UniformMixture() = default;
    /// Throws InputError unless every weight is in (0, 1], a < b, and the
    /// weights sum to 1 within 1e-12.
    explicit UniformMixture(std::vector<MixtureComponent> components);

    static UniformMixture uniform(double a, double b) { return UniformMixture({{1.0, a, b}}); }

    std::span<const MixtureComponent> components() const noexcept { return components_; }
    double support_min() const;
    double support_max() const;

    friend bool operator==(const UniformMixture&, const UniformMixture&) = default;

private:
    std::vector<MixtureComponent> components_;
};

/// One distributional datum plus its optional class label.
struct DistributionRecord {
    std::variant<EmpiricalDistribution, UniformMixture> payload;
    std::optional<std::string> label;

    bool is_empirical() const noexcept { return payload.index() == 0; }
    bool is_mixture() const noexcept { return payload.index() == 1; }
    const EmpiricalDistribution& empirical() const { return std::get<EmpiricalDistribution>(payload); }
    const UniformMixture& mixture() const { return std::get<UniformMixture>(payload); }
    std::size_t dim() const;
};

struct Moments {
    std::vector<double> mean;
    std::vector<double> covariance;  // p*p row-major
    std::size_t dim() const noexcept { return mean.size(); }
};

double mixture_cdf(const UniformMixture& m, double t);

/// inf{t : F(t) >= q}; exact on the piecewise-linear CDF. q must be in (0,1).
double mixture_quantile(const UniformMixture& m, double q);

EmpiricalDistribution sample_mixture(const UniformMixture& m, std::size_t n, Rng& rng);

/// Empirical: sample mean and unbiased (N-1) covariance. Analytic: exact.
Moments moments(const DistributionRecord& r);

/// Right-continuous ECDF of a univariate sample.
double empirical_cdf(const EmpiricalDistribution& e, double t);

/// inf{x : F_N(x) >= q} for a univariate sample, q in (0,1).
double empirical_quantile(const EmpiricalDistribution& e, double q);

/// CDF / quantile / support of a univariate record of either payload.
double record_cdf(const DistributionRecord& r, double t);
double record_quantile(const DistributionRecord& r, double q);
std::pair<double, double> record_support(const DistributionRecord& r);

}  // namespace distkm
