#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "distkm/distributions.hpp"
#include "distkm/pearson.hpp"
#include "distkm/rng.hpp"

namespace distkm {

/// Two-class model of uniform mixtures: class 1 is f1_i, class 2 is the
/// merge lambda f1_i + (1 - lambda) f2_i.
struct UnivariateModelConfig {
    double lambda = 0.0;
    std::size_t n = 100;  // total, split evenly between the two classes
    double C0 = 805.0;
    double D0 = 1004.0;

    void validate() const;
    /// "default" (805, 1004), "variation1" (100, 600), "variation2" (200, 600).
    static UnivariateModelConfig preset(const std::string& name, double lambda);
};

/// Class-1 records first, then class 2; labels "1" and "2".
std::vector<DistributionRecord> generate_univariate(const UnivariateModelConfig& cfg, Rng& rng);

struct Hyper {
    double mean = 0.0;
    double sd = 0.0;
};

/// Normal hyperparameters for the four Pearson moments of one variable.
struct VariableSpec {
    Hyper mean, std_dev, skewness, kurtosis;
};

struct ClusterSpec {
    std::array<VariableSpec, 2> vars;
    /// Gaussian-copula correlation; 0 gives independent columns.
    double correlation = 0.0;
};

struct BivariateModelConfig {
    std::vector<ClusterSpec> clusters;
    std::size_t n_per_cluster = 50;
    std::size_t n_obs = 1000;
    int max_redraws = 100;
    /// Copula construction (normal -> Phi -> Pearson quantile) instead of
    /// independent Pearson draws per column.
    bool copula = false;

    void validate() const;
    static BivariateModelConfig table3();
    /// `rho` is the class-1 correlation; class 2 uses -rho.
    static BivariateModelConfig table6(double rho = 0.9);
};

/// Draws one object's Pearson parameters; redraws infeasible sets.
std::array<PearsonParams, 2> draw_pearson_params(const ClusterSpec& spec, Rng& rng, int max_redraws);

/// Labels "1".."K"; clusters emitted in order, n_per_cluster each.
std::vector<DistributionRecord> generate_bivariate(const BivariateModelConfig& cfg, Rng& rng);

inline std::vector<DistributionRecord> generate_bivariate_independent(const BivariateModelConfig& cfg, Rng& rng) {
    auto c = cfg;
    c.copula = false;
    return generate_bivariate(c, rng);
}

inline std::vector<DistributionRecord> generate_bivariate_dependent(const BivariateModelConfig& cfg, Rng& rng) {
    auto c = cfg;
    c.copula = true;
    return generate_bivariate(c, rng);
}

/// Standard normal draw by inversion (platform-stable).
double standard_normal(Rng& rng);

}  // namespace distkm
