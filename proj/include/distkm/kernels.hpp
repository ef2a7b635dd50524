#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "distkm/distributions.hpp"

namespace distkm {

enum class KernelFamily : std::uint8_t {
    Gaussian = 0,
    Laplace = 1,
    ModifiedGaussian = 2,
    Energy = 3,
};

std::string family_name(KernelFamily f);
KernelFamily parse_family(const std::string& name);

/// Kernel family plus tuning parameter.
///
/// Gaussian/Laplace use `sigma` (> 0, or `sigma_auto` to resolve it to the
/// median-of-standard-deviations rule at experiment time). ModifiedGaussian
/// uses `alpha >= 1`; Energy uses `0 < alpha < 1`.
struct KernelSpec {
    KernelFamily family = KernelFamily::Gaussian;
    double sigma = 1.0;
    double alpha = 0.5;
    bool sigma_auto = false;

    static KernelSpec gaussian(double sigma) { return {KernelFamily::Gaussian, sigma, 0.0, false}; }
    static KernelSpec laplace(double sigma) { return {KernelFamily::Laplace, sigma, 0.0, false}; }
    static KernelSpec modified_gaussian(double alpha) { return {KernelFamily::ModifiedGaussian, 0.0, alpha, false}; }
    static KernelSpec energy(double alpha) { return {KernelFamily::Energy, 0.0, alpha, false}; }
    static KernelSpec auto_sigma(KernelFamily f) { return {f, 0.0, 0.0, true}; }

    bool uses_sigma() const noexcept {
        return family == KernelFamily::Gaussian || family == KernelFamily::Laplace;
    }

    /// Throws ConfigError when the parameters violate the family invariants.
    /// An unresolved auto sigma is rejected here; call `with_sigma` first.
    void validate() const;

    KernelSpec with_sigma(double s) const {
        KernelSpec k = *this;
        k.sigma = s;
        k.sigma_auto = false;
        return k;
    }

    /// Short human label, e.g. "gaussian(sigma=1.5)" or "energy(alpha=0.5)".
    std::string describe() const;

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// k(x, y) in closed form with Euclidean norms.
double eval_kernel(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

/// Median over records of the per-distribution standard deviation, where the
/// multivariate standard deviation is sqrt(trace(covariance)).
double select_sigma_star(std::span<const DistributionRecord> sample);

/// Per-record dispersion used by select_sigma_star.
double dispersion(const DistributionRecord& r);

// --- Decomposition used by the Gram machinery -------------------------------
//
// Every supported kernel splits as
//   k(x, y) = radial_coef * phi(||x - y||^2)
//           + self_coef * (s(x) + s(y)) + product_coef * t(x) * t(y)
// with s(x) = ||x||^self_power and t(x) = ||x||^product_power.

enum class RadialKind : std::uint8_t {
    Gaussian,  // exp(-scale * r2)
    Laplace,   // exp(-scale * sqrt(r2))
    Power,     // r2^scale  (0 at r2 = 0)
};

struct RadialTerm {
    RadialKind kind = RadialKind::Gaussian;
    double scale = 1.0;
    friend bool operator==(const RadialTerm&, const RadialTerm&) = default;
};

struct KernelTerms {
    RadialTerm radial;
    double radial_coef = 1.0;
    double self_coef = 0.0;
    double self_power = 0.0;
    double product_coef = 0.0;
    double product_power = 0.0;
};

KernelTerms decompose(const KernelSpec& spec);

/// phi(r2) of a radial term (scalar reference).
double eval_radial(const RadialTerm& term, double r2);

}  // namespace distkm
