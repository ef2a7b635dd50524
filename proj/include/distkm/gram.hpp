#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "distkm/distributions.hpp"
#include "distkm/kernels.hpp"
#include "distkm/quadrature.hpp"

namespace distkm {

enum class GramMode : std::uint8_t { Exact = 0, Estimated = 1 };

/// n x n matrix of RKHS inner products <mu_i, mu_l>, stored row-major and
/// exactly symmetric.
class GramMatrix {
public:
    GramMatrix() = default;
    /// Symmetrizes `values` as (A + A^T)/2.
    GramMatrix(std::size_t n, std::vector<double> values, GramMode mode, KernelSpec kernel);

    std::size_t size() const noexcept { return n_; }
    GramMode mode() const noexcept { return mode_; }
    const KernelSpec& kernel() const noexcept { return kernel_; }
    double operator()(std::size_t i, std::size_t l) const { return values_[i * n_ + l]; }
    std::span<const double> values() const noexcept { return values_; }

    /// Principal submatrix/permutation: result(a, b) = (*this)(idx[a], idx[b]).
    GramMatrix select(std::span<const std::size_t> idx) const;

private:
    std::size_t n_ = 0;
    std::vector<double> values_;
    GramMode mode_ = GramMode::Exact;
    KernelSpec kernel_;
};

/// K_il = integral of k over F_i x F_l for univariate uniform mixtures.
GramMatrix gram_exact(std::span<const UniformMixture> sample, const KernelSpec& kernel,
                      const QuadratureConfig& quad = {}, int jobs = 1);

/// Convenience overload over records; every record must be a mixture.
GramMatrix gram_exact(std::span<const DistributionRecord> sample, const KernelSpec& kernel,
                      const QuadratureConfig& quad = {}, int jobs = 1);

/// Exact <mu_F, mu_G> for one pair of mixtures.
double exact_inner_product(const UniformMixture& f, const UniformMixture& g, const KernelSpec& kernel,
                           const QuadratureConfig& quad = {});

/// Unbiased estimator: V-statistic off the diagonal, U-statistic on it.
GramMatrix gram_estimated(std::span<const EmpiricalDistribution> sample, const KernelSpec& kernel, int jobs = 1);

/// Convenience overload over records; every record must be empirical.
GramMatrix gram_estimated(std::span<const DistributionRecord> sample, const KernelSpec& kernel, int jobs = 1);

/// Off-diagonal estimate for one pair.
double estimated_cross(const EmpiricalDistribution& x, const EmpiricalDistribution& y, const KernelSpec& kernel);
/// U-statistic estimate of <mu_F, mu_F>.
double estimated_self(const EmpiricalDistribution& x, const KernelSpec& kernel);

/// K_ii + K_ll - 2 K_il (raw; may be negative in estimated mode).
double mmd_squared(const GramMatrix& g, std::size_t i, std::size_t l);
/// sqrt(max(mmd_squared, 0)).
double mmd_dist(const GramMatrix& g, std::size_t i, std::size_t l);

/// ||mu_i - mean of mu over members||^2, clamped at 0.
double dist_sq_to_centroid(const GramMatrix& g, std::size_t i, std::span<const std::size_t> members);

/// Sum of K over members x members; the cluster term reused across points.
double cluster_gram_sum(const GramMatrix& g, std::span<const std::size_t> members);

// --- persistence -------------------------------------------------------------

/// Binary matrix container: 16-byte header (magic, u32 n, u8 mode, u8 tag,
/// padding) followed by n*n little-endian doubles, row-major.
struct MatrixFile {
    static constexpr std::uint8_t kModeExact = 0;
    static constexpr std::uint8_t kModeEstimated = 1;
    static constexpr std::uint8_t kModeWasserstein = 2;
    static constexpr std::uint8_t kNoKernel = 0xFF;

    std::size_t n = 0;
    std::uint8_t mode = kModeExact;
    std::uint8_t kernel_tag = kNoKernel;
    std::vector<double> values;
};

void write_matrix_file(const std::filesystem::path& path, const MatrixFile& m);
MatrixFile read_matrix_file(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_matrix(const MatrixFile& m);
MatrixFile decode_matrix(std::span<const std::uint8_t> bytes);

/// Writes the binary file plus `<path>.json` with the kernel spec and the
/// input manifest hash.
void save_gram(const std::filesystem::path& path, const GramMatrix& g, const std::string& manifest_hash);
GramMatrix load_gram(const std::filesystem::path& path);

void write_matrix_csv(const std::filesystem::path& path, std::size_t n, std::span<const double> values);

}  // namespace distkm

namespace distkm {

/// R_il = sum over atom pairs of w w' phi(||x - y||^2): the only O(N_i N_l)
/// part of the estimated Gram. Kernels sharing a radial term (e.g. every
/// modified Gaussian and the unit Gaussian) can share one R.
std::vector<double> radial_sum_matrix(std::span<const EmpiricalDistribution> sample, const RadialTerm& term,
                                      int jobs = 1);

/// Completes the estimated Gram from a precomputed radial sum matrix.
GramMatrix assemble_estimated(std::span<const EmpiricalDistribution> sample, const KernelSpec& kernel,
                              std::span<const double> radial_sums);

}  // namespace distkm
