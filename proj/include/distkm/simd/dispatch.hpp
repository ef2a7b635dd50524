#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "distkm/kernels.hpp"

namespace distkm::simd {

/// Instruction-set variants of the data-parallel kernels. `Scalar` is the
/// reference implementation every vector variant is tested against.
enum class Isa { Scalar, Avx2 };

std::string isa_name(Isa isa);
bool isa_supported(Isa isa);
/// Fastest variant the running CPU supports.
Isa best_isa();
/// Variant used by default dispatch: the override if set, else best_isa().
Isa active_isa();
/// Forces a variant (tests, benchmarking, `--isa`). Unsupported requests
/// throw ConfigError. std::nullopt restores automatic selection.
void set_isa_override(std::optional<Isa> isa);

/// Non-owning view of a point set in column-major layout:
/// coordinate d of point i is data[d * count + i]. Empty `weights` means
/// every point has weight 1.
struct PointsView {
    std::span<const double> data;
    std::size_t dim = 0;
    std::size_t count = 0;
    std::span<const double> weights;

    const double* column(std::size_t d) const { return data.data() + d * count; }
    double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
};

/// sum_i sum_j w_i v_j phi(||x_i - y_j||^2), all pairs including i == j when
/// x and y alias. The caller removes diagonal terms for U-statistics.
double radial_pair_sum(const RadialTerm& term, const PointsView& x, const PointsView& y);
double radial_pair_sum(const RadialTerm& term, const PointsView& x, const PointsView& y, Isa isa);

/// Valid-mode 3x3 Sobel gradient norm of an h x w row-major image; writes
/// (h-2)*(w-2) values row-major into `out`.
void sobel_norm(std::span<const double> image, std::size_t h, std::size_t w, std::span<double> out);
void sobel_norm(std::span<const double> image, std::size_t h, std::size_t w, std::span<double> out, Isa isa);

namespace scalar {
double radial_pair_sum(const RadialTerm& term, const PointsView& x, const PointsView& y);
void sobel_norm(std::span<const double> image, std::size_t h, std::size_t w, std::span<double> out);
}  // namespace scalar

namespace avx2 {
double radial_pair_sum(const RadialTerm& term, const PointsView& x, const PointsView& y);
void sobel_norm(std::span<const double> image, std::size_t h, std::size_t w, std::span<double> out);
}  // namespace avx2

}  // namespace distkm::simd
