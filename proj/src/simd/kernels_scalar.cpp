#include <cmath>

#include "distkm/simd/dispatch.hpp"

namespace distkm::simd::scalar {

double radial_pair_sum(const RadialTerm& term, const PointsView& x, const PointsView& y) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.count; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < y.count; ++j) {
            double r2 = 0.0;
            for (std::size_t d = 0; d < x.dim; ++d) {
                double diff = x.column(d)[i] - y.column(d)[j];
                r2 += diff * diff;
            }
            row += y.weight(j) * eval_radial(term, r2);
        }
        total += x.weight(i) * row;
    }
    return total;
}

// Correlation with the 1/4-scaled Sobel pair; flipping both masks (true
// convolution) only negates gx and gy, so the norm is the same.
void sobel_norm(std::span<const double> image, std::size_t h, std::size_t w, std::span<double> out) {
    const std::size_t ow = w - 2;
    for (std::size_t r = 1; r + 1 < h; ++r) {
        const double* up = image.data() + (r - 1) * w;
        const double* mid = image.data() + r * w;
        const double* dn = image.data() + (r + 1) * w;
        for (std::size_t c = 1; c + 1 < w; ++c) {
            double gx = ((up[c + 1] - up[c - 1]) + 2.0 * (mid[c + 1] - mid[c - 1]) + (dn[c + 1] - dn[c - 1])) * 0.25;
            double gy = ((dn[c - 1] - up[c - 1]) + 2.0 * (dn[c] - up[c]) + (dn[c + 1] - up[c + 1])) * 0.25;
            out[(r - 1) * ow + (c - 1)] = std::sqrt(gx * gx + gy * gy);
        }
    }
}

}  // namespace distkm::simd::scalar
