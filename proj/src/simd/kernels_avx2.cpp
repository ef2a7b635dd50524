#include <immintrin.h>

#include <cmath>

#include "distkm/simd/dispatch.hpp"
#include "vmath_avx2.hpp"

namespace distkm::simd::avx2 {

namespace {

// Power kernels with 4*alpha integral reduce to square roots, which are
// correctly rounded; the usual energy exponents (0.25, 0.5, 0.75) hit these.
enum class PowerPath { Zero, Quarter, Half, ThreeQuarter, One, General };

PowerPath power_path(double alpha) {
    if (alpha == 0.25) return PowerPath::Quarter;
    if (alpha == 0.5) return PowerPath::Half;
    if (alpha == 0.75) return PowerPath::ThreeQuarter;
    if (alpha == 1.0) return PowerPath::One;
    return PowerPath::General;
}

template <RadialKind Kind>
struct Radial {
    __m256d scale;
    PowerPath path;

    __m256d operator()(__m256d r2) const {
        if constexpr (Kind == RadialKind::Gaussian) {
            return vexp(_mm256_mul_pd(_mm256_sub_pd(_mm256_setzero_pd(), scale), r2));
        } else if constexpr (Kind == RadialKind::Laplace) {
            return vexp(_mm256_mul_pd(_mm256_sub_pd(_mm256_setzero_pd(), scale), _mm256_sqrt_pd(r2)));
        } else {
            switch (path) {
                case PowerPath::Quarter: return _mm256_sqrt_pd(_mm256_sqrt_pd(r2));
                case PowerPath::Half: return _mm256_sqrt_pd(r2);
                case PowerPath::ThreeQuarter: {
                    __m256d s = _mm256_sqrt_pd(r2);
                    return _mm256_mul_pd(s, _mm256_sqrt_pd(s));
                }
                case PowerPath::One: return r2;
                default: {
                    __m256d zero = _mm256_cmp_pd(r2, _mm256_setzero_pd(), _CMP_EQ_OQ);
                    __m256d safe = _mm256_max_pd(r2, _mm256_set1_pd(2.2250738585072014e-308));
                    __m256d v = vexp(_mm256_mul_pd(scale, vlog(safe)));
                    return _mm256_andnot_pd(zero, v);
                }
            }
        }
    }
};

template <RadialKind Kind, bool Weighted>
double pair_sum_impl(const RadialTerm& term, const PointsView& x, const PointsView& y) {
    const Radial<Kind> phi{_mm256_set1_pd(term.scale), power_path(term.scale)};
    const std::size_t dim = x.dim;
    const std::size_t ny = y.count;
    const std::size_t vec_end = ny - ny % 4;
    double total = 0.0;
    for (std::size_t i = 0; i < x.count; ++i) {
        __m256d acc0 = _mm256_setzero_pd();
        __m256d acc1 = _mm256_setzero_pd();
        std::size_t j = 0;
        if (dim == 1) {
            const __m256d xi = _mm256_set1_pd(x.column(0)[i]);
            const double* yc = y.column(0);
            for (; j + 8 <= ny; j += 8) {
                __m256d d0 = _mm256_sub_pd(xi, _mm256_loadu_pd(yc + j));
                __m256d d1 = _mm256_sub_pd(xi, _mm256_loadu_pd(yc + j + 4));
                __m256d v0 = phi(_mm256_mul_pd(d0, d0));
                __m256d v1 = phi(_mm256_mul_pd(d1, d1));
                if constexpr (Weighted) {
                    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(y.weights.data() + j), v0, acc0);
                    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(y.weights.data() + j + 4), v1, acc1);
                } else {
                    acc0 = _mm256_add_pd(acc0, v0);
                    acc1 = _mm256_add_pd(acc1, v1);
                }
            }
        }
        for (; j < vec_end; j += 4) {
            __m256d r2 = _mm256_setzero_pd();
            for (std::size_t d = 0; d < dim; ++d) {
                __m256d diff = _mm256_sub_pd(_mm256_set1_pd(x.column(d)[i]), _mm256_loadu_pd(y.column(d) + j));
                r2 = _mm256_fmadd_pd(diff, diff, r2);
            }
            __m256d v = phi(r2);
            if constexpr (Weighted) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(y.weights.data() + j), v, acc0);
            else acc0 = _mm256_add_pd(acc0, v);
        }
        double row = hsum(_mm256_add_pd(acc0, acc1));
        for (; j < ny; ++j) {
            double r2 = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                double diff = x.column(d)[i] - y.column(d)[j];
                r2 += diff * diff;
            }
            row += y.weight(j) * eval_radial(term, r2);
        }
        total += x.weight(i) * row;
    }
    return total;
}

template <RadialKind Kind>
double dispatch_weighted(const RadialTerm& term, const PointsView& x, const PointsView& y) {
    return y.weights.empty() ? pair_sum_impl<Kind, false>(term, x, y) : pair_sum_impl<Kind, true>(term, x, y);
}

}  // namespace

double radial_pair_sum(const RadialTerm& term, const PointsView& x, const PointsView& y) {
    switch (term.kind) {
        case RadialKind::Gaussian: return dispatch_weighted<RadialKind::Gaussian>(term, x, y);
        case RadialKind::Laplace: return dispatch_weighted<RadialKind::Laplace>(term, x, y);
        case RadialKind::Power: return dispatch_weighted<RadialKind::Power>(term, x, y);
    }
    return 0.0;
}

void sobel_norm(std::span<const double> image, std::size_t h, std::size_t w, std::span<double> out) {
    const std::size_t ow = w - 2;
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d quarter = _mm256_set1_pd(0.25);
    for (std::size_t r = 1; r + 1 < h; ++r) {
        const double* up = image.data() + (r - 1) * w;
        const double* mid = image.data() + r * w;
        const double* dn = image.data() + (r + 1) * w;
        double* dst = out.data() + (r - 1) * ow;
        std::size_t c = 1;
        // same operation order as the scalar reference, so results are bit-identical
        for (; c + 4 < w; c += 4) {
            __m256d ul = _mm256_loadu_pd(up + c - 1), uc = _mm256_loadu_pd(up + c), ur = _mm256_loadu_pd(up + c + 1);
            __m256d ml = _mm256_loadu_pd(mid + c - 1), mr = _mm256_loadu_pd(mid + c + 1);
            __m256d dl = _mm256_loadu_pd(dn + c - 1), dc = _mm256_loadu_pd(dn + c), dr = _mm256_loadu_pd(dn + c + 1);
            __m256d gx = _mm256_add_pd(_mm256_add_pd(_mm256_sub_pd(ur, ul), _mm256_mul_pd(two, _mm256_sub_pd(mr, ml))),
                                       _mm256_sub_pd(dr, dl));
            __m256d gy = _mm256_add_pd(_mm256_add_pd(_mm256_sub_pd(dl, ul), _mm256_mul_pd(two, _mm256_sub_pd(dc, uc))),
                                       _mm256_sub_pd(dr, ur));
            gx = _mm256_mul_pd(gx, quarter);
            gy = _mm256_mul_pd(gy, quarter);
            __m256d n2 = _mm256_add_pd(_mm256_mul_pd(gx, gx), _mm256_mul_pd(gy, gy));
            _mm256_storeu_pd(dst + c - 1, _mm256_sqrt_pd(n2));
        }
        for (; c + 1 < w; ++c) {
            double gx = ((up[c + 1] - up[c - 1]) + 2.0 * (mid[c + 1] - mid[c - 1]) + (dn[c + 1] - dn[c - 1])) * 0.25;
            double gy = ((dn[c - 1] - up[c - 1]) + 2.0 * (dn[c] - up[c]) + (dn[c + 1] - up[c + 1])) * 0.25;
            dst[c - 1] = std::sqrt(gx * gx + gy * gy);
        }
    }
}

}  // namespace distkm::simd::avx2
