#include "distkm/simd/dispatch.hpp"

#include <atomic>

#include "distkm/error.hpp"

namespace distkm::simd {

namespace {

// -1: automatic, otherwise the forced Isa value
std::atomic<int> g_override{-1};

}  // namespace

std::string isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2:
#if defined(DISTKM_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

Isa best_isa() {
    static const Isa best = isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
    return best;
}

Isa active_isa() {
    int forced = g_override.load(std::memory_order_relaxed);
    return forced < 0 ? best_isa() : static_cast<Isa>(forced);
}

void set_isa_override(std::optional<Isa> isa) {
    if (isa && !isa_supported(*isa)) throw ConfigError("instruction set '" + isa_name(*isa) + "' is not supported here");
    g_override.store(isa ? static_cast<int>(*isa) : -1, std::memory_order_relaxed);
}

double radial_pair_sum(const RadialTerm& term, const PointsView& x, const PointsView& y, Isa isa) {
    if (x.dim != y.dim) throw InputError("radial_pair_sum: dimension mismatch");
#if defined(DISTKM_HAVE_AVX2)
    if (isa == Isa::Avx2) return avx2::radial_pair_sum(term, x, y);
#endif
    (void)isa;
    return scalar::radial_pair_sum(term, x, y);
}

double radial_pair_sum(const RadialTerm& term, const PointsView& x, const PointsView& y) {
    return radial_pair_sum(term, x, y, active_isa());
}

void sobel_norm(std::span<const double> image, std::size_t h, std::size_t w, std::span<double> out, Isa isa) {
    if (h < 3 || w < 3) throw InputError("sobel: image must be at least 3x3");
    if (image.size() != h * w || out.size() != (h - 2) * (w - 2)) throw InputError("sobel: buffer size mismatch");
#if defined(DISTKM_HAVE_AVX2)
    if (isa == Isa::Avx2) return avx2::sobel_norm(image, h, w, out);
#endif
    (void)isa;
    scalar::sobel_norm(image, h, w, out);
}

void sobel_norm(std::span<const double> image, std::size_t h, std::size_t w, std::span<double> out) {
    sobel_norm(image, h, w, out, active_isa());
}

}  // namespace distkm::simd
