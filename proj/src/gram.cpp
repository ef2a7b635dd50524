#include "distkm/gram.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "distkm/error.hpp"
#include "distkm/parallel.hpp"
#include "distkm/simd/dispatch.hpp"

namespace distkm {

GramMatrix::GramMatrix(std::size_t n, std::vector<double> values, GramMode mode, KernelSpec kernel)
    : n_(n), values_(std::move(values)), mode_(mode), kernel_(kernel) {
    if (values_.size() != n * n) throw InputError("GramMatrix: expected n*n values");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = i + 1; l < n; ++l) {
            double s = 0.5 * (values_[i * n + l] + values_[l * n + i]);
            values_[i * n + l] = values_[l * n + i] = s;
        }
}

GramMatrix GramMatrix::select(std::span<const std::size_t> idx) const {
    std::vector<double> v(idx.size() * idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b) v[a * idx.size() + b] = (*this)(idx[a], idx[b]);
    return GramMatrix(idx.size(), std::move(v), mode_, kernel_);
}

// ---------------------------------------------------------------------------
// Exact mode

namespace {

struct ExactContext {
    KernelTerms terms;
    GaussLegendre rule;
    QuadratureConfig cfg;
};

// E|X|^p for X ~ U(a, b), split at the origin where |x|^p is not smooth.
double mean_abs_power(double p, double a, double b, const ExactContext& ctx) {
    if (p == 0.0) return 1.0;
    if (ctx.cfg.closed_form) {
        auto F = [p](double x) { return std::copysign(std::pow(std::abs(x), p + 1.0) / (p + 1.0), x); };
        return (F(b) - F(a)) / (b - a);
    }
    auto f = [p](double x) { return std::pow(std::abs(x), p); };
    double s = 0.0;
    if (a < 0.0 && b > 0.0) {
        s = integrate_adaptive(f, a, 0.0, ctx.rule, ctx.cfg) + integrate_adaptive(f, 0.0, b, ctx.rule, ctx.cfg);
    } else {
        s = integrate_adaptive(f, a, b, ctx.rule, ctx.cfg);
    }
    return s / (b - a);
}

// Primitives along z of phi(z^2): P0(z) = int_0^z phi, P1(z) = int_0^z t phi.
// Differences are formed directly where subtracting primitives would cancel.
double radial_i0(const RadialTerm& t, double u, double v) {
    switch (t.kind) {
        case RadialKind::Gaussian: {
            const double r = std::sqrt(t.scale), c = std::sqrt(std::numbers::pi) / (2.0 * r);
            if (u >= 0.0) return c * (std::erfc(r * u) - std::erfc(r * v));
            if (v <= 0.0) return c * (std::erfc(-r * v) - std::erfc(-r * u));
            return c * (std::erf(r * v) - std::erf(r * u));
        }
        case RadialKind::Laplace: {
            auto p0 = [&](double z) { return std::copysign(-std::expm1(-t.scale * std::abs(z)) / t.scale, z); };
            if (u >= 0.0) return std::exp(-t.scale * u) * -std::expm1(-t.scale * (v - u)) / t.scale;
            if (v <= 0.0) return std::exp(t.scale * v) * -std::expm1(-t.scale * (v - u)) / t.scale;
            return p0(v) - p0(u);
        }
        case RadialKind::Power: {
            const double e = 2.0 * t.scale + 1.0;
            auto p0 = [&](double z) { return std::copysign(std::pow(std::abs(z), e) / e, z); };
            return p0(v) - p0(u);
        }
    }
    return 0.0;
}

double radial_j1(const RadialTerm& t, double u, double v) {
    switch (t.kind) {
        case RadialKind::Gaussian:
            return (std::exp(-t.scale * u * u) - std::exp(-t.scale * v * v)) / (2.0 * t.scale);
        case RadialKind::Laplace: {
            auto p1 = [&](double z) {
                const double x = t.scale * std::abs(z);
                return (-std::expm1(-x) - x * std::exp(-x)) / (t.scale * t.scale);
            };
            return p1(v) - p1(u);
        }
        case RadialKind::Power: {
            const double e = 2.0 * t.scale + 2.0;
            return (std::pow(std::abs(v), e) - std::pow(std::abs(u), e)) / e;
        }
    }
    return 0.0;
}

// int_u^v phi(z^2) (h_u + slope (z - u)) dz for a linear piece of the density.
double radial_piece(const RadialTerm& t, double u, double v, double hu, double hv) {
    const double slope = (hv - hu) / (v - u);
    const double i0 = radial_i0(t, u, v);
    return hu * i0 + slope * (radial_j1(t, u, v) - u * i0);
}

// E phi((X - Y)^2) for independent X ~ U(a, b), Y ~ U(c, d), as a 1-D
// integral against the trapezoidal density of Z = X - Y. Panels break at the
// trapezoid knots and at the origin; Gaussian/Laplace terms add geometric
// breaks at the kernel length scale around the peak, and power terms use
// z = t^2 on panels touching the origin, which removes the |z|^(2 alpha) cusp.
double radial_expectation(const RadialTerm& term, double a, double b, double c, double d, const ExactContext& ctx) {
    const double norm = (b - a) * (d - c);
    auto density = [=](double z) {
        double overlap = std::min(b, z + d) - std::max(a, z + c);
        return overlap > 0.0 ? overlap / norm : 0.0;
    };
    auto integrand = [&](double z) { return eval_radial(term, z * z) * density(z); };
    const double lo = a - d;
    const double hi = b - c;
    std::vector<double> knots{lo, a - c, b - d, hi};
    if (lo < 0.0 && hi > 0.0) {
        knots.push_back(0.0);
        if (term.kind != RadialKind::Power) {
            const double width = term.kind == RadialKind::Gaussian ? 1.0 / std::sqrt(term.scale) : 1.0 / term.scale;
            const double reach = std::max(-lo, hi);
            for (double w = width; w < reach; w *= 2.0) {
                if (-w > lo) knots.push_back(-w);
                if (w < hi) knots.push_back(w);
            }
        }
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

    if (ctx.cfg.closed_form) {
        double total = 0.0;
        for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
            const double u = std::max(knots[k], lo), v = std::min(knots[k + 1], hi);
            if (v > u) total += radial_piece(term, u, v, density(u), density(v));
        }
        return total;
    }

    // One tolerance for the whole integral, shared by length: tail panels
    // that cannot move the sum are not refined to their own relative accuracy.
    struct Piece {
        double u, v;
        bool substitute;
    };
    std::vector<Piece> pieces;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double u = std::max(knots[k], lo), v = std::min(knots[k + 1], hi);
        if (v > u) pieces.push_back({u, v, term.kind == RadialKind::Power && (u == 0.0 || v == 0.0)});
    }
    auto substituted = [&](const Piece& p) {
        // |z| = t^2, dz = 2t dt on the side of the origin this panel covers
        const double sign = p.v == 0.0 ? -1.0 : 1.0;
        return [&integrand, sign](double t) { return 2.0 * t * integrand(sign * t * t); };
    };
    auto t_length = [](const Piece& p) { return std::sqrt(p.v == 0.0 ? -p.u : p.v); };
    double magnitude = 0.0;
    for (const auto& p : pieces)
        magnitude += p.substitute ? rough_magnitude(substituted(p), 0.0, t_length(p), ctx.rule)
                                  : rough_magnitude(integrand, p.u, p.v, ctx.rule);
    const double tol_per_length = ctx.cfg.rel_tol * magnitude / (hi - lo);
    double total = 0.0;
    for (const auto& p : pieces) {
        const double abs_tol = tol_per_length * (p.v - p.u);
        total += p.substitute ? integrate_adaptive(substituted(p), 0.0, t_length(p), ctx.rule, ctx.cfg, abs_tol)
                              : integrate_adaptive(integrand, p.u, p.v, ctx.rule, ctx.cfg, abs_tol);
    }
    return total;
}

struct MixtureSummary {
    double self_mean = 0.0;     // E s(X)
    double product_mean = 0.0;  // E t(X)
};

MixtureSummary summarize(const UniformMixture& m, const ExactContext& ctx) {
    MixtureSummary s;
    for (const auto& c : m.components()) {
        if (ctx.terms.self_coef != 0.0) s.self_mean += c.weight * mean_abs_power(ctx.terms.self_power, c.a, c.b, ctx);
        if (ctx.terms.product_coef != 0.0)
            s.product_mean += c.weight * mean_abs_power(ctx.terms.product_power, c.a, c.b, ctx);
    }
    return s;
}

double inner_product(const UniformMixture& f, const MixtureSummary& sf, const UniformMixture& g,
                     const MixtureSummary& sg, const ExactContext& ctx) {
    double radial = 0.0;
    for (const auto& cf : f.components())
        for (const auto& cg : g.components())
            radial += cf.weight * cg.weight * radial_expectation(ctx.terms.radial, cf.a, cf.b, cg.a, cg.b, ctx);
    return ctx.terms.radial_coef * radial + ctx.terms.self_coef * (sf.self_mean + sg.self_mean) +
           ctx.terms.product_coef * sf.product_mean * sg.product_mean;
}

}  // namespace

namespace {

// Pairs are evaluated in a fixed argument order so that K(f, g) and K(g, f)
// are bit-identical and permuting the sample permutes the Gram exactly.
bool canonical_before(const UniformMixture& f, const UniformMixture& g) {
    auto key = [](const MixtureComponent& c) { return std::tuple(c.a, c.b, c.weight); };
    const auto a = f.components(), b = g.components();
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [&](const auto& x, const auto& y) { return key(x) < key(y); });
}

double ordered_inner_product(const UniformMixture& f, const MixtureSummary& sf, const UniformMixture& g,
                             const MixtureSummary& sg, const ExactContext& ctx) {
    return canonical_before(g, f) ? inner_product(g, sg, f, sf, ctx) : inner_product(f, sf, g, sg, ctx);
}

}  // namespace

double exact_inner_product(const UniformMixture& f, const UniformMixture& g, const KernelSpec& kernel,
                           const QuadratureConfig& quad) {
    ExactContext ctx{decompose(kernel), GaussLegendre(quad.nodes), quad};
    return ordered_inner_product(f, summarize(f, ctx), g, summarize(g, ctx), ctx);
}

GramMatrix gram_exact(std::span<const UniformMixture> sample, const KernelSpec& kernel, const QuadratureConfig& quad,
                      int jobs) {
    const ExactContext ctx{decompose(kernel), GaussLegendre(quad.nodes), quad};
    const std::size_t n = sample.size();
    std::vector<MixtureSummary> summary(n);
    for (std::size_t i = 0; i < n; ++i) summary[i] = summarize(sample[i], ctx);
    std::vector<double> values(n * n);
    // row i fills the upper triangle (i, l >= i)
    parallel_for(n, jobs, [&](std::size_t i) {
        for (std::size_t l = i; l < n; ++l) {
            double v = ordered_inner_product(sample[i], summary[i], sample[l], summary[l], ctx);
            values[i * n + l] = v;
            values[l * n + i] = v;
        }
    });
    return GramMatrix(n, std::move(values), GramMode::Exact, kernel);
}

GramMatrix gram_exact(std::span<const DistributionRecord> sample, const KernelSpec& kernel,
                      const QuadratureConfig& quad, int jobs) {
    std::vector<UniformMixture> mixtures;
    mixtures.reserve(sample.size());
    for (const auto& r : sample) {
        if (!r.is_mixture()) throw ModeError("gram_exact: exact Gram needs analytic uniform-mixture records");
        mixtures.push_back(r.mixture());
    }
    return gram_exact(std::span<const UniformMixture>(mixtures), kernel, quad, jobs);
}

// ---------------------------------------------------------------------------
// Estimated mode

namespace {

simd::PointsView view(const EmpiricalDistribution& e) {
    return {e.column_data(), e.dim(), e.atom_count(), e.counts()};
}

double point_norm(const EmpiricalDistribution& e, std::size_t atom) {
    double s = 0.0;
    for (std::size_t d = 0; d < e.dim(); ++d) s += e.value(atom, d) * e.value(atom, d);
    return std::sqrt(s);
}

struct SampleSummary {
    double n = 0.0;             // N
    double self_sum = 0.0;      // sum_j s(x_j)
    double product_sum = 0.0;   // sum_j t(x_j)
    double diagonal_sum = 0.0;  // sum_j k(x_j, x_j)
};

SampleSummary summarize(const EmpiricalDistribution& e, const KernelTerms& t) {
    SampleSummary s;
    s.n = static_cast<double>(e.sample_size());
    const double phi0 = eval_radial(t.radial, 0.0);
    for (std::size_t a = 0; a < e.atom_count(); ++a) {
        const double c = e.count(a);
        const double r = point_norm(e, a);
        double self = 0.0, prod = 0.0;
        if (t.self_coef != 0.0) self = std::pow(r, t.self_power);
        if (t.product_coef != 0.0) prod = std::pow(r, t.product_power);
        s.self_sum += c * self;
        s.product_sum += c * prod;
        s.diagonal_sum += c * (t.radial_coef * phi0 + 2.0 * t.self_coef * self + t.product_coef * prod * prod);
    }
    return s;
}

double cross_value(double radial, const SampleSummary& x, const SampleSummary& y, const KernelTerms& t) {
    double full = t.radial_coef * radial + t.self_coef * (y.n * x.self_sum + x.n * y.self_sum) +
                  t.product_coef * x.product_sum * y.product_sum;
    return full / (x.n * y.n);
}

double self_value(double radial, const SampleSummary& x, const KernelTerms& t) {
    double full = t.radial_coef * radial + 2.0 * t.self_coef * x.n * x.self_sum + t.product_coef * x.product_sum * x.product_sum;
    return (full - x.diagonal_sum) / (x.n * (x.n - 1.0));
}

// Fixed argument order for the pair sum (see canonical_before for mixtures).
bool canonical_before(const EmpiricalDistribution& x, const EmpiricalDistribution& y) {
    if (x.atom_count() != y.atom_count()) return x.atom_count() < y.atom_count();
    const auto a = x.column_data(), b = y.column_data();
    if (!std::equal(a.begin(), a.end(), b.begin(), b.end()))
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    const auto ca = x.counts(), cb = y.counts();
    return std::lexicographical_compare(ca.begin(), ca.end(), cb.begin(), cb.end());
}

double ordered_pair_sum(const RadialTerm& term, const EmpiricalDistribution& x, const EmpiricalDistribution& y,
                        simd::Isa isa) {
    return canonical_before(y, x) ? simd::radial_pair_sum(term, view(y), view(x), isa)
                                  : simd::radial_pair_sum(term, view(x), view(y), isa);
}

void check_estimable(std::span<const EmpiricalDistribution> sample) {
    if (sample.empty()) return;
    const std::size_t p = sample.front().dim();
    for (const auto& e : sample) {
        if (e.sample_size() < 2) throw InputError("gram_estimated: every sample needs N >= 2");
        if (e.dim() != p) throw InputError("gram_estimated: samples have different dimensions");
    }
}

}  // namespace

std::vector<double> radial_sum_matrix(std::span<const EmpiricalDistribution> sample, const RadialTerm& term, int jobs) {
    check_estimable(sample);
    const std::size_t n = sample.size();
    std::vector<double> sums(n * n);
    // Enumerate the upper triangle as a flat list so that workers get
    // balanced cells; each cell is written exactly once.
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    cells.reserve(n * (n + 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = i; l < n; ++l) cells.emplace_back(i, l);
    const simd::Isa isa = simd::active_isa();
    parallel_for(cells.size(), jobs, [&](std::size_t k) {
        auto [i, l] = cells[k];
        double v = ordered_pair_sum(term, sample[i], sample[l], isa);
        sums[i * n + l] = v;
        sums[l * n + i] = v;
    });
    return sums;
}

GramMatrix assemble_estimated(std::span<const EmpiricalDistribution> sample, const KernelSpec& kernel,
                              std::span<const double> radial_sums) {
    check_estimable(sample);
    const KernelTerms t = decompose(kernel);
    const std::size_t n = sample.size();
    if (radial_sums.size() != n * n) throw InputError("assemble_estimated: radial sum matrix has the wrong size");
    std::vector<SampleSummary> summary(n);
    for (std::size_t i = 0; i < n; ++i) summary[i] = summarize(sample[i], t);
    std::vector<double> values(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        values[i * n + i] = self_value(radial_sums[i * n + i], summary[i], t);
        for (std::size_t l = i + 1; l < n; ++l) {
            double v = cross_value(radial_sums[i * n + l], summary[i], summary[l], t);
            values[i * n + l] = values[l * n + i] = v;
        }
    }
    return GramMatrix(n, std::move(values), GramMode::Estimated, kernel);
}

GramMatrix gram_estimated(std::span<const EmpiricalDistribution> sample, const KernelSpec& kernel, int jobs) {
    const KernelTerms t = decompose(kernel);
    return assemble_estimated(sample, kernel, radial_sum_matrix(sample, t.radial, jobs));
}

GramMatrix gram_estimated(std::span<const DistributionRecord> sample, const KernelSpec& kernel, int jobs) {
    std::vector<EmpiricalDistribution> samples;
    samples.reserve(sample.size());
    for (const auto& r : sample) {
        if (!r.is_empirical()) throw ModeError("gram_estimated: estimated Gram needs empirical records");
        samples.push_back(r.empirical());
    }
    return gram_estimated(std::span<const EmpiricalDistribution>(samples), kernel, jobs);
}

double estimated_cross(const EmpiricalDistribution& x, const EmpiricalDistribution& y, const KernelSpec& kernel) {
    if (x.dim() != y.dim()) throw InputError("estimated_cross: dimension mismatch");
    const KernelTerms t = decompose(kernel);
    double r = ordered_pair_sum(t.radial, x, y, simd::active_isa());
    return cross_value(r, summarize(x, t), summarize(y, t), t);
}

double estimated_self(const EmpiricalDistribution& x, const KernelSpec& kernel) {
    if (x.sample_size() < 2) throw InputError("estimated_self: N >= 2 required");
    const KernelTerms t = decompose(kernel);
    double r = simd::radial_pair_sum(t.radial, view(x), view(x));
    return self_value(r, summarize(x, t), t);
}

// ---------------------------------------------------------------------------
// Distances

namespace {

void check_index(const GramMatrix& g, std::size_t i) {
    if (i >= g.size()) throw InputError("Gram index out of range");
}

}  // namespace

double mmd_squared(const GramMatrix& g, std::size_t i, std::size_t l) {
    check_index(g, i);
    check_index(g, l);
    if (i == l && g.mode() == GramMode::Exact) return 0.0;
    return g(i, i) + g(l, l) - 2.0 * g(i, l);
}

double mmd_dist(const GramMatrix& g, std::size_t i, std::size_t l) {
    return std::sqrt(std::max(0.0, mmd_squared(g, i, l)));
}

double cluster_gram_sum(const GramMatrix& g, std::span<const std::size_t> members) {
    double s = 0.0;
    for (std::size_t a : members) {
        check_index(g, a);
        for (std::size_t b : members) s += g(a, b);
    }
    return s;
}

double dist_sq_to_centroid(const GramMatrix& g, std::size_t i, std::span<const std::size_t> members) {
    if (members.empty()) throw InputError("dist_sq_to_centroid: empty member set");
    check_index(g, i);
    const double m = static_cast<double>(members.size());
    double cross = 0.0;
    for (std::size_t l : members) {
        check_index(g, l);
        cross += g(i, l);
    }
    double v = g(i, i) - 2.0 * cross / m + cluster_gram_sum(g, members) / (m * m);
    return std::max(0.0, v);
}

}  // namespace distkm
