#include "distkm/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "distkm/error.hpp"

namespace distkm {

EmpiricalDistribution::EmpiricalDistribution(std::size_t dim, std::span<const double> rows) {
    if (dim == 0) throw InputError("empirical distribution: dimension must be >= 1");
    if (rows.empty() || rows.size() % dim != 0)
        throw InputError("empirical distribution: need a nonempty N x p matrix");
    dim_ = dim;
    atoms_ = rows.size() / dim;
    sample_size_ = atoms_;
    columns_.resize(rows.size());
    for (std::size_t i = 0; i < atoms_; ++i)
        for (std::size_t d = 0; d < dim; ++d) columns_[d * atoms_ + i] = rows[i * dim + d];
    finalize();
}

EmpiricalDistribution EmpiricalDistribution::with_counts(std::size_t dim,
                                                         std::span<const double> atom_rows,
                                                         std::span<const double> counts) {
    EmpiricalDistribution e(dim, atom_rows);
    if (counts.size() != e.atoms_) throw InputError("empirical distribution: one count per atom required");
    double total = 0.0;
    for (double c : counts) {
        if (!(c >= 1.0) || c != std::floor(c)) throw InputError("empirical distribution: counts must be positive integers");
        total += c;
    }
    e.counts_.assign(counts.begin(), counts.end());
    e.sample_size_ = static_cast<std::size_t>(total);
    e.finalize();
    return e;
}

EmpiricalDistribution EmpiricalDistribution::univariate(std::span<const double> values) {
    return EmpiricalDistribution(1, values);
}

void EmpiricalDistribution::finalize() {
    for (double v : columns_)
        if (!std::isfinite(v)) throw InputError("empirical distribution: non-finite observation");
    sorted_values_.clear();
    cumulative_counts_.clear();
    if (dim_ != 1) return;
    std::vector<std::size_t> order(atoms_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return columns_[l] < columns_[r]; });
    sorted_values_.reserve(atoms_);
    cumulative_counts_.reserve(atoms_);
    double running = 0.0;
    for (std::size_t idx : order) {
        running += count(idx);
        sorted_values_.push_back(columns_[idx]);
        cumulative_counts_.push_back(running);
    }
}

EmpiricalDistribution EmpiricalDistribution::compressed() const {
    std::vector<std::size_t> order(atoms_);
    std::iota(order.begin(), order.end(), 0);
    auto less = [&](std::size_t l, std::size_t r) {
        for (std::size_t d = 0; d < dim_; ++d) {
            double x = value(l, d), y = value(r, d);
            if (x != y) return x < y;
        }
        return false;
    };
    std::sort(order.begin(), order.end(), less);
    std::vector<double> rows;
    std::vector<double> counts;
    for (std::size_t k = 0; k < order.size(); ++k) {
        std::size_t idx = order[k];
        if (k > 0 && !less(order[k - 1], idx)) {
            counts.back() += count(idx);
            continue;
        }
        for (std::size_t d = 0; d < dim_; ++d) rows.push_back(value(idx, d));
        counts.push_back(count(idx));
    }
    return with_counts(dim_, rows, counts);
}

std::vector<double> EmpiricalDistribution::expanded_rows() const {
    std::vector<double> rows;
    rows.reserve(sample_size_ * dim_);
    for (std::size_t i = 0; i < atoms_; ++i) {
        auto reps = static_cast<std::size_t>(count(i));
        for (std::size_t r = 0; r < reps; ++r)
            for (std::size_t d = 0; d < dim_; ++d) rows.push_back(value(i, d));
    }
    return rows;
}

UniformMixture::UniformMixture(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
    if (components_.empty()) throw InputError("uniform mixture: no components");
    double total = 0.0;
    for (const auto& c : components_) {
        if (!(c.weight > 0.0 && c.weight <= 1.0))
            throw InputError("uniform mixture: component weight must lie in (0, 1]");
        if (!std::isfinite(c.a) || !std::isfinite(c.b) || !(c.a < c.b))
            throw InputError("uniform mixture: component needs a < b");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InputError("uniform mixture: weights must sum to 1");
}

double UniformMixture::support_min() const {
    double lo = components_.front().a;
    for (const auto& c : components_) lo = std::min(lo, c.a);
    return lo;
}

double UniformMixture::support_max() const {
    double hi = components_.front().b;
    for (const auto& c : components_) hi = std::max(hi, c.b);
    return hi;
}

std::size_t DistributionRecord::dim() const {
    return is_empirical() ? empirical().dim() : 1;
}

double mixture_cdf(const UniformMixture& m, double t) {
    double f = 0.0;
    for (const auto& c : m.components()) {
        if (t >= c.b) f += c.weight;
        else if (t > c.a) f += c.weight * (t - c.a) / (c.b - c.a);
    }
    return std::clamp(f, 0.0, 1.0);
}

double mixture_quantile(const UniformMixture& m, double q) {
    if (!(q > 0.0 && q < 1.0)) throw InputError("mixture_quantile: q must lie in (0, 1)");
    std::vector<double> knots;
    for (const auto& c : m.components()) {
        knots.push_back(c.a);
        knots.push_back(c.b);
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    double prev_t = knots.front();
    double prev_f = 0.0;
    for (std::size_t k = 1; k < knots.size(); ++k) {
        double t = knots[k];
        double f = mixture_cdf(m, t);
        if (f >= q) {
            // The CDF is linear on [prev_t, t]; its slope is the summed density
            // of components covering the whole segment.
            double slope = 0.0;
            for (const auto& c : m.components())
                if (c.a <= prev_t && c.b >= t) slope += c.weight / (c.b - c.a);
            if (slope <= 0.0) return prev_t;
            return std::clamp(prev_t + (q - prev_f) / slope, prev_t, t);
        }
        prev_t = t;
        prev_f = f;
    }
    return knots.back();
}

EmpiricalDistribution sample_mixture(const UniformMixture& m, std::size_t n, Rng& rng) {
    if (n == 0) throw InputError("sample_mixture: n must be >= 1");
    auto comps = m.components();
    std::vector<double> cumulative;
    double running = 0.0;
    for (const auto& c : comps) cumulative.push_back(running += c.weight);
    std::vector<double> draws(n);
    for (auto& x : draws) {
        double u = uniform01(rng) * running;
        std::size_t k = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        if (k >= comps.size()) k = comps.size() - 1;
        x = uniform(rng, comps[k].a, comps[k].b);
    }
    return EmpiricalDistribution::univariate(draws);
}

Moments moments(const DistributionRecord& r) {
    Moments out;
    if (r.is_mixture()) {
        double mean = 0.0, second = 0.0;
        for (const auto& c : r.mixture().components()) {
            mean += c.weight * 0.5 * (c.a + c.b);
            second += c.weight * (c.a * c.a + c.a * c.b + c.b * c.b) / 3.0;
        }
        out.mean = {mean};
        out.covariance = {std::max(0.0, second - mean * mean)};
        return out;
    }
    const auto& e = r.empirical();
    if (e.sample_size() < 2) throw InputError("moments: empirical sample needs N >= 2");
    const std::size_t p = e.dim();
    const double n = static_cast<double>(e.sample_size());
    out.mean.assign(p, 0.0);
    for (std::size_t d = 0; d < p; ++d) {
        auto col = e.column(d);
        double s = 0.0;
        for (std::size_t i = 0; i < col.size(); ++i) s += e.count(i) * col[i];
        out.mean[d] = s / n;
    }
    out.covariance.assign(p * p, 0.0);
    for (std::size_t d = 0; d < p; ++d) {
        for (std::size_t f = d; f < p; ++f) {
            auto cd = e.column(d);
            auto cf = e.column(f);
            double s = 0.0;
            for (std::size_t i = 0; i < cd.size(); ++i)
                s += e.count(i) * (cd[i] - out.mean[d]) * (cf[i] - out.mean[f]);
            out.covariance[d * p + f] = out.covariance[f * p + d] = s / (n - 1.0);
        }
    }
    return out;
}

namespace {

void require_univariate(const EmpiricalDistribution& e, const char* what) {
    if (e.dim() != 1) throw ModeError(std::string(what) + ": univariate sample required");
}

}  // namespace

double empirical_cdf(const EmpiricalDistribution& e, double t) {
    require_univariate(e, "empirical_cdf");
    auto values = e.sorted_values();
    auto idx = static_cast<std::size_t>(std::upper_bound(values.begin(), values.end(), t) - values.begin());
    if (idx == 0) return 0.0;
    return e.cumulative_counts()[idx - 1] / static_cast<double>(e.sample_size());
}

double empirical_quantile(const EmpiricalDistribution& e, double q) {
    require_univariate(e, "empirical_quantile");
    if (!(q > 0.0 && q < 1.0)) throw InputError("empirical_quantile: q must lie in (0, 1)");
    // smallest atom whose cumulative count reaches q*N (inf convention)
    const double target = q * static_cast<double>(e.sample_size());
    auto cum = e.cumulative_counts();
    auto idx = static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), target) - cum.begin());
    if (idx >= cum.size()) idx = cum.size() - 1;
    return e.sorted_values()[idx];
}

double record_cdf(const DistributionRecord& r, double t) {
    return r.is_mixture() ? mixture_cdf(r.mixture(), t) : empirical_cdf(r.empirical(), t);
}

double record_quantile(const DistributionRecord& r, double q) {
    return r.is_mixture() ? mixture_quantile(r.mixture(), q) : empirical_quantile(r.empirical(), q);
}

std::pair<double, double> record_support(const DistributionRecord& r) {
    if (r.is_mixture()) return {r.mixture().support_min(), r.mixture().support_max()};
    const auto& e = r.empirical();
    require_univariate(e, "record_support");
    auto v = e.sorted_values();
    return {v.front(), v.back()};
}

}  // namespace distkm
