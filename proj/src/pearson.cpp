#include "distkm/pearson.hpp"

#include <algorithm>
#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "distkm/error.hpp"
#include "distkm/quadrature.hpp"

namespace distkm {

namespace bm = boost::math;

bool PearsonParams::feasible() const noexcept {
    return std::isfinite(mean) && std::isfinite(std_dev) && std_dev > 0.0 && std::isfinite(skewness) &&
           std::isfinite(kurtosis) && kurtosis > skewness * skewness + 1.0;
}

void PearsonParams::validate() const {
    if (!std::isfinite(mean) || !std::isfinite(std_dev) || !std::isfinite(skewness) || !std::isfinite(kurtosis))
        throw InputError("Pearson parameters must be finite");
    if (!(std_dev > 0.0)) throw InputError("Pearson parameters: std_dev must be > 0");
    if (!(kurtosis > skewness * skewness + 1.0)) {
        std::ostringstream s;
        s << "Pearson parameters infeasible: kurtosis " << kurtosis << " must exceed skewness^2 + 1 = "
          << skewness * skewness + 1.0;
        throw InputError(s.str());
    }
}

std::string pearson_type_name(PearsonType t) {
    static const char* names[] = {"normal", "I", "II", "III", "IV", "V", "VI", "VII"};
    return names[static_cast<int>(t)];
}

PearsonType classify_pearson(double skewness, double kurtosis) {
    PearsonParams{0.0, 1.0, skewness, kurtosis}.validate();
    const double b1 = skewness * skewness, b2 = kurtosis;
    if (b1 == 0.0) {
        if (b2 == 3.0) return PearsonType::Normal;
        return b2 < 3.0 ? PearsonType::II : PearsonType::VII;
    }
    const double c2 = 2.0 * b2 - 3.0 * b1 - 6.0;
    if (std::abs(c2) < 1e-12) return PearsonType::III;
    if (c2 < 0.0) return PearsonType::I;
    const double kappa = b1 * (b2 + 3.0) * (b2 + 3.0) / (4.0 * (4.0 * b2 - 3.0 * b1) * c2);
    if (std::abs(kappa - 1.0) < 1e-10) return PearsonType::V;
    return kappa < 1.0 ? PearsonType::IV : PearsonType::VI;
}

// ---------------------------------------------------------------------------
// Inverse-CDF tables for log-concave densities of the form
//   log f(t) = c1 log(s1(t)) + c2 log(s2(t)) - nu t
// Type IV in theta (x = lambda + A tan theta): s1 = cos, c2 = 0.
// Beta(p, q) in u: s1 = u, s2 = 1 - u, nu = 0.
// The support is cut where the density falls 40 nats below the mode and
// split into 4096 Gauss-Legendre panels.

struct PearsonDistribution::InverseTable {
    enum class Shape { Cosine, Beta } shape;
    double c1 = 0.0, c2 = 0.0, nu = 0.0;
    double gmax = 0.0;
    std::vector<double> knots;
    std::vector<double> cum;  // unnormalized CDF at knots
    GaussLegendre rule{8};

    double logd(double t) const {
        if (shape == Shape::Cosine) return c1 * std::log(std::cos(t)) - nu * t;
        double v = 0.0;
        if (c1 != 0.0) v += c1 * std::log(t);
        if (c2 != 0.0) v += c2 * std::log1p(-t);
        return v;
    }
    double density(double t) const { return std::exp(logd(t) - gmax); }
    double piece(double a, double b) const {
        return rule.integrate([this](double u) { return density(u); }, a, b);
    }
    double partial(std::size_t k, double t) const { return cum[k] + (t > knots[k] ? piece(knots[k], t) : 0.0); }

    InverseTable(Shape s, double a1, double a2, double nu_, double lo, double hi, double mode)
        : shape(s), c1(a1), c2(a2), nu(nu_) {
        gmax = logd(mode);
        auto edge = [&](double inner, double outer) {
            if (logd(outer) - gmax > -40.0) return outer;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (inner + outer);
                (logd(mid) - gmax > -40.0 ? inner : outer) = mid;
            }
            return outer;
        };
        lo = edge(mode, lo);
        hi = edge(mode, hi);
        const std::size_t panels = 4096;
        knots.resize(panels + 1);
        cum.assign(panels + 1, 0.0);
        for (std::size_t k = 0; k <= panels; ++k) knots[k] = lo + (hi - lo) * static_cast<double>(k) / panels;
        for (std::size_t k = 0; k < panels; ++k) cum[k + 1] = cum[k] + piece(knots[k], knots[k + 1]);
    }

    static std::shared_ptr<const InverseTable> cosine(double m, double nu) {
        constexpr double edge = std::numbers::pi / 2.0 - 1e-12;
        const double c = 2.0 * m - 2.0;
        return std::make_shared<const InverseTable>(Shape::Cosine, c, 0.0, nu, -edge, edge, std::atan(-nu / c));
    }
    static std::shared_ptr<const InverseTable> beta(double p, double q) {
        const double mode = p + q > 2.0 ? (p - 1.0) / (p + q - 2.0) : 0.5;
        return std::make_shared<const InverseTable>(Shape::Beta, p - 1.0, q - 1.0, 0.0, 1e-300, 1.0 - 1e-16, mode);
    }

    double total() const { return cum.back(); }

    double quantile(double q) const {
        const double target = q * total();
        std::size_t k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), target) - cum.begin());
        k = std::clamp<std::size_t>(k, 1, cum.size() - 1) - 1;
        double a = knots[k], b = knots[k + 1];
        const double mass = cum[k + 1] - cum[k];
        double t = mass > 0.0 ? a + (b - a) * (target - cum[k]) / mass : 0.5 * (a + b);
        for (int it = 0; it < 30; ++it) {
            double f = partial(k, t) - target;
            if (std::abs(f) <= 1e-15 * total()) break;
            (f > 0.0 ? b : a) = t;
            double d = density(t);
            double next = d > 0.0 ? t - f / d : 0.5 * (a + b);
            if (!(next > a && next < b)) next = 0.5 * (a + b);
            if (next == t) break;
            t = next;
        }
        return t;
    }

    double cdf(double t) const {
        if (t <= knots.front()) return 0.0;
        if (t >= knots.back()) return 1.0;
        std::size_t k = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin()) - 1;
        return partial(k, t) / total();
    }
};

// ---------------------------------------------------------------------------

PearsonDistribution::PearsonDistribution(const PearsonParams& p) : params_(p), type_(classify_pearson(p.skewness, p.kurtosis)) {
    p.validate();
    mirrored_ = p.skewness < 0.0;
    const double g = std::abs(p.skewness);
    const double b1 = g * g, b2 = p.kurtosis;
    const double D = 10.0 * b2 - 12.0 * b1 - 18.0;

    switch (type_) {
        case PearsonType::Normal:
            break;
        case PearsonType::VII: {
            // t_nu scaled to unit variance; excess kurtosis 6/(nu-4)
            p1_ = 4.0 + 6.0 / (b2 - 3.0);
            scale_ = std::sqrt((p1_ - 2.0) / p1_);
            break;
        }
        case PearsonType::I:
        case PearsonType::II: {
            const double r = 6.0 * (b2 - b1 - 1.0) / (6.0 + 3.0 * b1 - 2.0 * b2);
            const double root = std::sqrt((r + 2.0) * (r + 2.0) * b1 + 16.0 * (r + 1.0));
            p1_ = 0.5 * r * (1.0 - (r + 2.0) * g / root);
            p2_ = 0.5 * r * (1.0 + (r + 2.0) * g / root);
            scale_ = 0.5 * root;
            loc_ = -scale_ * p1_ / (p1_ + p2_);
            if (p1_ >= 1.0 && p2_ >= 1.0) table_ = InverseTable::beta(p1_, p2_);
            break;
        }
        case PearsonType::III: {
            const double b0 = (4.0 * b2 - 3.0 * b1) / D;
            const double c1 = g * (b2 + 3.0) / D;
            p1_ = b0 / (c1 * c1);
            scale_ = c1;
            loc_ = -b0 / c1;
            break;
        }
        case PearsonType::IV:
        case PearsonType::V:
        case PearsonType::VI: {
            const double b0 = (4.0 * b2 - 3.0 * b1) / D;
            const double a = g * (b2 + 3.0) / D;  // = b1 coefficient
            const double c2 = (2.0 * b2 - 3.0 * b1 - 6.0) / D;
            if (type_ == PearsonType::IV) {
                const double lam = -a / (2.0 * c2);
                const double A = std::sqrt(b0 / c2 - lam * lam);
                const double m = 1.0 / (2.0 * c2);
                const double nu = (lam + a) / (c2 * A);
                loc_ = lam;
                scale_ = A;
                table_ = InverseTable::cosine(m, nu);
            } else if (type_ == PearsonType::V) {
                const double r = -a / (2.0 * c2);
                p1_ = 1.0 / c2 - 1.0;        // inverse-gamma shape
                p2_ = -(r + a) / c2;         // inverse-gamma scale
                loc_ = r;
                if (!(p1_ > 0.0 && p2_ > 0.0)) throw InputError("Pearson type V construction failed");
            } else {
                const double disc = std::sqrt(a * a - 4.0 * b0 * c2);
                const double r1 = (-a + disc) / (2.0 * c2);  // larger root; support x > r1
                const double r2 = (-a - disc) / (2.0 * c2);
                const double e1 = -(r1 + a) / (c2 * (r1 - r2));
                const double e2 = -(r2 + a) / (c2 * (r2 - r1));
                p1_ = e1 + 1.0;
                p2_ = -e2 - e1 - 1.0;
                loc_ = r1;
                scale_ = r1 - r2;
                if (!(p1_ > 0.0 && p2_ > 0.0)) throw InputError("Pearson type VI construction failed");
                if (p1_ >= 1.0 && p2_ >= 1.0) table_ = InverseTable::beta(p1_, p2_);
            }
            break;
        }
    }
    if (!std::isfinite(loc_) || !std::isfinite(scale_) || !(scale_ > 0.0))
        throw InputError("Pearson construction produced invalid parameters for type " + pearson_type_name(type_));
}

double PearsonDistribution::beta_quantile(double q) const {
    return table_ ? table_->quantile(q) : bm::quantile(bm::beta_distribution<>(p1_, p2_), q);
}

double PearsonDistribution::beta_cdf(double u) const {
    return table_ ? table_->cdf(u) : bm::cdf(bm::beta_distribution<>(p1_, p2_), u);
}

double PearsonDistribution::std_quantile(double q) const {
    switch (type_) {
        case PearsonType::Normal: return bm::quantile(bm::normal_distribution<>(), q);
        case PearsonType::VII: return scale_ * bm::quantile(bm::students_t_distribution<>(p1_), q);
        case PearsonType::I:
        case PearsonType::II: return loc_ + scale_ * beta_quantile(q);
        case PearsonType::III: return loc_ + scale_ * bm::quantile(bm::gamma_distribution<>(p1_), q);
        case PearsonType::IV: return loc_ + scale_ * std::tan(table_->quantile(q));
        case PearsonType::V: return loc_ + bm::quantile(bm::inverse_gamma_distribution<>(p1_, p2_), q);
        case PearsonType::VI: {
            double B = beta_quantile(q);
            return loc_ + scale_ * B / (1.0 - B);
        }
    }
    return 0.0;
}

double PearsonDistribution::std_cdf(double z) const {
    switch (type_) {
        case PearsonType::Normal: return bm::cdf(bm::normal_distribution<>(), z);
        case PearsonType::VII: return bm::cdf(bm::students_t_distribution<>(p1_), z / scale_);
        case PearsonType::I:
        case PearsonType::II: {
            double u = (z - loc_) / scale_;
            if (u <= 0.0) return 0.0;
            if (u >= 1.0) return 1.0;
            return beta_cdf(u);
        }
        case PearsonType::III: {
            double u = (z - loc_) / scale_;
            return u <= 0.0 ? 0.0 : bm::cdf(bm::gamma_distribution<>(p1_), u);
        }
        case PearsonType::IV: return table_->cdf(std::atan((z - loc_) / scale_));
        case PearsonType::V: {
            double u = z - loc_;
            return u <= 0.0 ? 0.0 : bm::cdf(bm::inverse_gamma_distribution<>(p1_, p2_), u);
        }
        case PearsonType::VI: {
            double t = (z - loc_) / scale_;
            return t <= 0.0 ? 0.0 : beta_cdf(t / (1.0 + t));
        }
    }
    return 0.0;
}

double PearsonDistribution::quantile(double q) const {
    if (!(q > 0.0 && q < 1.0)) throw InputError("Pearson quantile: q must lie in (0, 1)");
    double z = mirrored_ ? -std_quantile(1.0 - q) : std_quantile(q);
    return params_.mean + params_.std_dev * z;
}

double PearsonDistribution::cdf(double x) const {
    double z = (x - params_.mean) / params_.std_dev;
    return mirrored_ ? 1.0 - std_cdf(-z) : std_cdf(z);
}

double PearsonDistribution::sample(Rng& rng) const { return quantile(uniform_open01(rng)); }

std::vector<double> PearsonDistribution::sample(std::size_t n, Rng& rng) const {
    std::vector<double> out(n);
    for (auto& v : out) v = sample(rng);
    return out;
}

std::vector<double> sample_pearson(const PearsonParams& p, std::size_t n, Rng& rng) {
    return PearsonDistribution(p).sample(n, rng);
}

}  // namespace distkm
