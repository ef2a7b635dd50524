#include "distkm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "distkm/error.hpp"

namespace distkm {

std::string family_name(KernelFamily f) {
    switch (f) {
        case KernelFamily::Gaussian: return "gaussian";
        case KernelFamily::Laplace: return "laplace";
        case KernelFamily::ModifiedGaussian: return "mg";
        case KernelFamily::Energy: return "energy";
    }
    return "unknown";
}

KernelFamily parse_family(const std::string& name) {
    if (name == "gaussian") return KernelFamily::Gaussian;
    if (name == "laplace") return KernelFamily::Laplace;
    if (name == "mg" || name == "modified_gaussian") return KernelFamily::ModifiedGaussian;
    if (name == "energy") return KernelFamily::Energy;
    throw ConfigError("unknown kernel family '" + name + "'");
}

void KernelSpec::validate() const {
    switch (family) {
        case KernelFamily::Gaussian:
        case KernelFamily::Laplace:
            if (sigma_auto) throw ConfigError("kernel: sigma 'auto' has not been resolved");
            if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("kernel: sigma must be > 0");
            break;
        case KernelFamily::ModifiedGaussian:
            if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw ConfigError("kernel: modified Gaussian needs alpha >= 1");
            break;
        case KernelFamily::Energy:
            if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("kernel: energy kernel needs 0 < alpha < 1");
            break;
    }
}

std::string KernelSpec::describe() const {
    std::ostringstream os;
    os << family_name(family) << '(';
    if (uses_sigma()) {
        if (sigma_auto) os << "sigma=auto";
        else os << "sigma=" << sigma;
    } else {
        os << "alpha=" << alpha;
    }
    os << ')';
    return os.str();
}

namespace {

double squared_distance(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        double diff = x[d] - y[d];
        s += diff * diff;
    }
    return s;
}

double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

}  // namespace

double eval_kernel(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("eval_kernel: dimension mismatch");
    if (x.empty()) throw InputError("eval_kernel: points must have dimension >= 1");
    spec.validate();
    // Commutative operations only, so k(x,y) and k(y,x) are bit-identical.
    const double r2 = squared_distance(x, y);
    switch (spec.family) {
        case KernelFamily::Gaussian:
            return std::exp(-r2 / (2.0 * spec.sigma * spec.sigma));
        case KernelFamily::Laplace:
            return std::exp(-std::sqrt(r2) / spec.sigma);
        case KernelFamily::ModifiedGaussian:
            return std::exp(-r2 / 2.0) + std::pow(norm(x), spec.alpha) * std::pow(norm(y), spec.alpha);
        case KernelFamily::Energy: {
            const double e = 2.0 * spec.alpha;
            return 0.5 * (std::pow(norm(x), e) + std::pow(norm(y), e) - std::pow(std::sqrt(r2), e));
        }
    }
    return 0.0;
}

double dispersion(const DistributionRecord& r) {
    if (r.is_empirical() && r.empirical().sample_size() < 2)
        throw InputError("select_sigma_star: a record has fewer than 2 observations");
    Moments m = moments(r);
    double trace = 0.0;
    for (std::size_t d = 0; d < m.dim(); ++d) trace += m.covariance[d * m.dim() + d];
    return std::sqrt(std::max(0.0, trace));
}

double select_sigma_star(std::span<const DistributionRecord> sample) {
    if (sample.empty()) throw InputError("select_sigma_star: empty sample");
    std::vector<double> sd;
    sd.reserve(sample.size());
    for (const auto& r : sample) sd.push_back(dispersion(r));
    std::sort(sd.begin(), sd.end());
    const std::size_t n = sd.size();
    return n % 2 == 1 ? sd[n / 2] : 0.5 * (sd[n / 2 - 1] + sd[n / 2]);
}

KernelTerms decompose(const KernelSpec& spec) {
    spec.validate();
    KernelTerms t;
    switch (spec.family) {
        case KernelFamily::Gaussian:
            t.radial = {RadialKind::Gaussian, 1.0 / (2.0 * spec.sigma * spec.sigma)};
            break;
        case KernelFamily::Laplace:
            t.radial = {RadialKind::Laplace, 1.0 / spec.sigma};
            break;
        case KernelFamily::ModifiedGaussian:
            t.radial = {RadialKind::Gaussian, 0.5};
            t.product_coef = 1.0;
            t.product_power = spec.alpha;
            break;
        case KernelFamily::Energy:
            t.radial = {RadialKind::Power, spec.alpha};
            t.radial_coef = -0.5;
            t.self_coef = 0.5;
            t.self_power = 2.0 * spec.alpha;
            break;
    }
    return t;
}

double eval_radial(const RadialTerm& term, double r2) {
    switch (term.kind) {
        case RadialKind::Gaussian: return std::exp(-term.scale * r2);
        case RadialKind::Laplace: return std::exp(-term.scale * std::sqrt(r2));
        case RadialKind::Power: return r2 > 0.0 ? std::pow(r2, term.scale) : 0.0;
    }
    return 0.0;
}

}  // namespace distkm
