#include "distkm/simgen.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <optional>
#include <sstream>

#include "distkm/error.hpp"

namespace distkm {

void UnivariateModelConfig::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("univariate model: lambda must lie in [0, 1]");
    if (n < 2 || n % 2 != 0) throw ConfigError("univariate model: n must be even and >= 2");
    if (!std::isfinite(C0) || !std::isfinite(D0)) throw ConfigError("univariate model: C0 and D0 must be finite");
}

UnivariateModelConfig UnivariateModelConfig::preset(const std::string& name, double lambda) {
    UnivariateModelConfig c;
    c.lambda = lambda;
    if (name == "default") return c;
    if (name == "variation1") {
        c.C0 = 100.0;
        c.D0 = 600.0;
        return c;
    }
    if (name == "variation2") {
        c.C0 = 200.0;
        c.D0 = 600.0;
        return c;
    }
    throw ConfigError("unknown univariate preset '" + name + "' (default | variation1 | variation2)");
}

std::vector<DistributionRecord> generate_univariate(const UnivariateModelConfig& cfg, Rng& rng) {
    cfg.validate();
    double l[4];
    for (double& v : l) v = uniform(rng, 0.0, 4.0);
    const std::size_t half = cfg.n / 2;
    std::vector<DistributionRecord> f1(half), g2(half);
    for (std::size_t k = 1; k <= half; ++k) {
        const double i = static_cast<double>(k);
        const double a = 4.0 * (i - 1.0) + l[0], b = 195.0 + 5.0 * i + l[1];
        const double c = cfg.C0 - 5.0 * i - l[2], d = cfg.D0 - 4.0 * i - l[3];
        if (!(a < b)) {
            std::ostringstream s;
            s << "univariate model: class-1 interval [" << a << ", " << b << "] is empty at i = " << k;
            throw GenerationError(s.str());
        }
        if (!(c < d)) {
            std::ostringstream s;
            s << "univariate model: class-2 interval [" << c << ", " << d << "] is empty at i = " << k;
            throw GenerationError(s.str());
        }
        f1[k - 1] = {UniformMixture::uniform(a, b), "1"};
        std::vector<MixtureComponent> comps;
        if (cfg.lambda > 0.0) comps.push_back({cfg.lambda, a, b});
        if (cfg.lambda < 1.0) comps.push_back({1.0 - cfg.lambda, c, d});
        g2[k - 1] = {UniformMixture(std::move(comps)), "2"};
    }
    f1.insert(f1.end(), g2.begin(), g2.end());
    return f1;
}

// ---------------------------------------------------------------------------

void BivariateModelConfig::validate() const {
    if (clusters.empty()) throw ConfigError("bivariate model: no clusters");
    if (n_per_cluster < 1 || n_obs < 2) throw ConfigError("bivariate model: need n_per_cluster >= 1 and n_obs >= 2");
    if (max_redraws < 1) throw ConfigError("bivariate model: max_redraws must be >= 1");
    for (const auto& c : clusters)
        if (!(std::abs(c.correlation) < 1.0)) throw ConfigError("bivariate model: |correlation| must be < 1");
}

BivariateModelConfig BivariateModelConfig::table3() {
    BivariateModelConfig c;
    c.clusters = {
        {{VariableSpec{{-4.8, 6}, {12, 1.2}, {-0.05, 0.1}, {3.10, 0.1}},
          VariableSpec{{17, 12}, {6.0, 0.6}, {0, 0.1}, {2.95, 0.1}}}},
        {{VariableSpec{{-4.8, 6}, {9, 1.2}, {0, 0.1}, {3.00, 0.1}},
          VariableSpec{{-17, 12}, {4.6, 0.6}, {0, 0.1}, {3.00, 0.1}}}},
        {{VariableSpec{{10, 6}, {6, 1.2}, {0.10, 0.1}, {2.95, 0.1}},
          VariableSpec{{0, 12}, {3.3, 0.6}, {-0.1, 0.1}, {3.10, 0.1}}}},
    };
    return c;
}

BivariateModelConfig BivariateModelConfig::table6(double rho) {
    const std::array<VariableSpec, 2> vars{VariableSpec{{-4.8, 0.5}, {12, 1.2}, {-0.05, 0.1}, {3.10, 0.1}},
                                           VariableSpec{{17, 1}, {6, 0.6}, {0, 0.1}, {2.95, 0.1}}};
    BivariateModelConfig c;
    c.clusters = {ClusterSpec{vars, rho}, ClusterSpec{vars, -rho}};
    c.copula = true;
    return c;
}

double standard_normal(Rng& rng) {
    static const boost::math::normal_distribution<> unit;
    return boost::math::quantile(unit, uniform_open01(rng));
}

namespace {

double draw(const Hyper& h, Rng& rng) { return h.mean + h.sd * standard_normal(rng); }

}  // namespace

std::array<PearsonParams, 2> draw_pearson_params(const ClusterSpec& spec, Rng& rng, int max_redraws) {
    for (int attempt = 0; attempt < max_redraws; ++attempt) {
        std::array<PearsonParams, 2> p;
        for (std::size_t v = 0; v < 2; ++v) {
            const auto& s = spec.vars[v];
            p[v].mean = draw(s.mean, rng);
            p[v].std_dev = draw(s.std_dev, rng);
            p[v].skewness = draw(s.skewness, rng);
            p[v].kurtosis = draw(s.kurtosis, rng);
        }
        if (p[0].feasible() && p[1].feasible()) return p;
    }
    throw GenerationError("Pearson parameters infeasible after " + std::to_string(max_redraws) + " redraws");
}

std::vector<DistributionRecord> generate_bivariate(const BivariateModelConfig& cfg, Rng& rng) {
    cfg.validate();
    static const boost::math::normal_distribution<> unit;
    std::vector<DistributionRecord> out;
    out.reserve(cfg.clusters.size() * cfg.n_per_cluster);
    for (std::size_t j = 0; j < cfg.clusters.size(); ++j) {
        const auto& spec = cfg.clusters[j];
        for (std::size_t obj = 0; obj < cfg.n_per_cluster; ++obj) {
            // Construction can still fail at the edge of a type region; such
            // draws count against the same redraw budget.
            std::optional<std::array<PearsonDistribution, 2>> dist;
            for (int attempt = 0; attempt < cfg.max_redraws && !dist; ++attempt) {
                auto p = draw_pearson_params(spec, rng, cfg.max_redraws);
                try {
                    dist.emplace(std::array<PearsonDistribution, 2>{PearsonDistribution(p[0]), PearsonDistribution(p[1])});
                } catch (const InputError&) {
                }
            }
            if (!dist) throw GenerationError("cluster " + std::to_string(j + 1) + " object " + std::to_string(obj) +
                                             ": no usable Pearson parameters");
            std::vector<double> rows(2 * cfg.n_obs);
            if (cfg.copula) {
                const double rho = spec.correlation, tail = std::sqrt(1.0 - rho * rho);
                for (std::size_t k = 0; k < cfg.n_obs; ++k) {
                    const double z1 = standard_normal(rng), z2 = standard_normal(rng);
                    const double x[2] = {z1, rho * z1 + tail * z2};
                    for (std::size_t v = 0; v < 2; ++v) {
                        double u = boost::math::cdf(unit, x[v]);
                        u = std::clamp(u, 0x1.0p-60, 1.0 - 0x1.0p-53);
                        rows[2 * k + v] = (*dist)[v].quantile(u);
                    }
                }
            } else {
                for (std::size_t v = 0; v < 2; ++v)
                    for (std::size_t k = 0; k < cfg.n_obs; ++k) rows[2 * k + v] = (*dist)[v].sample(rng);
            }
            out.push_back({EmpiricalDistribution(2, rows), std::to_string(j + 1)});
        }
    }
    return out;
}

}  // namespace distkm
