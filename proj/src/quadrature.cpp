#include "distkm/quadrature.hpp"

#include <numbers>

#include "distkm/error.hpp"

namespace distkm {

GaussLegendre::GaussLegendre(int nodes) {
    if (nodes < 1) throw ConfigError("Gauss-Legendre: need at least one node");
    const auto n = static_cast<std::size_t>(nodes);
    nodes_.resize(n);
    weights_.resize(n);
    // Newton iteration on P_n from the Chebyshev-like initial guess; roots are
    // symmetric, so only the positive half is computed.
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = pk;
            }
            if (n == 1) p0 = 1.0, p1 = x;
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged root
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
            double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
            p0 = p1;
            p1 = pk;
        }
        dp = n == 1 ? 1.0 : static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes_[i] = -x;
        nodes_[n - 1 - i] = x;
        weights_[i] = weights_[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes_[n / 2] = 0.0;
}

}  // namespace distkm
