#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "roughlab/config.hpp"
#include "roughlab/errors.hpp"
#include "roughlab/quadrature.hpp"
#include "roughlab/registry.hpp"

namespace roughlab {

/// Cell average of h(x, .) over one period, composite 8-point Gauss.
inline double mu(const ModelFunctions& fns, double x, int n_cells = 16) {
    return quad::composite_gauss<8>([&](double s) { return fns.h(x, s); }, 0.0, 1.0, n_cells);
}

struct StripBounds {
    double lo;
    double hi;
};

/**
 * @brief Rough domain {0 < x < 1, -1 < y < G_eps(x)} with the reaction strip
 * underneath its top boundary.
 *
 * G_eps(x) = eps psi(x) g(x/eps); the strip is
 * G_eps(x) - eps^(gamma+1) h(x, x/eps^beta) < y < G_eps(x).
 */
class Geometry {
public:
    Geometry(ProblemConfig cfg, ModelFunctions fns)
        : cfg_(std::move(cfg)), fns_(std::move(fns)) {
        validate(cfg_);
        strip_scale_ = std::pow(cfg_.epsilon, cfg_.gamma + 1.0);
        osc_scale_ = std::pow(cfg_.epsilon, cfg_.beta);
    }

    explicit Geometry(const ProblemConfig& cfg) : Geometry(cfg, make_model(cfg.functions)) {}

    const ProblemConfig& config() const { return cfg_; }
    const ModelFunctions& functions() const { return fns_; }
    double epsilon() const { return cfg_.epsilon; }

    /// eps^(gamma+1): the concentration scale.
    double strip_scale() const { return strip_scale_; }

    double eval_profile(double x) const {
        const double eps = cfg_.epsilon;
        return eps * fns_.psi(x) * fns_.g(x / eps);
    }

    /// H_eps(x) = h(x, x / eps^beta).
    double strip_density(double x) const { return fns_.h(x, x / osc_scale_); }

    StripBounds strip_bounds(double x) const {
        const double hi = eval_profile(x);
        const double lo = hi - strip_scale_ * strip_density(x);
        if (lo < -1.0)
            throw ConfigError("strip leaves the domain at x = " + std::to_string(x) +
                              " (epsilon too large for the chosen h, gamma)");
        return {lo, hi};
    }

    /// Characteristic function of the open strip; false outside (0,1).
    bool in_strip(double x, double y) const {
        if (x < 0.0 || x > 1.0) return false;
        const double eps = cfg_.epsilon;
        const double hi = eps * fns_.psi(x) * fns_.g(x / eps);
        const double lo = hi - strip_scale_ * strip_density(x);
        return lo < y && y < hi;
    }

    double mu(double x, int n_cells = 16) const { return roughlab::mu(fns_, x, n_cells); }

private:
    ProblemConfig cfg_;
    ModelFunctions fns_;
    double strip_scale_ = 0.0;
    double osc_scale_ = 1.0;
};

/**
 * Fails fast on configurations whose geometry is not representable:
 * the rough cap must stay below height 1 (eps * g1 < 1) and the strip must stay
 * above y = -1. The strip check samples 2^14 + 1 points and uses the analytic
 * lower bound -eps^(gamma+1) h1 when it already suffices.
 */
inline void check_admissible(const Geometry& geo) {
    const auto& fns = geo.functions();
    const double eps = geo.epsilon();
    if (!(eps * fns.g1 < 1.0))
        throw ConfigError("epsilon * g1 must be < 1 (got " + std::to_string(eps * fns.g1) + ")");
    if (geo.strip_scale() * fns.h1 < 1.0) return;
    constexpr int samples = 1 << 14;
    for (int i = 0; i <= samples; ++i) {
        const double x = static_cast<double>(i) / samples;
        if (geo.strip_bounds(x).lo <= -1.0)
            throw ConfigError("strip reaches the bottom y = -1 at x = " + std::to_string(x));
    }
}

} // namespace roughlab
