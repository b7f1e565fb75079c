#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "roughlab/errors.hpp"

namespace roughlab {

/**
 * @brief Closed-form model data of the rough-domain problem.
 *
 * - g: 1-periodic roughness profile with bounds g0 <= g <= g1.
 * - psi: cutoff in [0,1] with compact support inside (0,1).
 * - h(x, s): nonnegative strip thickness density, 1-periodic in s, sup = h1.
 * - f: bounded reaction with bounded derivative.
 *
 * Bounds are declared, not computed; tests sample them.
 */
struct ModelFunctions {
    std::function<double(double)> g;
    double g0 = 0.0;
    double g1 = 0.0;
    double g_lipschitz = 0.0;

    std::function<double(double)> psi;
    double psi_support_lo = 0.0;
    double psi_support_hi = 1.0;

    std::function<double(double, double)> h;
    double h1 = 0.0;
    std::optional<std::function<double(double)>> mu_exact;

    std::function<double(double)> f;
    std::function<double(double)> df;
    double f_sup = 0.0;
    double df_sup = 0.0;
};

/// Registry keys as they appear in config files.
struct FunctionSelection {
    std::string g = "sine";
    std::string psi = "bump";
    std::string h = "sine";
    std::string f = "one";
    double h_constant = 1.0;

    bool operator==(const FunctionSelection&) const = default;
};

namespace registry {

inline const std::vector<std::string>& g_keys() {
    static const std::vector<std::string> keys{"sine"};
    return keys;
}
inline const std::vector<std::string>& psi_keys() {
    static const std::vector<std::string> keys{"bump"};
    return keys;
}
inline const std::vector<std::string>& h_keys() {
    static const std::vector<std::string> keys{"constant", "sine", "cosine_x"};
    return keys;
}
inline const std::vector<std::string>& f_keys() {
    static const std::vector<std::string> keys{"zero", "one", "two", "tanh", "tanh_shifted"};
    return keys;
}

namespace detail {

inline std::string join(const std::vector<std::string>& keys) {
    std::string out;
    for (const auto& k : keys) {
        if (!out.empty()) out += ", ";
        out += k;
    }
    return out;
}

[[noreturn]] inline void unknown(const std::string& what, const std::string& key,
                                 const std::vector<std::string>& keys) {
    throw ConfigError("unknown " + what + " key '" + key + "' (available: " + join(keys) + ")");
}

} // namespace detail

inline void set_g(ModelFunctions& m, const std::string& key) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (key == "sine") {
        m.g = [](double s) { return 2.0 + std::sin(two_pi * s); };
        m.g0 = 1.0;
        m.g1 = 3.0;
        m.g_lipschitz = two_pi;
        return;
    }
    detail::unknown("g", key, g_keys());
}

inline void set_psi(ModelFunctions& m, const std::string& key) {
    if (key == "bump") {
        // exp(1 - 1/(1 - t^2)) with t = (x - 0.5)/0.4: smooth, peak 1 at x = 0.5.
        m.psi = [](double x) {
            const double t = (x - 0.5) / 0.4;
            const double t2 = t * t;
            if (t2 >= 1.0) return 0.0;
            return std::exp(1.0 - 1.0 / (1.0 - t2));
        };
        m.psi_support_lo = 0.1;
        m.psi_support_hi = 0.9;
        return;
    }
    detail::unknown("psi", key, psi_keys());
}

inline void set_h(ModelFunctions& m, const std::string& key, double c) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (key == "constant") {
        if (!(c >= 0.0) || !std::isfinite(c))
            throw ConfigError("h_constant must be a finite nonnegative number");
        m.h = [c](double, double) { return c; };
        m.h1 = c;
        m.mu_exact = [c](double) { return c; };
        return;
    }
    if (key == "sine") {
        m.h = [](double, double s) { return 1.0 + 0.5 * std::sin(two_pi * s); };
        m.h1 = 1.5;
        m.mu_exact = [](double) { return 1.0; };
        return;
    }
    if (key == "cosine_x") {
        m.h = [](double x, double s) { return (1.0 + x) * (2.0 + std::cos(two_pi * s)); };
        m.h1 = 6.0;
        m.mu_exact = [](double x) { return 2.0 * (1.0 + x); };
        return;
    }
    detail::unknown("h", key, h_keys());
}

inline void set_f(ModelFunctions& m, const std::string& key) {
    if (key == "zero") {
        m.f = [](double) { return 0.0; };
        m.df = [](double) { return 0.0; };
        m.f_sup = 0.0;
        m.df_sup = 0.0;
        return;
    }
    if (key == "one" || key == "two") {
        const double c = key == "one" ? 1.0 : 2.0;
        m.f = [c](double) { return c; };
        m.df = [](double) { return 0.0; };
        m.f_sup = c;
        m.df_sup = 0.0;
        return;
    }
    if (key == "tanh") {
        m.f = [](double u) { return std::tanh(u); };
        m.df = [](double u) {
            const double c = std::cosh(u);
            return 1.0 / (c * c);
        };
        m.f_sup = 1.0;
        m.df_sup = 1.0;
        return;
    }
    if (key == "tanh_shifted") {
        // Positive, decreasing: the linearized operator stays coercive.
        m.f = [](double u) { return 1.0 - std::tanh(u); };
        m.df = [](double u) {
            const double c = std::cosh(u);
            return -1.0 / (c * c);
        };
        m.f_sup = 2.0;
        m.df_sup = 1.0;
        return;
    }
    detail::unknown("f", key, f_keys());
}

} // namespace registry

/// Resolves registry keys; throws ConfigError listing the available keys on a miss.
inline ModelFunctions make_model(const FunctionSelection& sel) {
    ModelFunctions m;
    registry::set_g(m, sel.g);
    registry::set_psi(m, sel.psi);
    registry::set_h(m, sel.h, sel.h_constant);
    registry::set_f(m, sel.f);
    return m;
}

} // namespace roughlab
