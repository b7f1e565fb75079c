#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include <boost/math/quadrature/gauss.hpp>

namespace roughlab::quad {

struct Point1D {
    double x;
    double w;
};

/// N-point Gauss-Legendre rule mapped to [0, 1].
template <std::size_t N>
const std::array<Point1D, N>& gauss_unit() {
    static const std::array<Point1D, N> rule = [] {
        using Rule = boost::math::quadrature::gauss<double, N>;
        const auto& abscissa = Rule::abscissa();
        const auto& weights = Rule::weights();
        // Boost stores the nonnegative half; mirror it.
        std::array<Point1D, N> out{};
        std::size_t k = 0;
        for (std::size_t i = 0; i < abscissa.size(); ++i) {
            const double a = abscissa[i];
            const double w = weights[i];
            if (a == 0.0) {
                out[k++] = {0.5, 0.5 * w};
            } else {
                out[k++] = {0.5 * (1.0 - a), 0.5 * w};
                out[k++] = {0.5 * (1.0 + a), 0.5 * w};
            }
        }
        return out;
    }();
    return rule;
}

/// Composite N-point Gauss over [a, b] split into `cells` equal subintervals.
template <std::size_t N, class F>
double composite_gauss(F&& fn, double a, double b, int cells) {
    const auto& rule = gauss_unit<N>();
    const double width = (b - a) / cells;
    double sum = 0.0;
    for (int c = 0; c < cells; ++c) {
        const double left = a + c * width;
        double cell = 0.0;
        for (const auto& q : rule) cell += q.w * fn(left + q.x * width);
        sum += cell * width;
    }
    return sum;
}

/// Barycentric quadrature point on a triangle; weights sum to 1 (multiply by area).
struct TriPoint {
    std::array<double, 3> lambda;
    double w;
};

/// Mid-edge rule: exact for quadratics.
inline const std::array<TriPoint, 3>& triangle_midedge() {
    static const std::array<TriPoint, 3> rule{{
        {{0.5, 0.5, 0.0}, 1.0 / 3.0},
        {{0.0, 0.5, 0.5}, 1.0 / 3.0},
        {{0.5, 0.0, 0.5}, 1.0 / 3.0},
    }};
    return rule;
}

/// Interior three-point rule: exact for quadratics, no point on an edge.
inline const std::array<TriPoint, 3>& triangle_interior() {
    static const std::array<TriPoint, 3> rule{{
        {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}, 1.0 / 3.0},
        {{1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0}, 1.0 / 3.0},
        {{1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}, 1.0 / 3.0},
    }};
    return rule;
}

/// Seven-point rule of degree 5 (Radon).
inline const std::array<TriPoint, 7>& triangle_degree5() {
    static const std::array<TriPoint, 7> rule = [] {
        const double r = std::sqrt(15.0);
        const double a1 = (6.0 - r) / 21.0, b1 = (9.0 + 2.0 * r) / 21.0, w1 = (155.0 - r) / 1200.0;
        const double a2 = (6.0 + r) / 21.0, b2 = (9.0 - 2.0 * r) / 21.0, w2 = (155.0 + r) / 1200.0;
        return std::array<TriPoint, 7>{{
            {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 9.0 / 40.0},
            {{b1, a1, a1}, w1},
            {{a1, b1, a1}, w1},
            {{a1, a1, b1}, w1},
            {{b2, a2, a2}, w2},
            {{a2, b2, a2}, w2},
            {{a2, a2, b2}, w2},
        }};
    }();
    return rule;
}

} // namespace roughlab::quad
