#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "roughlab/fem.hpp"
#include "roughlab/geometry.hpp"
#include "roughlab/quadrature.hpp"

namespace roughlab {

using Field2D = std::function<double(double, double)>;

/**
 * (1/eps^(gamma+1)) int_{strip} w over the tagged strip elements with the
 * mid-edge rule. Throws when the mesh carries no strip tagging.
 */
inline double concentrated_integral(const FemField& w, const Geometry& geo) {
    const auto& mesh = w.mesh();
    if (!mesh.has_strip()) throw std::invalid_argument("mesh has no tagged strip elements");
    const auto& space = w.space();
    double sum = 0.0;
    for (int t : mesh.strip_elements) {
        const auto& tri = mesh.triangles[t];
        const double area = space.element(t).area;
        for (const auto& q : quad::triangle_midedge())
            sum += area * q.w * detail::value_at_point(tri, q.lambda, w.values());
    }
    return sum / geo.strip_scale();
}

/**
 * @brief Strip integral of a closed-form integrand through the map
 * y = G(x) - eps^(gamma+1) H(x) (1 - s), s in (0,1), whose Jacobian cancels the
 * 1/eps^(gamma+1) prefactor:
 * int_0^1 int_0^1 w(x, G(x) - eps^(gamma+1) H(x)(1 - s)) H(x) ds dx.
 *
 * Tensor 8x8 Gauss on x-cells of width <= min(eps, eps^beta)/8.
 */
inline double concentrated_integral(const Field2D& w, const Geometry& geo) {
    const double eps = geo.epsilon();
    const double scale = geo.strip_scale();
    const double width = std::min(eps, std::pow(eps, geo.config().beta)) / 8.0;
    const int cells = std::max(1, static_cast<int>(std::ceil(1.0 / width - 1e-9)));
    const auto& rule = quad::gauss_unit<8>();
    const double dx = 1.0 / cells;
    double sum = 0.0;
    for (int c = 0; c < cells; ++c) {
        double cell = 0.0;
        for (const auto& qx : rule) {
            const double x = (c + qx.x) * dx;
            const double top = geo.eval_profile(x);
            const double H = geo.strip_density(x);
            if (H == 0.0) continue;
            double inner = 0.0;
            for (const auto& qs : rule) inner += qs.w * w(x, top - scale * H * (1.0 - qs.x));
            cell += qx.w * inner * H;
        }
        sum += cell * dx;
    }
    return sum;
}

/// <F_eps(u), phi> = (1/eps^(gamma+1)) int_{strip} f(u) phi.
inline double apply_concentrated_functional(const FemField& u, const FemField& phi, const Geometry& geo) {
    if (&u.mesh() != &phi.mesh()) throw std::invalid_argument("fields live on different meshes");
    const auto& mesh = u.mesh();
    if (!mesh.has_strip()) throw std::invalid_argument("mesh has no tagged strip elements");
    const auto& f = geo.functions().f;
    const auto& space = u.space();
    double sum = 0.0;
    for (int t : mesh.strip_elements) {
        const auto& tri = mesh.triangles[t];
        const double area = space.element(t).area;
        for (const auto& q : quad::triangle_midedge()) {
            const double uq = detail::value_at_point(tri, q.lambda, u.values());
            const double pq = detail::value_at_point(tri, q.lambda, phi.values());
            sum += area * q.w * f(uq) * pq;
        }
    }
    return sum / geo.strip_scale();
}

/// One epsilon of a concentration study.
struct ConcentrationRecord {
    double epsilon = 0.0;
    double value = 0.0;
    /// int_Gamma mu u phi dS (or with f(u)).
    double limit = 0.0;
    double abs_error = 0.0;
    /// Alternative limit int_Gamma h(x, x) u phi dS, the natural candidate when beta = 0.
    double candidate_beta0 = 0.0;
    double candidate_error = 0.0;
    /// int_Gamma mu |u phi| dS; normalizes relative errors when the limit itself vanishes.
    double magnitude = 0.0;

    double relative_error() const {
        const double s = std::max(std::abs(limit), magnitude);
        return s > 0.0 ? abs_error / s : abs_error;
    }
};

inline void write_concentration_csv(std::ostream& os, std::span<const ConcentrationRecord> rows) {
    os << "epsilon,value,limit,abs_error,candidate_beta0\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.10e,%.15e,%.15e,%.10e,%.15e\n", r.epsilon, r.value, r.limit, r.abs_error,
                      r.candidate_beta0);
        os << buf;
    }
}

/**
 * @brief Concentrated integrals of u phi (or f(u) phi with `compose_f`) along a
 * decreasing list of eps, compared against int_Gamma mu u phi dS.
 */
inline std::vector<ConcentrationRecord> verify_concentration(const Field2D& u, const Field2D& phi,
                                                             const ProblemConfig& base,
                                                             std::span<const double> eps_list,
                                                             bool compose_f = false) {
    for (std::size_t k = 1; k < eps_list.size(); ++k)
        if (!(eps_list[k] < eps_list[k - 1])) throw std::invalid_argument("eps_list must be decreasing");
    const ModelFunctions fns = make_model(base.functions);
    auto integrand = [&](double x, double y) {
        const double uv = u(x, y);
        return (compose_f ? fns.f(uv) : uv) * phi(x, y);
    };

    // Limits on Gamma: composite Gauss fine enough for h(x, x) with period 1.
    constexpr int cells = 512;
    const int mu_cells = base.solver.mu_cells;
    const double limit = quad::composite_gauss<8>(
        [&](double x) { return mu(fns, x, mu_cells) * integrand(x, 0.0); }, 0.0, 1.0, cells);
    const double magnitude = quad::composite_gauss<8>(
        [&](double x) { return mu(fns, x, mu_cells) * std::abs(integrand(x, 0.0)); }, 0.0, 1.0, cells);
    const double candidate = quad::composite_gauss<8>(
        [&](double x) { return fns.h(x, x) * integrand(x, 0.0); }, 0.0, 1.0, cells);

    std::vector<ConcentrationRecord> out;
    for (double eps : eps_list) {
        ProblemConfig cfg = base;
        cfg.epsilon = eps;
        const Geometry geo(cfg, fns);
        check_admissible(geo);
        ConcentrationRecord rec;
        rec.epsilon = eps;
        rec.value = concentrated_integral(Field2D(integrand), geo);
        rec.limit = limit;
        rec.abs_error = std::abs(rec.value - limit);
        rec.candidate_beta0 = candidate;
        rec.candidate_error = std::abs(rec.value - candidate);
        rec.magnitude = magnitude;
        out.push_back(rec);
    }
    return out;
}

struct BoundRow {
    double epsilon;
    std::size_t sample;
    double ratio;
};

/**
 * Ratios [(1/eps^(gamma+1)) int_{strip} |u|^p] / |u|^p_{W^{1,p}(Omega^eps)} for each
 * sample field on its own rough geometry. Zero-norm inputs are rejected.
 */
inline std::vector<BoundRow> verify_uniform_bound(std::span<const FemField> samples,
                                                  std::span<const Geometry> geometries) {
    if (samples.size() != geometries.size()) throw std::invalid_argument("one geometry per sample expected");
    std::vector<BoundRow> rows;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& u = samples[k];
        const auto& geo = geometries[k];
        const double p = geo.config().p;
        const double norm_p = w1p_parts(u, p).total();
        if (!(norm_p > 0.0)) throw std::invalid_argument("zero-norm field passed to verify_uniform_bound");
        const auto& mesh = u.mesh();
        if (!mesh.has_strip()) throw std::invalid_argument("mesh has no tagged strip elements");
        double conc = 0.0;
        for (int t : mesh.strip_elements) {
            const auto& tri = mesh.triangles[t];
            const double area = u.space().element(t).area;
            for (const auto& q : quad::triangle_midedge())
                conc += area * q.w * std::pow(std::abs(detail::value_at_point(tri, q.lambda, u.values())), p);
        }
        conc /= geo.strip_scale();
        rows.push_back({geo.epsilon(), k, conc / norm_p});
    }
    return rows;
}

/**
 * |<F(u) - F(v), phi>| / (|u - v|_{W^{1,p}} |phi|_{W^{1,p}}) on one rough mesh.
 * Returns 0 for phi = 0; rejects u = v.
 */
inline double verify_lipschitz(const FemField& u, const FemField& v, const FemField& phi, const Geometry& geo) {
    const double p = geo.config().p;
    const FemField diff(u.space_ptr(), u.values() - v.values());
    const double du = norm_W1p(diff, p);
    if (!(du > 0.0)) throw std::invalid_argument("verify_lipschitz needs u != v");
    const double nphi = norm_W1p(phi, p);
    if (nphi == 0.0) return 0.0;
    const double num = apply_concentrated_functional(u, phi, geo) - apply_concentrated_functional(v, phi, geo);
    return std::abs(num) / (du * nphi);
}

/// Least-squares slope of y against x.
inline double least_squares_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope needs >= 2 paired samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

} // namespace roughlab
