#pragma once

#include <cmath>
#include <memory>
#include <optional>

#include "roughlab/concentrated.hpp"
#include "roughlab/fem.hpp"
#include "roughlab/geometry.hpp"
#include "roughlab/mesh.hpp"
#include "roughlab/newton.hpp"

namespace roughlab {

/// Converged solution of the concentrated-reaction problem on the rough domain.
struct RoughSolution {
    FemField u;
    std::shared_ptr<const Geometry> geometry;
    NewtonDiagnostics diagnostics;
    /// |u|_{W^{1,p}(Omega^eps)}.
    double norm = 0.0;
    /// int_{y > 0} |grad u|^p + |u|^p.
    double thin_energy = 0.0;

    const ProblemConfig& config() const { return geometry->config(); }
};

/// Mesh and P1 space of the rough domain for a geometry.
inline std::shared_ptr<const P1Space> make_rough_space(const Geometry& geo) {
    return std::make_shared<const P1Space>(build_rough_mesh(geo));
}

inline QuasilinearProblem make_rough_problem(const std::shared_ptr<const P1Space>& space, const Geometry& geo) {
    QuasilinearProblem problem(space, geo.config().p);
    const auto& fns = geo.functions();
    const bool constant_f = fns.df_sup == 0.0;
    problem.add_load(std::make_shared<StripLoad>(space, 1.0 / geo.strip_scale(), fns.f, fns.df, constant_f));
    return problem;
}

/**
 * @brief Solves int |grad u|^(p-2) grad u . grad phi + |u|^(p-2) u phi
 * = (1/eps^(gamma+1)) int_{strip} f(u) phi for all P1 phi on the rough mesh.
 *
 * The homogeneous flux condition is natural, so no boundary terms appear.
 * Without an initial guess the solve continues in p from 2.
 */
inline RoughSolution solve_rough(std::shared_ptr<const Geometry> geo, std::shared_ptr<const P1Space> space,
                                 const std::optional<FemField>& initial = std::nullopt) {
    auto result = solve_with_continuation(make_rough_problem(space, *geo), initial, geo->config().solver);
    RoughSolution sol{std::move(result.u), std::move(geo), std::move(result.diagnostics)};
    const double p = sol.config().p;
    sol.norm = norm_W1p(sol.u, p);
    sol.thin_energy = w1p_parts(sol.u, p, Region::AboveZero).total();
    return sol;
}

inline RoughSolution solve_rough(const ProblemConfig& cfg, const std::optional<FemField>& initial = std::nullopt) {
    auto geo = std::make_shared<const Geometry>(cfg);
    auto space = initial ? initial->space_ptr() : make_rough_space(*geo);
    return solve_rough(std::move(geo), std::move(space), initial);
}

/// | |u|^p_{W^{1,p}} - <F_eps(u), u> |: the discrete energy identity with phi = u.
inline double energy_check(const RoughSolution& sol) {
    const double p = sol.config().p;
    const double energy = w1p_parts(sol.u, p).total();
    return std::abs(energy - apply_concentrated_functional(sol.u, sol.u, *sol.geometry));
}

} // namespace roughlab
