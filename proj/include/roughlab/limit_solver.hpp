#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "roughlab/fem.hpp"
#include "roughlab/geometry.hpp"
#include "roughlab/mesh.hpp"
#include "roughlab/newton.hpp"

namespace roughlab {

enum class MuSource { Quadrature, Exact };

/// Solution of the homogenized problem with flux mu(x) f(u) on Gamma.
struct LimitSolution {
    FemField u;
    ProblemConfig config;
    /// (x, mu) at the Gamma edge quadrature points.
    std::vector<std::pair<double, double>> mu_samples;
    NewtonDiagnostics diagnostics;
    std::shared_ptr<const QuasilinearProblem> problem;
};

inline std::function<double(double)> mu_function(const ModelFunctions& fns, const SolverParams& sp, MuSource src) {
    if (src == MuSource::Exact) {
        if (!fns.mu_exact) throw ConfigError("selected h has no closed-form cell average");
        return *fns.mu_exact;
    }
    return [fns, cells = sp.mu_cells](double x) { return mu(fns, x, cells); };
}

inline QuasilinearProblem make_limit_problem(const std::shared_ptr<const P1Space>& space, const ProblemConfig& cfg,
                                             MuSource src = MuSource::Quadrature) {
    validate(cfg);
    const ModelFunctions fns = make_model(cfg.functions);
    QuasilinearProblem problem(space, cfg.p);
    const bool constant_f = fns.df_sup == 0.0;
    problem.add_load(
        std::make_shared<GammaLoad>(space, mu_function(fns, cfg.solver, src), fns.f, fns.df, constant_f));
    return problem;
}

/**
 * @brief Solves int |grad u|^(p-2) grad u . grad phi + |u|^(p-2) u phi
 * = int_Gamma mu f(u) phi dx on the cylinder (0,1) x (-1,0).
 */
inline LimitSolution solve_limit(const ProblemConfig& cfg, std::shared_ptr<const P1Space> space,
                                 const std::optional<FemField>& initial = std::nullopt,
                                 MuSource src = MuSource::Quadrature) {
    auto problem = std::make_shared<QuasilinearProblem>(make_limit_problem(space, cfg, src));
    auto result = solve_with_continuation(*problem, initial, cfg.solver);
    LimitSolution sol{std::move(result.u), cfg, {}, std::move(result.diagnostics), problem};
    const auto* gamma = dynamic_cast<const GammaLoad*>(problem->loads().front().get());
    for (const auto& s : gamma->samples()) sol.mu_samples.emplace_back(s.x, s.mu);
    return sol;
}

inline LimitSolution solve_limit(const ProblemConfig& cfg, const TriangleMesh& mesh,
                                 const std::optional<FemField>& initial = std::nullopt,
                                 MuSource src = MuSource::Quadrature) {
    return solve_limit(cfg, std::make_shared<const P1Space>(mesh), initial, src);
}

/**
 * Euclidean norm, over the Gamma vertices, of the discrete flux balance
 * <A_p(u), phi_i> - int_Gamma mu f(u) phi_i.
 */
inline double boundary_residual(const LimitSolution& sol, const Vector& u) {
    const Vector r = sol.problem->residual(u);
    const auto& mesh = sol.u.mesh();
    std::vector<char> on_gamma(mesh.num_vertices(), 0);
    for (const auto& e : mesh.boundary_edges)
        if (e.tag == BoundaryTag::Gamma) on_gamma[e.a] = on_gamma[e.b] = 1;
    double sum = 0.0;
    for (std::size_t i = 0; i < on_gamma.size(); ++i)
        if (on_gamma[i]) sum += r[static_cast<Eigen::Index>(i)] * r[static_cast<Eigen::Index>(i)];
    return std::sqrt(sum);
}

inline double boundary_residual(const LimitSolution& sol) { return boundary_residual(sol, sol.u.values()); }

} // namespace roughlab
