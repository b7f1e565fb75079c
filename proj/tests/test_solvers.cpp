#include <gtest/gtest.h>

#include <cmath>

#include "roughlab/limit_solver.hpp"
#include "roughlab/rough_solver.hpp"

using namespace roughlab;

namespace {

ProblemConfig manufactured() {
    ProblemConfig cfg;
    cfg.functions.h = "constant";
    cfg.functions.h_constant = 1.0;
    cfg.functions.f = "one";
    return cfg;
}

double exact(double, double y) { return std::cosh(y + 1.0) / std::sinh(1.0); }

double nodal_max_error(const FemField& u) {
    double worst = 0.0;
    const auto& verts = u.mesh().vertices;
    for (std::size_t i = 0; i < verts.size(); ++i)
        worst = std::max(worst, std::abs(u.values()[static_cast<Eigen::Index>(i)] - exact(verts[i][0], verts[i][1])));
    return worst;
}

ProblemConfig rough_cfg(const std::string& f, double p, double eps = 0.1) {
    ProblemConfig cfg;
    cfg.epsilon = eps;
    cfg.p = p;
    cfg.functions.f = f;
    cfg.mesh.target_edge = 1.0 / 32.0;
    return cfg;
}

} // namespace

TEST(LimitSolver, ManufacturedSecondOrder) {
    const auto cfg = manufactured();
    const auto coarse = solve_limit(cfg, build_cylinder_mesh(32));
    const auto fine = solve_limit(cfg, build_cylinder_mesh(64));
    const double e32 = nodal_max_error(coarse.u), e64 = nodal_max_error(fine.u);
    EXPECT_LE(e64, 1e-3);
    EXPECT_GE(e32 / e64, 3.2);
    EXPECT_LE(e32 / e64, 4.8);
    // Trace on Gamma is coth(1).
    const auto& verts = fine.u.mesh().vertices;
    for (std::size_t i = 0; i < verts.size(); ++i)
        if (verts[i][1] == 0.0) EXPECT_NEAR(fine.u.values()[static_cast<Eigen::Index>(i)], 1.0 / std::tanh(1.0), 1e-3);
}

TEST(LimitSolver, ScalesWithDensity) {
    auto cfg = manufactured();
    const auto mesh = build_cylinder_mesh(16);
    const auto base = solve_limit(cfg, mesh);
    cfg.functions.h_constant = 2.5;
    const auto scaled = solve_limit(cfg, mesh);
    EXPECT_LE((scaled.u.values() - 2.5 * base.u.values()).norm(), 1e-10 * scaled.u.values().norm());
}

TEST(LimitSolver, ZeroLoadGivesZero) {
    auto cfg = manufactured();
    cfg.functions.f = "zero";
    cfg.p = 3.0;
    const auto sol = solve_limit(cfg, build_cylinder_mesh(8));
    EXPECT_EQ(sol.u.values().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(boundary_residual(sol), 0.0);
}

TEST(LimitSolver, BoundaryResidual) {
    const auto sol = solve_limit(manufactured(), build_cylinder_mesh(32));
    EXPECT_LE(boundary_residual(sol), 1e-8);
    const Vector bumped = sol.u.values().array() + 0.1;
    // Off the solution the balance fails; a constant shift only adds its mass term.
    EXPECT_GT(boundary_residual(sol, bumped), 1e3 * boundary_residual(sol));
}

TEST(LimitSolver, MuSamplesMatchGeometry) {
    ProblemConfig cfg;
    cfg.functions.h = "cosine_x";
    const auto sol = solve_limit(cfg, build_cylinder_mesh(8));
    const auto fns = make_model(cfg.functions);
    ASSERT_EQ(sol.mu_samples.size(), 16u);
    for (const auto& [x, m] : sol.mu_samples) EXPECT_NEAR(m, (*fns.mu_exact)(x), 1e-12);
}

TEST(LimitSolver, NumericalAndExactMuAgree) {
    for (const std::string h : {"sine", "cosine_x"}) {
        ProblemConfig cfg;
        cfg.functions.h = h;
        cfg.functions.f = "tanh_shifted";
        cfg.p = 3.0;
        const auto space = std::make_shared<const P1Space>(build_cylinder_mesh(16));
        const auto a = solve_limit(cfg, space, std::nullopt, MuSource::Quadrature);
        const auto b = solve_limit(cfg, space, std::nullopt, MuSource::Exact);
        const FemField diff(space, a.u.values() - b.u.values());
        EXPECT_LE(norm_W1p(diff, 3.0), 1e-8) << h;
    }
}

TEST(RoughSolver, ZeroLoadGivesZero) {
    for (double p : {2.0, 3.0}) {
        const auto sol = solve_rough(rough_cfg("zero", p));
        EXPECT_EQ(sol.u.values().cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(energy_check(sol), 0.0);
    }
}

TEST(RoughSolver, ConstantLoadPositiveAndLinear) {
    ProblemConfig cfg = rough_cfg("one", 2.0);
    cfg.functions.h = "constant";
    cfg.gamma = 1.0;
    const auto one = solve_rough(cfg);
    EXPECT_GT(one.u.values().minCoeff(), 0.0);
    cfg.functions.f = "two";
    const auto two = solve_rough(cfg);
    EXPECT_LE((two.u.values() - 2.0 * one.u.values()).norm(), 1e-9 * two.u.values().norm());
}

TEST(RoughSolver, StoredQuantitiesConsistent) {
    const auto sol = solve_rough(rough_cfg("tanh_shifted", 3.0));
    EXPECT_NEAR(sol.norm, norm_W1p(sol.u, 3.0), 1e-12 * sol.norm);
    EXPECT_NEAR(sol.thin_energy, w1p_parts(sol.u, 3.0, Region::AboveZero).total(), 1e-12 * sol.thin_energy);
    EXPECT_TRUE(sol.diagnostics.converged);
    EXPECT_GT(sol.diagnostics.iterations, 0);
}

TEST(RoughSolver, EnergyIdentity) {
    for (const std::string f : {"one", "tanh", "tanh_shifted"})
        for (double p : {2.0, 3.0}) {
            const auto sol = solve_rough(rough_cfg(f, p));
            const double e = w1p_parts(sol.u, p).total();
            EXPECT_LE(energy_check(sol), 1e-8 * std::max(1.0, e)) << f << " p=" << p;
        }
}

TEST(RoughSolver, EnergyIdentityFailsOffSolution) {
    auto sol = solve_rough(rough_cfg("tanh_shifted", 2.0));
    const double e = w1p_parts(sol.u, 2.0).total();
    sol.u = FemField(sol.u.space_ptr(), 1.5 * sol.u.values());
    EXPECT_GT(energy_check(sol), 1e-2 * e);
}

TEST(RoughSolver, WarmStartReproducesSolution) {
    const auto cfg = rough_cfg("tanh_shifted", 3.0);
    const auto cold = solve_rough(cfg);
    const auto warm = solve_rough(cfg, cold.u);
    EXPECT_EQ(warm.diagnostics.iterations, 0);
    EXPECT_EQ(warm.norm, cold.norm);
}
