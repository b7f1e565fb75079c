#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "roughlab/newton.hpp"

using namespace roughlab;

namespace {

struct Setup {
    std::shared_ptr<const P1Space> space;
    ModelFunctions fns;
    double scale;
};

Setup rough_setup(const std::string& f, double eps = 0.2) {
    ProblemConfig cfg;
    cfg.epsilon = eps;
    cfg.functions.f = f;
    cfg.mesh.target_edge = 1.0 / 16.0;
    const Geometry geo(cfg);
    return {std::make_shared<const P1Space>(build_rough_mesh(geo)), geo.functions(), geo.strip_scale()};
}

QuasilinearProblem make_problem(const Setup& s, double p) {
    QuasilinearProblem prob(s.space, p);
    prob.add_load(std::make_shared<StripLoad>(s.space, 1.0 / s.scale, s.fns.f, s.fns.df, s.fns.df_sup == 0.0));
    return prob;
}

} // namespace

TEST(Newton, LinearProblemOneStep) {
    const auto s = rough_setup("one");
    const auto prob = make_problem(s, 2.0);
    const auto res = newton_solve(prob, FemField::zero(s.space));
    EXPECT_TRUE(res.diagnostics.converged);
    EXPECT_EQ(res.diagnostics.iterations, 1);
    EXPECT_LE(prob.residual(res.u.values()).norm(), 1e-10 * res.diagnostics.scale);
}

TEST(Newton, SolutionAsInitialGuessTakesNoSteps) {
    const auto s = rough_setup("tanh_shifted");
    const auto prob = make_problem(s, 3.0);
    const auto sol = solve_with_continuation(prob, std::nullopt, SolverParams{});
    const auto again = newton_solve(prob, sol.u);
    EXPECT_EQ(again.diagnostics.iterations, 0);
    EXPECT_EQ(again.u.values(), sol.u.values());
}

TEST(Newton, QuadraticTail) {
    const auto s = rough_setup("tanh_shifted");
    auto prob = make_problem(s, 3.0);
    // Start from the p = 2 solution, a fair distance from the p = 3 one.
    prob.set_p(2.0);
    const auto start = newton_solve(prob, FemField::zero(s.space));
    prob.set_p(3.0);
    NewtonOptions opts;
    opts.rtol = 1e-14;
    opts.atol = 1e-30;
    opts.floor_factor = 1e6;
    const auto res = newton_solve(prob, start.u, opts);
    const auto& h = res.diagnostics.history;
    const double scale = res.diagnostics.scale;
    int checked = 0;
    for (std::size_t k = 1; k + 1 < h.size(); ++k) {
        const double a = h[k].residual / scale, b = h[k + 1].residual / scale;
        if (a > 1e-2 || b < 1e-12 || h[k + 1].damping != 1.0) continue;
        // b <= C a^2 with a moderate C, and log b / log a near 2 deeper in the tail.
        EXPECT_LT(b / (a * a), 50.0) << "step " << k;
        if (a <= 1e-3) EXPECT_GT(std::log(b) / std::log(a), 1.6) << "step " << k;
        ++checked;
    }
    EXPECT_GE(checked, 1);
}

TEST(Newton, InvariantUnderInitialGuess) {
    const auto s = rough_setup("tanh_shifted");
    const auto prob = make_problem(s, 3.0);
    SolverParams params;
    const auto a = solve_with_continuation(prob, std::nullopt, params);
    Vector perturbed = a.u.values();
    for (Eigen::Index i = 0; i < perturbed.size(); ++i) perturbed[i] *= 1.0 + 0.2 * std::sin(0.7 * i);
    const auto b = solve_with_continuation(prob, FemField(s.space, perturbed), params);
    const FemField diff(s.space, a.u.values() - b.u.values());
    EXPECT_LE(norm_W1p(diff, 3.0), 10.0 * params.rtol * std::max(1.0, norm_W1p(a.u, 3.0)));
}

TEST(Newton, RegularizationInsensitive) {
    const auto s = rough_setup("tanh_shifted");
    const auto prob = make_problem(s, 4.0);
    SolverParams params;
    const auto a = solve_with_continuation(prob, std::nullopt, params);
    params.delta_factor /= 10.0;
    params.delta_floor /= 10.0;
    const auto b = solve_with_continuation(prob, std::nullopt, params);
    const FemField diff(s.space, a.u.values() - b.u.values());
    EXPECT_LE(norm_W1p(diff, 4.0), 1e-8 * norm_W1p(a.u, 4.0));
}

TEST(Newton, FailureCarriesBestIterate) {
    const auto s = rough_setup("tanh");
    auto prob = make_problem(s, 4.0);
    NewtonOptions opts;
    opts.max_iterations = 1;
    const auto start = FemField::interpolate(s.space, [](double x, double y) { return 3.0 + x - y; });
    try {
        newton_solve(prob, start, opts);
        FAIL() << "expected NewtonFailure";
    } catch (const NewtonFailure& e) {
        EXPECT_FALSE(e.diagnostics().converged);
        EXPECT_EQ(e.diagnostics().iterations, 1);
        EXPECT_EQ(e.best().values().size(), start.values().size());
        EXPECT_LE(prob.residual(e.best().values()).norm(), e.diagnostics().history.front().residual);
    }
}

TEST(Newton, PicardAgreesWithNewton) {
    const auto s = rough_setup("tanh_shifted");
    const auto prob = make_problem(s, 2.0);
    const auto a = newton_solve(prob, FemField::zero(s.space));
    const auto b = picard_solve(prob, FemField::zero(s.space));
    EXPECT_TRUE(b.diagnostics.used_picard);
    const FemField diff(s.space, a.u.values() - b.u.values());
    EXPECT_LE(norm_W1p(diff, 2.0), 1e-8 * norm_W1p(a.u, 2.0));
}

TEST(Continuation, Path) {
    EXPECT_EQ(continuation_path(2.0, 0.5), (std::vector<double>{2.0}));
    EXPECT_EQ(continuation_path(3.0, 0.5), (std::vector<double>{2.0, 2.5, 3.0}));
    EXPECT_EQ(continuation_path(3.2, 0.5), (std::vector<double>{2.0, 2.5, 3.0, 3.2}));
}

TEST(Diagnostics, CsvLayout) {
    NewtonDiagnostics d;
    d.history = {{0, 1.0, 0.0}, {1, 0.25, 0.5}};
    std::ostringstream os;
    write_diagnostics_csv(os, d);
    EXPECT_EQ(os.str(),
              "iteration,residual,damping\n"
              "0,1.0000000000e+00,0.0000000000e+00\n"
              "1,2.5000000000e-01,5.0000000000e-01\n");
}
