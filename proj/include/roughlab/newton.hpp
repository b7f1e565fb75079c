#pragma once

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "roughlab/config.hpp"
#include "roughlab/errors.hpp"
#include "roughlab/fem.hpp"

namespace roughlab {

struct NewtonOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    int max_iterations = 40;
    int max_halvings = 12;
    double delta_factor = 1e-10;
    double delta_floor = 1e-14;
    bool use_cg = false;
    double cg_tol = 1e-12;
    /// A stalled line search within this multiple of the tolerance counts as converged.
    double floor_factor = 1e3;

    static NewtonOptions from(const SolverParams& s) {
        NewtonOptions o;
        o.rtol = s.rtol;
        o.atol = s.atol;
        o.max_iterations = s.max_iterations;
        o.max_halvings = s.max_halvings;
        o.delta_factor = s.delta_factor;
        o.delta_floor = s.delta_floor;
        o.use_cg = s.use_cg;
        o.cg_tol = s.cg_tol;
        return o;
    }
};

/// One row per Newton (or Picard) iteration.
struct IterationRecord {
    int iteration;
    double residual;
    double damping;
};

struct NewtonDiagnostics {
    bool converged = false;
    int iterations = 0;
    /// Reference scale for the relative test: |F(u0)|.
    double scale = 0.0;
    double final_residual = 0.0;
    std::vector<IterationRecord> history;
    bool used_picard = false;
    std::string message;
};

inline void write_diagnostics_csv(std::ostream& os, const NewtonDiagnostics& d) {
    os << "iteration,residual,damping\n";
    char buf[96];
    for (const auto& r : d.history) {
        std::snprintf(buf, sizeof buf, "%d,%.10e,%.10e\n", r.iteration, r.residual, r.damping);
        os << buf;
    }
}

/// Newton did not converge; carries the best iterate seen.
class NewtonFailure : public SolverError {
public:
    NewtonFailure(const std::string& what, FemField best, NewtonDiagnostics diag)
        : SolverError(what), best_(std::move(best)), diag_(std::move(diag)) {}
    const FemField& best() const { return best_; }
    const NewtonDiagnostics& diagnostics() const { return diag_; }

private:
    FemField best_;
    NewtonDiagnostics diag_;
};

struct NewtonResult {
    FemField u;
    NewtonDiagnostics diagnostics;
};

namespace detail {

/// Sparse SPD solve: LDL^T with a cached symbolic analysis, CG with Jacobi as fallback.
class LinearSolver {
public:
    explicit LinearSolver(const NewtonOptions& opts) : opts_(opts) {}

    Vector solve(const SparseOperator& J, const Vector& rhs) {
        if (!opts_.use_cg) {
            if (!analyzed_) {
                ldlt_.analyzePattern(J);
                analyzed_ = true;
            }
            ldlt_.factorize(J);
            if (ldlt_.info() == Eigen::Success) {
                Vector x = ldlt_.solve(rhs);
                if (x.allFinite()) return x;
            }
        }
        Eigen::ConjugateGradient<SparseOperator, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(opts_.cg_tol);
        cg.setMaxIterations(std::max<Eigen::Index>(1000, 20 * J.rows()));
        cg.compute(J);
        Vector x = cg.solve(rhs);
        if (cg.info() != Eigen::Success || !x.allFinite()) throw SolverError("linear solver breakdown");
        return x;
    }

private:
    NewtonOptions opts_;
    Eigen::SimplicialLDLT<SparseOperator> ldlt_;
    bool analyzed_ = false;
};

} // namespace detail

/**
 * @brief Damped Newton for A_p(u) = F(u).
 *
 * Converged when |R| <= rtol |F(u0)| or |R| <= atol (Euclidean norms of nodal
 * vectors). Each step tries full length first and halves up to max_halvings times
 * until the residual decreases; if no trial decreases it, the shortest is taken.
 * A line search that cannot decrease a residual already within floor_factor of the
 * tolerance has hit the roundoff floor and is accepted (noted in the message).
 * Throws NewtonFailure after max_iterations.
 */
inline NewtonResult newton_solve(const QuasilinearProblem& problem, const FemField& initial,
                                 const NewtonOptions& opts = {}) {
    Vector u = initial.values();
    NewtonDiagnostics diag;
    diag.scale = problem.load(u).norm();
    Vector r = problem.residual(u);
    double rnorm = r.norm();
    diag.history.push_back({0, rnorm, 0.0});
    auto done = [&](double n) { return n <= opts.atol || n <= opts.rtol * diag.scale; };

    Vector best = u;
    double best_norm = rnorm;
    detail::LinearSolver linear(opts);
    int it = 0;
    bool floor_hit = false;
    while (!done(rnorm) && it < opts.max_iterations) {
        ++it;
        const double delta = std::max(opts.delta_factor * problem.rms_gradient(u), opts.delta_floor);
        const SparseOperator J = problem.jacobian(u, delta);
        const Vector step = linear.solve(J, -r);
        double lambda = 1.0;
        Vector trial = u + step;
        Vector rt = problem.residual(trial);
        double tn = rt.norm();
        for (int h = 0; h < opts.max_halvings && !(tn < rnorm); ++h) {
            lambda *= 0.5;
            trial = u + lambda * step;
            rt = problem.residual(trial);
            tn = rt.norm();
        }
        if (!(tn < rnorm) && rnorm <= opts.floor_factor * std::max(opts.atol, opts.rtol * diag.scale)) {
            diag.history.push_back({it, tn, lambda});
            diag.message = "stopped at roundoff floor";
            floor_hit = true;
            break;
        }
        u = std::move(trial);
        r = std::move(rt);
        rnorm = tn;
        diag.history.push_back({it, rnorm, lambda});
        if (rnorm < best_norm) {
            best_norm = rnorm;
            best = u;
        }
    }
    diag.iterations = it;
    diag.final_residual = rnorm;
    diag.converged = floor_hit || done(rnorm);
    if (!diag.converged) {
        diag.message = "Newton did not converge in " + std::to_string(opts.max_iterations) + " iterations";
        throw NewtonFailure(diag.message, FemField(problem.space_ptr(), best), diag);
    }
    return {FemField(problem.space_ptr(), std::move(u)), std::move(diag)};
}

/**
 * @brief Picard iteration on the load: freeze F at the current iterate, solve the
 * monotone problem A_p(v) = F(u_k) by Newton, repeat.
 */
inline NewtonResult picard_solve(const QuasilinearProblem& problem, const FemField& initial,
                                 const NewtonOptions& opts = {}, int max_outer = 200) {
    Vector u = initial.values();
    NewtonDiagnostics diag;
    diag.used_picard = true;
    diag.scale = problem.load(u).norm();
    double rnorm = problem.residual(u).norm();
    diag.history.push_back({0, rnorm, 0.0});
    auto done = [&](double n) { return n <= opts.atol || n <= opts.rtol * diag.scale; };
    int it = 0;
    while (!done(rnorm) && it < max_outer) {
        ++it;
        QuasilinearProblem frozen(problem.space_ptr(), problem.p());
        frozen.add_load(std::make_shared<FixedLoad>(problem.load(u)));
        NewtonOptions inner = opts;
        inner.rtol = std::min(opts.rtol, 1e-12);
        auto sol = newton_solve(frozen, FemField(problem.space_ptr(), u), inner);
        u = sol.u.values();
        rnorm = problem.residual(u).norm();
        diag.history.push_back({it, rnorm, 1.0});
    }
    diag.iterations = it;
    diag.final_residual = rnorm;
    diag.converged = done(rnorm);
    if (!diag.converged) {
        diag.message = "Picard iteration did not converge";
        throw NewtonFailure(diag.message, FemField(problem.space_ptr(), u), diag);
    }
    return {FemField(problem.space_ptr(), std::move(u)), std::move(diag)};
}

/// Exponents 2, 2 + step, ..., p used for continuation.
inline std::vector<double> continuation_path(double p, double step) {
    std::vector<double> path;
    double q = 2.0;
    while (q < p - 1e-12) {
        path.push_back(q);
        q += step;
    }
    path.push_back(p);
    return path;
}

/**
 * Solves along p = 2, 2 + step, ..., p reusing each solution as the next initial
 * guess. Starts from `initial` when given (skipping continuation), otherwise zero.
 * Falls back to Picard on Newton failure when allowed.
 */
inline NewtonResult solve_with_continuation(QuasilinearProblem problem, const std::optional<FemField>& initial,
                                            const SolverParams& params) {
    const NewtonOptions opts = NewtonOptions::from(params);
    const double p_target = problem.p();
    std::vector<double> path = initial ? std::vector<double>{p_target} : continuation_path(p_target, params.p_step);
    FemField u = initial ? *initial : FemField::zero(problem.space_ptr());
    NewtonResult result{u, {}};
    int total = 0;
    std::vector<IterationRecord> history;
    for (double q : path) {
        problem.set_p(q);
        try {
            result = newton_solve(problem, u, opts);
        } catch (const NewtonFailure& fail) {
            if (!params.picard_fallback || !problem.load_depends_on_solution()) throw;
            result = picard_solve(problem, fail.best(), opts);
        }
        total += result.diagnostics.iterations;
        history.insert(history.end(), result.diagnostics.history.begin(), result.diagnostics.history.end());
        u = result.u;
    }
    result.diagnostics.iterations = total;
    result.diagnostics.history = std::move(history);
    return result;
}

} // namespace roughlab
