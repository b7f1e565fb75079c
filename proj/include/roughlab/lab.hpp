#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <exception>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "roughlab/concentrated.hpp"
#include "roughlab/limit_solver.hpp"
#include "roughlab/rough_solver.hpp"

namespace roughlab {

struct SweepOptions {
    /// Multiplies the resolution of every row: top edge, bulk edge and cylinder cells.
    double refine = 1.0;
    int threads = 1;
};

/// Mesh parameters of one run at a refinement factor. Top spacing follows eps/8
/// unless the config pins it; pinned values above eps/8 are left for meshing to reject.
inline ProblemConfig resolved_config(const ProblemConfig& cfg, double refine) {
    ProblemConfig out = cfg;
    const double top = cfg.mesh.top_edge > 0.0 ? cfg.mesh.top_edge
                                                : std::min(cfg.mesh.target_edge, cfg.epsilon / 8.0);
    out.mesh.top_edge = top / refine;
    out.mesh.target_edge = cfg.mesh.target_edge / refine;
    out.mesh.cylinder_resolution = static_cast<int>(std::lround(cfg.mesh.cylinder_resolution * refine));
    return out;
}

struct SweepRow {
    double epsilon = 0.0;
    std::size_t vertices = 0;
    std::size_t triangles = 0;
    /// |u_eps|_{W^{1,p}(Omega^eps)}.
    double norm = 0.0;
    /// |u_eps - u|_{W^{1,p}(Omega)}.
    double error = 0.0;
    /// int_{y > 0} |grad u_eps|^p + |u_eps|^p.
    double thin_energy = 0.0;
    /// | |u_eps|^p - <F_eps(u_eps), u_eps> |.
    double energy_gap = 0.0;
    int iterations = 0;
    bool used_picard = false;
    double wall_seconds = 0.0;
    bool ok = false;
    std::string message;
};

struct LimitSummary {
    int resolution = 0;
    std::size_t vertices = 0;
    double norm = 0.0;
    double boundary_residual = 0.0;
    int iterations = 0;
    double wall_seconds = 0.0;
};

struct SweepReport {
    ProblemConfig base;
    SweepOptions options;
    LimitSummary limit;
    std::vector<SweepRow> rows;
    /// Some row failed; its values are meaningless.
    bool incomplete = false;

    std::vector<double> column(double SweepRow::*field) const {
        std::vector<double> out;
        for (const auto& r : rows) out.push_back(r.*field);
        return out;
    }
};

inline bool strictly_decreasing(std::span<const double> v) {
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] < v[k - 1])) return false;
    return true;
}

inline bool non_increasing(std::span<const double> v) {
    for (std::size_t k = 1; k < v.size(); ++k)
        if (v[k] > v[k - 1]) return false;
    return true;
}

/// Least-squares slope of a column against log(1/eps).
inline double slope_vs_log_inverse_eps(std::span<const double> eps, std::span<const double> values) {
    std::vector<double> x;
    for (double e : eps) x.push_back(std::log(1.0 / e));
    return least_squares_slope(x, values);
}

namespace detail {

/// Runs job(i) for i in [0, n) on up to `threads` workers.
template <class Job>
void run_indexed(std::size_t n, int threads, Job&& job) {
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) job(i);
        });
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/// Rejects configurations whose strip leaves the domain at any eps of the list.
inline void check_sweep_admissible(const ProblemConfig& base, std::span<const double> eps_list) {
    if (eps_list.empty()) throw ConfigError("empty eps list");
    for (std::size_t k = 1; k < eps_list.size(); ++k)
        if (!(eps_list[k] < eps_list[k - 1])) throw ConfigError("eps list must be strictly decreasing");
    const ModelFunctions fns = make_model(base.functions);
    for (double eps : eps_list) {
        ProblemConfig cfg = base;
        cfg.epsilon = eps;
        check_admissible(Geometry(cfg, fns));
    }
}

/**
 * @brief Solves the limit problem once and the rough problem at each eps, and
 * measures |u_eps - u|_{W^{1,p}(Omega)}.
 *
 * A row whose solve fails is kept with ok = false and the report is flagged
 * incomplete; the remaining rows still run.
 */
inline SweepReport run_theorem_sweep(const ProblemConfig& base, std::span<const double> eps_list,
                                     const SweepOptions& opts = {}) {
    validate(base);
    check_sweep_admissible(base, eps_list);
    SweepReport report;
    report.base = base;
    report.options = opts;

    const ProblemConfig lcfg = resolved_config(base, opts.refine);
    const auto t0 = std::chrono::steady_clock::now();
    auto lspace = std::make_shared<const P1Space>(build_cylinder_mesh(lcfg.mesh.cylinder_resolution));
    const LimitSolution limit = solve_limit(lcfg, lspace);
    report.limit.resolution = lcfg.mesh.cylinder_resolution;
    report.limit.vertices = lspace->size();
    report.limit.norm = norm_W1p(limit.u, base.p);
    report.limit.boundary_residual = boundary_residual(limit);
    report.limit.iterations = limit.diagnostics.iterations;
    report.limit.wall_seconds = detail::seconds_since(t0);

    const ModelFunctions fns = make_model(base.functions);
    report.rows.resize(eps_list.size());
    detail::run_indexed(eps_list.size(), opts.threads, [&](std::size_t i) {
        SweepRow& row = report.rows[i];
        row.epsilon = eps_list[i];
        const auto start = std::chrono::steady_clock::now();
        try {
            ProblemConfig cfg = base;
            cfg.epsilon = eps_list[i];
            cfg = resolved_config(cfg, opts.refine);
            auto geo = std::make_shared<const Geometry>(cfg, fns);
            auto space = make_rough_space(*geo);
            row.vertices = space->size();
            row.triangles = space->mesh().num_triangles();
            const RoughSolution sol = solve_rough(geo, space);
            row.norm = sol.norm;
            row.thin_energy = sol.thin_energy;
            row.energy_gap = energy_check(sol);
            row.iterations = sol.diagnostics.iterations;
            row.used_picard = sol.diagnostics.used_picard;
            row.error = field_error(sol.u, limit.u, base.p);
            row.ok = true;
            row.message = sol.diagnostics.message;
        } catch (const SolverError& e) {
            row.message = e.what();
        } catch (const LocateError& e) {
            row.message = e.what();
        }
        row.wall_seconds = detail::seconds_since(start);
    });
    for (const auto& r : report.rows)
        if (!r.ok) report.incomplete = true;
    return report;
}

namespace detail {

inline std::string csv_text(const std::string& s) {
    std::string out = s;
    std::replace(out.begin(), out.end(), ',', ';');
    std::replace(out.begin(), out.end(), '\n', ' ');
    return out;
}

} // namespace detail

/// Deterministic columns only; wall times go to write_sweep_timing.
inline void write_sweep_csv(std::ostream& os, const SweepReport& r) {
    os << "epsilon,vertices,triangles,norm,omega_error,thin_energy,energy_gap,newton_iterations,picard,status\n";
    char buf[320];
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%.10e,%zu,%zu,%.12e,%.12e,%.12e,%.6e,%d,%d,%s\n", row.epsilon, row.vertices,
                      row.triangles, row.norm, row.error, row.thin_energy, row.energy_gap, row.iterations,
                      row.used_picard ? 1 : 0, row.ok ? "ok" : detail::csv_text(row.message).c_str());
        os << buf;
    }
}

inline void write_sweep_timing(std::ostream& os, const SweepReport& r) {
    os << "stage,epsilon,wall_seconds\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "limit,,%.3f\n", r.limit.wall_seconds);
    os << buf;
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "rough,%.10e,%.3f\n", row.epsilon, row.wall_seconds);
        os << buf;
    }
}

/// Whitespace-separated columns for gnuplot: eps, error, thin energy, norm.
inline void write_sweep_plot_data(std::ostream& os, const SweepReport& r) {
    os << "# epsilon omega_error thin_energy norm\n";
    char buf[128];
    for (const auto& row : r.rows) {
        if (!row.ok) continue;
        std::snprintf(buf, sizeof buf, "%.10e %.10e %.10e %.10e\n", row.epsilon, row.error, row.thin_energy,
                      row.norm);
        os << buf;
    }
}

inline void write_sweep_summary(std::ostream& os, const SweepReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "p = %g, gamma = %g, beta = %g, g = %s, psi = %s, h = %s, f = %s\n", r.base.p,
                  r.base.gamma, r.base.beta, r.base.functions.g.c_str(), r.base.functions.psi.c_str(),
                  r.base.functions.h.c_str(), r.base.functions.f.c_str());
    os << buf;
    std::snprintf(buf, sizeof buf, "limit: %dx%d cells, %zu vertices, |u|_W1p = %.6e, Gamma residual = %.3e\n",
                  r.limit.resolution, r.limit.resolution, r.limit.vertices, r.limit.norm, r.limit.boundary_residual);
    os << buf;
    for (const auto& row : r.rows) {
        if (row.ok)
            std::snprintf(buf, sizeof buf, "eps = %-8g vertices = %-7zu error = %.4e thin = %.4e norm = %.4e\n",
                          row.epsilon, row.vertices, row.error, row.thin_energy, row.norm);
        else
            std::snprintf(buf, sizeof buf, "eps = %-8g FAILED: %s\n", row.epsilon, row.message.c_str());
        os << buf;
    }
    if (r.incomplete) {
        os << "report incomplete: at least one row failed\n";
        return;
    }
    if (r.rows.size() < 2) {
        os << "single row: no trend\n";
        return;
    }
    const auto err = r.column(&SweepRow::error);
    const auto thin = r.column(&SweepRow::thin_energy);
    const auto eps = r.column(&SweepRow::epsilon);
    const auto norms = r.column(&SweepRow::norm);
    os << "error column: "
       << (strictly_decreasing(err) ? "strictly decreasing"
                                    : non_increasing(err) ? "non-increasing" : "NOT monotone (see rows)")
       << "\n";
    os << "thin-region energy: " << (strictly_decreasing(thin) ? "strictly decreasing" : "NOT strictly decreasing")
       << "\n";
    std::snprintf(buf, sizeof buf, "norm slope vs log(1/eps): %.4f\n", slope_vs_log_inverse_eps(eps, norms));
    os << buf;
}

/// One level of a resolution study.
struct ResolutionLevel {
    double refine = 1.0;
    double top_edge = 0.0;
    double bulk_edge = 0.0;
    int cylinder = 0;
    std::size_t vertices = 0;
    /// |u_eps,h - u_h|_{W^{1,p}(Omega)} at this level.
    double error = 0.0;
    /// |error - error at the reference level|.
    double error_shift = 0.0;
    /// |u_eps,h - u_eps,ref|_{W^{1,p}(Omega)}.
    double field_difference = 0.0;
};

struct ResolutionStudy {
    double epsilon = 0.0;
    std::vector<ResolutionLevel> levels;
    /// Estimated discretization error of the first level's error value.
    double discretization = 0.0;

    double relative() const {
        const double e = levels.empty() ? 0.0 : levels.front().error;
        return e > 0.0 ? discretization / e : (discretization > 0.0 ? INFINITY : 0.0);
    }
    bool certified(double fraction = 0.1) const { return relative() <= fraction; }
};

/**
 * @brief Error |u_eps - u|_{W^{1,p}(Omega)} at fixed eps on a sequence of
 * refinements; the last level is the reference.
 *
 * The first level's discretization error is estimated as
 * |E_0 - E_ref| / (1 - r_0/r_ref), the extrapolation for first-order convergence
 * in the mesh size, which is conservative for P1 in W^{1,p}. Levels must be
 * nondecreasing and at least three.
 */
inline ResolutionStudy mesh_resolution_study(const ProblemConfig& cfg, std::span<const double> levels,
                                             int threads = 1) {
    if (levels.size() < 3) throw ConfigError("resolution study needs at least 3 levels");
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (!(levels[k] > 0.0)) throw ConfigError("resolution levels must be > 0");
        if (k > 0 && levels[k] < levels[k - 1]) throw ConfigError("resolution levels must be nondecreasing");
    }
    validate(cfg);
    const ModelFunctions fns = make_model(cfg.functions);
    check_admissible(Geometry(cfg, fns));

    struct Run {
        std::optional<FemField> rough;
        std::optional<FemField> limit;
    };
    std::vector<Run> runs(levels.size());
    ResolutionStudy study;
    study.epsilon = cfg.epsilon;
    study.levels.resize(levels.size());
    std::vector<std::exception_ptr> errors(levels.size());
    detail::run_indexed(levels.size(), threads, [&](std::size_t k) {
        try {
            const ProblemConfig c = resolved_config(cfg, levels[k]);
            auto geo = std::make_shared<const Geometry>(c, fns);
            auto space = make_rough_space(*geo);
            auto lspace = std::make_shared<const P1Space>(build_cylinder_mesh(c.mesh.cylinder_resolution));
            const RoughSolution sol = solve_rough(geo, space);
            const LimitSolution lim = solve_limit(c, lspace);
            auto& L = study.levels[k];
            L.refine = levels[k];
            L.top_edge = c.mesh.top_edge;
            L.bulk_edge = c.mesh.target_edge;
            L.cylinder = c.mesh.cylinder_resolution;
            L.vertices = space->size();
            L.error = field_error(sol.u, lim.u, cfg.p);
            runs[k].rough = sol.u;
            runs[k].limit = lim.u;
        } catch (...) {
            errors[k] = std::current_exception();
        }
    });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    const auto& ref = study.levels.back();
    const FemField& ref_rough = *runs.back().rough;
    const PointLocator locator(ref_rough.mesh());
    for (std::size_t k = 0; k < levels.size(); ++k) {
        auto& L = study.levels[k];
        L.error_shift = std::abs(L.error - ref.error);
        // The coarse rough mesh below y = 0 tiles Omega, so it serves as the integration mesh.
        L.field_difference = field_error(ref_rough, *runs[k].rough, cfg.p, &locator);
    }
    const double ratio = levels.front() / levels.back();
    const double shift = study.levels.front().error_shift;
    study.discretization = ratio < 1.0 ? shift / (1.0 - ratio) : shift;
    return study;
}

inline void write_resolution_csv(std::ostream& os, const ResolutionStudy& s) {
    os << "refine,top_edge,bulk_edge,cylinder,vertices,omega_error,error_shift,field_difference\n";
    char buf[256];
    for (const auto& L : s.levels) {
        std::snprintf(buf, sizeof buf, "%.6g,%.10e,%.10e,%d,%zu,%.12e,%.6e,%.6e\n", L.refine, L.top_edge, L.bulk_edge,
                      L.cylinder, L.vertices, L.error, L.error_shift, L.field_difference);
        os << buf;
    }
}

/**
 * Closed-form test field a0 + sum_k a_k cos(k pi x) exp(b_k min(y, 0)): smooth on the
 * cylinder and extended constantly in y into the rough cap, the usual extension of
 * a W^{1,p}(Omega) function to Omega^eps.
 */
struct SmoothField {
    double a0 = 0.0;
    std::array<double, 3> a{};
    std::array<double, 3> b{};

    double operator()(double x, double y) const {
        y = std::min(y, 0.0);
        double v = a0;
        for (int k = 0; k < 3; ++k) v += a[k] * std::cos((k + 1) * std::numbers::pi * x) * std::exp(b[k] * y);
        return v;
    }
};

inline SmoothField random_smooth_field(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0), rate(0.5, 2.0);
    SmoothField f;
    f.a0 = coef(rng);
    for (int k = 0; k < 3; ++k) {
        f.a[k] = coef(rng) / (k + 1);
        f.b[k] = rate(rng);
    }
    return f;
}

/// Named closed-form fields for concentration checks.
inline Field2D named_field(const std::string& name) {
    if (name == "one") return [](double, double) { return 1.0; };
    if (name == "cos_exp") return [](double x, double y) { return std::cos(std::numbers::pi * x) * std::exp(y); };
    if (name == "x") return [](double x, double) { return x; };
    if (name == "exp_y") return [](double, double y) { return std::exp(y); };
    throw ConfigError("unknown field '" + name + "'; available: one, cos_exp, x, exp_y");
}

struct LipschitzRow {
    double epsilon;
    std::size_t triple;
    double ratio;
};

/// Ratio tables of verify_uniform_bound and verify_lipschitz along an eps sweep.
struct BoundsStudy {
    std::vector<double> eps;
    /// Samples: 0 = u_eps, 1..n smooth fields, n+1..2n nodal fields.
    std::vector<BoundRow> bounds;
    std::vector<LipschitzRow> lipschitz;
    /// Per-eps maxima over samples and over triples.
    std::vector<double> bound_max;
    std::vector<double> lipschitz_max;
    /// Slopes vs log(1/eps) of the two max columns.
    double bound_slope = 0.0;
    double lipschitz_slope = 0.0;
    /// Slope of each sample's own column, in sample order.
    std::vector<double> sample_slopes;
};

/// Independent uniform(-1, 1) nodal values.
inline FemField random_nodal_field(const std::shared_ptr<const P1Space>& space, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Vector v(static_cast<Eigen::Index>(space->size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = d(rng);
    return FemField(space, std::move(v));
}

/**
 * @brief For each eps: solves the rough problem and tabulates the bound ratio on
 * u_eps, on `samples` smooth random fields and on `samples` nodal random fields,
 * and the Lipschitz ratio on `samples` triples (u, u + 0.1 w, phi), the first
 * with u = u_eps.
 *
 * Smooth fields are drawn once so every eps sees the same closed forms; nodal
 * fields are drawn per eps from a seed derived from (seed, eps index). A vanishing
 * u_eps (f = 0) is left out of the bound table.
 */
inline BoundsStudy run_bounds_study(const ProblemConfig& base, std::span<const double> eps_list, int samples,
                                    std::uint64_t seed, const SweepOptions& opts = {}) {
    validate(base);
    check_sweep_admissible(base, eps_list);
    if (samples < 1) throw ConfigError("bounds study needs at least one sample");
    std::mt19937_64 rng(seed);
    std::vector<SmoothField> fields;
    for (int k = 0; k < 4 * samples; ++k) fields.push_back(random_smooth_field(rng));
    const ModelFunctions fns = make_model(base.functions);
    const auto n = static_cast<std::size_t>(samples);

    struct Slot {
        std::vector<BoundRow> bounds;
        std::vector<LipschitzRow> lipschitz;
    };
    std::vector<Slot> slots(eps_list.size());
    std::vector<std::exception_ptr> errors(eps_list.size());
    detail::run_indexed(eps_list.size(), opts.threads, [&](std::size_t i) {
        try {
            ProblemConfig cfg = base;
            cfg.epsilon = eps_list[i];
            cfg = resolved_config(cfg, opts.refine);
            auto geo = std::make_shared<const Geometry>(cfg, fns);
            auto space = make_rough_space(*geo);
            const RoughSolution sol = solve_rough(geo, space);
            auto smooth = [&](std::size_t k) { return FemField::interpolate(space, fields[k]); };
            std::mt19937_64 local(seed ^ (0x9e3779b97f4a7c15ull * (i + 1)));

            std::vector<FemField> u;
            std::vector<std::size_t> ids;
            if (w1p_parts(sol.u, cfg.p).total() > 0.0) {
                u.push_back(sol.u);
                ids.push_back(0);
            }
            for (std::size_t k = 0; k < n; ++k) {
                u.push_back(smooth(k));
                ids.push_back(1 + k);
            }
            for (std::size_t k = 0; k < n; ++k) {
                u.push_back(random_nodal_field(space, local));
                ids.push_back(1 + n + k);
            }
            const std::vector<Geometry> g(u.size(), *geo);
            for (auto row : verify_uniform_bound(u, g)) {
                row.sample = ids[row.sample];
                slots[i].bounds.push_back(row);
            }
            for (std::size_t k = 0; k < n; ++k) {
                const FemField uu = k == 0 ? sol.u : smooth(n + 3 * k);
                const FemField vv(space, uu.values() + 0.1 * smooth(n + 3 * k + 1).values());
                const FemField phi = smooth(n + 3 * k + 2);
                slots[i].lipschitz.push_back({eps_list[i], k, verify_lipschitz(uu, vv, phi, *geo)});
            }
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    BoundsStudy study;
    study.eps.assign(eps_list.begin(), eps_list.end());
    for (const auto& s : slots) {
        study.bounds.insert(study.bounds.end(), s.bounds.begin(), s.bounds.end());
        study.lipschitz.insert(study.lipschitz.end(), s.lipschitz.begin(), s.lipschitz.end());
        double mb = 0.0, ml = 0.0;
        for (const auto& r : s.bounds) mb = std::max(mb, r.ratio);
        for (const auto& r : s.lipschitz) ml = std::max(ml, r.ratio);
        study.bound_max.push_back(mb);
        study.lipschitz_max.push_back(ml);
    }
    if (eps_list.size() >= 2) {
        study.bound_slope = slope_vs_log_inverse_eps(eps_list, study.bound_max);
        study.lipschitz_slope = slope_vs_log_inverse_eps(eps_list, study.lipschitz_max);
        for (std::size_t sample = 0; sample <= 2 * n; ++sample) {
            std::vector<double> e, r;
            for (const auto& row : study.bounds)
                if (row.sample == sample) {
                    e.push_back(row.epsilon);
                    r.push_back(row.ratio);
                }
            if (e.size() == eps_list.size()) study.sample_slopes.push_back(slope_vs_log_inverse_eps(e, r));
        }
    }
    return study;
}

inline void write_bounds_csv(std::ostream& os, const BoundsStudy& s) {
    os << "epsilon,sample,ratio\n";
    char buf[96];
    for (const auto& r : s.bounds) {
        std::snprintf(buf, sizeof buf, "%.10e,%zu,%.12e\n", r.epsilon, r.sample, r.ratio);
        os << buf;
    }
}

inline void write_lipschitz_csv(std::ostream& os, const BoundsStudy& s) {
    os << "epsilon,triple,ratio\n";
    char buf[96];
    for (const auto& r : s.lipschitz) {
        std::snprintf(buf, sizeof buf, "%.10e,%zu,%.12e\n", r.epsilon, r.triple, r.ratio);
        os << buf;
    }
}

} // namespace roughlab
