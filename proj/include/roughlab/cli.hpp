#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roughlab/io.hpp"
#include "roughlab/lab.hpp"

namespace roughlab::cli {

enum ExitCode : int { Ok = 0, Failure = 1, InvalidConfig = 2, SolverFailed = 3 };

struct Options {
    std::string command;
    std::string which;
    std::string config;
    std::string out = "results";
    std::string eps_list;
    std::optional<long long> seed;
    std::optional<int> threads;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
}

template <class Fn>
void write_with(const std::filesystem::path& path, Fn&& fn) {
    std::ostringstream os;
    fn(os);
    write_file(path, os.str());
}

inline void write_solution_vtk(const std::filesystem::path& path, const FemField& u) {
    write_with(path, [&](std::ostream& os) {
        const std::pair<std::string, std::span<const double>> data{
            "u", std::span<const double>(u.values().data(), static_cast<std::size_t>(u.values().size()))};
        write_vtk(os, u.mesh(), std::span(&data, 1));
    });
}

/// Applies command-line overrides, then re-validates.
inline RunConfig resolve(const Options& opt) {
    RunConfig rc = load_config(opt.config);
    if (!opt.eps_list.empty()) {
        const auto eps = parse_list("--eps-list", opt.eps_list);
        if (opt.command == "verify" && opt.which == "concentration")
            rc.study.verify_eps_list = eps;
        else
            rc.study.eps_list = eps;
    }
    if (opt.seed) {
        if (*opt.seed < 0) throw ConfigError("--seed must be >= 0");
        rc.study.seed = static_cast<std::uint64_t>(*opt.seed);
    }
    if (opt.threads) rc.study.threads = *opt.threads;
    validate(rc.study);
    return rc;
}

inline std::filesystem::path prepare(const std::string& command, const Options& opt, const RunConfig& rc,
                                     std::ostream& out) {
    const RunManifest m = make_manifest(command, opt.config, rc, opt.out);
    std::filesystem::create_directories(m.output_dir);
    write_with(m.output_dir / "manifest.ini", [&](std::ostream& os) { write_manifest(os, m); });
    out << "output: " << m.output_dir.generic_string() << "\n";
    return m.output_dir;
}

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

inline int solve_rough_cmd(const Options& opt, std::ostream& out) {
    const RunConfig rc = resolve(opt);
    auto geo = std::make_shared<const Geometry>(rc.problem);
    auto space = make_rough_space(*geo);
    const auto dir = prepare("solve-rough", opt, rc, out);
    try {
        const RoughSolution sol = solve_rough(geo, space);
        write_solution_vtk(dir / "solution.vtk", sol.u);
        write_with(dir / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(os, sol.diagnostics); });
        std::string summary = "vertices = " + std::to_string(space->size()) + "\n" +
                              "newton_iterations = " + std::to_string(sol.diagnostics.iterations) + "\n" +
                              "norm_W1p = " + fmt("%.12e", sol.norm) + "\n" +
                              "thin_energy = " + fmt("%.12e", sol.thin_energy) + "\n" +
                              "energy_gap = " + fmt("%.6e", energy_check(sol)) + "\n" +
                              "max_abs_u = " + fmt("%.12e", sol.u.values().cwiseAbs().maxCoeff()) + "\n";
        write_file(dir / "summary.txt", summary);
        out << summary;
        return Ok;
    } catch (const NewtonFailure& e) {
        write_with(dir / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(os, e.diagnostics()); });
        write_solution_vtk(dir / "best_iterate.vtk", e.best());
        throw;
    }
}

inline int solve_limit_cmd(const Options& opt, std::ostream& out) {
    const RunConfig rc = resolve(opt);
    auto space = std::make_shared<const P1Space>(build_cylinder_mesh(rc.problem.mesh.cylinder_resolution));
    const auto dir = prepare("solve-limit", opt, rc, out);
    try {
        const LimitSolution sol = solve_limit(rc.problem, space);
        write_solution_vtk(dir / "solution.vtk", sol.u);
        write_with(dir / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(os, sol.diagnostics); });
        write_with(dir / "mu.csv", [&](std::ostream& os) {
            os << "x,mu\n";
            char buf[80];
            for (const auto& [x, m] : sol.mu_samples) {
                std::snprintf(buf, sizeof buf, "%.12e,%.15e\n", x, m);
                os << buf;
            }
        });
        double trace_max = -INFINITY;
        const auto& mesh = sol.u.mesh();
        for (const auto& e : mesh.boundary_edges)
            if (e.tag == BoundaryTag::Gamma)
                trace_max = std::max({trace_max, sol.u.values()[e.a], sol.u.values()[e.b]});
        std::string summary = "vertices = " + std::to_string(space->size()) + "\n" +
                              "newton_iterations = " + std::to_string(sol.diagnostics.iterations) + "\n" +
                              "norm_W1p = " + fmt("%.12e", norm_W1p(sol.u, rc.problem.p)) + "\n" +
                              "trace_max = " + fmt("%.12e", trace_max) + "\n" +
                              "gamma_residual = " + fmt("%.6e", boundary_residual(sol)) + "\n" +
                              "max_abs_u = " + fmt("%.12e", sol.u.values().cwiseAbs().maxCoeff()) + "\n";
        write_file(dir / "summary.txt", summary);
        out << summary;
        return Ok;
    } catch (const NewtonFailure& e) {
        write_with(dir / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(os, e.diagnostics()); });
        throw;
    }
}

inline int sweep_cmd(const Options& opt, std::ostream& out) {
    const RunConfig rc = resolve(opt);
    check_sweep_admissible(rc.problem, rc.study.eps_list);
    const auto dir = prepare("sweep", opt, rc, out);
    SweepOptions so;
    so.refine = rc.study.refine;
    so.threads = rc.study.threads;
    const SweepReport report = run_theorem_sweep(rc.problem, rc.study.eps_list, so);
    write_with(dir / "report.csv", [&](std::ostream& os) { write_sweep_csv(os, report); });
    write_with(dir / "timing.csv", [&](std::ostream& os) { write_sweep_timing(os, report); });
    write_with(dir / "error_vs_eps.dat", [&](std::ostream& os) { write_sweep_plot_data(os, report); });
    std::ostringstream summary;
    write_sweep_summary(summary, report);
    if (!rc.study.levels.empty()) {
        ProblemConfig c = rc.problem;
        c.epsilon = rc.study.eps_list.back();
        std::vector<double> levels;
        for (double l : rc.study.levels) levels.push_back(l * rc.study.refine);
        const ResolutionStudy study = mesh_resolution_study(c, levels, rc.study.threads);
        write_with(dir / "resolution.csv", [&](std::ostream& os) { write_resolution_csv(os, study); });
        summary << "resolution study at eps = " << c.epsilon << ": discretization estimate "
                << fmt("%.3e", study.discretization) << " = " << fmt("%.2f", 100.0 * study.relative())
                << "% of the error (" << (study.certified() ? "within" : "ABOVE") << " 10%)\n";
    }
    write_file(dir / "summary.txt", summary.str());
    out << summary.str();
    return report.incomplete ? SolverFailed : Ok;
}

inline int verify_cmd(const Options& opt, std::ostream& out) {
    static const std::vector<std::string> kinds{"concentration", "bounds", "lipschitz", "mu"};
    if (std::find(kinds.begin(), kinds.end(), opt.which) == kinds.end())
        throw ConfigError("unknown verification '" + opt.which + "'; available: concentration, bounds, lipschitz, mu");
    const RunConfig rc = resolve(opt);
    const auto& P = rc.problem;
    const ModelFunctions fns = make_model(P.functions);

    if (opt.which == "mu") {
        if (!fns.mu_exact) throw ConfigError("h = '" + P.functions.h + "' has no closed-form cell average");
        const auto dir = prepare("verify-mu", opt, rc, out);
        double worst = 0.0;
        write_with(dir / "mu.csv", [&](std::ostream& os) {
            os << "x,mu,mu_exact,abs_error\n";
            char buf[128];
            for (int k = 0; k < 50; ++k) {
                const double x = (k + 0.5) / 50.0;
                const double m = mu(fns, x, P.solver.mu_cells);
                const double e = (*fns.mu_exact)(x);
                worst = std::max(worst, std::abs(m - e));
                std::snprintf(buf, sizeof buf, "%.6f,%.15e,%.15e,%.3e\n", x, m, e, std::abs(m - e));
                os << buf;
            }
        });
        out << "max |mu - mu_exact| = " << fmt("%.3e", worst) << "\n";
        return Ok;
    }
    if (opt.which == "concentration") {
        const auto rows = verify_concentration(named_field(rc.study.u), named_field(rc.study.phi), P,
                                               rc.study.verify_eps_list, rc.study.compose_f);
        const auto dir = prepare("verify-concentration", opt, rc, out);
        write_with(dir / "concentration.csv", [&](std::ostream& os) { write_concentration_csv(os, rows); });
        double worst = 0.0;
        for (const auto& r : rows) worst = std::max(worst, r.abs_error);
        out << "limit = " << fmt("%.12e", rows.front().limit) << ", final error = "
            << fmt("%.3e", rows.back().abs_error) << " (relative " << fmt("%.3e", rows.back().relative_error())
            << "), max error = " << fmt("%.3e", worst) << "\n";
        return Ok;
    }
    check_sweep_admissible(P, rc.study.eps_list);
    const auto dir = prepare("verify-" + opt.which, opt, rc, out);
    SweepOptions so;
    so.refine = rc.study.refine;
    so.threads = rc.study.threads;
    const BoundsStudy study = run_bounds_study(P, rc.study.eps_list, rc.study.samples, rc.study.seed, so);
    if (opt.which == "bounds") {
        write_with(dir / "bounds.csv", [&](std::ostream& os) { write_bounds_csv(os, study); });
        double c = 0.0;
        for (double m : study.bound_max) c = std::max(c, m);
        out << "max ratio (empirical C) = " << fmt("%.6e", c)
            << ", slope of max vs log(1/eps) = " << fmt("%.4f", study.bound_slope) << "\n";
    } else {
        write_with(dir / "lipschitz.csv", [&](std::ostream& os) { write_lipschitz_csv(os, study); });
        double L = 0.0;
        for (double m : study.lipschitz_max) L = std::max(L, m);
        out << "max ratio (empirical L) = " << fmt("%.6e", L)
            << ", slope of max vs log(1/eps) = " << fmt("%.4f", study.lipschitz_slope) << "\n";
    }
    return Ok;
}

} // namespace detail

/**
 * @brief Entry point of the roughlab tool. Exit codes: 0 success, 2 invalid
 * configuration or usage, 3 solver failure (artifacts written so far remain).
 */
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Rough-boundary concentrated reaction solver and homogenization lab", "roughlab"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ROUGHLAB_VERSION));
    Options opt;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "INI config file")->required();
        sub->add_option("--out", opt.out, "results root directory");
        sub->add_option("--eps-list", opt.eps_list, "comma-separated eps override");
        sub->add_option("--seed", opt.seed, "seed for random test fields");
        sub->add_option("--threads", opt.threads, "worker threads for sweep rows");
    };
    for (const char* name : {"solve-rough", "solve-limit", "sweep"}) common(app.add_subcommand(name));
    auto* verify = app.add_subcommand("verify", "concentration | bounds | lipschitz | mu");
    verify->add_option("which", opt.which, "verification to run")->required();
    common(verify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Ok;
    } catch (const CLI::CallForVersion&) {
        out << ROUGHLAB_VERSION << "\n";
        return Ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return InvalidConfig;
    }
    opt.command = app.get_subcommands().front()->get_name();

    try {
        if (opt.command == "solve-rough") return detail::solve_rough_cmd(opt, out);
        if (opt.command == "solve-limit") return detail::solve_limit_cmd(opt, out);
        if (opt.command == "sweep") return detail::sweep_cmd(opt, out);
        return detail::verify_cmd(opt, out);
    } catch (const ConfigError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return InvalidConfig;
    } catch (const MeshError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return InvalidConfig;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << "\n";
        return SolverFailed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return Failure;
    }
}

} // namespace roughlab::cli
