#pragma once

#include <cmath>
#include <string>

#include "roughlab/errors.hpp"
#include "roughlab/registry.hpp"

namespace roughlab {

struct MeshParams {
    /// Bulk edge length; also the default near the rough top.
    double target_edge = 1.0 / 64.0;
    /// Explicit column spacing near the rough top. 0 selects min(target_edge, eps/8);
    /// an explicit value above eps/8 is rejected.
    double top_edge = 0.0;
    int strip_layers = 2;
    /// Geometric growth of vertical layer thickness from the top spacing to target_edge.
    double grading = 1.25;
    /// Cells per side of the limit cylinder mesh.
    int cylinder_resolution = 64;

    bool operator==(const MeshParams&) const = default;
};

struct SolverParams {
    double rtol = 1e-10;
    double atol = 1e-12;
    int max_iterations = 40;
    int max_halvings = 12;
    /// delta = delta_factor * RMS gradient of the iterate, floored at delta_floor.
    double delta_factor = 1e-10;
    double delta_floor = 1e-14;
    double p_step = 0.5;
    bool picard_fallback = true;
    bool use_cg = false;
    double cg_tol = 1e-12;
    int mu_cells = 16;

    bool operator==(const SolverParams&) const = default;
};

struct ProblemConfig {
    double epsilon = 0.1;
    double gamma = 1.0;
    double beta = 1.0;
    double p = 2.0;
    FunctionSelection functions;
    MeshParams mesh;
    SolverParams solver;

    bool operator==(const ProblemConfig&) const = default;
};

/// Rejects parameters outside the admissible ranges (eps > 0, gamma > 0, beta >= 0, p >= 2).
inline void validate(const ProblemConfig& cfg) {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(cfg.epsilon) || cfg.epsilon <= 0.0)
        throw ConfigError("epsilon must be > 0");
    if (!finite(cfg.gamma) || cfg.gamma <= 0.0)
        throw ConfigError("gamma must be > 0");
    if (!finite(cfg.beta) || cfg.beta < 0.0)
        throw ConfigError("beta must be >= 0");
    if (!finite(cfg.p) || cfg.p < 2.0)
        throw ConfigError("p must satisfy p >= 2 (got " + std::to_string(cfg.p) + ")");
    if (!(cfg.mesh.target_edge > 0.0))
        throw ConfigError("mesh.target_edge must be > 0");
    if (cfg.mesh.top_edge < 0.0)
        throw ConfigError("mesh.top_edge must be >= 0");
    if (cfg.mesh.strip_layers < 1)
        throw ConfigError("mesh.strip_layers must be >= 1");
    if (!(cfg.mesh.grading >= 1.0))
        throw ConfigError("mesh.grading must be >= 1");
    if (cfg.mesh.cylinder_resolution < 4)
        throw ConfigError("mesh.cylinder_resolution must be >= 4");
    if (!(cfg.solver.rtol > 0.0) || !(cfg.solver.atol > 0.0))
        throw ConfigError("solver tolerances must be > 0");
    if (cfg.solver.max_iterations < 1)
        throw ConfigError("solver.max_iterations must be >= 1");
    if (!(cfg.solver.p_step > 0.0))
        throw ConfigError("solver.p_step must be > 0");
    if (cfg.solver.mu_cells < 1)
        throw ConfigError("solver.mu_cells must be >= 1");
}

} // namespace roughlab
