#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "roughlab/errors.hpp"
#include "roughlab/geometry.hpp"

namespace roughlab {

using Vec2 = std::array<double, 2>;
using Tri = std::array<int, 3>;

enum class BoundaryTag : std::uint8_t { TopRough, Gamma, Lateral, Bottom };

inline const char* to_string(BoundaryTag t) {
    switch (t) {
    case BoundaryTag::TopRough: return "TOP_ROUGH";
    case BoundaryTag::Gamma: return "GAMMA";
    case BoundaryTag::Lateral: return "LATERAL";
    case BoundaryTag::Bottom: return "BOTTOM";
    }
    return "?";
}

struct BoundaryEdge {
    int a;
    int b;
    BoundaryTag tag;
};

/// Diagnostics of a rough-mesh build.
struct MeshInfo {
    int columns = 0;
    int levels = 0;
    double top_spacing = 0.0;
    /// Relative change of the strip measure caused by the thickness floor.
    double strip_floor_perturbation = 0.0;
    /// Largest vertical shift applied to snap a strip onto y = 0.
    double max_strip_shift = 0.0;
};

/// Fraction of the local strip thickness below which a strip is snapped onto y = 0.
inline constexpr double kStripSnap = 1e-3;

/**
 * @brief Conforming P1 triangulation with boundary tags and tagged strip elements.
 *
 * Triangles are counterclockwise. `strip_flags[t]` is 1 when triangle t lies in the
 * reaction strip; `strip_elements` lists the same triangles in increasing order.
 */
struct TriangleMesh {
    std::vector<Vec2> vertices;
    std::vector<Tri> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    std::vector<int> strip_elements;
    std::vector<std::uint8_t> strip_flags;
    MeshInfo info;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_triangles() const { return triangles.size(); }

    double signed_area(std::size_t t) const {
        const auto& tri = triangles[t];
        const Vec2& a = vertices[tri[0]];
        const Vec2& b = vertices[tri[1]];
        const Vec2& c = vertices[tri[2]];
        return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
    }

    Vec2 centroid(std::size_t t) const {
        const auto& tri = triangles[t];
        Vec2 c{0.0, 0.0};
        for (int v : tri) {
            c[0] += vertices[v][0] / 3.0;
            c[1] += vertices[v][1] / 3.0;
        }
        return c;
    }

    double total_area() const {
        double a = 0.0;
        for (std::size_t t = 0; t < triangles.size(); ++t) a += signed_area(t);
        return a;
    }

    bool has_strip() const { return !strip_elements.empty(); }
};

namespace detail {

/// Reference layer positions in [-1, 0], ascending, graded from `top` at y = 0 up to `bulk`.
inline std::vector<double> graded_layers(double top, double bulk, double grading) {
    std::vector<double> down{0.0};
    double depth = 0.0;
    double d = std::min(top, bulk);
    while (d < bulk && depth + d < 1.0) {
        depth += d;
        down.push_back(-depth);
        d = std::min(d * grading, bulk);
        if (grading == 1.0) break;
    }
    const double rest = 1.0 - depth;
    const int m = std::max(1, static_cast<int>(std::ceil(rest / bulk - 1e-9)));
    for (int k = 1; k <= m; ++k) down.push_back(-(depth + rest * k / m));
    down.back() = -1.0;
    std::reverse(down.begin(), down.end());
    return down;
}

/// Splits each quad along its shorter diagonal; drops triangles collapsed by merged nodes.
inline void emit_quad(std::vector<Tri>& out, int a, int b, int c, int d,
                      const std::vector<Vec2>& v) {
    auto dist2 = [&](int i, int j) {
        const double dx = v[i][0] - v[j][0];
        const double dy = v[i][1] - v[j][1];
        return dx * dx + dy * dy;
    };
    std::array<Tri, 2> tris;
    if (dist2(a, c) <= dist2(b, d))
        tris = {Tri{a, b, c}, Tri{a, c, d}};
    else
        tris = {Tri{a, b, d}, Tri{b, c, d}};
    for (const auto& t : tris) {
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
        out.push_back(t);
    }
}

} // namespace detail

/**
 * @brief Column-structured mesh of the rough domain.
 *
 * Each vertex column is split, bottom to top, into: bulk [-1, min(0, lo)],
 * strip part below zero [min(0, lo), 0], oscillation block [0, max(0, lo)],
 * strip part above [max(0, lo), hi]. Zero-thickness blocks collapse onto merged
 * vertices, so y = 0 and both strip curves are mesh lines in every column and the
 * strip is resolved by exactly `strip_layers` layers wherever lo >= 0.
 */
inline TriangleMesh build_rough_mesh(const Geometry& geo) {
    check_admissible(geo);
    const auto& cfg = geo.config();
    const auto& mp = cfg.mesh;
    const double eps = cfg.epsilon;
    const double limit = eps / 8.0;

    double top = mp.top_edge;
    if (top > 0.0) {
        if (top > limit * (1.0 + 1e-12))
            throw MeshError("top edge " + std::to_string(top) +
                            " cannot resolve the oscillation (needs <= eps/8 = " +
                            std::to_string(limit) + ")");
    } else {
        top = std::min(mp.target_edge, limit);
    }
    const int columns = static_cast<int>(std::ceil(1.0 / top - 1e-9));
    const double dx = 1.0 / columns;

    const auto& fns = geo.functions();
    const double floor_thickness = 1e-3 * geo.strip_scale() * fns.h1;

    std::vector<double> lo(columns + 1), hi(columns + 1);
    double true_measure = 0.0;
    double mesh_measure = 0.0;
    double mesh_shift = 0.0;
    for (int i = 0; i <= columns; ++i) {
        const double x = i * dx;
        const auto sb = geo.strip_bounds(x);
        const double w = (i == 0 || i == columns) ? 0.5 : 1.0;
        true_measure += w * (sb.hi - sb.lo);
        const double thick = std::max(sb.hi - sb.lo, floor_thickness);
        mesh_measure += w * thick;
        hi[i] = sb.hi;
        lo[i] = sb.hi - thick;
        // A strip nearly touching y = 0 from either side would leave a sliver block;
        // shift it onto y = 0 (its thickness, hence its measure, is unchanged).
        const double snap = kStripSnap * thick;
        double shift = 0.0;
        if (hi[i] > 0.0 && hi[i] < snap)
            shift = -hi[i];
        else if (lo[i] != 0.0 && std::abs(lo[i]) < snap)
            shift = -lo[i];
        hi[i] += shift;
        lo[i] += shift;
        mesh_shift = std::max(mesh_shift, std::abs(shift));
        if (lo[i] <= -1.0) throw ConfigError("strip reaches the bottom of the domain");
    }

    double osc_max = 0.0;
    for (double v : lo) osc_max = std::max(osc_max, v);
    const int n_osc = std::max(1, static_cast<int>(std::ceil(osc_max / dx - 1e-9)));
    const int n_strip = mp.strip_layers;
    const auto bulk_ref = detail::graded_layers(dx, mp.target_edge, mp.grading);
    const int n_bulk = static_cast<int>(bulk_ref.size()) - 1;

    // Level index ranges (inclusive node indices).
    const int lv_zero = n_bulk + n_strip;
    const int lv_osc_top = lv_zero + n_osc;
    const int levels = lv_osc_top + n_strip + 1;

    TriangleMesh mesh;
    mesh.info.columns = columns;
    mesh.info.levels = levels;
    mesh.info.top_spacing = dx;
    mesh.info.strip_floor_perturbation =
        true_measure > 0.0 ? (mesh_measure - true_measure) / true_measure : 0.0;
    mesh.info.max_strip_shift = mesh_shift;

    std::vector<int> node(static_cast<std::size_t>(columns + 1) * levels);
    auto at = [&](int i, int j) -> int& { return node[static_cast<std::size_t>(i) * levels + j]; };

    std::vector<double> ys(levels);
    for (int i = 0; i <= columns; ++i) {
        const double x = i * dx;
        const double b = std::min(0.0, lo[i]);
        const double o = std::max(0.0, lo[i]);
        for (int j = 0; j <= n_bulk; ++j) ys[j] = -1.0 + (bulk_ref[j] + 1.0) * (1.0 + b);
        ys[n_bulk] = b;
        for (int k = 1; k <= n_strip; ++k) ys[n_bulk + k] = b + (0.0 - b) * k / n_strip;
        ys[lv_zero] = 0.0;
        for (int k = 1; k <= n_osc; ++k) ys[lv_zero + k] = o * k / n_osc;
        ys[lv_osc_top] = o;
        for (int k = 1; k <= n_strip; ++k) ys[lv_osc_top + k] = o + (hi[i] - o) * k / n_strip;
        ys[levels - 1] = hi[i];

        for (int j = 0; j < levels; ++j) {
            if (j > 0 && ys[j] == ys[j - 1]) {
                at(i, j) = at(i, j - 1);
                continue;
            }
            at(i, j) = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back({x, ys[j]});
        }
    }

    auto is_strip_layer = [&](int j) {
        return (j >= n_bulk && j < lv_zero) || j >= lv_osc_top;
    };
    for (int i = 0; i < columns; ++i) {
        for (int j = 0; j + 1 < levels; ++j) {
            const std::size_t first = mesh.triangles.size();
            detail::emit_quad(mesh.triangles, at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1),
                              mesh.vertices);
            const std::uint8_t flag = is_strip_layer(j) ? 1 : 0;
            for (std::size_t t = first; t < mesh.triangles.size(); ++t) mesh.strip_flags.push_back(flag);
        }
    }
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
        if (mesh.strip_flags[t]) mesh.strip_elements.push_back(static_cast<int>(t));

    for (int i = 0; i < columns; ++i)
        mesh.boundary_edges.push_back({at(i, 0), at(i + 1, 0), BoundaryTag::Bottom});
    for (int j = 0; j + 1 < levels; ++j) {
        if (at(columns, j) != at(columns, j + 1))
            mesh.boundary_edges.push_back({at(columns, j), at(columns, j + 1), BoundaryTag::Lateral});
    }
    for (int i = columns; i > 0; --i)
        mesh.boundary_edges.push_back({at(i, levels - 1), at(i - 1, levels - 1), BoundaryTag::TopRough});
    for (int j = levels - 1; j > 0; --j) {
        if (at(0, j) != at(0, j - 1))
            mesh.boundary_edges.push_back({at(0, j), at(0, j - 1), BoundaryTag::Lateral});
    }
    return mesh;
}

/// Structured nx-by-ny triangulation of (0,1) x (-1,0); the top edge y = 0 is GAMMA.
inline TriangleMesh build_cylinder_mesh(int nx, int ny) {
    if (nx < 4 || ny < 4) throw MeshError("cylinder mesh needs at least 4 cells per side");
    TriangleMesh mesh;
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            mesh.vertices.push_back({static_cast<double>(i) / nx, -1.0 + static_cast<double>(j) / ny});
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            mesh.triangles.push_back({a, b, c});
            mesh.triangles.push_back({a, c, d});
        }
    }
    mesh.strip_flags.assign(mesh.triangles.size(), 0);
    for (int i = 0; i < nx; ++i) mesh.boundary_edges.push_back({id(i, 0), id(i + 1, 0), BoundaryTag::Bottom});
    for (int j = 0; j < ny; ++j) mesh.boundary_edges.push_back({id(nx, j), id(nx, j + 1), BoundaryTag::Lateral});
    for (int i = nx; i > 0; --i) mesh.boundary_edges.push_back({id(i, ny), id(i - 1, ny), BoundaryTag::Gamma});
    for (int j = ny; j > 0; --j) mesh.boundary_edges.push_back({id(0, j), id(0, j - 1), BoundaryTag::Lateral});
    return mesh;
}

inline TriangleMesh build_cylinder_mesh(int resolution) { return build_cylinder_mesh(resolution, resolution); }

/**
 * Elements of a rough mesh lying below y = 0, renumbered as a cylinder mesh.
 * Edges on y = 0 become GAMMA; other boundary edges keep their tags.
 */
inline TriangleMesh restrict_to_cylinder(const TriangleMesh& rough) {
    TriangleMesh out;
    std::vector<int> remap(rough.num_vertices(), -1);
    auto map_vertex = [&](int v) {
        if (remap[v] < 0) {
            remap[v] = static_cast<int>(out.vertices.size());
            out.vertices.push_back(rough.vertices[v]);
        }
        return remap[v];
    };
    for (std::size_t t = 0; t < rough.num_triangles(); ++t) {
        if (rough.centroid(t)[1] >= 0.0) continue;
        const auto& tri = rough.triangles[t];
        out.triangles.push_back({map_vertex(tri[0]), map_vertex(tri[1]), map_vertex(tri[2])});
        out.strip_flags.push_back(0);
    }
    // Boundary: edges used by exactly one kept triangle.
    struct Edge {
        int a, b;
    };
    std::vector<std::pair<std::uint64_t, Edge>> edges;
    for (const auto& tri : out.triangles) {
        for (int k = 0; k < 3; ++k) {
            const int a = tri[k], b = tri[(k + 1) % 3];
            const auto key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) |
                             static_cast<std::uint64_t>(std::max(a, b));
            edges.push_back({key, {a, b}});
        }
    }
    std::sort(edges.begin(), edges.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
    for (std::size_t k = 0; k < edges.size();) {
        std::size_t m = k + 1;
        while (m < edges.size() && edges[m].first == edges[k].first) ++m;
        if (m - k == 1) {
            const auto e = edges[k].second;
            const auto& pa = out.vertices[e.a];
            const auto& pb = out.vertices[e.b];
            BoundaryTag tag = BoundaryTag::Lateral;
            if (pa[1] == 0.0 && pb[1] == 0.0)
                tag = BoundaryTag::Gamma;
            else if (pa[1] == -1.0 && pb[1] == -1.0)
                tag = BoundaryTag::Bottom;
            out.boundary_edges.push_back({e.a, e.b, tag});
        }
        k = m;
    }
    return out;
}

struct Location {
    int triangle;
    std::array<double, 3> lambda;
};

/**
 * @brief Bucket-grid point location on a TriangleMesh.
 *
 * Points within `tol` (barycentric) of a triangle snap onto it; coordinates are
 * clamped to [0,1] and renormalized.
 */
class PointLocator {
public:
    explicit PointLocator(const TriangleMesh& mesh, double tol = 1e-9) : mesh_(&mesh), tol_(tol) {
        lo_ = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
        hi_ = {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
        for (const auto& v : mesh.vertices) {
            lo_[0] = std::min(lo_[0], v[0]);
            lo_[1] = std::min(lo_[1], v[1]);
            hi_[0] = std::max(hi_[0], v[0]);
            hi_[1] = std::max(hi_[1], v[1]);
        }
        const double n = std::max<double>(1.0, std::sqrt(static_cast<double>(mesh.num_triangles())));
        nx_ = std::max(1, static_cast<int>(n));
        ny_ = nx_;
        span_ = {std::max(hi_[0] - lo_[0], 1e-300), std::max(hi_[1] - lo_[1], 1e-300)};
        start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
        std::vector<std::pair<int, int>> pairs;
        for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
            const auto& tri = mesh.triangles[t];
            double x0 = hi_[0], x1 = lo_[0], y0 = hi_[1], y1 = lo_[1];
            for (int v : tri) {
                x0 = std::min(x0, mesh.vertices[v][0]);
                x1 = std::max(x1, mesh.vertices[v][0]);
                y0 = std::min(y0, mesh.vertices[v][1]);
                y1 = std::max(y1, mesh.vertices[v][1]);
            }
            const auto [i0, j0] = bucket(x0, y0);
            const auto [i1, j1] = bucket(x1, y1);
            for (int j = j0; j <= j1; ++j)
                for (int i = i0; i <= i1; ++i) pairs.emplace_back(j * nx_ + i, static_cast<int>(t));
        }
        std::sort(pairs.begin(), pairs.end());
        items_.reserve(pairs.size());
        for (const auto& [b, t] : pairs) {
            ++start_[b + 1];
            items_.push_back(t);
        }
        for (std::size_t b = 1; b < start_.size(); ++b) start_[b] += start_[b - 1];
    }

    std::optional<Location> try_locate(double x, double y) const {
        const double slack = 1e-9 * std::max(span_[0], span_[1]);
        if (x < lo_[0] - slack || x > hi_[0] + slack || y < lo_[1] - slack || y > hi_[1] + slack)
            return std::nullopt;
        const auto [bi, bj] = bucket(x, y);
        std::optional<Location> best;
        double best_violation = std::numeric_limits<double>::max();
        for (int j = std::max(0, bj - 1); j <= std::min(ny_ - 1, bj + 1); ++j) {
            for (int i = std::max(0, bi - 1); i <= std::min(nx_ - 1, bi + 1); ++i) {
                const int b = j * nx_ + i;
                for (int k = start_[b]; k < start_[b + 1]; ++k) {
                    const int t = items_[k];
                    const auto lam = barycentric(t, x, y);
                    const double violation = -std::min({lam[0], lam[1], lam[2]});
                    if (violation <= 0.0 && (i == bi && j == bj)) return finish(t, lam);
                    if (violation < best_violation) {
                        best_violation = violation;
                        best = Location{t, lam};
                    }
                }
            }
        }
        if (best && best_violation <= tol_) return finish(best->triangle, best->lambda);
        return std::nullopt;
    }

    Location locate(double x, double y) const {
        auto loc = try_locate(x, y);
        if (!loc)
            throw LocateError("point (" + std::to_string(x) + ", " + std::to_string(y) +
                              ") is outside the mesh");
        return *loc;
    }

    const TriangleMesh& mesh() const { return *mesh_; }

    /// Triangles whose bounding box may meet [x0, x1] x [y0, y1], each listed once.
    void candidates(double x0, double y0, double x1, double y1, std::vector<int>& out) const {
        out.clear();
        const auto [i0, j0] = bucket(x0, y0);
        const auto [i1, j1] = bucket(x1, y1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                const int b = j * nx_ + i;
                out.insert(out.end(), items_.begin() + start_[b], items_.begin() + start_[b + 1]);
            }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
    }

private:
    std::pair<int, int> bucket(double x, double y) const {
        int i = static_cast<int>((x - lo_[0]) / span_[0] * nx_);
        int j = static_cast<int>((y - lo_[1]) / span_[1] * ny_);
        return {std::clamp(i, 0, nx_ - 1), std::clamp(j, 0, ny_ - 1)};
    }

    std::array<double, 3> barycentric(int t, double x, double y) const {
        const auto& tri = mesh_->triangles[t];
        const Vec2& a = mesh_->vertices[tri[0]];
        const Vec2& b = mesh_->vertices[tri[1]];
        const Vec2& c = mesh_->vertices[tri[2]];
        const double det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        const double l1 = ((x - a[0]) * (c[1] - a[1]) - (y - a[1]) * (c[0] - a[0])) / det;
        const double l2 = ((b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])) / det;
        return {1.0 - l1 - l2, l1, l2};
    }

    static Location finish(int t, std::array<double, 3> lam) {
        double sum = 0.0;
        for (auto& l : lam) {
            l = std::clamp(l, 0.0, 1.0);
            sum += l;
        }
        for (auto& l : lam) l /= sum;
        return {t, lam};
    }

    const TriangleMesh* mesh_;
    double tol_;
    Vec2 lo_{}, hi_{}, span_{};
    int nx_ = 1, ny_ = 1;
    std::vector<int> start_;
    std::vector<int> items_;
};

/// One-shot point location; builds a locator per call.
inline Location locate_point(const TriangleMesh& mesh, double x, double y) {
    return PointLocator(mesh).locate(x, y);
}

/// Legacy VTK ASCII unstructured grid with optional point data and a strip cell flag.
inline void write_vtk(std::ostream& os, const TriangleMesh& mesh,
                      std::span<const std::pair<std::string, std::span<const double>>> point_data = {}) {
    os.precision(17);
    os << "# vtk DataFile Version 3.0\nroughlab mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << mesh.num_vertices() << " double\n";
    for (const auto& v : mesh.vertices) os << v[0] << ' ' << v[1] << " 0\n";
    os << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
    for (const auto& t : mesh.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    os << "CELL_TYPES " << mesh.num_triangles() << '\n';
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) os << "5\n";
    os << "CELL_DATA " << mesh.num_triangles() << "\nSCALARS strip int 1\nLOOKUP_TABLE default\n";
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
        os << (t < mesh.strip_flags.size() ? int(mesh.strip_flags[t]) : 0) << '\n';
    if (!point_data.empty()) {
        os << "POINT_DATA " << mesh.num_vertices() << '\n';
        for (const auto& [name, values] : point_data) {
            os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : values) os << v << '\n';
        }
    }
}

} // namespace roughlab
