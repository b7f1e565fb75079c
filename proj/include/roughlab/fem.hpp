#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "roughlab/mesh.hpp"
#include "roughlab/quadrature.hpp"

namespace roughlab {

using Vector = Eigen::VectorXd;
using SparseOperator = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Per-element data of a P1 space: area and constant basis gradients.
struct ElementGeometry {
    double area;
    std::array<Vec2, 3> grad;
};

/**
 * @brief Piecewise-linear space over a TriangleMesh.
 *
 * Holds the mesh by shared pointer so fields and spaces stay valid independently
 * of the builder that produced the mesh.
 */
class P1Space {
public:
    explicit P1Space(std::shared_ptr<const TriangleMesh> mesh) : mesh_(std::move(mesh)) {
        geo_.reserve(mesh_->num_triangles());
        for (std::size_t t = 0; t < mesh_->num_triangles(); ++t) {
            const auto& tri = mesh_->triangles[t];
            const Vec2& a = mesh_->vertices[tri[0]];
            const Vec2& b = mesh_->vertices[tri[1]];
            const Vec2& c = mesh_->vertices[tri[2]];
            const double det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if (!(det > 0.0)) throw MeshError("triangle " + std::to_string(t) + " has nonpositive area");
            ElementGeometry g;
            g.area = 0.5 * det;
            g.grad[0] = {(b[1] - c[1]) / det, (c[0] - b[0]) / det};
            g.grad[1] = {(c[1] - a[1]) / det, (a[0] - c[0]) / det};
            g.grad[2] = {(a[1] - b[1]) / det, (b[0] - a[0]) / det};
            geo_.push_back(g);
        }
    }

    explicit P1Space(TriangleMesh mesh)
        : P1Space(std::make_shared<const TriangleMesh>(std::move(mesh))) {}

    const TriangleMesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const TriangleMesh>& mesh_ptr() const { return mesh_; }
    std::size_t size() const { return mesh_->num_vertices(); }
    const ElementGeometry& element(std::size_t t) const { return geo_[t]; }

    Vec2 gradient(std::size_t t, const Vector& u) const {
        const auto& tri = mesh_->triangles[t];
        const auto& g = geo_[t];
        Vec2 out{0.0, 0.0};
        for (int k = 0; k < 3; ++k) {
            out[0] += u[tri[k]] * g.grad[k][0];
            out[1] += u[tri[k]] * g.grad[k][1];
        }
        return out;
    }

private:
    std::shared_ptr<const TriangleMesh> mesh_;
    std::vector<ElementGeometry> geo_;
};

/// Nodal coefficients of a P1 function; one finite value per vertex.
class FemField {
public:
    FemField() = default;
    FemField(std::shared_ptr<const P1Space> space, Vector values)
        : space_(std::move(space)), values_(std::move(values)) {
        if (static_cast<std::size_t>(values_.size()) != space_->size())
            throw std::invalid_argument("field size does not match vertex count");
        if (!values_.allFinite()) throw std::invalid_argument("field has non-finite coefficients");
    }

    static FemField zero(std::shared_ptr<const P1Space> space) {
        const auto n = static_cast<Eigen::Index>(space->size());
        return {std::move(space), Vector::Zero(n)};
    }

    template <class Fn>
    static FemField interpolate(std::shared_ptr<const P1Space> space, Fn&& fn) {
        Vector v(static_cast<Eigen::Index>(space->size()));
        const auto& verts = space->mesh().vertices;
        for (std::size_t i = 0; i < verts.size(); ++i) v[static_cast<Eigen::Index>(i)] = fn(verts[i][0], verts[i][1]);
        return {std::move(space), std::move(v)};
    }

    const P1Space& space() const { return *space_; }
    const std::shared_ptr<const P1Space>& space_ptr() const { return space_; }
    const Vector& values() const { return values_; }
    const TriangleMesh& mesh() const { return space_->mesh(); }

    double value_at(const Location& loc) const {
        const auto& tri = mesh().triangles[loc.triangle];
        return loc.lambda[0] * values_[tri[0]] + loc.lambda[1] * values_[tri[1]] + loc.lambda[2] * values_[tri[2]];
    }

private:
    std::shared_ptr<const P1Space> space_;
    Vector values_;
};

namespace detail {

/// |t|^(p-2) t, with the p = 2 case exact.
inline double signed_power(double t, double p) {
    if (p == 2.0) return t;
    return std::pow(std::abs(t), p - 2.0) * t;
}

/// d/dt |t|^(p-2) t = (p-1) |t|^(p-2); equals 1 for p = 2 including t = 0.
inline double signed_power_derivative(double t, double p) {
    if (p == 2.0) return 1.0;
    return (p - 1.0) * std::pow(std::abs(t), p - 2.0);
}

inline double value_at_point(const Tri& tri, const std::array<double, 3>& lam, const Vector& u) {
    return lam[0] * u[tri[0]] + lam[1] * u[tri[1]] + lam[2] * u[tri[2]];
}

} // namespace detail

/// Vector flux |a|^(p-2) a on R^2.
inline Vec2 p_flux(const Vec2& a, double p) {
    if (p == 2.0) return a;
    const double n = std::sqrt(a[0] * a[0] + a[1] * a[1]);
    const double s = std::pow(n, p - 2.0);
    return {s * a[0], s * a[1]};
}

/**
 * @brief Load term <F(u), phi_i> that may depend on the iterate.
 *
 * `add` accumulates the load vector and, when `derivative` is non-null, the
 * triplets of dF/du.
 */
class LoadFunctional {
public:
    virtual ~LoadFunctional() = default;
    virtual void add(const Vector& u, Vector& load, std::vector<Triplet>* derivative) const = 0;
    virtual bool depends_on_solution() const = 0;
};

/// u-independent load given by a fixed vector.
class FixedLoad final : public LoadFunctional {
public:
    explicit FixedLoad(Vector v) : v_(std::move(v)) {}
    void add(const Vector&, Vector& load, std::vector<Triplet>*) const override { load += v_; }
    bool depends_on_solution() const override { return false; }

private:
    Vector v_;
};

/**
 * @brief Concentrated reaction (1/eps^(gamma+1)) int_{strip} f(u) phi_i.
 *
 * Integrates over the tagged strip elements with the mid-edge rule.
 */
class StripLoad final : public LoadFunctional {
public:
    StripLoad(std::shared_ptr<const P1Space> space, double inv_scale, std::function<double(double)> f,
              std::function<double(double)> df, bool constant_f)
        : space_(std::move(space)), inv_scale_(inv_scale), f_(std::move(f)), df_(std::move(df)),
          constant_(constant_f) {
        if (!space_->mesh().has_strip()) throw std::invalid_argument("mesh has no tagged strip elements");
    }

    void add(const Vector& u, Vector& load, std::vector<Triplet>* derivative) const override {
        const auto& mesh = space_->mesh();
        for (int t : mesh.strip_elements) {
            const auto& tri = mesh.triangles[t];
            const double area = space_->element(t).area;
            for (const auto& q : quad::triangle_midedge()) {
                const double uq = detail::value_at_point(tri, q.lambda, u);
                const double w = inv_scale_ * area * q.w;
                const double fq = f_(uq);
                for (int i = 0; i < 3; ++i) load[tri[i]] += w * fq * q.lambda[i];
                if (derivative && !constant_) {
                    const double dfq = df_(uq);
                    for (int i = 0; i < 3; ++i)
                        for (int j = 0; j < 3; ++j)
                            derivative->emplace_back(tri[i], tri[j], w * dfq * q.lambda[i] * q.lambda[j]);
                }
            }
        }
    }
    bool depends_on_solution() const override { return !constant_; }

private:
    std::shared_ptr<const P1Space> space_;
    double inv_scale_;
    std::function<double(double)> f_;
    std::function<double(double)> df_;
    bool constant_;
};

/**
 * @brief Boundary reaction int_Gamma mu(x) f(u) phi_i dx with 2-point Gauss per edge.
 *
 * mu is sampled once at the edge quadrature points.
 */
class GammaLoad final : public LoadFunctional {
public:
    GammaLoad(std::shared_ptr<const P1Space> space, const std::function<double(double)>& mu,
              std::function<double(double)> f, std::function<double(double)> df, bool constant_f)
        : space_(std::move(space)), f_(std::move(f)), df_(std::move(df)), constant_(constant_f) {
        const auto& mesh = space_->mesh();
        const auto& rule = quad::gauss_unit<2>();
        for (const auto& e : mesh.boundary_edges) {
            if (e.tag != BoundaryTag::Gamma) continue;
            const Vec2& a = mesh.vertices[e.a];
            const Vec2& b = mesh.vertices[e.b];
            const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
            for (const auto& q : rule) {
                const double x = a[0] + q.x * (b[0] - a[0]);
                points_.push_back({e.a, e.b, q.x, len * q.w, x, mu(x)});
            }
        }
        if (points_.empty()) throw std::invalid_argument("mesh has no GAMMA edges");
    }

    struct Sample {
        int a, b;
        double t;
        double weight;
        double x;
        double mu;
    };

    const std::vector<Sample>& samples() const { return points_; }

    void add(const Vector& u, Vector& load, std::vector<Triplet>* derivative) const override {
        for (const auto& s : points_) {
            const double la = 1.0 - s.t, lb = s.t;
            const double uq = la * u[s.a] + lb * u[s.b];
            const double w = s.weight * s.mu;
            const double fq = f_(uq);
            load[s.a] += w * fq * la;
            load[s.b] += w * fq * lb;
            if (derivative && !constant_) {
                const double d = w * df_(uq);
                derivative->emplace_back(s.a, s.a, d * la * la);
                derivative->emplace_back(s.a, s.b, d * la * lb);
                derivative->emplace_back(s.b, s.a, d * lb * la);
                derivative->emplace_back(s.b, s.b, d * lb * lb);
            }
        }
    }
    bool depends_on_solution() const override { return !constant_; }

private:
    std::shared_ptr<const P1Space> space_;
    std::vector<Sample> points_;
    std::function<double(double)> f_;
    std::function<double(double)> df_;
    bool constant_;
};

/**
 * @brief Discrete quasilinear problem A_p(u) = F(u) with
 * <A_p(u), phi> = int |grad u|^(p-2) grad u . grad phi + |u|^(p-2) u phi.
 *
 * The gradient term is exact for P1; the lower-order term uses the mid-edge rule.
 */
class QuasilinearProblem {
public:
    QuasilinearProblem(std::shared_ptr<const P1Space> space, double p) : space_(std::move(space)), p_(p) {
        if (!(p_ >= 2.0)) throw std::invalid_argument("p must be >= 2");
    }

    void add_load(std::shared_ptr<const LoadFunctional> load) { loads_.push_back(std::move(load)); }

    const P1Space& space() const { return *space_; }
    const std::shared_ptr<const P1Space>& space_ptr() const { return space_; }
    double p() const { return p_; }
    void set_p(double p) { p_ = p; }
    const std::vector<std::shared_ptr<const LoadFunctional>>& loads() const { return loads_; }

    bool load_depends_on_solution() const {
        return std::any_of(loads_.begin(), loads_.end(), [](const auto& l) { return l->depends_on_solution(); });
    }

    /// A_p(u) as a vector over vertices.
    Vector operator_action(const Vector& u) const {
        const auto& mesh = space_->mesh();
        Vector r = Vector::Zero(u.size());
        for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
            const auto& tri = mesh.triangles[t];
            const auto& g = space_->element(t);
            const Vec2 flux = p_flux(space_->gradient(t, u), p_);
            for (int i = 0; i < 3; ++i) r[tri[i]] += g.area * (flux[0] * g.grad[i][0] + flux[1] * g.grad[i][1]);
            for (const auto& q : quad::triangle_midedge()) {
                const double v = detail::signed_power(detail::value_at_point(tri, q.lambda, u), p_);
                for (int i = 0; i < 3; ++i) r[tri[i]] += g.area * q.w * v * q.lambda[i];
            }
        }
        return r;
    }

    Vector load(const Vector& u) const {
        Vector f = Vector::Zero(u.size());
        for (const auto& l : loads_) l->add(u, f, nullptr);
        return f;
    }

    /// A_p(u) - F(u).
    Vector residual(const Vector& u) const { return operator_action(u) - load(u); }

    /// RMS of |grad u| weighted by element area.
    double rms_gradient(const Vector& u) const {
        const auto& mesh = space_->mesh();
        double num = 0.0, den = 0.0;
        for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
            const Vec2 gu = space_->gradient(t, u);
            const double a = space_->element(t).area;
            num += a * (gu[0] * gu[0] + gu[1] * gu[1]);
            den += a;
        }
        return std::sqrt(num / den);
    }

    /**
     * Derivative of the residual with |grad u|^2 replaced by |grad u|^2 + delta^2 in the
     * gradient block: (p-2) s^((p-4)/2) (g g^T) + s^((p-2)/2) I, s = |g|^2 + delta^2.
     * Loads contribute -dF/du.
     */
    SparseOperator jacobian(const Vector& u, double delta, bool include_load = true) const {
        const auto& mesh = space_->mesh();
        std::vector<Triplet> trips;
        trips.reserve(mesh.num_triangles() * 9 * 2);
        for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
            const auto& tri = mesh.triangles[t];
            const auto& g = space_->element(t);
            const Vec2 gu = space_->gradient(t, u);
            double m00 = 1.0, m01 = 0.0, m11 = 1.0;
            if (p_ != 2.0) {
                const double s = gu[0] * gu[0] + gu[1] * gu[1] + delta * delta;
                const double iso = std::pow(s, 0.5 * (p_ - 2.0));
                const double aniso = (p_ - 2.0) * std::pow(s, 0.5 * (p_ - 4.0));
                m00 = iso + aniso * gu[0] * gu[0];
                m01 = aniso * gu[0] * gu[1];
                m11 = iso + aniso * gu[1] * gu[1];
            }
            std::array<std::array<double, 3>, 3> k{};
            for (int i = 0; i < 3; ++i) {
                const auto& gi = g.grad[i];
                for (int j = 0; j < 3; ++j) {
                    const auto& gj = g.grad[j];
                    k[i][j] = g.area * (gi[0] * (m00 * gj[0] + m01 * gj[1]) + gi[1] * (m01 * gj[0] + m11 * gj[1]));
                }
            }
            for (const auto& q : quad::triangle_midedge()) {
                const double d =
                    detail::signed_power_derivative(detail::value_at_point(tri, q.lambda, u), p_) * g.area * q.w;
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) k[i][j] += d * q.lambda[i] * q.lambda[j];
            }
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) trips.emplace_back(tri[i], tri[j], k[i][j]);
        }
        if (include_load) {
            std::vector<Triplet> load_trips;
            Vector scratch = Vector::Zero(u.size());
            for (const auto& l : loads_) l->add(u, scratch, &load_trips);
            for (const auto& tr : load_trips) trips.emplace_back(tr.row(), tr.col(), -tr.value());
        }
        const auto n = static_cast<Eigen::Index>(space_->size());
        SparseOperator J(n, n);
        J.setFromTriplets(trips.begin(), trips.end());
        return J;
    }

private:
    std::shared_ptr<const P1Space> space_;
    double p_;
    std::vector<std::shared_ptr<const LoadFunctional>> loads_;
};

enum class Region { All, BelowZero, AboveZero };

inline bool in_region(const TriangleMesh& mesh, std::size_t t, Region r) {
    if (r == Region::All) return true;
    const double yc = mesh.centroid(t)[1];
    return r == Region::BelowZero ? yc < 0.0 : yc > 0.0;
}

/// Gradient and value parts of int_region |grad u|^p + |u|^p (mid-edge rule for the value part).
struct W1pParts {
    double gradient = 0.0;
    double value = 0.0;
    double total() const { return gradient + value; }
};

inline W1pParts w1p_parts(const FemField& u, double p, Region region = Region::All) {
    const auto& space = u.space();
    const auto& mesh = space.mesh();
    W1pParts parts;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        if (!in_region(mesh, t, region)) continue;
        const auto& tri = mesh.triangles[t];
        const double area = space.element(t).area;
        const Vec2 gu = space.gradient(t, u.values());
        parts.gradient += area * std::pow(std::hypot(gu[0], gu[1]), p);
        for (const auto& q : quad::triangle_midedge())
            parts.value += area * q.w * std::pow(std::abs(detail::value_at_point(tri, q.lambda, u.values())), p);
    }
    return parts;
}

/// (int_region |grad u|^p + |u|^p)^(1/p).
inline double norm_W1p(const FemField& u, double p, Region region = Region::All) {
    if (!(p >= 1.0)) throw std::invalid_argument("norm_W1p needs p >= 1");
    return std::pow(w1p_parts(u, p, region).total(), 1.0 / p);
}

namespace detail {

using Polygon = std::vector<Vec2>;

/// Keeps the part of a convex polygon left of the directed line a -> b.
inline Polygon clip_left(const Polygon& poly, const Vec2& a, const Vec2& b) {
    Polygon out;
    const std::size_t n = poly.size();
    if (n == 0) return out;
    auto side = [&](const Vec2& q) { return (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0]); };
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& cur = poly[i];
        const Vec2& nxt = poly[(i + 1) % n];
        const double sc = side(cur), sn = side(nxt);
        if (sc >= 0.0) out.push_back(cur);
        if ((sc >= 0.0) != (sn >= 0.0)) {
            const double t = sc / (sc - sn);
            out.push_back({cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])});
        }
    }
    return out;
}

inline double polygon_area(const Polygon& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += p[0] * q[1] - q[0] * p[1];
    }
    return 0.5 * a;
}

/// Nodal values at a point from the barycentric coordinates of (x, y) in triangle t.
inline double linear_value(const TriangleMesh& mesh, const Tri& tri, const Vector& u, double x, double y) {
    const Vec2& a = mesh.vertices[tri[0]];
    const Vec2& b = mesh.vertices[tri[1]];
    const Vec2& c = mesh.vertices[tri[2]];
    const double det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    const double l1 = ((x - a[0]) * (c[1] - a[1]) - (y - a[1]) * (c[0] - a[0])) / det;
    const double l2 = ((b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])) / det;
    return (1.0 - l1 - l2) * u[tri[0]] + l1 * u[tri[1]] + l2 * u[tri[2]];
}

} // namespace detail

/**
 * @brief W^{1,p}(Omega) norm of u_rough - u_limit on the cylinder part y < 0.
 *
 * Integrates over the overlay of the two meshes: each element of u_limit's mesh
 * below y = 0 is clipped against the rough elements it meets, so the difference
 * of gradients is constant on every piece and the gradient part is exact. The
 * value part uses the degree-5 rule on a fan of each piece. Throws LocateError
 * when the rough mesh leaves part of a limit element uncovered.
 */
inline double field_error(const FemField& u_rough, const FemField& u_limit, double p,
                          const PointLocator* locator = nullptr) {
    std::unique_ptr<PointLocator> own;
    if (!locator) {
        own = std::make_unique<PointLocator>(u_rough.mesh());
        locator = own.get();
    }
    const auto& lspace = u_limit.space();
    const auto& lmesh = lspace.mesh();
    const auto& rspace = u_rough.space();
    const auto& rmesh = rspace.mesh();
    const Vector& ur = u_rough.values();
    const Vector& ul = u_limit.values();

    std::vector<int> cand;
    double sum = 0.0;
    for (std::size_t t = 0; t < lmesh.num_triangles(); ++t) {
        if (!in_region(lmesh, t, Region::BelowZero)) continue;
        const auto& tri = lmesh.triangles[t];
        const detail::Polygon ltri{lmesh.vertices[tri[0]], lmesh.vertices[tri[1]], lmesh.vertices[tri[2]]};
        double x0 = ltri[0][0], x1 = x0, y0 = ltri[0][1], y1 = y0;
        for (const auto& v : ltri) {
            x0 = std::min(x0, v[0]);
            x1 = std::max(x1, v[0]);
            y0 = std::min(y0, v[1]);
            y1 = std::max(y1, v[1]);
        }
        locator->candidates(x0, y0, x1, y1, cand);
        const Vec2 gl = lspace.gradient(t, ul);
        const double area = lspace.element(t).area;
        double covered = 0.0;
        for (int r : cand) {
            const auto& rt = rmesh.triangles[r];
            detail::Polygon piece = ltri;
            for (int e = 0; e < 3 && piece.size() >= 3; ++e)
                piece = detail::clip_left(piece, rmesh.vertices[rt[e]], rmesh.vertices[rt[(e + 1) % 3]]);
            if (piece.size() < 3) continue;
            const double a = detail::polygon_area(piece);
            if (!(a > 0.0)) continue;
            covered += a;
            const Vec2 gr = rspace.gradient(r, ur);
            sum += a * std::pow(std::hypot(gr[0] - gl[0], gr[1] - gl[1]), p);
            for (std::size_t k = 1; k + 1 < piece.size(); ++k) {
                const std::array<Vec2, 3> fan{piece[0], piece[k], piece[k + 1]};
                const double fa = 0.5 * std::abs((fan[1][0] - fan[0][0]) * (fan[2][1] - fan[0][1]) -
                                                 (fan[1][1] - fan[0][1]) * (fan[2][0] - fan[0][0]));
                for (const auto& q : quad::triangle_degree5()) {
                    const double x = q.lambda[0] * fan[0][0] + q.lambda[1] * fan[1][0] + q.lambda[2] * fan[2][0];
                    const double y = q.lambda[0] * fan[0][1] + q.lambda[1] * fan[1][1] + q.lambda[2] * fan[2][1];
                    const double diff =
                        detail::linear_value(rmesh, rt, ur, x, y) - detail::linear_value(lmesh, tri, ul, x, y);
                    sum += fa * q.w * std::pow(std::abs(diff), p);
                }
            }
        }
        if (std::abs(covered - area) > 1e-9 * area)
            throw LocateError("rough mesh covers " + std::to_string(covered / area) + " of limit element " +
                              std::to_string(t));
    }
    return std::pow(sum, 1.0 / p);
}

} // namespace roughlab
