#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "roughlab/fem.hpp"

using namespace roughlab;

namespace {

std::shared_ptr<const P1Space> cylinder_space(int n) {
    return std::make_shared<const P1Space>(build_cylinder_mesh(n));
}

std::shared_ptr<const P1Space> rough_space(double eps, double target) {
    ProblemConfig cfg;
    cfg.epsilon = eps;
    cfg.mesh.target_edge = target;
    return std::make_shared<const P1Space>(build_rough_mesh(Geometry(cfg)));
}

FemField random_field(const std::shared_ptr<const P1Space>& space, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    Vector v(static_cast<Eigen::Index>(space->size()));
    for (auto& x : v) x = d(rng);
    return {space, v};
}

// The unit square (0,1)x(-1,0) as two triangles.
TriangleMesh two_triangles() {
    TriangleMesh m;
    m.vertices = {{0.0, -1.0}, {1.0, -1.0}, {1.0, 0.0}, {0.0, 0.0}};
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
    m.strip_flags = {0, 0};
    return m;
}

// Dense stiffness and mass matrices assembled from scratch: basis gradients by
// inverting the 3x3 Vandermonde system, mass from int phi_i phi_j = |T|(1 + d_ij)/12.
struct DenseOracle {
    Eigen::MatrixXd K, M, Dx;
};

DenseOracle dense_oracle(const TriangleMesh& m) {
    const auto n = static_cast<Eigen::Index>(m.num_vertices());
    DenseOracle o{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, 1)};
    for (const auto& t : m.triangles) {
        Eigen::Matrix3d V;
        for (int k = 0; k < 3; ++k) V.row(k) << 1.0, m.vertices[t[k]][0], m.vertices[t[k]][1];
        const Eigen::Matrix3d C = V.inverse(); // column k: coefficients of phi_k
        const double area = 0.5 * std::abs(V.determinant());
        for (int i = 0; i < 3; ++i) {
            o.Dx(t[i], 0) += area * C(1, i);
            for (int j = 0; j < 3; ++j) {
                o.K(t[i], t[j]) += area * (C(1, i) * C(1, j) + C(2, i) * C(2, j));
                o.M(t[i], t[j]) += area * (i == j ? 2.0 : 1.0) / 12.0;
            }
        }
    }
    return o;
}

Vector apply(const SparseOperator& J, const Vector& d) { return J * d; }

} // namespace

TEST(Flux, MonotoneOnRandomPairs) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 2.0);
    for (double p : {2.0, 2.5, 3.0, 4.0, 5.0}) {
        for (int k = 0; k < 10000; ++k) {
            const Vec2 a{n(rng), n(rng)}, b{n(rng), n(rng)};
            const Vec2 fa = p_flux(a, p), fb = p_flux(b, p);
            const double ip = (fa[0] - fb[0]) * (a[0] - b[0]) + (fa[1] - fb[1]) * (a[1] - b[1]);
            ASSERT_GE(ip, 0.0) << "p=" << p;
            if (p == 2.0) {
                const double d2 = (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
                ASSERT_LE(std::abs(ip - d2), 1e-14 * d2);
            }
        }
    }
}

TEST(Operator, DiscreteMonotonicity) {
    auto space = cylinder_space(8);
    std::mt19937_64 rng(11);
    for (double p : {2.0, 3.0, 4.0}) {
        QuasilinearProblem prob(space, p);
        for (int k = 0; k < 50; ++k) {
            const auto u = random_field(space, rng), v = random_field(space, rng);
            const double ip = (prob.residual(u.values()) - prob.residual(v.values())).dot(u.values() - v.values());
            EXPECT_GE(ip, -1e-12) << "p=" << p;
        }
    }
}

TEST(Operator, ZeroAtOrigin) {
    auto space = cylinder_space(6);
    for (double p : {2.0, 3.0}) {
        QuasilinearProblem prob(space, p);
        EXPECT_EQ(prob.residual(Vector::Zero(static_cast<Eigen::Index>(space->size()))).norm(), 0.0);
    }
}

TEST(Operator, MatchesDenseAssemblyOnTwoTriangles) {
    const auto mesh = two_triangles();
    const auto oracle = dense_oracle(mesh);
    auto space = std::make_shared<const P1Space>(mesh);
    const auto u = FemField::interpolate(space, [](double x, double) { return x; });
    const Vector r = QuasilinearProblem(space, 2.0).residual(u.values());
    // int grad(phi_i) . (1, 0) + int x phi_i
    const Vector expected = oracle.Dx.col(0) + oracle.M * u.values();
    for (Eigen::Index i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i], expected[i], 1e-14);
}

TEST(Operator, Homogeneity) {
    auto space = cylinder_space(6);
    std::mt19937_64 rng(3);
    const auto u = random_field(space, rng);
    for (double p : {2.0, 2.5, 3.0, 4.0}) {
        QuasilinearProblem prob(space, p);
        const Vector r1 = prob.residual(u.values());
        for (double a : {0.3, 2.0, 7.5}) {
            const Vector ra = prob.residual(a * u.values());
            EXPECT_LE((ra - std::pow(a, p - 1.0) * r1).norm(), 1e-12 * ra.norm()) << "p=" << p << " a=" << a;
        }
    }
}

TEST(Jacobian, LinearCaseIsStiffnessPlusMass) {
    const auto mesh = two_triangles();
    const auto oracle = dense_oracle(mesh);
    auto space = std::make_shared<const P1Space>(mesh);
    QuasilinearProblem prob(space, 2.0);
    const Eigen::MatrixXd expected = oracle.K + oracle.M;
    for (const Vector& u : {Vector(Vector::Zero(4)), Vector(Vector::LinSpaced(4, -2.0, 3.0))}) {
        const Eigen::MatrixXd J = Eigen::MatrixXd(prob.jacobian(u, 1e-10));
        EXPECT_LE((J - expected).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Jacobian, RegularizedAtZeroGradient) {
    const auto mesh = two_triangles();
    const auto oracle = dense_oracle(mesh);
    auto space = std::make_shared<const P1Space>(mesh);
    QuasilinearProblem prob(space, 3.0);
    const double delta = 1e-10;
    const Eigen::MatrixXd J = Eigen::MatrixXd(prob.jacobian(Vector::Zero(4), delta));
    // The value term (p-1)|u|^(p-2) vanishes at u = 0; only delta * K remains.
    EXPECT_LE((J - delta * oracle.K).cwiseAbs().maxCoeff(), 1e-12 * delta);
}

TEST(Jacobian, MatchesFiniteDifferences) {
    auto space = rough_space(0.2, 1.0 / 8.0);
    const auto fns = make_model({.f = "tanh"});
    std::mt19937_64 rng(5);
    for (double p : {2.0, 3.0, 4.0}) {
        QuasilinearProblem prob(space, p);
        prob.add_load(std::make_shared<StripLoad>(space, 1.0 / 0.04, fns.f, fns.df, false));
        auto mu = [](double x) { return 1.0 + 0.5 * std::sin(6.0 * x); };
        auto cyl = cylinder_space(6);
        QuasilinearProblem lim(cyl, p);
        lim.add_load(std::make_shared<GammaLoad>(cyl, mu, fns.f, fns.df, false));
        for (const QuasilinearProblem* pr : {&prob, &lim}) {
            const auto sp = pr->space_ptr();
            const auto u = random_field(sp, rng);
            const auto d = random_field(sp, rng);
            const double h = 1e-6;
            const Vector fd = (pr->residual(u.values() + h * d.values()) - pr->residual(u.values() - h * d.values())) / (2 * h);
            const double delta = std::max(1e-10 * pr->rms_gradient(u.values()), 1e-14);
            const Vector jd = apply(pr->jacobian(u.values(), delta), d.values());
            EXPECT_LE((fd - jd).norm(), 1e-6 * jd.norm()) << "p=" << p;
        }
    }
}

TEST(Jacobian, Symmetric) {
    auto space = rough_space(0.2, 1.0 / 8.0);
    const auto fns = make_model({.f = "tanh"});
    std::mt19937_64 rng(9);
    for (double p : {2.0, 3.0}) {
        QuasilinearProblem prob(space, p);
        prob.add_load(std::make_shared<StripLoad>(space, 25.0, fns.f, fns.df, false));
        const auto u = random_field(space, rng);
        const SparseOperator J = prob.jacobian(u.values(), 1e-10);
        const SparseOperator Jt = J.transpose();
        double max_entry = 0.0;
        for (int k = 0; k < J.outerSize(); ++k)
            for (SparseOperator::InnerIterator it(J, k); it; ++it) max_entry = std::max(max_entry, std::abs(it.value()));
        const SparseOperator diff = J - Jt;
        double asym = 0.0;
        for (int k = 0; k < diff.outerSize(); ++k)
            for (SparseOperator::InnerIterator it(diff, k); it; ++it) asym = std::max(asym, std::abs(it.value()));
        EXPECT_LE(asym, 1e-12 * max_entry);
    }
}

TEST(Load, GammaLoadIntegratesMu) {
    auto space = cylinder_space(16);
    auto mu = [](double x) { return 1.0 + x * x; };
    GammaLoad load(space, mu, [](double) { return 1.0; }, [](double) { return 0.0; }, true);
    Vector f = Vector::Zero(static_cast<Eigen::Index>(space->size()));
    load.add(f, f, nullptr);
    // Sum over test functions = int_0^1 mu = 4/3; 2-point Gauss is exact per edge for mu * phi_i (cubic).
    EXPECT_NEAR(f.sum(), 4.0 / 3.0, 1e-14);
}

TEST(Norm, ConstantAndLinear) {
    auto cyl = cylinder_space(8);
    const auto one = FemField::interpolate(cyl, [](double, double) { return 1.0; });
    for (double p : {2.0, 3.0, 4.0}) EXPECT_NEAR(norm_W1p(one, p), 1.0, 1e-14);
    const auto x = FemField::interpolate(cyl, [](double x, double) { return x; });
    // The mid-edge rule integrates x^2 exactly: (1 + 1/3)^(1/2).
    EXPECT_NEAR(norm_W1p(x, 2.0), std::sqrt(4.0 / 3.0), 1e-14);

    auto rough = rough_space(0.1, 1.0 / 32.0);
    const auto r1 = FemField::interpolate(rough, [](double, double) { return 1.0; });
    EXPECT_NEAR(norm_W1p(r1, 3.0, Region::BelowZero), 1.0, 1e-12);
    EXPECT_GT(norm_W1p(r1, 3.0, Region::All), 1.0);
}

TEST(FieldError, ConstantsAndZero) {
    auto rough = rough_space(0.1, 1.0 / 32.0);
    auto cyl = cylinder_space(16);
    const auto c_r = FemField::interpolate(rough, [](double, double) { return 2.5; });
    const auto c_l = FemField::interpolate(cyl, [](double, double) { return 2.5; });
    EXPECT_NEAR(field_error(c_r, c_l, 2.0), 0.0, 1e-12);
    const auto zero = FemField::zero(rough);
    const auto one = FemField::interpolate(cyl, [](double, double) { return 1.0; });
    for (double p : {2.0, 3.0}) EXPECT_NEAR(field_error(zero, one, p), 1.0, 1e-12);
}

TEST(FieldError, LinearFieldsExact) {
    auto rough = rough_space(0.1, 1.0 / 32.0);
    auto cyl = cylinder_space(12);
    auto lin = [](double x, double y) { return 1.0 + 2.0 * x - 3.0 * y; };
    // Both interpolants reproduce the linear function, so they agree everywhere.
    EXPECT_NEAR(field_error(FemField::interpolate(rough, lin), FemField::interpolate(cyl, lin), 2.0), 0.0, 1e-10);
    // u_rough = x against zero: (int x^2 + 1)^(1/2) over the unit cylinder, exact by the degree-5 rule.
    const auto x = FemField::interpolate(rough, [](double x, double) { return x; });
    EXPECT_NEAR(field_error(x, FemField::zero(cyl), 2.0), std::sqrt(4.0 / 3.0), 1e-12);
    // p = 4: int x^4 = 1/5, |grad|^4 = 1.
    EXPECT_NEAR(field_error(x, FemField::zero(cyl), 4.0), std::pow(1.2, 0.25), 1e-12);
}

TEST(FieldError, SmoothFieldConvergesUnderRefinement) {
    auto smooth = [](double x, double y) { return std::cos(std::numbers::pi * x) * std::exp(y); };
    auto rough = rough_space(0.1, 1.0 / 128.0);
    const auto ur = FemField::interpolate(rough, smooth);
    double prev = 0.0;
    for (int n : {8, 16, 32}) {
        const double e = field_error(ur, FemField::interpolate(cylinder_space(n), smooth), 2.0);
        // First-order gradient error of the coarse interpolant.
        EXPECT_LE(e, 3.0 / n);
        if (prev > 0.0) EXPECT_GT(prev / e, 1.7);
        prev = e;
    }
}

TEST(FieldError, UncoveredElementThrows) {
    auto cyl = cylinder_space(8);
    TriangleMesh half = build_cylinder_mesh(4);
    for (auto& v : half.vertices) v[0] *= 0.5;
    auto hs = std::make_shared<const P1Space>(std::move(half));
    EXPECT_THROW(field_error(FemField::zero(hs), FemField::zero(cyl), 2.0), LocateError);
}
