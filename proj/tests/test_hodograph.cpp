#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nonscat/hodograph.hpp"

using namespace nonscat;
using namespace nonscat::hodograph;

namespace {

ScalarField affine(Vec2 g)
{
    ScalarField f;
    f.value = [g](const Vec2& x) { return g.dot(x); };
    f.gradient = [g](const Vec2&) -> Vec2 { return g; };
    f.hessian = [](const Vec2&) -> Mat2 { return Mat2::Zero(); };
    return f;
}

// A = a I on everything, n = n0, v = cos(k d.x) (a Helmholtz solution)
Fields isotropic(double a, double n0, double k, ScalarField w)
{
    Fields f;
    f.k = k;
    f.medium.a = [a](const Vec2&) -> Mat2 { return a * Mat2::Identity(); };
    f.medium.da = [](const Vec2&) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; };
    f.medium.n = [n0](const Vec2&) { return n0; };
    const Vec2 d = Vec2(0.6, 0.8);
    f.v.value = [k, d](const Vec2& x) { return std::cos(k * d.dot(x)); };
    f.v.gradient = [k, d](const Vec2& x) -> Vec2 { return -k * std::sin(k * d.dot(x)) * d; };
    f.v.hessian = [k, d](const Vec2& x) -> Mat2 { return -k * k * std::cos(k * d.dot(x)) * d * d.transpose(); };
    f.w = std::move(w);
    return f;
}

ScalarField wavy()
{
    // w = x1 + 0.1 sin(x2) x1^2
    ScalarField f;
    f.value = [](const Vec2& x) { return x.x() + 0.1 * std::sin(x.y()) * x.x() * x.x(); };
    f.gradient = [](const Vec2& x) -> Vec2 {
        return Vec2(1 + 0.2 * std::sin(x.y()) * x.x(), 0.1 * std::cos(x.y()) * x.x() * x.x());
    };
    f.hessian = [](const Vec2& x) -> Mat2 {
        Mat2 h;
        h << 0.2 * std::sin(x.y()), 0.2 * std::cos(x.y()) * x.x(), 0.2 * std::cos(x.y()) * x.x(),
            -0.1 * std::sin(x.y()) * x.x() * x.x();
        return h;
    };
    return f;
}

void expect_rotation(const Mat2& q)
{
    EXPECT_LT((q.transpose() * q - Mat2::Identity()).norm(), 1e-12);
    EXPECT_NEAR(q.determinant(), 1.0, 1e-12);
}

GridSpec small_grid()
{
    GridSpec g;
    g.n1 = 8;
    g.n2 = 8;
    return g;
}

}  // namespace

TEST(AlignFrame, IdentityDownwardNormal)
{
    const auto f = align_frame(Mat2::Identity(), Vec2(0, -1));
    expect_rotation(f.q);
    EXPECT_LT((f.q * Vec2(0, -1) - Vec2(-1, 0)).norm(), 1e-15);
    EXPECT_DOUBLE_EQ(f.c1, 1.0);
}

TEST(AlignFrame, IsotropicScaling)
{
    for (double t : {0.0, 1.0, 2.5}) EXPECT_NEAR(align_frame(2 * Mat2::Identity(), Vec2(std::cos(t), std::sin(t))).c1, 2.0, 1e-15);
}

TEST(AlignFrame, DiagonalMatrix)
{
    const Mat2 a = Vec2(2.0, 1.0).asDiagonal();
    const auto f = align_frame(a, Vec2(1, 0));
    EXPECT_DOUBLE_EQ(f.c1, 2.0);
    const Vec2 row = (f.q * a * f.q.transpose()).transpose() * (f.q * Vec2(1, 0));
    EXPECT_LT((row - Vec2(-2, 0)).norm(), 1e-15);
}

TEST(AlignFrame, RandomAnisotropicAndSign)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 200; ++i) {
        Mat2 b;
        b << u(rng), u(rng), u(rng), u(rng);
        const Mat2 a = b * b.transpose() + 0.2 * Mat2::Identity();
        const Vec2 nu = Vec2(u(rng), u(rng)).normalized();
        const Vec2 gw(u(rng), u(rng));
        const auto f = align_frame(a, nu, gw);
        expect_rotation(f.q);
        const Vec2 row = (f.q * a * f.q.transpose()) * (f.q * nu);
        EXPECT_NEAR(row.x(), -f.c1, 1e-10);
        EXPECT_NEAR(row.y(), 0.0, 1e-10);
        EXPECT_GT(f.c1, 0.0);
        // after the sign fix, nu^T A grad w < 0, i.e. d1w > 0 in the local frame
        EXPECT_GT((f.sign * f.q * gw).x(), 0.0);
    }
    EXPECT_THROW(align_frame(Mat2::Identity(), Vec2(1, 1)), std::invalid_argument);
}

TEST(BuildZ, IdentityHodograph)
{
    const auto g = build_z(affine(Vec2(1, 0)), small_grid());
    for (int i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(g.z[std::size_t(i)], g.y[std::size_t(i)].x(), 1e-14);
        EXPECT_LT((g.tilde_grad(i) - Vec2(1, 0)).norm(), 1e-15);
    }
    EXPECT_DOUBLE_EQ(g.c2, 1.0);
}

TEST(BuildZ, AffineClosedForm)
{
    const auto g = build_z(affine(Vec2(2, 1)), small_grid());
    for (int i = 0; i < g.size(); ++i) {
        const Vec2& y = g.y[std::size_t(i)];
        EXPECT_NEAR(g.z[std::size_t(i)], (y.x() - y.y()) / 2, 1e-14);
        EXPECT_DOUBLE_EQ(g.d1z[std::size_t(i)], 0.5);
        EXPECT_DOUBLE_EQ(g.d2z[std::size_t(i)], -0.5);
        EXPECT_LT((g.tilde_grad(i) - Vec2(2, 1)).norm(), 1e-15);
    }
}

TEST(BuildZ, RoundTripAndInverseDerivative)
{
    const auto w = wavy();
    const auto g = build_z(w, small_grid().refined(1));
    for (int i = 0; i < g.size(); ++i) {
        const Vec2 x = g.x(i);
        EXPECT_LT(std::abs(w.value(x) - g.y[std::size_t(i)].x()), 1e-12);
        EXPECT_NEAR(g.d1z[std::size_t(i)] * w.gradient(x).x(), 1.0, 1e-8);
        EXPECT_GT(g.d1z[std::size_t(i)], 1.0 / g.c2);
        EXPECT_LT(g.d1z[std::size_t(i)], g.c2 * (1 + 1e-15));
    }
}

TEST(BuildZ, BracketFailureNamesNode)
{
    GridSpec s = small_grid();
    s.y1_max = 1.0;
    s.x1_hi = 0.5;  // w = x1 never reaches y1 = 1 on the bracket
    try {
        build_z(affine(Vec2(1, 0)), s);
        FAIL() << "expected BracketFailure";
    } catch (const BracketFailure& e) {
        EXPECT_GT(e.node.x(), 0.5);
    }
}

TEST(Identities, JacobianAndGradientPushforward)
{
    std::mt19937_64 rng(5);
    for (int t = 0; t < 5; ++t) {
        const auto lp = random_local_problem(rng, small_grid());
        for (int i = 0; i < lp.grid.size(); ++i) {
            const Vec2 x = lp.grid.x(i);
            const Vec2 gw = lp.fields.w.gradient(x);
            Mat2 dh, dhinv;
            dh << gw.x(), gw.y(), 0, 1;
            dhinv << lp.grid.d1z[std::size_t(i)], lp.grid.d2z[std::size_t(i)], 0, 1;
            EXPECT_LT((dh * dhinv - Mat2::Identity()).norm(), 1e-10);
            EXPECT_LT((lp.grid.tilde_grad(i) - gw).norm(), 1e-10);
        }
    }
}

TEST(Localize, DerivativesConsistent)
{
    std::mt19937_64 rng(8);
    const auto lp = random_local_problem(rng, small_grid());
    const auto& f = lp.fields;
    const double h = 1e-6;
    for (const Vec2 x : {Vec2(0.01, 0.02), Vec2(0.05, -0.04)}) {
        const auto da = f.medium.da(x);
        for (int i = 0; i < 2; ++i) {
            const Vec2 e = Vec2::Unit(i) * h;
            EXPECT_LT(((f.medium.a(x + e) - f.medium.a(x - e)) / (2 * h) - da[std::size_t(i)]).norm(), 1e-8);
            EXPECT_LT(((f.w.gradient(x + e) - f.w.gradient(x - e)) / (2 * h) - f.w.hessian(x).col(i)).norm(), 1e-8);
            EXPECT_NEAR((f.w.value(x + e) - f.w.value(x - e)) / (2 * h), f.w.gradient(x)(i), 1e-8);
        }
    }
    // frame condition at P: nu^T A = (-c1, 0) with the local normal -e1 direction of A nu
    EXPECT_NEAR(f.w.value(Vec2::Zero()), 0.0, 1e-14);
    EXPECT_GT(f.w.gradient(Vec2::Zero()).x(), 0.0);
}

TEST(TransformCoefficients, IdentityCase)
{
    const auto f = isotropic(1.0, 1.0, 2.0, affine(Vec2(1, 0)));
    const auto g = build_z(f.w, small_grid());
    const auto c = transform_coefficients(f, g);
    for (int i = 0; i < g.size(); ++i) {
        EXPECT_DOUBLE_EQ(c.a1[std::size_t(i)], 0.5);
        EXPECT_DOUBLE_EQ(c.a2[std::size_t(i)], 0.0);
    }
}

TEST(TransformCoefficients, IsotropicSpecialization)
{
    // A = aI constant, v Helmholtz: the system collapses to the scalar form
    //   -a/2 d1((1 + (d2z)^2)/(d1z)^2) + a d2(d2z/d1z) = k^2 n y1 + k^2 (n - a) v
    //   a (1 + (d2z)^2)/(d1z)^2 + (a - 1)(dx1 v - d2z dx2 v)/d1z = 0 on Sigma
    const double a = 2.5, n0 = 1.7, k = 3.0;
    const auto f = isotropic(a, n0, k, wavy());
    const auto g = build_z(f.w, small_grid().refined(1));
    const auto c = transform_coefficients(f, g);
    const auto b = boundary_residual(f, g);
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> pick(0, g.size() - 1);
    for (int t = 0; t < 10; ++t) {
        const int i = pick(rng);
        const std::size_t s = std::size_t(i);
        const double d1 = g.d1z[s], d2 = g.d2z[s];
        const Vec2 x = g.x(i);
        EXPECT_NEAR(c.a1[s], 0.5 * a * (1 + d2 * d2) / (d1 * d1), 1e-12);
        EXPECT_NEAR(c.a2[s], -a * d2 / d1, 1e-12);
        EXPECT_NEAR(c.a0[s], k * k * n0 * g.y[s].x() + k * k * (n0 - a) * f.v.value(x), 1e-10);
    }
    for (int i2 = 0; i2 <= g.spec.n2; ++i2) {
        const int i = g.index(0, i2);
        const double d1 = g.d1z[std::size_t(i)], d2 = g.d2z[std::size_t(i)];
        const Vec2 gv = f.v.gradient(g.x(i));
        EXPECT_NEAR(b[std::size_t(i2)], a * (1 + d2 * d2) / (d1 * d1) + (a - 1) * (gv.x() - d2 * gv.y()) / d1, 1e-12);
    }
}

TEST(TransformCoefficients, DivergenceIdentitySecondOrder)
{
    std::mt19937_64 rng(21);
    for (int t = 0; t < 4; ++t) {
        const auto lp = random_local_problem(rng, small_grid());
        double err[3];
        for (int l = 0; l < 3; ++l) {
            const auto g = build_z(lp.fields.w, lp.grid.spec.refined(l));
            const auto s = divergence_identity(transform_coefficients(lp.fields, g), g, 1 << l);
            err[l] = 0.0;
            for (const auto& d : s) err[l] = std::max(err[l], std::abs(d.lhs - d.rhs));
        }
        const double order = std::log2(err[1] / err[2]);
        EXPECT_NEAR(order, 2.0, 0.3) << t;
    }
}

TEST(BoundaryResidual, IdentityNeverZero)
{
    const auto f = isotropic(1.0, 2.0, 2.0, wavy());
    const auto g = build_z(f.w, small_grid());
    const auto b = boundary_residual(f, g);
    for (int i2 = 0; i2 <= g.spec.n2; ++i2) {
        const Vec2 t = g.tilde_grad(g.index(0, i2));
        EXPECT_NEAR(b[std::size_t(i2)], t.squaredNorm(), 1e-15);
        EXPECT_GT(b[std::size_t(i2)], 0.0);
    }
}

TEST(BoundaryResidual, ClosedFormTwoI)
{
    auto f = isotropic(2.0, 1.0, 1.0, affine(Vec2(1, 0)));
    const auto g = build_z(f.w, small_grid());
    for (double g1 : {-3.0, -2.0, 0.5}) {
        const auto b = boundary_residual(f, g, [g1](const Vec2&) -> Vec2 { return Vec2(g1, 0.0); });
        for (double v : b) EXPECT_NEAR(v, 2 + g1, 1e-15);
    }
}

TEST(BoundaryResidual, ManufacturedDataSatisfiesCondition)
{
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        const auto lp = random_local_problem(rng, small_grid());
        const auto gv = manufactured_grad_v(lp.fields);
        for (double b : boundary_residual(lp.fields, lp.grid, gv)) EXPECT_LT(std::abs(b), 1e-10);
        for (int i2 = 0; i2 <= lp.grid.spec.n2; ++i2) {
            const auto s = linearize(lp.fields, lp.grid, lp.grid.index(0, i2), gv);
            EXPECT_NEAR(s.b1, s.b1_two_term, 1e-10);
        }
    }
}

TEST(Linearize, IdentityCase)
{
    const auto f = isotropic(1.0, 1.0, 1.0, affine(Vec2(1, 0)));
    const auto g = build_z(f.w, small_grid());
    const auto s = linearize(f, g, g.index(0, 4));
    EXPECT_LT((s.a_tilde + Mat2::Identity()).norm(), 1e-15);
    EXPECT_DOUBLE_EQ(s.b1, -1.0);
    EXPECT_FALSE(std::isnan(s.b2));
    EXPECT_TRUE(std::isnan(linearize(f, g, g.index(3, 4)).b1));
}

TEST(Linearize, QuadraticFormIdentity)
{
    std::mt19937_64 rng(17);
    std::normal_distribution<double> gauss;
    for (int t = 0; t < 5; ++t) {
        const auto lp = random_local_problem(rng, small_grid());
        for (int i = 0; i < lp.grid.size(); i += 7) {
            const auto s = linearize(lp.fields, lp.grid, i);
            EXPECT_LT(std::abs(s.a_tilde(0, 1) - s.a_tilde(1, 0)), 1e-12);
            for (int j = 0; j < 1000; ++j) {
                const Vec2 xi(gauss(rng), gauss(rng));
                EXPECT_LT(quadratic_identity_error(s, xi), 1e-12 * (1 + xi.squaredNorm())) << i;
            }
        }
    }
}

TEST(Certify, IdentityBoundaryCase)
{
    const auto f = isotropic(1.0, 1.0, 1.0, affine(Vec2(1, 0)));
    const auto g = build_z(f.w, small_grid());
    const auto c = certify(linearize_all(f, g), 1.0, 1.0 + 1e-9);
    EXPECT_TRUE(c.pass) << c.report.dump(2);
    EXPECT_DOUBLE_EQ(c.report["ellipticity"]["eig_min"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(c.report["ellipticity"]["eig_max"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(c.report["oblique"]["min_minus_b1"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(c.report["oblique"]["bound"].get<double>(), 1.0);
}

TEST(Certify, RandomFieldsPass)
{
    std::mt19937_64 rng(1);
    for (int t = 0; t < 10; ++t) {
        const auto lp = random_local_problem(rng, small_grid());
        const auto c = certify(linearize_all(lp.fields, lp.grid), 4.0, 3.0, std::uint64_t(t));
        EXPECT_TRUE(c.pass) << c.report.dump(2);
        EXPECT_GT(c.report["oblique"]["margin"].get<double>(), 0.0);
    }
}

TEST(Certify, DegenerateFieldFailsAtNode)
{
    const auto f = degenerate_fields(0.3);
    GridSpec s;
    s.y1_max = 0.2;
    s.n1 = 20;
    s.y2_half = 0.1;
    s.n2 = 10;
    s.x1_lo = -0.5;
    s.x1_hi = 1.0;
    const auto g = build_z(f.w, s);
    const auto c = certify(linearize_all(f, g), 4.0, 3.0);
    EXPECT_FALSE(c.pass);
    ASSERT_TRUE(c.failed_node.has_value());
    EXPECT_NEAR(c.failed_node->x(), 0.1, 1e-12);
    EXPECT_NEAR(c.failed_node->y(), 0.0, 1e-12);
    EXPECT_EQ(c.report["failures"][0]["check"], "d1z_bounds");
}

TEST(Certify, ManufacturedBoundaryMargin)
{
    std::mt19937_64 rng(9);
    const auto lp = random_local_problem(rng, small_grid());
    const auto gv = manufactured_grad_v(lp.fields);
    const auto c = certify(linearize_all(lp.fields, lp.grid, gv), 4.0, 3.0);
    EXPECT_TRUE(c.pass);
    EXPECT_GT(c.report["oblique"]["margin"].get<double>(), 0.0);
    EXPECT_TRUE(std::isfinite(measure_c3(lp.fields, lp.grid, gv)));
}

TEST(Mls, ReproducesQuadratics)
{
    std::vector<Vec2> pts;
    std::vector<double> vals;
    auto q = [](const Vec2& x) { return 1.0 + 2 * x.x() - x.y() + 0.5 * x.x() * x.x() - 3 * x.x() * x.y() + x.y() * x.y(); };
    for (int i = 0; i <= 40; ++i)
        for (int j = 0; j <= 40; ++j) {
            const Vec2 x(i / 40.0 + 0.003 * std::sin(7.0 * j), j / 40.0);
            pts.push_back(x);
            vals.push_back(q(x));
        }
    const auto f = mls_quadratic(pts, vals, 0.08);
    for (const Vec2 x : {Vec2(0.5, 0.5), Vec2(0.02, 0.7), Vec2(0.31, 0.0)}) {
        EXPECT_NEAR(f.value(x), q(x), 1e-12);
        EXPECT_LT((f.gradient(x) - Vec2(2 + x.x() - 3 * x.y(), -1 - 3 * x.x() + 2 * x.y())).norm(), 1e-10);
        Mat2 h;
        h << 1, -3, -3, 2;
        EXPECT_LT((f.hessian(x) - h).norm(), 1e-8);
    }
    EXPECT_THROW(f.value(Vec2(3, 3)), std::domain_error);
}
