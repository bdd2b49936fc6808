#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "nonscat/media.hpp"

// Hodograph map H: x -> (w(x), x2) near a boundary point, the graph function
// z with H^{-1}(y) = (z(y), y2), the divergence-form system for z and its
// linearization. Everything here is two-dimensional and real valued.

namespace nonscat::hodograph {

struct ScalarField {
    std::function<double(const Vec2&)> value;
    std::function<Vec2(const Vec2&)> gradient;
    std::function<Mat2(const Vec2&)> hessian;
};

/// One local problem: A (with dA/dx_i), n, the scattered field w, the incident v.
struct Fields {
    CoefficientField medium;
    ScalarField w;
    ScalarField v;
    double k = 1.0;
};

using GradientOverride = std::function<Vec2(const Vec2&)>;

struct HodographFrame {
    Vec2 p = Vec2::Zero();
    Mat2 q = Mat2::Identity();  ///< local x = Q (X - P)
    double c1 = 0.0;
    double sign = 1.0;  ///< -1 when (w, v) were negated so that nu^T A grad w < 0
    double r = 0.0;
    double c0 = std::numeric_limits<double>::quiet_NaN();
    double c2 = std::numeric_limits<double>::quiet_NaN();
    double c3 = std::numeric_limits<double>::quiet_NaN();
    double c4 = std::numeric_limits<double>::quiet_NaN();
};

/// Rotation taking A nu to -c1 e1. With grad w supplied, also fixes the sign
/// of w so that nu^T A grad w(P) = -c1 d1w(0) < 0.
inline HodographFrame align_frame(const Mat2& a, const Vec2& nu, std::optional<Vec2> grad_w = std::nullopt)
{
    if (std::abs(nu.norm() - 1.0) > 1e-10) throw std::invalid_argument("align_frame: nu must be a unit vector");
    if (!std::isfinite(ellipticity_constant(a))) throw std::invalid_argument("align_frame: A(P) not positive definite");
    const Vec2 an = a * nu;
    HodographFrame f;
    f.c1 = an.norm();
    const Vec2 u = an / f.c1;
    f.q << -u.x(), -u.y(), u.y(), -u.x();
    if (grad_w && nu.dot(a * *grad_w) > 0.0) f.sign = -1.0;
    return f;
}

/// Express physical fields in the frame's local coordinates x = Q (X - P).
inline Fields localize(const Fields& phys, const HodographFrame& f)
{
    const Mat2 q = f.q;
    const Vec2 p = f.p;
    const double s = f.sign;
    auto to_x = [q, p](const Vec2& x) -> Vec2 { return p + q.transpose() * x; };
    auto scalar = [&](const ScalarField& g) {
        ScalarField out;
        out.value = [g, to_x, s](const Vec2& x) { return s * g.value(to_x(x)); };
        out.gradient = [g, to_x, s, q](const Vec2& x) -> Vec2 { return s * (q * g.gradient(to_x(x))); };
        out.hessian = [g, to_x, s, q](const Vec2& x) -> Mat2 { return s * (q * g.hessian(to_x(x)) * q.transpose()); };
        return out;
    };
    Fields loc;
    loc.k = phys.k;
    loc.w = scalar(phys.w);
    loc.v = scalar(phys.v);
    const CoefficientField c = phys.medium;
    loc.medium = c;
    loc.medium.a = [c, to_x, q](const Vec2& x) -> Mat2 { return q * c.a(to_x(x)) * q.transpose(); };
    loc.medium.da = [c, to_x, q](const Vec2& x) {
        const auto d = c.da(to_x(x));
        std::array<Mat2, 2> out;
        for (int i = 0; i < 2; ++i) out[std::size_t(i)] = q * (q(i, 0) * d[0] + q(i, 1) * d[1]) * q.transpose();
        return out;
    };
    loc.medium.n = [c, to_x](const Vec2& x) { return c.n(to_x(x)); };
    return loc;
}

// ---- graph function z ------------------------------------------------------

struct GridSpec {
    double y1_max = 0.1;
    double y2_half = 0.1;
    int n1 = 16;  ///< steps in y1 over [0, y1_max]
    int n2 = 16;  ///< steps in y2 over [-y2_half, y2_half]; even so that y2 = 0 is a node
    double x1_lo = -0.6, x1_hi = 0.6;

    double h1() const { return y1_max / n1; }
    double h2() const { return 2 * y2_half / n2; }
    GridSpec refined(int times = 1) const
    {
        GridSpec g = *this;
        g.n1 <<= times;
        g.n2 <<= times;
        return g;
    }
};

class BracketFailure : public std::runtime_error {
public:
    BracketFailure(const std::string& what, Vec2 y) : std::runtime_error(what), node(y) {}
    Vec2 node;
};

struct ZGrid {
    GridSpec spec;
    std::vector<Vec2> y;
    std::vector<double> z, d1z, d2z;
    double c2 = 0.0;  ///< measured: max over nodes of max(d1z, 1/d1z)

    int index(int i1, int i2) const { return i1 * (spec.n2 + 1) + i2; }
    int size() const { return static_cast<int>(y.size()); }
    bool on_sigma(int node) const { return node <= spec.n2; }
    Vec2 x(int node) const { return Vec2(z[std::size_t(node)], y[std::size_t(node)].y()); }
    Vec2 tilde_grad(int node) const
    {
        const std::size_t i = std::size_t(node);
        return Vec2(1.0, -d2z[i]) / d1z[i];
    }
};

namespace detail {

// w(x1, y2) = y1 for x1, w increasing in x1. Newton inside a shrinking bracket.
inline double solve_level(const ScalarField& w, const Vec2& y, double lo, double hi)
{
    auto f = [&](double x1) { return w.value(Vec2(x1, y.y())) - y.x(); };
    const double flo = f(lo), fhi = f(hi);
    if (!(flo <= 0.0 && fhi >= 0.0))
        throw BracketFailure("build_z: no sign change of w - y1 on the x1 bracket at node (" + std::to_string(y.x()) +
                                 ", " + std::to_string(y.y()) + ")",
                             y);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    const double tol = 1e-14 * (1.0 + std::abs(y.x()));
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        const double fx = f(x);
        if (std::abs(fx) <= tol) return x;
        (fx < 0.0 ? lo : hi) = x;
        const double d = w.gradient(Vec2(x, y.y())).x();
        double next = d > 0.0 ? x - fx / d : lo - 1.0;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(x))) return next;
        x = next;
    }
    return x;
}

}  // namespace detail

inline ZGrid build_z(const ScalarField& w, const GridSpec& spec)
{
    if (spec.n1 < 1 || spec.n2 < 2 || spec.n2 % 2) throw std::invalid_argument("build_z: need n1 >= 1 and even n2 >= 2");
    ZGrid g;
    g.spec = spec;
    const int n = (spec.n1 + 1) * (spec.n2 + 1);
    g.y.reserve(std::size_t(n));
    for (int i1 = 0; i1 <= spec.n1; ++i1)
        for (int i2 = 0; i2 <= spec.n2; ++i2)
            g.y.emplace_back(spec.y1_max * i1 / spec.n1, -spec.y2_half + 2 * spec.y2_half * i2 / spec.n2);
    g.z.resize(std::size_t(n));
    g.d1z.resize(std::size_t(n));
    g.d2z.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        const Vec2& y = g.y[std::size_t(i)];
        const double z = detail::solve_level(w, y, spec.x1_lo, spec.x1_hi);
        const Vec2 gw = w.gradient(Vec2(z, y.y()));
        g.z[std::size_t(i)] = z;
        g.d1z[std::size_t(i)] = 1.0 / gw.x();
        g.d2z[std::size_t(i)] = -gw.y() / gw.x();
        const double d = g.d1z[std::size_t(i)];
        g.c2 = std::max(g.c2, (d > 0.0 && std::isfinite(d)) ? std::max(d, 1.0 / d) : std::numeric_limits<double>::infinity());
    }
    return g;
}

// ---- transformed system ----------------------------------------------------

namespace detail {

// div(M grad u) with M given pointwise together with dM/dx_i
inline double div_form(const Mat2& m, const std::array<Mat2, 2>& dm, const Vec2& gu, const Mat2& hu)
{
    return dm[0].row(0).dot(gu) + dm[1].row(1).dot(gu) + m.cwiseProduct(hu).sum();
}

}  // namespace detail

struct CoefficientSet {
    std::vector<double> a0, a1, a2;
    /// (div A grad w + k^2 n w + div (A-I) grad v + k^2 (n-1) v) at H^{-1}(y), closed form
    std::vector<double> pde_closed;
};

inline CoefficientSet transform_coefficients(const Fields& f, const ZGrid& g)
{
    CoefficientSet c;
    const std::size_t n = std::size_t(g.size());
    c.a0.resize(n);
    c.a1.resize(n);
    c.a2.resize(n);
    c.pde_closed.resize(n);
    const double k2 = f.k * f.k;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 x = g.x(int(i));
        const Vec2 t = g.tilde_grad(int(i));
        const Mat2 a = f.medium.a(x);
        const auto da = f.medium.da(x);
        const double nn = f.medium.n(x);
        const Mat2 ai = a - Mat2::Identity();
        const double vv = f.v.value(x);
        const double source = detail::div_form(ai, da, f.v.gradient(x), f.v.hessian(x)) + k2 * (nn - 1.0) * vv;
        c.a1[i] = 0.5 * t.dot(a * t);
        c.a2[i] = (a * t).y();
        c.a0[i] = 0.5 * g.d1z[i] * t.dot(da[0] * t) + k2 * nn * g.y[i].x() + source;
        c.pde_closed[i] = detail::div_form(a, da, f.w.gradient(x), f.w.hessian(x)) + k2 * nn * f.w.value(x) + source;
    }
    return c;
}

struct DivergenceSample {
    Vec2 y;
    double lhs;  ///< d1 a1 + d2 a2 + a0, centred differences
    double rhs;  ///< closed form
};

/// Interior nodes whose indices are multiples of stride (so refined grids can
/// be compared at the same points).
inline std::vector<DivergenceSample> divergence_identity(const CoefficientSet& c, const ZGrid& g, int stride = 1)
{
    std::vector<DivergenceSample> out;
    const auto& s = g.spec;
    for (int i1 = 1; i1 < s.n1; ++i1)
        for (int i2 = 1; i2 < s.n2; ++i2) {
            if (i1 % stride || i2 % stride) continue;
            const std::size_t i = std::size_t(g.index(i1, i2));
            const double d1 = (c.a1[std::size_t(g.index(i1 + 1, i2))] - c.a1[std::size_t(g.index(i1 - 1, i2))]) / (2 * s.h1());
            const double d2 = (c.a2[std::size_t(g.index(i1, i2 + 1))] - c.a2[std::size_t(g.index(i1, i2 - 1))]) / (2 * s.h2());
            out.push_back({g.y[i], d1 + d2 + c.a0[i], c.pde_closed[i]});
        }
    return out;
}

/// b on Sigma (y1 = 0), one value per y2 node.
inline std::vector<double> boundary_residual(const Fields& f, const ZGrid& g, const GradientOverride& grad_v = nullptr)
{
    std::vector<double> b;
    for (int i2 = 0; i2 <= g.spec.n2; ++i2) {
        const int i = g.index(0, i2);
        const Vec2 x = g.x(i), t = g.tilde_grad(i);
        const Mat2 a = f.medium.a(x);
        const Vec2 gv = grad_v ? grad_v(x) : f.v.gradient(x);
        b.push_back(t.dot(a * t) + t.dot((a - Mat2::Identity()) * gv));
    }
    return b;
}

// ---- linearization ---------------------------------------------------------

struct LinearizedSystem {
    Vec2 y = Vec2::Zero(), x = Vec2::Zero();
    bool on_sigma = false;
    double d1z = 0.0, d2z = 0.0;
    Vec2 tilde_grad = Vec2::Zero();
    Mat2 a = Mat2::Identity();
    Mat2 a_tilde = Mat2::Zero();
    double b1 = std::numeric_limits<double>::quiet_NaN();           ///< simplified form (valid where b = 0)
    double b1_two_term = std::numeric_limits<double>::quiet_NaN();  ///< raw form
    double b2 = std::numeric_limits<double>::quiet_NaN();
    double b = std::numeric_limits<double>::quiet_NaN();
};

inline LinearizedSystem linearize(const Fields& f, const ZGrid& g, int node, const GradientOverride& grad_v = nullptr)
{
    LinearizedSystem s;
    const std::size_t i = std::size_t(node);
    s.y = g.y[i];
    s.x = g.x(node);
    s.on_sigma = g.on_sigma(node);
    s.d1z = g.d1z[i];
    s.d2z = g.d2z[i];
    s.tilde_grad = g.tilde_grad(node);
    s.a = f.medium.a(s.x);
    const double q = s.tilde_grad.dot(s.a * s.tilde_grad);
    const double off = (s.a(0, 1) - s.a(1, 1) * s.d2z) / s.d1z;
    s.a_tilde << q, off, off, s.a(1, 1);
    s.a_tilde *= -1.0 / s.d1z;
    if (s.on_sigma) {
        const Vec2 gv = grad_v ? grad_v(s.x) : f.v.gradient(s.x);
        const Vec2 ag = (s.a - Mat2::Identity()) * gv;
        s.b = q + s.tilde_grad.dot(ag);
        s.b1 = -q / s.d1z;
        s.b1_two_term = -(2 * q + s.tilde_grad.dot(ag)) / s.d1z;
        s.b2 = -(2 * (s.a * s.tilde_grad).y() + ag.y()) / s.d1z;
    }
    return s;
}

inline std::vector<LinearizedSystem> linearize_all(const Fields& f, const ZGrid& g, const GradientOverride& grad_v = nullptr)
{
    std::vector<LinearizedSystem> out;
    out.reserve(std::size_t(g.size()));
    for (int i = 0; i < g.size(); ++i) out.push_back(linearize(f, g, i, grad_v));
    return out;
}

/// xi_z = (0, xi2) + xi1 tilde_grad
inline Vec2 tilde_xi(const LinearizedSystem& s, const Vec2& xi) { return Vec2(0.0, xi.y()) + xi.x() * s.tilde_grad; }

/// | -(d1z) xi^T At xi - xi_z^T A xi_z |
inline double quadratic_identity_error(const LinearizedSystem& s, const Vec2& xi)
{
    const Vec2 t = tilde_xi(s, xi);
    return std::abs(-s.d1z * xi.dot(s.a_tilde * xi) - t.dot(s.a * t));
}

// ---- certificate -----------------------------------------------------------

struct Certificate {
    bool pass = false;
    std::optional<Vec2> failed_node;  ///< y of the worst violation
    nlohmann::json report;
};

/// Checks, with the declared constants c0, c2:
///  hypotheses   measured c0 <= c0, 1/c2 < d1z < c2 at every node;
///  ellipticity  -At positive definite and finite at every node (eigenvalues
///               plus `samples` random directions);
///  oblique      -b1 > c0m^{-1} c2m^{-3} on Sigma, c0m, c2m measured on the grid.
/// Equality in the oblique bound is accepted up to 1e-12 relative (A = I, w = x1).
inline Certificate certify(const std::vector<LinearizedSystem>& sys, double c0, double c2, std::uint64_t seed = 1,
                           int samples = 1000)
{
    using nlohmann::json;
    constexpr double inf = std::numeric_limits<double>::infinity();
    Certificate cert;
    struct Failure {
        std::string check;
        double severity;
        std::size_t node;
        double value;
    };
    std::vector<Failure> fails;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<Vec2> dirs;
    for (int i = 0; i < samples; ++i) {
        Vec2 d(gauss(rng), gauss(rng));
        dirs.push_back(d / d.norm());
    }

    double c0m = 0.0, c2m = 0.0, d1z_lo = inf, d1z_hi = -inf;
    double e_lo = inf, e_hi = -inf, s_lo = inf, s_hi = -inf;
    std::size_t worst_e = 0, worst_h = 0;
    double worst_h_sev = -inf;
    for (std::size_t i = 0; i < sys.size(); ++i) {
        const auto& s = sys[i];
        const double ec = ellipticity_constant(s.a);
        c0m = std::max(c0m, ec);
        const double d = s.d1z;
        c2m = std::max(c2m, (d > 0.0 && std::isfinite(d)) ? std::max(d, 1.0 / d) : inf);
        d1z_lo = std::min(d1z_lo, d);
        d1z_hi = std::max(d1z_hi, d);
        // hypothesis violations, severity = how far outside (log scale)
        const double sev = (d > 0.0 && std::isfinite(d)) ? std::max(std::log(d / c2), std::log(1.0 / (c2 * d))) : inf;
        if (sev >= 0.0) fails.push_back({"d1z_bounds", sev, i, d});
        if (ec > c0 * (1 + 1e-12)) fails.push_back({"ellipticity_of_A", std::log(ec / c0), i, ec});
        if (sev > worst_h_sev) worst_h_sev = sev, worst_h = i;

        const Mat2 m = -s.a_tilde;
        double lmin = -inf, lmax = inf;
        if (m.allFinite()) {
            Eigen::SelfAdjointEigenSolver<Mat2> es(m);
            lmin = es.eigenvalues()(0);
            lmax = es.eigenvalues()(1);
        }
        for (const auto& xi : dirs) {
            const double qv = xi.dot(m * xi);
            s_lo = std::min(s_lo, std::isfinite(qv) ? qv : -inf);
            s_hi = std::max(s_hi, std::isfinite(qv) ? qv : inf);
        }
        if (!(lmin > 0.0) || !std::isfinite(lmax)) fails.push_back({"linearized_ellipticity", inf, i, lmin});
        if (!(lmin >= e_lo)) worst_e = i;
        e_lo = std::min(e_lo, std::isnan(lmin) ? -inf : lmin);
        e_hi = std::max(e_hi, std::isnan(lmax) ? inf : lmax);
    }
    const double c4 = (e_lo > 0.0 && std::isfinite(e_hi)) ? std::max(e_hi, 1.0 / e_lo) : inf;

    const double bound = 1.0 / (c0m * c2m * c2m * c2m);
    const double declared_bound = 1.0 / (c0 * c2 * c2 * c2);
    double mb_lo = inf;
    std::size_t worst_b = 0;
    bool any_sigma = false;
    for (std::size_t i = 0; i < sys.size(); ++i) {
        if (!sys[i].on_sigma) continue;
        any_sigma = true;
        const double mb = -sys[i].b1;
        if (!(mb >= mb_lo)) worst_b = i;
        mb_lo = std::min(mb_lo, std::isnan(mb) ? -inf : mb);
        if (!(mb >= bound * (1 - 1e-12)) || !std::isfinite(mb)) fails.push_back({"oblique", bound - mb, i, mb});
    }

    std::stable_sort(fails.begin(), fails.end(), [](const Failure& a, const Failure& b) { return a.severity > b.severity; });
    cert.pass = fails.empty();
    auto node_json = [&](std::size_t i) { return json{{"y", {sys[i].y.x(), sys[i].y.y()}}, {"x", {sys[i].x.x(), sys[i].x.y()}}}; };
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    if (!fails.empty()) cert.failed_node = sys[fails.front().node].y;

    json& r = cert.report;
    r["pass"] = cert.pass;
    r["nodes"] = sys.size();
    r["declared"] = {{"c0", c0}, {"c2", c2}};
    r["measured"] = {{"c0", num(c0m)}, {"c2", num(c2m)}, {"c4", num(c4)}};
    r["hypotheses"] = {{"d1z_min", num(d1z_lo)}, {"d1z_max", num(d1z_hi)}, {"worst_node", sys.empty() ? json() : node_json(worst_h)}};
    r["ellipticity"] = {{"eig_min", num(e_lo)},
                        {"eig_max", num(e_hi)},
                        {"sampled_min", num(s_lo)},
                        {"sampled_max", num(s_hi)},
                        {"directions", samples},
                        {"worst_node", sys.empty() ? json() : node_json(worst_e)}};
    if (any_sigma)
        r["oblique"] = {{"bound", num(bound)},
                        {"min_minus_b1", num(mb_lo)},
                        {"margin", num(mb_lo - bound)},
                        {"declared_bound", declared_bound},
                        {"declared_margin", num(mb_lo - declared_bound)},
                        {"worst_node", node_json(worst_b)}};
    r["failures"] = json::array();
    for (std::size_t j = 0; j < fails.size() && j < 10; ++j) {
        json fj = node_json(fails[j].node);
        fj["check"] = fails[j].check;
        fj["value"] = num(fails[j].value);
        r["failures"].push_back(fj);
    }
    r["failure_count"] = fails.size();
    return cert;
}

/// Measured c3 on Sigma: bounds of -(grad w)^T (A-I) grad v / |grad w|; inf if it changes sign.
inline double measure_c3(const Fields& f, const ZGrid& g, const GradientOverride& grad_v = nullptr)
{
    double c3 = 0.0;
    for (int i2 = 0; i2 <= g.spec.n2; ++i2) {
        const Vec2 x = g.x(g.index(0, i2));
        const Vec2 gw = f.w.gradient(x);
        const Vec2 gv = grad_v ? grad_v(x) : f.v.gradient(x);
        const double q = -gw.dot((f.medium.a(x) - Mat2::Identity()) * gv) / gw.norm();
        c3 = std::max(c3, q > 0.0 ? std::max(q, 1.0 / q) : std::numeric_limits<double>::infinity());
    }
    return c3;
}

/// grad v on Sigma solving (grad w)^T A grad w + (grad w)^T (A-I) grad v = 0 pointwise,
/// along (A-I) grad w.
inline GradientOverride manufactured_grad_v(const Fields& f)
{
    return [f](const Vec2& x) -> Vec2 {
        const Vec2 gw = f.w.gradient(x);
        const Mat2 a = f.medium.a(x);
        const Vec2 m = (a - Mat2::Identity()) * gw;
        if (m.squaredNorm() == 0.0) throw std::domain_error("manufactured_grad_v: (A-I) grad w = 0");
        return -gw.dot(a * gw) / m.squaredNorm() * m;
    };
}

// ---- test fields -----------------------------------------------------------

/// Closed-form random triple (A, w, v) in physical coordinates around a boundary
/// point P, already localized; rejected and redrawn until the measured constants
/// on the grid satisfy c0 <= c0_max, c2 <= c2_max.
struct LocalProblem {
    Fields fields;
    HodographFrame frame;
    ZGrid grid;
    int attempts = 0;
};

inline LocalProblem random_local_problem(std::mt19937_64& rng, const GridSpec& spec, double c0_max = 4.0, double c2_max = 3.0)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 1.0);
    auto sym = [&](double s) {
        Mat2 m;
        m(0, 0) = s * u(rng);
        m(1, 1) = s * u(rng);
        m(0, 1) = m(1, 0) = s * u(rng);
        return m;
    };
    auto vec = [&](double s) { return Vec2(s * u(rng), s * u(rng)); };
    for (int attempt = 1; attempt <= 1000; ++attempt) {
        const Vec2 p = vec(1.0);
        // A = A0 + sin(om.x + ph) B
        const double al = kPi * u(rng);
        const Mat2 rot = rotation(al);
        const Mat2 a0 = rot * Vec2(0.4 + 2.6 * pos(rng), 0.4 + 2.6 * pos(rng)).asDiagonal() * rot.transpose();
        const Mat2 bm = sym(0.3);
        const Vec2 oa = vec(3.0);
        const double pa = kPi * u(rng);
        // n = n0 + 0.3 sin(on.x)
        const double n0 = 1.0 + 2.0 * pos(rng);
        const Vec2 on = vec(3.0);
        // w = s (g.(x-P) + (x-P)^T H (x-P)/2 + beta (sin(om.(x-P) + ph) - sin ph))
        const double sgn = pos(rng) < 0.5 ? -1.0 : 1.0;
        const Vec2 gdir = vec(1.0).normalized();
        const Vec2 gw = (0.6 + 1.4 * pos(rng)) * gdir;
        const Mat2 hw = sym(1.0);
        const double beta = 0.2 * pos(rng);
        const Vec2 ow = vec(3.0);
        const double pw = kPi * u(rng);
        // v = cos(k d.x + psi)
        const double k = 1.0 + 3.0 * pos(rng);
        const double th = kPi * u(rng), psi = kPi * u(rng);
        const Vec2 d(std::cos(th), std::sin(th));

        Fields ph;
        ph.k = k;
        ph.medium.a = [=](const Vec2& x) -> Mat2 { return a0 + std::sin(oa.dot(x) + pa) * bm; };
        ph.medium.da = [=](const Vec2& x) {
            const double c = std::cos(oa.dot(x) + pa);
            return std::array<Mat2, 2>{c * oa.x() * bm, c * oa.y() * bm};
        };
        ph.medium.n = [=](const Vec2& x) { return n0 + 0.3 * std::sin(on.dot(x)); };
        ph.medium.c0 = c0_max;
        ph.w.value = [=](const Vec2& x) {
            const Vec2 e = x - p;
            return sgn * (gw.dot(e) + 0.5 * e.dot(hw * e) + beta * (std::sin(ow.dot(e) + pw) - std::sin(pw)));
        };
        ph.w.gradient = [=](const Vec2& x) -> Vec2 {
            const Vec2 e = x - p;
            return sgn * (gw + hw * e + beta * std::cos(ow.dot(e) + pw) * ow);
        };
        ph.w.hessian = [=](const Vec2& x) -> Mat2 {
            const Vec2 e = x - p;
            return sgn * (hw - beta * std::sin(ow.dot(e) + pw) * ow * ow.transpose());
        };
        ph.v.value = [=](const Vec2& x) { return std::cos(k * d.dot(x) + psi); };
        ph.v.gradient = [=](const Vec2& x) -> Vec2 { return -k * std::sin(k * d.dot(x) + psi) * d; };
        ph.v.hessian = [=](const Vec2& x) -> Mat2 { return -k * k * std::cos(k * d.dot(x) + psi) * d * d.transpose(); };

        const Mat2 ap = ph.medium.a(p);
        if (!std::isfinite(ellipticity_constant(ap))) continue;
        // Omega = {s w > 0}; outward normal points down the gradient of s w
        const Vec2 nu = -sgn * gw.normalized();
        HodographFrame fr = align_frame(ap, nu, ph.w.gradient(p));
        fr.p = p;
        fr.r = std::max(std::abs(spec.x1_lo), std::abs(spec.x1_hi));
        LocalProblem lp;
        lp.fields = localize(ph, fr);
        try {
            lp.grid = build_z(lp.fields.w, spec);
        } catch (const BracketFailure&) {
            continue;
        }
        double c0m = 0.0;
        for (int i = 0; i < lp.grid.size(); ++i) c0m = std::max(c0m, ellipticity_constant(lp.fields.medium.a(lp.grid.x(i))));
        if (!(c0m <= c0_max) || !(lp.grid.c2 < c2_max)) continue;
        fr.c0 = c0m;
        fr.c2 = lp.grid.c2;
        fr.c3 = measure_c3(lp.fields, lp.grid);
        lp.frame = fr;
        lp.attempts = attempt;
        return lp;
    }
    throw std::runtime_error("random_local_problem: no admissible field in 1000 draws");
}

/// w = x1 - x1^2/a + x1^3/(3a^2) + x1 x2^2, so d1w = (1 - x1/a)^2 + x2^2 vanishes
/// only at x = (a, 0), i.e. at the grid node y = (a/3, 0). A = diag(2, 1), n = 1.
inline Fields degenerate_fields(double a = 0.3, double k = 1.0)
{
    Fields f;
    f.k = k;
    f.medium.a = [](const Vec2&) -> Mat2 { return Vec2(2.0, 1.0).asDiagonal(); };
    f.medium.da = [](const Vec2&) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; };
    f.medium.n = [](const Vec2&) { return 1.0; };
    f.medium.c0 = 2.0;
    f.medium.piecewise_constant = true;
    f.w.value = [a](const Vec2& x) {
        return x.x() - x.x() * x.x() / a + x.x() * x.x() * x.x() / (3 * a * a) + x.x() * x.y() * x.y();
    };
    f.w.gradient = [a](const Vec2& x) -> Vec2 {
        const double s = 1.0 - x.x() / a;
        return Vec2(s * s + x.y() * x.y(), 2 * x.x() * x.y());
    };
    f.w.hessian = [a](const Vec2& x) -> Mat2 {
        Mat2 h;
        h << -2.0 / a * (1.0 - x.x() / a), 2 * x.y(), 2 * x.y(), 2 * x.x();
        return h;
    };
    f.v.value = [k](const Vec2& x) { return std::cos(k * x.x()); };
    f.v.gradient = [k](const Vec2& x) -> Vec2 { return Vec2(-k * std::sin(k * x.x()), 0.0); };
    f.v.hessian = [k](const Vec2& x) -> Mat2 { return Vec2(-k * k * std::cos(k * x.x()), 0.0).asDiagonal(); };
    return f;
}

// ---- fields from nodal data ------------------------------------------------

/// Moving least squares: at each evaluation point, weighted quadratic fit to
/// the samples within `radius`; value, gradient and Hessian come from the fit.
inline ScalarField mls_quadratic(std::vector<Vec2> pts, std::vector<double> vals, double radius)
{
    if (pts.size() != vals.size()) throw std::invalid_argument("mls_quadratic: size mismatch");
    struct Data {
        std::vector<Vec2> pts;
        std::vector<double> vals;
        double r;
        std::unordered_map<long long, std::vector<int>> cells;
        long long key(long long i, long long j) const { return i * 4000037LL + j; }
        long long cell(double c) const { return static_cast<long long>(std::floor(c / r)); }
    };
    auto d = std::make_shared<Data>();
    d->pts = std::move(pts);
    d->vals = std::move(vals);
    d->r = radius;
    for (std::size_t i = 0; i < d->pts.size(); ++i)
        d->cells[d->key(d->cell(d->pts[i].x()), d->cell(d->pts[i].y()))].push_back(int(i));

    auto fit = [d](const Vec2& x) -> Eigen::Matrix<double, 6, 1> {
        std::vector<int> near;
        const long long cx = d->cell(x.x()), cy = d->cell(x.y());
        for (long long i = cx - 1; i <= cx + 1; ++i)
            for (long long j = cy - 1; j <= cy + 1; ++j) {
                auto it = d->cells.find(d->key(i, j));
                if (it == d->cells.end()) continue;
                for (int p : it->second)
                    if ((d->pts[std::size_t(p)] - x).norm() < d->r) near.push_back(p);
            }
        if (near.size() < 6) throw std::domain_error("mls_quadratic: fewer than 6 samples near evaluation point");
        Eigen::MatrixXd m(near.size(), 6);
        Eigen::VectorXd rhs(near.size());
        for (std::size_t i = 0; i < near.size(); ++i) {
            const Vec2 e = (d->pts[std::size_t(near[i])] - x) / d->r;
            const double wt = std::pow(1.0 - e.squaredNorm(), 2);
            m.row(Eigen::Index(i)) << 1.0, e.x(), e.y(), e.x() * e.x(), e.x() * e.y(), e.y() * e.y();
            m.row(Eigen::Index(i)) *= wt;
            rhs(Eigen::Index(i)) = wt * d->vals[std::size_t(near[i])];
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
        if (qr.rank() < 6) throw std::domain_error("mls_quadratic: degenerate sample geometry");
        Eigen::Matrix<double, 6, 1> c = qr.solve(rhs);
        // back to unscaled coordinates
        c(1) /= d->r;
        c(2) /= d->r;
        c(3) /= d->r * d->r;
        c(4) /= d->r * d->r;
        c(5) /= d->r * d->r;
        return c;
    };
    ScalarField f;
    f.value = [fit](const Vec2& x) { return fit(x)(0); };
    f.gradient = [fit](const Vec2& x) -> Vec2 {
        const auto c = fit(x);
        return Vec2(c(1), c(2));
    };
    f.hessian = [fit](const Vec2& x) -> Mat2 {
        const auto c = fit(x);
        Mat2 h;
        h << 2 * c(3), c(4), c(4), 2 * c(5);
        return h;
    };
    return f;
}

}  // namespace nonscat::hodograph
