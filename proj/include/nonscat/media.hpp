#ifndef NONSCAT_MEDIA_HPP
#define NONSCAT_MEDIA_HPP

// Inhomogeneities (A, n, Omega): coefficient fields, the square and
// pushforward constructions, and pointwise checks of boundary conditions.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonscat/geometry.hpp"
#include "nonscat/incident.hpp"

namespace nonscat {

/// Coefficients valid on the closed inclusion; outside it A = I, n = 1.
struct CoefficientField {
    std::function<Mat2(const Vec2&)> a;
    /// {d/dx1 A, d/dx2 A}
    std::function<std::array<Mat2, 2>(const Vec2&)> da;
    std::function<double(const Vec2&)> n;
    double c0 = 1.0;             ///< declared ellipticity constant
    bool piecewise_constant = false;
};

struct MediumSpec {
    Domain domain;
    CoefficientField coefficients;
    std::string label;

    Mat2 a_inside(const Vec2& x) const { return coefficients.a(x); }
    double n_inside(const Vec2& x) const { return coefficients.n(x); }

    Mat2 a(const Vec2& x) const { return domain.contains(x) ? coefficients.a(x) : Mat2::Identity(); }
    double n(const Vec2& x) const { return domain.contains(x) ? coefficients.n(x) : 1.0; }
};

/// Ellipticity bounds of a symmetric 2x2 matrix: max(lambda_max, 1/lambda_min).
inline double ellipticity_constant(const Mat2& a)
{
    Eigen::SelfAdjointEigenSolver<Mat2> es(a);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(1);
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return std::max(hi, 1.0 / lo);
}

class ContrastFreeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A = a I, n = n_value on a domain.
inline MediumSpec constant_medium(Domain domain, double a, double n_value, std::string label = "constant")
{
    if (!(a > 0.0) || !(n_value > 0.0)) throw std::invalid_argument("constant_medium: a and n must be positive");
    if (a == 1.0 && n_value == 1.0) throw ContrastFreeError("constant_medium: A = I and n = 1 (contrast-free)");
    MediumSpec m;
    m.domain = std::move(domain);
    m.label = std::move(label);
    m.coefficients.a = [a](const Vec2&) { return Mat2(a * Mat2::Identity()); };
    m.coefficients.da = [](const Vec2&) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; };
    m.coefficients.n = [n_value](const Vec2&) { return n_value; };
    m.coefficients.c0 = std::max(a, 1.0 / a);
    m.coefficients.piecewise_constant = true;
    return m;
}

/// Constant anisotropic A on a domain.
inline MediumSpec anisotropic_medium(Domain domain, const Mat2& a, double n_value, std::string label = "anisotropic")
{
    if ((a - a.transpose()).norm() != 0.0) throw std::invalid_argument("anisotropic_medium: A must be symmetric");
    const double c0 = ellipticity_constant(a);
    if (!std::isfinite(c0)) throw std::invalid_argument("anisotropic_medium: A must be positive definite");
    MediumSpec m;
    m.domain = std::move(domain);
    m.label = std::move(label);
    m.coefficients.a = [a](const Vec2&) { return a; };
    m.coefficients.da = [](const Vec2&) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; };
    m.coefficients.n = [n_value](const Vec2&) { return n_value; };
    m.coefficients.c0 = c0;
    m.coefficients.piecewise_constant = true;
    return m;
}

/// A = a I, n = a on the unit square (0,1)^2.
inline MediumSpec square_medium(double a)
{
    if (!(a > 0.0)) throw std::invalid_argument("square_medium: a must be positive");
    if (a == 1.0) throw ContrastFreeError("square_medium: a = 1 gives A - I = 0 (contrast-free)");
    return constant_medium(Domain::unit_square(), a, a, "square a=n=" + std::to_string(a));
}

/// Phi(x) = x + eps Psi(x) with Psi vanishing on the boundary of the base domain.
struct DiffeoSpec {
    double eps = 0.0;
    std::function<Vec2(const Vec2&)> psi;
    std::function<Mat2(const Vec2&)> dpsi;  ///< (dpsi)_{ij} = d psi_i / d x_j
    /// second derivatives: d2psi[i](j,k) = d^2 psi_i / dx_j dx_k
    std::function<std::array<Mat2, 2>(const Vec2&)> d2psi;

    Vec2 forward(const Vec2& x) const { return x + eps * psi(x); }
    Mat2 jacobian(const Vec2& x) const { return Mat2::Identity() + eps * dpsi(x); }

    /// Smooth bump field on the unit square:
    /// Psi = (s1(x) s1(y), s1(x) s2(y)) with s1 = sin(pi t), s2 = sin(2 pi t).
    static DiffeoSpec unit_square_bump(double eps)
    {
        DiffeoSpec d;
        d.eps = eps;
        d.psi = [](const Vec2& x) {
            const double sx = std::sin(kPi * x.x()), sy = std::sin(kPi * x.y()), s2y = std::sin(2 * kPi * x.y());
            return Vec2(sx * sy, sx * s2y);
        };
        d.dpsi = [](const Vec2& x) {
            const double sx = std::sin(kPi * x.x()), cx = std::cos(kPi * x.x());
            const double sy = std::sin(kPi * x.y()), cy = std::cos(kPi * x.y());
            const double s2y = std::sin(2 * kPi * x.y()), c2y = std::cos(2 * kPi * x.y());
            Mat2 j;
            j << kPi * cx * sy, kPi * sx * cy, kPi * cx * s2y, 2 * kPi * sx * c2y;
            return j;
        };
        d.d2psi = [](const Vec2& x) {
            const double sx = std::sin(kPi * x.x()), cx = std::cos(kPi * x.x());
            const double sy = std::sin(kPi * x.y()), cy = std::cos(kPi * x.y());
            const double s2y = std::sin(2 * kPi * x.y()), c2y = std::cos(2 * kPi * x.y());
            const double p2 = kPi * kPi;
            Mat2 h0, h1;
            h0 << -p2 * sx * sy, p2 * cx * cy, p2 * cx * cy, -p2 * sx * sy;
            h1 << -p2 * sx * s2y, 2 * p2 * cx * c2y, 2 * p2 * cx * c2y, -4 * p2 * sx * s2y;
            return std::array<Mat2, 2>{h0, h1};
        };
        return d;
    }
};

class NewtonFailure : public std::runtime_error {
public:
    NewtonFailure(const std::string& what, Vec2 y) : std::runtime_error(what), point(y) {}
    Vec2 point;
};

/// Phi^{-1}(y) by damped Newton started at y (tolerance 1e-12, 50 iterations).
inline Vec2 invert_diffeo(const DiffeoSpec& d, const Vec2& y)
{
    Vec2 x = y;
    Vec2 r = d.forward(x) - y;
    for (int it = 0; it < 50; ++it) {
        const double rn = r.norm();
        if (rn <= 1e-12) return x;
        const Vec2 step = d.jacobian(x).partialPivLu().solve(r);
        double lambda = 1.0;
        Vec2 xn = x - step;
        Vec2 rnext = d.forward(xn) - y;
        while (rnext.norm() >= rn && lambda > 1e-6) {
            lambda *= 0.5;
            xn = x - lambda * step;
            rnext = d.forward(xn) - y;
        }
        x = xn;
        r = rnext;
    }
    if (r.norm() <= 1e-12) return x;
    std::ostringstream os;
    os << "Newton inversion of Phi did not converge at y = (" << y.x() << ", " << y.y() << ")";
    throw NewtonFailure(os.str(), y);
}

/// Pushforward (Phi_* I, Phi_* 1) on the base domain:
/// A = (DPhi DPhi^T / |det DPhi|) o Phi^{-1}, n = (1 / |det DPhi|) o Phi^{-1}.
inline MediumSpec pushforward_medium(const DiffeoSpec& diffeo, Domain base)
{
    MediumSpec m;
    m.domain = std::move(base);
    m.label = "pushforward eps=" + std::to_string(diffeo.eps);
    m.coefficients.a = [diffeo](const Vec2& y) {
        const Mat2 j = diffeo.jacobian(invert_diffeo(diffeo, y));
        return Mat2(j * j.transpose() / std::abs(j.determinant()));
    };
    m.coefficients.n = [diffeo](const Vec2& y) {
        return 1.0 / std::abs(diffeo.jacobian(invert_diffeo(diffeo, y)).determinant());
    };
    m.coefficients.da = [diffeo](const Vec2& y) {
        const Vec2 x = invert_diffeo(diffeo, y);
        const Mat2 j = diffeo.jacobian(x);
        const double det = j.determinant();
        const Mat2 jinv = j.inverse();
        const Mat2 g = j * j.transpose() / det;
        const auto h = diffeo.d2psi(x);
        std::array<Mat2, 2> dg_dx;
        for (int k = 0; k < 2; ++k) {
            Mat2 dj;  // d/dx_k of DPhi
            for (int i = 0; i < 2; ++i)
                for (int c = 0; c < 2; ++c) dj(i, c) = diffeo.eps * h[static_cast<std::size_t>(i)](c, k);
            const double ddet = det * (jinv * dj).trace();
            dg_dx[static_cast<std::size_t>(k)] = (dj * j.transpose() + j * dj.transpose()) / det - g * (ddet / det);
        }
        std::array<Mat2, 2> out;
        for (int l = 0; l < 2; ++l)
            out[static_cast<std::size_t>(l)] = dg_dx[0] * jinv(0, l) + dg_dx[1] * jinv(1, l);
        return out;
    };
    const Vec2 c = m.domain.center();
    const double r = m.domain.circumradius();
    double worst = 1.0;
    for (int i = 0; i <= 40; ++i)
        for (int j = 0; j <= 40; ++j) {
            const Vec2 x = c + r * Vec2(i / 20.0 - 1.0, j / 20.0 - 1.0);
            if (!m.domain.contains(x)) continue;
            const Mat2 jj = diffeo.jacobian(x);
            worst = std::max(worst, ellipticity_constant(jj * jj.transpose() / std::abs(jj.determinant())));
        }
    m.coefficients.c0 = 1.05 * worst;
    return m;
}

/// Max ellipticity constant over random points of the closed domain's box.
inline double sample_ellipticity(const MediumSpec& m, int samples, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const Vec2 c = m.domain.center();
    const double r = m.domain.circumradius();
    std::uniform_real_distribution<double> u(-r, r);
    double worst = 1.0;
    for (int i = 0; i < samples; ++i) {
        const Vec2 x = c + Vec2(u(rng), u(rng));
        worst = std::max(worst, ellipticity_constant(m.a(x)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Boundary scans

struct ScanSample {
    BoundaryPoint boundary;
    cplx value;
};

struct NondegeneracyScan {
    std::vector<ScanSample> samples;
    /// Parameters t of refined zeros of nu^T (A - I) grad v.
    std::vector<double> zeros;
    std::vector<Vec2> zero_points;
    double max_abs = 0.0;
    bool identically_zero = false;
};

/// Samples nu^T (A - I) grad v on the boundary (A from inside) and locates
/// its zeros: local minima of |.| on the sample grid are refined by golden
/// section and kept when below `rel_tol * max |.|`.
inline NondegeneracyScan nondegeneracy_scan(const MediumSpec& medium, const IncidentField& v, int samples,
                                            double rel_tol = 1e-8)
{
    if (samples < 3) throw std::invalid_argument("nondegeneracy_scan: need at least 3 samples");
    auto eval = [&](double t) {
        const BoundaryPoint bp = medium.domain.boundary(t);
        const Mat2 a = medium.a_inside(bp.point) - Mat2::Identity();
        const CVec2 g = v.gradient(bp.point);
        return ScanSample{bp, cplx((a * bp.normal).cast<cplx>().transpose() * g)};
    };
    NondegeneracyScan scan;
    for (int j = 0; j < samples; ++j) {
        scan.samples.push_back(eval(double(j) / samples));
        scan.max_abs = std::max(scan.max_abs, std::abs(scan.samples.back().value));
    }
    if (scan.max_abs == 0.0) {
        scan.identically_zero = true;
        return scan;
    }
    const double tol = rel_tol * scan.max_abs;
    const int n = samples;
    for (int j = 0; j < n; ++j) {
        const double fm = std::abs(scan.samples[static_cast<std::size_t>((j + n - 1) % n)].value);
        const double f0 = std::abs(scan.samples[static_cast<std::size_t>(j)].value);
        const double fp = std::abs(scan.samples[static_cast<std::size_t>((j + 1) % n)].value);
        if (!(f0 <= fm && f0 < fp)) continue;
        // golden-section search on [t_{j-1}, t_{j+1}]
        double a = double(j - 1) / n, b = double(j + 1) / n;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = std::abs(eval(c).value), fd = std::abs(eval(d).value);
        for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = std::abs(eval(c).value);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = std::abs(eval(d).value);
            }
        }
        const double tz = 0.5 * (a + b);
        const ScanSample z = eval(tz);
        if (std::abs(z.value) <= tol) {
            const double tw = tz - std::floor(tz);
            scan.zeros.push_back(tw);
            scan.zero_points.push_back(z.boundary.point);
        }
    }
    return scan;
}

struct ObliqueCheck {
    std::vector<double> t;
    std::vector<double> complementing;  ///< (A nu.nu)(A tau.tau) - (A nu.tau)^2
    std::vector<double> normal_index;   ///< (A nu.nu) n
    double min_complementing = 0.0, max_complementing = 0.0;
    double min_distance_to_one = 0.0;          ///< for the complementing quantity
    double min_normal_index_distance = 0.0;    ///< |(A nu.nu) n - 1|
    bool regular = false;                       ///< complementing quantity never equals 1
};

/// Evaluates the regular oblique derivative (complementing) quantity and the
/// companion (A nu.nu) n at boundary samples, A and n taken from inside.
inline ObliqueCheck regular_oblique_check(const MediumSpec& medium, int samples, double tol = 1e-12)
{
    ObliqueCheck r;
    r.min_complementing = std::numeric_limits<double>::infinity();
    r.max_complementing = -std::numeric_limits<double>::infinity();
    r.min_distance_to_one = std::numeric_limits<double>::infinity();
    r.min_normal_index_distance = std::numeric_limits<double>::infinity();
    for (const auto& bp : medium.domain.boundary_samples(samples)) {
        const Mat2 a = medium.a_inside(bp.point);
        const Vec2 nu = bp.normal;
        const Vec2 tau(-nu.y(), nu.x());
        const double q = nu.dot(a * nu) * tau.dot(a * tau) - std::pow(nu.dot(a * tau), 2);
        const double ni = nu.dot(a * nu) * medium.n_inside(bp.point);
        r.t.push_back(bp.t);
        r.complementing.push_back(q);
        r.normal_index.push_back(ni);
        r.min_complementing = std::min(r.min_complementing, q);
        r.max_complementing = std::max(r.max_complementing, q);
        r.min_distance_to_one = std::min(r.min_distance_to_one, std::abs(q - 1.0));
        r.min_normal_index_distance = std::min(r.min_normal_index_distance, std::abs(ni - 1.0));
    }
    r.regular = r.min_distance_to_one > tol;
    return r;
}

}  // namespace nonscat

#endif  // NONSCAT_MEDIA_HPP
