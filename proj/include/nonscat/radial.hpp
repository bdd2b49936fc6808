#ifndef NONSCAT_RADIAL_HPP
#define NONSCAT_RADIAL_HPP

// Stratified disk media A = a(r) I, n = n(r): per-mode regular solutions of
//   (1/r)(r a u')' + (k^2 n - a m^2 / r^2) u = 0,
// transmission-eigenvalue determinants and scattering coefficients.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonscat/specialfun.hpp"

namespace nonscat::radial {

using cplx = std::complex<double>;

struct RadialProfile {
    std::function<double(double)> a;
    std::function<double(double)> da;
    std::function<double(double)> n;
    double radius = 1.0;

    static RadialProfile constant(double a, double n, double radius = 1.0)
    {
        if (!(a > 0.0) || !(n > 0.0)) throw std::invalid_argument("radial profile must be positive");
        return {[a](double) { return a; }, [](double) { return 0.0; }, [n](double) { return n; }, radius};
    }
};

/// Boundary trace of the regular mode solution: u(R) and a(R) u'(R).
struct ModeTrace {
    int m = 0;
    double k = 0.0;
    double u = 0.0;
    double flux = 0.0;
};

struct IntegrationOptions {
    int steps = 4096;  ///< uniform steps on [0, R]
    double start = 1e-6;  ///< r0 / R
};

namespace detail {

struct State {
    double u, p;  // p = r a u'
};

inline State rhs(const RadialProfile& pr, int m, double k, double r, const State& s)
{
    const double a = pr.a(r);
    return {s.p / (r * a), (a * m * m / r - k * k * pr.n(r) * r) * s.u};
}

inline State rk4_step(const RadialProfile& pr, int m, double k, double r, double h, const State& s)
{
    const State k1 = rhs(pr, m, k, r, s);
    const State k2 = rhs(pr, m, k, r + 0.5 * h, {s.u + 0.5 * h * k1.u, s.p + 0.5 * h * k1.p});
    const State k3 = rhs(pr, m, k, r + 0.5 * h, {s.u + 0.5 * h * k2.u, s.p + 0.5 * h * k2.p});
    const State k4 = rhs(pr, m, k, r + h, {s.u + h * k3.u, s.p + h * k3.p});
    return {s.u + h / 6.0 * (k1.u + 2 * k2.u + 2 * k3.u + k4.u), s.p + h / 6.0 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p)};
}

}  // namespace detail

/// Regular solution by classical RK4 started from the Frobenius seed
/// u ~ (r/R)^m at r0. The regular singular point makes fixed steps of size
/// R/N inaccurate while r is comparable to the step, so the march from r0
/// up to kGradedSteps uniform steps uses geometrically graded RK4 steps.
inline ModeTrace integrate_mode(const RadialProfile& profile, int m, double k, IntegrationOptions opt = {})
{
    if (!(k > 0.0)) throw std::invalid_argument("integrate_mode: k must be positive");
    if (m < 0) m = -m;
    const double big_r = profile.radius;
    const double h = big_r / opt.steps;
    const double r0 = opt.start * big_r;
    constexpr int kGradedSteps = 32;
    const double r_switch = std::min(kGradedSteps * h, big_r);

    // two-term Frobenius seed u = (r/R)^m (1 - c r^2), frozen coefficients at r0
    const double a0 = profile.a(r0);
    const double c = k * k * profile.n(r0) / (4.0 * (m + 1) * a0);
    const double u0 = std::pow(r0 / big_r, m);
    detail::State s{u0 * (1.0 - c * r0 * r0), r0 * a0 * u0 * (m / r0 * (1.0 - c * r0 * r0) - 2.0 * c * r0)};
    // graded part: step ~ r / 32, which meets h at r_switch
    double r = r0;
    const int graded = std::max(1, static_cast<int>(std::ceil(std::log(r_switch / r0) / std::log1p(1.0 / kGradedSteps))));
    const double ratio = std::pow(r_switch / r0, 1.0 / graded);
    for (int i = 0; i < graded; ++i) {
        const double rn = (i + 1 == graded) ? r_switch : r * ratio;
        s = detail::rk4_step(profile, m, k, r, rn - r, s);
        r = rn;
        // keep the seed scale bounded for high orders
        if (std::abs(s.u) > 1e200) {
            s.u *= 1e-200;
            s.p *= 1e-200;
        }
    }
    const int uniform = static_cast<int>(std::lround((big_r - r_switch) / h));
    for (int i = 0; i < uniform; ++i) {
        const double rn = r_switch + (i + 1) * h;
        s = detail::rk4_step(profile, m, k, r, rn - r, s);
        r = rn;
    }
    return {m, k, s.u, s.p / big_r};
}

/// d_m(k) = u(R) k J_m'(kR) - a(R) u'(R) J_m(kR).
inline double te_determinant(const ModeTrace& t, double radius)
{
    const double x = t.k * radius;
    return t.u * t.k * special::bessel_j_prime(t.m, x) - t.flux * special::bessel_j(t.m, x);
}

inline double te_determinant(const RadialProfile& p, int m, double k, IntegrationOptions opt = {})
{
    return te_determinant(integrate_mode(p, m, k, opt), p.radius);
}

struct Root {
    double k;
    double residual;  ///< |d_m(k)| at the returned root
};

struct RootSearch {
    std::vector<Root> roots;
    bool degenerate = false;          ///< determinant vanishes identically (no contrast)
    std::vector<std::string> warnings;
};

/// Sign-change bracketing of d_m on an N-point grid over (k_lo, k_hi], then
/// bisection to |dk| < 1e-10.
inline RootSearch find_te(const RadialProfile& profile, int m, double k_lo, double k_hi, int grid,
                          IntegrationOptions opt = {})
{
    if (grid < 2) throw std::invalid_argument("find_te: grid needs at least 2 points");
    if (!(k_hi > k_lo) || k_hi <= 0.0) throw std::invalid_argument("find_te: bad interval");
    RootSearch out;
    std::vector<double> ks(static_cast<std::size_t>(grid)), ds(ks.size());
    double scale = 0.0, dmax = 0.0;
    for (int i = 0; i < grid; ++i) {
        // (k_lo, k_hi]: open at the left end
        const double k = k_lo + (k_hi - k_lo) * (i + 1) / grid;
        const ModeTrace t = integrate_mode(profile, m, k, opt);
        const double x = k * profile.radius;
        ks[static_cast<std::size_t>(i)] = k;
        ds[static_cast<std::size_t>(i)] = te_determinant(t, profile.radius);
        scale = std::max(scale, std::abs(t.u * k * special::bessel_j_prime(m, x)) + std::abs(t.flux * special::bessel_j(m, x)));
        dmax = std::max(dmax, std::abs(ds[static_cast<std::size_t>(i)]));
    }
    if (dmax <= 1e-9 * scale) {
        out.degenerate = true;
        return out;
    }
    auto d = [&](double k) { return te_determinant(profile, m, k, opt); };
    for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
        double lo = ks[i], hi = ks[i + 1];
        double flo = ds[i], fhi = ds[i + 1];
        if (flo == 0.0) {
            out.roots.push_back({lo, 0.0});
            continue;
        }
        if (flo * fhi > 0.0) continue;
        while (hi - lo >= 1e-10) {
            const double mid = 0.5 * (lo + hi);
            const double fm = d(mid);
            if (fm == 0.0) {
                lo = hi = mid;
                break;
            }
            if ((fm < 0) == (flo < 0)) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        const double root = 0.5 * (lo + hi);
        out.roots.push_back({root, std::abs(d(root))});
    }
    if (!ds.empty() && ds.back() == 0.0) out.roots.push_back({ks.back(), 0.0});
    for (std::size_t i = 1; i < out.roots.size(); ++i)
        if (out.roots[i].k - out.roots[i - 1].k < 2.0 * (k_hi - k_lo) / grid)
            out.warnings.push_back("roots closer than two grid cells near k = " + std::to_string(out.roots[i].k) +
                                   "; pairs inside one cell may be missed");
    return out;
}

struct ScatteringCoefficient {
    cplx c;
    double condition = 0.0;
    bool ill_conditioned = false;
};

/// Solves alpha u(R) - c H_m(kR) = J_m(kR), alpha a(R)u'(R) - c k H_m'(kR) = k J_m'(kR).
inline ScatteringCoefficient scattering_coeff(const ModeTrace& t, double radius)
{
    const double x = t.k * radius;
    const double j = special::bessel_j(t.m, x), dj = special::bessel_j_prime(t.m, x);
    const cplx h = special::hankel1(t.m, x), dh = special::hankel1_prime(t.m, x);
    Eigen::Matrix2cd sys;
    sys << t.u, -h, t.flux, -t.k * dh;
    ScatteringCoefficient out;
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(sys);
    const double smax = svd.singularValues()(0), smin = svd.singularValues()(1);
    out.condition = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
    out.ill_conditioned = out.condition > 1e12;
    // closed form: c = d_m / (H a u'(R) - k H' u(R))
    out.c = (t.u * t.k * dj - t.flux * j) / (h * t.flux - t.k * dh * t.u);
    return out;
}

inline ScatteringCoefficient scattering_coeff(const RadialProfile& p, int m, double k, IntegrationOptions opt = {})
{
    return scattering_coeff(integrate_mode(p, m, k, opt), p.radius);
}

struct IntegralCondition {
    double value;
    double distance_to_one;
};

/// (1/R) int_0^R sqrt(n/a) dr by composite Simpson with `panels` panels.
inline IntegralCondition integral_condition(const RadialProfile& p, int panels = 4096)
{
    if (panels % 2) ++panels;
    const double h = p.radius / panels;
    auto f = [&](double r) { return std::sqrt(p.n(r) / p.a(r)); };
    double s = f(0.0) + f(p.radius);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
    const double v = s * h / 3.0 / p.radius;
    return {v, std::abs(v - 1.0)};
}

struct SweepRow {
    int m;
    double k;
    double d;
    cplx c;
    double unitarity;  ///< |1 + 2c|
};

inline std::vector<SweepRow> sweep(const RadialProfile& p, int m, const std::vector<double>& ks, IntegrationOptions opt = {})
{
    std::vector<SweepRow> rows;
    rows.reserve(ks.size());
    for (double k : ks) {
        const ModeTrace t = integrate_mode(p, m, k, opt);
        const cplx c = scattering_coeff(t, p.radius).c;
        rows.push_back({m, k, te_determinant(t, p.radius), c, std::abs(1.0 + 2.0 * c)});
    }
    return rows;
}

/// CSV columns: m,k,d_m,re_c,im_c,abs_1p2c
inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, bool header = true)
{
    if (header) out << "m,k,d_m,re_c,im_c,abs_1p2c\n";
    out << std::setprecision(17);
    for (const auto& r : rows)
        out << r.m << ',' << r.k << ',' << r.d << ',' << r.c.real() << ',' << r.c.imag() << ',' << r.unitarity << '\n';
}

}  // namespace nonscat::radial

#endif  // NONSCAT_RADIAL_HPP
