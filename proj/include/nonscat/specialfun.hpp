#ifndef NONSCAT_SPECIALFUN_HPP
#define NONSCAT_SPECIALFUN_HPP

// Integer-order cylinder functions J_m, Y_m, H_m^(1) of a real argument.
//
// Evaluation regimes (switchover constants below):
//   x <= kSeriesMax           ascending power series for J_m, J_0, J_1 and
//                             the ascending logarithmic series for Y_0, Y_1
//   kSeriesMax < x <= kAsymptoticMin
//                             Miller backward recurrence for J (normalized by
//                             J_0 + 2 sum J_2k = 1) and Neumann series for
//                             Y_0, Y_1 built from the same J sequence
//   x > kAsymptoticMin        Hankel asymptotic expansion for orders 0 and 1
//                             (used only while m*m stays small against x)
// Y_m and H_m for m >= 2 follow from upward recurrence, which is stable for Y.
// J_m for m >= 2 comes from the backward sequence (or the series).

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace nonscat::special {

using cplx = std::complex<double>;

inline constexpr double kSeriesMax = 8.0;
inline constexpr double kAsymptoticMin = 60.0;

namespace detail {

inline double pow_over_factorial(double half_x, int m)
{
    // (x/2)^m / m! through logarithms; underflows cleanly to 0.
    if (m == 0) return 1.0;
    if (half_x == 0.0) return 0.0;
    return std::exp(m * std::log(half_x) - std::lgamma(m + 1.0));
}

inline double j_series(int m, double x)
{
    const double hx = 0.5 * x;
    const double q = -hx * hx;
    double term = pow_over_factorial(hx, m);
    if (term == 0.0) return 0.0;
    double sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= q / (double(k) * double(k + m));
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum;
}

// Backward (Miller) recurrence. Returns J_0..J_{mmax} at x > 0.
inline std::vector<double> j_miller(int mmax, double x)
{
    const int start = 2 * ((std::max(mmax, static_cast<int>(x)) + 40 +
                            static_cast<int>(std::sqrt(40.0 * std::max(mmax, static_cast<int>(x) + 1)))) / 2);
    std::vector<double> out(static_cast<std::size_t>(mmax) + 1, 0.0);
    double jp1 = 0.0, j = 1e-300, norm = 0.0;
    for (int n = start; n > 0; --n) {
        const double jm1 = 2.0 * n / x * j - jp1;
        jp1 = j;
        j = jm1;
        // j now holds the (unnormalized) J_{n-1}
        if (n - 1 <= mmax) out[static_cast<std::size_t>(n - 1)] = j;
        if ((n - 1) % 2 == 0 && n - 1 > 0) norm += 2.0 * j;
        if (std::abs(j) > 1e250) {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            for (auto& v : out) v *= 1e-250;
        }
    }
    norm += j;  // J_0
    for (auto& v : out) v /= norm;
    return out;
}

inline constexpr double kEulerGamma = 0.57721566490153286061;

// Ascending series for Y_0 and Y_1 (small x).
inline double y0_series(double x)
{
    const double hx = 0.5 * x;
    const double q = -hx * hx;
    double term = 1.0, harmonic = 0.0, sum = 0.0;
    for (int k = 1; k < 200; ++k) {
        term *= q / (double(k) * double(k));
        harmonic += 1.0 / k;
        const double add = -term * harmonic;
        sum += add;
        if (std::abs(add) < 1e-17 * (std::abs(sum) + 1e-300)) break;
    }
    return 2.0 / std::numbers::pi * ((std::log(hx) + kEulerGamma) * j_series(0, x) + sum);
}

inline double y1_series(double x)
{
    // Y_1 = -2/(pi x) + (2/pi) ln(x/2) J_1
    //       - (1/pi) sum_k (-1)^k (psi(k+1) + psi(k+2)) (x/2)^{2k+1} / (k!(k+1)!)
    const double hx = 0.5 * x;
    const double q = -hx * hx;
    double term = hx;                 // (x/2)^{2k+1}/(k!(k+1)!) * (-1)^k at k = 0
    double psi1 = -kEulerGamma;       // psi(k+1)
    double psi2 = 1.0 - kEulerGamma;  // psi(k+2)
    double sum = term * (psi1 + psi2);
    for (int k = 1; k < 200; ++k) {
        term *= q / (double(k) * double(k + 1));
        psi1 += 1.0 / k;
        psi2 += 1.0 / (k + 1);
        const double add = term * (psi1 + psi2);
        sum += add;
        if (std::abs(add) < 1e-17 * std::abs(sum)) break;
    }
    return -2.0 / (std::numbers::pi * x) + 2.0 / std::numbers::pi * std::log(hx) * j_series(1, x) -
           sum / std::numbers::pi;
}

// Neumann series for Y_0, Y_1 from a backward J sequence of sufficient length.
inline void y01_neumann(double x, const std::vector<double>& jseq, double& y0, double& y1)
{
    const double lg = std::log(0.5 * x);
    double s0 = 0.0, s1 = 0.0;
    const int top = static_cast<int>(jseq.size()) - 1;
    for (int k = 1; 2 * k <= top; ++k) {
        const double sgn = (k % 2 == 0) ? 1.0 : -1.0;
        s0 += sgn * jseq[static_cast<std::size_t>(2 * k)] / k;
    }
    for (int k = 1; 2 * k + 1 <= top; ++k) {
        const double sgn = (k % 2 == 0) ? 1.0 : -1.0;
        s1 += sgn * (2.0 * k + 1.0) * jseq[static_cast<std::size_t>(2 * k + 1)] / (double(k) * (k + 1.0));
    }
    y0 = 2.0 / std::numbers::pi * ((lg + kEulerGamma) * jseq[0] - 2.0 * s0);
    y1 = 2.0 / std::numbers::pi * (-jseq[0] / x + (lg - (1.0 - kEulerGamma)) * jseq[1] - s1);
}

// Hankel asymptotic expansion H_m^(1)(x), valid for x >> m^2.
inline cplx hankel_asymptotic(int m, double x)
{
    const double mu = 4.0 * m * m;
    cplx sum = 1.0;
    cplx term = 1.0;
    const cplx iox(0.0, 1.0 / (8.0 * x));
    double prev = 1.0;
    for (int k = 1; k < 40; ++k) {
        const double f = mu - (2.0 * k - 1.0) * (2.0 * k - 1.0);
        term *= f * iox / double(k);
        const double mag = std::abs(term);
        if (mag > prev) break;  // divergent tail
        sum += term;
        prev = mag;
        if (mag < 1e-17) break;
    }
    const double phase = x - 0.5 * m * std::numbers::pi - 0.25 * std::numbers::pi;
    return std::sqrt(2.0 / (std::numbers::pi * x)) * std::polar(1.0, phase) * sum;
}

inline bool use_asymptotic(int m, double x) { return x > kAsymptoticMin && double(m) * m < 0.05 * x; }

inline double reflect_sign(int m) { return (m < 0 && (-m) % 2 == 1) ? -1.0 : 1.0; }

}  // namespace detail

/// Bessel function of the first kind J_m(x), x >= 0, any integer m.
inline double bessel_j(int m, double x)
{
    if (x < 0.0 || std::isnan(x)) throw std::domain_error("bessel_j: argument must be >= 0");
    const double sgn = detail::reflect_sign(m);
    m = std::abs(m);
    if (x == 0.0) return m == 0 ? 1.0 : 0.0;
    if (x <= kSeriesMax) return sgn * detail::j_series(m, x);
    if (detail::use_asymptotic(m, x)) return sgn * detail::hankel_asymptotic(m, x).real();
    return sgn * detail::j_miller(m, x)[static_cast<std::size_t>(m)];
}

/// J_m'(x) = (J_{m-1}(x) - J_{m+1}(x)) / 2.
inline double bessel_j_prime(int m, double x) { return 0.5 * (bessel_j(m - 1, x) - bessel_j(m + 1, x)); }

/// J_0..J_mmax at one argument.
inline std::vector<double> bessel_j_sequence(int mmax, double x)
{
    if (x < 0.0) throw std::domain_error("bessel_j_sequence: argument must be >= 0");
    std::vector<double> out(static_cast<std::size_t>(mmax) + 1);
    if (x == 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
        out[0] = 1.0;
        return out;
    }
    if (x <= kSeriesMax) {
        for (int m = 0; m <= mmax; ++m) out[static_cast<std::size_t>(m)] = detail::j_series(m, x);
        return out;
    }
    return detail::j_miller(mmax, x);
}

/// Y_0..Y_mmax at x > 0 via upward recurrence from Y_0, Y_1.
inline std::vector<double> bessel_y_sequence(int mmax, double x)
{
    if (!(x > 0.0)) throw std::domain_error("bessel_y: argument must be > 0");
    double y0 = 0.0, y1 = 0.0;
    if (x <= kSeriesMax) {
        y0 = detail::y0_series(x);
        y1 = detail::y1_series(x);
    } else if (x > kAsymptoticMin) {
        y0 = detail::hankel_asymptotic(0, x).imag();
        y1 = detail::hankel_asymptotic(1, x).imag();
    } else {
        detail::y01_neumann(x, detail::j_miller(static_cast<int>(x) + 60, x), y0, y1);
    }
    std::vector<double> out(static_cast<std::size_t>(std::max(mmax, 1)) + 1);
    out[0] = y0;
    out[1] = y1;
    for (int m = 1; m < mmax; ++m) {
        const double prev = out[static_cast<std::size_t>(m)];
        if (std::isinf(prev)) {
            out[static_cast<std::size_t>(m + 1)] = prev;
            continue;
        }
        out[static_cast<std::size_t>(m + 1)] = 2.0 * m / x * prev - out[static_cast<std::size_t>(m - 1)];
    }
    out.resize(static_cast<std::size_t>(mmax) + 1);
    return out;
}

/// Bessel function of the second kind Y_m(x), x > 0.
inline double bessel_y(int m, double x)
{
    const double sgn = detail::reflect_sign(m);
    m = std::abs(m);
    return sgn * bessel_y_sequence(m, x)[static_cast<std::size_t>(m)];
}

inline double bessel_y_prime(int m, double x) { return 0.5 * (bessel_y(m - 1, x) - bessel_y(m + 1, x)); }

/// Hankel function of the first kind, H_m^(1) = J_m + i Y_m.
inline cplx hankel1(int m, double x)
{
    if (!(x > 0.0)) throw std::domain_error("hankel1: argument must be > 0");
    return {bessel_j(m, x), bessel_y(m, x)};
}

inline cplx hankel1_prime(int m, double x) { return 0.5 * (hankel1(m - 1, x) - hankel1(m + 1, x)); }

/// H_0..H_mmax and their derivatives at a single argument (one pass each).
struct HankelTable {
    std::vector<cplx> value;
    std::vector<cplx> derivative;
};

inline HankelTable hankel1_table(int mmax, double x)
{
    if (!(x > 0.0)) throw std::domain_error("hankel1: argument must be > 0");
    const auto jseq = bessel_j_sequence(mmax + 1, x);
    auto yseq = bessel_y_sequence(mmax + 1, x);
    HankelTable t;
    t.value.resize(static_cast<std::size_t>(mmax) + 1);
    t.derivative.resize(static_cast<std::size_t>(mmax) + 1);
    std::vector<cplx> h(static_cast<std::size_t>(mmax) + 2);
    for (int m = 0; m <= mmax + 1; ++m) {
        double jm = jseq[static_cast<std::size_t>(m)];
        if (detail::use_asymptotic(m, x)) jm = detail::hankel_asymptotic(m, x).real();
        h[static_cast<std::size_t>(m)] = {jm, yseq[static_cast<std::size_t>(m)]};
    }
    for (int m = 0; m <= mmax; ++m) {
        t.value[static_cast<std::size_t>(m)] = h[static_cast<std::size_t>(m)];
        const cplx hm1 = m == 0 ? -h[1] : h[static_cast<std::size_t>(m - 1)];
        t.derivative[static_cast<std::size_t>(m)] = 0.5 * (hm1 - h[static_cast<std::size_t>(m + 1)]);
    }
    return t;
}

}  // namespace nonscat::special

#endif  // NONSCAT_SPECIALFUN_HPP
