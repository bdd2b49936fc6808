#ifndef NONSCAT_INCIDENT_HPP
#define NONSCAT_INCIDENT_HPP

// Entire solutions of the free Helmholtz equation used as incident fields.

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "nonscat/geometry.hpp"
#include "nonscat/specialfun.hpp"

namespace nonscat {

/// Samples g(xi_j) of a Herglotz density on M uniform directions
/// theta_j = 2 pi j / M with trapezoid weights 2 pi / M.
struct HerglotzDensity {
    std::vector<cplx> values;

    int size() const { return static_cast<int>(values.size()); }
    double theta(int j) const { return 2.0 * kPi * j / size(); }
    double weight() const { return 2.0 * kPi / size(); }
    Vec2 direction(int j) const { return {std::cos(theta(j)), std::sin(theta(j))}; }

    static HerglotzDensity from_function(int m, const std::function<cplx(double)>& g)
    {
        HerglotzDensity d;
        d.values.resize(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) d.values[static_cast<std::size_t>(j)] = g(2.0 * kPi * j / m);
        return d;
    }

    void write_csv(const std::string& path) const
    {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "theta,re_g,im_g\n" << std::setprecision(17);
        for (int j = 0; j < size(); ++j)
            out << theta(j) << ',' << values[static_cast<std::size_t>(j)].real() << ','
                << values[static_cast<std::size_t>(j)].imag() << '\n';
    }

    static HerglotzDensity read_csv(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read " + path);
        std::string line;
        std::getline(in, line);
        HerglotzDensity d;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            double th = 0, re = 0, im = 0;
            char c1 = 0, c2 = 0;
            if (!(ss >> th >> c1 >> re >> c2 >> im)) throw std::runtime_error("malformed density row: " + line);
            d.values.emplace_back(re, im);
        }
        return d;
    }
};

struct PlaneWave {
    Vec2 direction = Vec2(1, 0);
};

/// (i/4) H_0^(1)(k |x - x0|).
struct PointSource {
    Vec2 source = Vec2::Zero();
};

/// J_m(k r) e^{i m theta}.
struct FourierBessel {
    int order = 0;
};

/// cos(p pi x1) cos(q pi x2) or sin(p pi x1) sin(q pi x2); an entire
/// solution exactly when k^2 = (p^2 + q^2) pi^2.
struct SquareMode {
    int p = 1;
    int q = 1;
    bool sine = false;
};

struct Herglotz {
    HerglotzDensity density;
};

class IncidentField {
public:
    using Kind = std::variant<PlaneWave, PointSource, FourierBessel, Herglotz, SquareMode>;

    IncidentField(Kind kind, double k) : kind_(std::move(kind)), k_(k)
    {
        if (!(k > 0.0)) throw std::invalid_argument("wave number must be positive");
        if (auto* p = std::get_if<PlaneWave>(&kind_)) {
            const double n = p->direction.norm();
            if (n == 0.0) throw std::invalid_argument("plane wave direction must be nonzero");
            p->direction /= n;
        }
        if (auto* s = std::get_if<SquareMode>(&kind_)) {
            const double k2 = (s->p * s->p + s->q * s->q) * kPi * kPi;
            if (std::abs(k2 - k * k) > 1e-9 * k2)
                throw std::invalid_argument("square mode requires k^2 = (p^2 + q^2) pi^2");
        }
    }

    static IncidentField plane(Vec2 dir, double k) { return {PlaneWave{dir}, k}; }
    static IncidentField point_source(Vec2 x0, double k) { return {PointSource{x0}, k}; }
    static IncidentField fourier_bessel(int m, double k) { return {FourierBessel{m}, k}; }
    static IncidentField herglotz(HerglotzDensity g, double k) { return {Herglotz{std::move(g)}, k}; }
    static IncidentField square_mode(int p, int q, bool sine)
    {
        return {SquareMode{p, q, sine}, kPi * std::sqrt(double(p * p + q * q))};
    }

    double k() const { return k_; }
    const Kind& kind() const { return kind_; }

    struct Eval {
        cplx value;
        CVec2 gradient;
    };

    Eval eval(const Vec2& x) const
    {
        return std::visit([&](const auto& f) { return eval_kind(f, x); }, kind_);
    }

    cplx value(const Vec2& x) const { return eval(x).value; }
    CVec2 gradient(const Vec2& x) const { return eval(x).gradient; }

    /// Trace of the Hessian; a five-point Laplacian with one Richardson step
    /// is used only at the origin of a Fourier-Bessel mode.
    cplx laplacian(const Vec2& x) const
    {
        if (auto* f = std::get_if<FourierBessel>(&kind_); f && x.norm() < 1e-8) {
            auto fd = [&](double h) {
                return (value(x + Vec2(h, 0)) + value(x - Vec2(h, 0)) + value(x + Vec2(0, h)) + value(x - Vec2(0, h)) -
                        4.0 * value(x)) /
                       (h * h);
            };
            const double h = 2e-3 / std::max(1.0, k_);
            return (16.0 * fd(0.5 * h) - fd(h)) / 15.0;
        }
        return hessian(x).trace();
    }

    /// Hessian of the value. Bessel second derivatives come from
    /// J'' = (J_{m-2} - 2 J_m + J_{m+2}) / 4, not from the ODE.
    CMat2 hessian(const Vec2& x) const
    {
        if (auto* p = std::get_if<PlaneWave>(&kind_)) {
            const Vec2& d = p->direction;
            return -k_ * k_ * value(x) * (d * d.transpose()).cast<cplx>();
        }
        if (auto* hg = std::get_if<Herglotz>(&kind_)) {
            CMat2 h = CMat2::Zero();
            const auto& g = hg->density;
            for (int j = 0; j < g.size(); ++j) {
                const Vec2 d = g.direction(j);
                const cplx e = g.weight() * g.values[static_cast<std::size_t>(j)] * std::exp(cplx(0, k_ * d.dot(x)));
                h += -k_ * k_ * e * (d * d.transpose()).cast<cplx>();
            }
            return h;
        }
        if (auto* s = std::get_if<SquareMode>(&kind_)) {
            const double a = s->p * kPi, b = s->q * kPi;
            const double ca = std::cos(a * x.x()), sa = std::sin(a * x.x());
            const double cb = std::cos(b * x.y()), sb = std::sin(b * x.y());
            CMat2 h;
            if (s->sine)
                h << -a * a * sa * sb, a * b * ca * cb, a * b * ca * cb, -b * b * sa * sb;
            else
                h << -a * a * ca * cb, a * b * sa * sb, a * b * sa * sb, -b * b * ca * cb;
            return h;
        }
        if (auto* ps = std::get_if<PointSource>(&kind_)) {
            const Vec2 d = x - ps->source;
            const double r = d.norm();
            if (r < 1e-12) throw std::domain_error("point source evaluated at its singularity");
            const cplx c(0.0, 0.25);
            const cplx h0 = special::hankel1(0, k_ * r), h1 = special::hankel1(1, k_ * r);
            const cplx f1 = -c * k_ * h1;                        // f'(r)
            const cplx f2 = -c * k_ * k_ * (h0 - h1 / (k_ * r));  // f''(r)
            const Vec2 e = d / r;
            const Mat2 ee = e * e.transpose();
            return f2 * ee.cast<cplx>() + (f1 / r) * (Mat2::Identity() - ee).cast<cplx>();
        }
        const int m = std::get<FourierBessel>(kind_).order;
        const double r = x.norm();
        if (r < 1e-8) {
            // J_m(kr) e^{im theta} is a polynomial of degree |m| near 0 to leading order
            const double h = 1e-4;
            CMat2 out;
            out.col(0) = (gradient(x + Vec2(h, 0)) - gradient(x - Vec2(h, 0))) / (2 * h);
            out.col(1) = (gradient(x + Vec2(0, h)) - gradient(x - Vec2(0, h))) / (2 * h);
            return 0.5 * (out + out.transpose());
        }
        const double kr = k_ * r;
        const double j = special::bessel_j(m, kr), dj = special::bessel_j_prime(m, kr);
        const double d2j = 0.25 * (special::bessel_j(m - 2, kr) - 2.0 * j + special::bessel_j(m + 2, kr));
        const cplx e = std::polar(1.0, m * std::atan2(x.y(), x.x()));
        const cplx im(0.0, m);
        // polar frame components
        const cplx hrr = k_ * k_ * d2j * e;
        const cplx hrt = im * k_ * dj * e / r - im * j * e / (r * r);
        const cplx htt = -double(m * m) * j * e / (r * r) + k_ * dj * e / r;
        Eigen::Matrix2d rot;
        rot << x.x() / r, -x.y() / r, x.y() / r, x.x() / r;
        CMat2 hp;
        hp << hrr, hrt, hrt, htt;
        return rot.cast<cplx>() * hp * rot.transpose().cast<cplx>();
    }

private:
    Eval eval_kind(const PlaneWave& p, const Vec2& x) const
    {
        const cplx v = std::exp(cplx(0.0, k_ * p.direction.dot(x)));
        return {v, (cplx(0.0, k_) * v) * p.direction.cast<cplx>()};
    }

    Eval eval_kind(const PointSource& s, const Vec2& x) const
    {
        const Vec2 d = x - s.source;
        const double r = d.norm();
        if (r < 1e-12) throw std::domain_error("point source evaluated at its singularity");
        const cplx h0 = special::hankel1(0, k_ * r);
        const cplx h1 = special::hankel1(1, k_ * r);
        const cplx c(0.0, 0.25);
        // d/dr H_0(kr) = -k H_1(kr)
        return {c * h0, (-c * k_ * h1 / r) * d.cast<cplx>()};
    }

    Eval eval_kind(const FourierBessel& f, const Vec2& x) const
    {
        const int m = f.order;
        const double r = x.norm();
        if (r < 1e-14) {
            const cplx v = m == 0 ? cplx(1.0) : cplx(0.0);
            CVec2 g = CVec2::Zero();
            if (m == 1) g << 0.5 * k_, cplx(0.0, 0.5 * k_);
            if (m == -1) g << -0.5 * k_, cplx(0.0, 0.5 * k_);
            return {v, g};
        }
        const double th = std::atan2(x.y(), x.x());
        const double jm = special::bessel_j(m, k_ * r);
        const double djm = special::bessel_j_prime(m, k_ * r);
        const cplx e = std::polar(1.0, m * th);
        const cplx dr = k_ * djm * e;
        const cplx dth_over_r = cplx(0.0, m) * jm * e / r;
        const Vec2 er = x / r, et(-er.y(), er.x());
        return {jm * e, dr * er.cast<cplx>() + dth_over_r * et.cast<cplx>()};
    }

    Eval eval_kind(const Herglotz& h, const Vec2& x) const
    {
        const auto& g = h.density;
        cplx v = 0.0;
        CVec2 grad = CVec2::Zero();
        for (int j = 0; j < g.size(); ++j) {
            const Vec2 d = g.direction(j);
            const cplx e = g.weight() * g.values[static_cast<std::size_t>(j)] * std::exp(cplx(0, k_ * d.dot(x)));
            v += e;
            grad += (cplx(0, k_) * e) * d.cast<cplx>();
        }
        return {v, grad};
    }

    Eval eval_kind(const SquareMode& s, const Vec2& x) const
    {
        const double a = s.p * kPi, b = s.q * kPi;
        const double ca = std::cos(a * x.x()), sa = std::sin(a * x.x());
        const double cb = std::cos(b * x.y()), sb = std::sin(b * x.y());
        if (s.sine) return {sa * sb, CVec2(a * ca * sb, b * sa * cb)};
        return {ca * cb, CVec2(-a * sa * cb, -b * ca * sb)};
    }

    Kind kind_;
    double k_;
};

/// Boundary Cauchy-type samples (v, grad v) to be matched by a Herglotz fit.
struct BoundaryTarget {
    std::vector<Vec2> points;
    std::vector<cplx> values;
    std::vector<CVec2> gradients;

    static BoundaryTarget sample(const IncidentField& v, const std::vector<Vec2>& pts)
    {
        BoundaryTarget t;
        t.points = pts;
        for (const auto& p : pts) {
            const auto e = v.eval(p);
            t.values.push_back(e.value);
            t.gradients.push_back(e.gradient);
        }
        return t;
    }
};

struct HerglotzFit {
    HerglotzDensity density;
    double residual = 0.0;           ///< ||B g - t|| / ||t|| in the discrete C^1 norm
    double absolute_residual = 0.0;
    int rank = 0;
};

/// Least-squares Herglotz density reproducing value and gradient samples,
/// with Tikhonov ridge `ridge` on sum |g_j|^2.
inline HerglotzFit herglotz_fit(const BoundaryTarget& target, double k, int m, double ridge)
{
    if (ridge < 0.0) throw std::invalid_argument("herglotz_fit: ridge must be >= 0");
    if (m < 1) throw std::invalid_argument("herglotz_fit: need at least one direction");
    const int ns = static_cast<int>(target.points.size());
    if (ns < 2 * m) throw std::invalid_argument("herglotz_fit: need at least 2M boundary samples");

    const int rows = 3 * ns + (ridge > 0.0 ? m : 0);
    Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(rows, m);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(rows);
    const double w = 2.0 * kPi / m;
    for (int i = 0; i < ns; ++i) {
        const Vec2& x = target.points[static_cast<std::size_t>(i)];
        for (int j = 0; j < m; ++j) {
            const double th = 2.0 * kPi * j / m;
            const Vec2 d(std::cos(th), std::sin(th));
            const cplx e = w * std::exp(cplx(0, k * d.dot(x)));
            b(3 * i, j) = e;
            b(3 * i + 1, j) = cplx(0, k) * d.x() * e;
            b(3 * i + 2, j) = cplx(0, k) * d.y() * e;
        }
        rhs(3 * i) = target.values[static_cast<std::size_t>(i)];
        rhs(3 * i + 1) = target.gradients[static_cast<std::size_t>(i)](0);
        rhs(3 * i + 2) = target.gradients[static_cast<std::size_t>(i)](1);
    }
    if (ridge > 0.0)
        for (int j = 0; j < m; ++j) b(3 * ns + j, j) = std::sqrt(ridge);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(b);
    qr.setThreshold(1e-13);
    HerglotzFit fit;
    fit.rank = static_cast<int>(qr.rank());
    if (ridge == 0.0 && fit.rank < m)
        throw std::runtime_error("herglotz_fit: rank-deficient system (rank " + std::to_string(fit.rank) + " < " +
                                 std::to_string(m) + "); set a positive ridge");
    const Eigen::VectorXcd g = qr.solve(rhs);
    fit.density.values.assign(g.data(), g.data() + m);
    const Eigen::VectorXcd r = (b * g - rhs).head(3 * ns);
    fit.absolute_residual = r.norm();
    fit.residual = fit.absolute_residual / rhs.head(3 * ns).norm();
    return fit;
}

}  // namespace nonscat

#endif  // NONSCAT_INCIDENT_HPP
