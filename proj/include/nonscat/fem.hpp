#ifndef NONSCAT_FEM_HPP
#define NONSCAT_FEM_HPP

// P1 finite elements for the scattered field w = u - v on a truncating disk
// with the Fourier-Hankel Dirichlet-to-Neumann map on the outer circle:
//   int A grad w . grad phi - k^2 n w phi - int_Gamma (T w) phi
//     = -int (A - I) grad v . grad phi + k^2 int (n - 1) v phi.
// The sparse part is real; the DtN map enters as a rank-(2M+1) term U D U^T
// handled by a Woodbury update.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "nonscat/incident.hpp"
#include "nonscat/media.hpp"
#include "nonscat/mesh.hpp"
#include "nonscat/specialfun.hpp"

namespace nonscat {

namespace quad {

struct Rule {
    std::vector<std::array<double, 3>> bary;
    std::vector<double> weights;  // sum to 1
};

/// Degree 2, interior points.
inline const Rule& three_point()
{
    static const Rule r{{{2.0 / 3, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 2.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 2.0 / 3}},
                        {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    return r;
}

/// Degree 5 (Dunavant).
inline const Rule& seven_point()
{
    constexpr double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
    constexpr double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
    static const Rule r{{{1.0 / 3, 1.0 / 3, 1.0 / 3},
                         {a1, b1, b1},
                         {b1, a1, b1},
                         {b1, b1, a1},
                         {a2, b2, b2},
                         {b2, a2, b2},
                         {b2, b2, a2}},
                        {0.225, w1, w1, w1, w2, w2, w2}};
    return r;
}

}  // namespace quad

/// Truncated DtN map on r = R: T w = sum_m lambda_m w_m e^{im theta},
/// lambda_m = k H_m'(kR) / H_m(kR), realised on the ring as U D U^T with a
/// real cos/sin basis.
struct DtNOperator {
    int truncation = 0;
    double k = 0.0;
    double radius = 1.0;
    std::vector<cplx> lambda;  ///< m = 0..M
    Eigen::MatrixXd u;         ///< ring nodes x (2M+1)
    Eigen::VectorXcd d;
};

inline int default_truncation(double k, double radius) { return static_cast<int>(std::ceil(k * radius)) + 12; }

inline DtNOperator make_dtn(const Mesh& mesh, double k, int truncation)
{
    if (!(k > 0.0)) throw std::invalid_argument("make_dtn: k must be positive");
    if (truncation < static_cast<int>(std::ceil(k * mesh.radius)) + 8)
        throw std::invalid_argument("make_dtn: truncation M must be at least ceil(k R) + 8");
    DtNOperator op;
    op.truncation = truncation;
    op.k = k;
    op.radius = mesh.radius;
    const int nr = static_cast<int>(mesh.ring.size());
    const double delta = 2.0 * kPi / nr;
    const auto table = special::hankel1_table(truncation, k * mesh.radius);
    op.u.resize(nr, 2 * truncation + 1);
    op.d.resize(2 * truncation + 1);
    for (int m = 0; m <= truncation; ++m) {
        const cplx lam = k * table.derivative[static_cast<std::size_t>(m)] / table.value[static_cast<std::size_t>(m)];
        if (!(lam.imag() > 0.0)) throw std::runtime_error("make_dtn: Im lambda_m <= 0 at m = " + std::to_string(m));
        op.lambda.push_back(lam);
        // int hat_i e^{im theta} dtheta = delta sinc^2(m delta / 2) e^{im theta_i}
        const double x = 0.5 * m * delta;
        const double s = m == 0 ? 1.0 : std::pow(std::sin(x) / x, 2);
        for (int i = 0; i < nr; ++i) {
            const double th = mesh.ring_theta[static_cast<std::size_t>(i)];
            if (m == 0) {
                op.u(i, 0) = delta * s;
            } else {
                op.u(i, 2 * m - 1) = delta * s * std::cos(m * th);
                op.u(i, 2 * m) = delta * s * std::sin(m * th);
            }
        }
        if (m == 0) {
            op.d(0) = -mesh.radius / (2.0 * kPi) * lam;
        } else {
            op.d(2 * m - 1) = op.d(2 * m) = -mesh.radius / kPi * lam;
        }
    }
    return op;
}

class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Real sparse part: stiffness - k^2 mass. A null medium means free space.
/// k = 0 gives the stiffness matrix alone.
inline Eigen::SparseMatrix<double> assemble_matrix(const Mesh& mesh, const MediumSpec* medium, double k)
{
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 9);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tr = mesh.triangles[static_cast<std::size_t>(t)];
        const Vec2 &p0 = mesh.vertices[tr[0]], &p1 = mesh.vertices[tr[1]], &p2 = mesh.vertices[tr[2]];
        const double area = 0.5 * cross2(p1 - p0, p2 - p0);
        if (!(area > 0.0)) throw AssemblyError("assemble: degenerate or inverted triangle");
        // grad of barycentric coordinate i is perp(opposite edge) / (2 area)
        std::array<Vec2, 3> g;
        g[0] = Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / (2 * area);
        g[1] = Vec2(p2.y() - p0.y(), p0.x() - p2.x()) / (2 * area);
        g[2] = Vec2(p0.y() - p1.y(), p1.x() - p0.x()) / (2 * area);

        Mat2 a_int = area * Mat2::Identity();
        Eigen::Matrix3d mass;
        const bool in = medium && mesh.inside[static_cast<std::size_t>(t)];
        if (!in) {
            mass << 2, 1, 1, 1, 2, 1, 1, 1, 2;
            mass *= area / 12.0;
        } else {
            const auto& rule = medium->coefficients.piecewise_constant ? quad::three_point() : quad::seven_point();
            a_int.setZero();
            mass.setZero();
            for (std::size_t q = 0; q < rule.weights.size(); ++q) {
                const auto& l = rule.bary[q];
                const Vec2 x = l[0] * p0 + l[1] * p1 + l[2] * p2;
                const Mat2 a = medium->a_inside(x);
                if (ellipticity_constant(a) > medium->coefficients.c0 * (1 + 1e-9))
                    throw AssemblyError("assemble: ellipticity of A violated at (" + std::to_string(x.x()) + ", " +
                                        std::to_string(x.y()) + ")");
                const double wq = area * rule.weights[q];
                a_int += wq * a;
                const double n = medium->n_inside(x);
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) mass(i, j) += wq * n * l[static_cast<std::size_t>(i)] * l[static_cast<std::size_t>(j)];
            }
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double kij = g[static_cast<std::size_t>(i)].dot(a_int * g[static_cast<std::size_t>(j)]) - k * k * mass(i, j);
                trip.emplace_back(tr[static_cast<std::size_t>(i)], tr[static_cast<std::size_t>(j)], kij);
            }
    }
    Eigen::SparseMatrix<double> mat(mesh.num_vertices(), mesh.num_vertices());
    mat.setFromTriplets(trip.begin(), trip.end());
    return mat;
}

/// Contrast-source load, supported on inside triangles.
inline Eigen::VectorXcd assemble_load(const Mesh& mesh, const MediumSpec& medium, const IncidentField& v)
{
    const double k = v.k();
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(mesh.num_vertices());
    const auto& rule = medium.coefficients.piecewise_constant ? quad::three_point() : quad::seven_point();
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        if (!mesh.inside[static_cast<std::size_t>(t)]) continue;
        const auto& tr = mesh.triangles[static_cast<std::size_t>(t)];
        const Vec2 &p0 = mesh.vertices[tr[0]], &p1 = mesh.vertices[tr[1]], &p2 = mesh.vertices[tr[2]];
        const double area = 0.5 * cross2(p1 - p0, p2 - p0);
        std::array<Vec2, 3> g;
        g[0] = Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / (2 * area);
        g[1] = Vec2(p2.y() - p0.y(), p0.x() - p2.x()) / (2 * area);
        g[2] = Vec2(p0.y() - p1.y(), p1.x() - p0.x()) / (2 * area);
        for (std::size_t q = 0; q < rule.weights.size(); ++q) {
            const auto& l = rule.bary[q];
            const Vec2 x = l[0] * p0 + l[1] * p1 + l[2] * p2;
            const auto e = v.eval(x);
            const CVec2 flux = (medium.a_inside(x) - Mat2::Identity()).cast<cplx>() * e.gradient;
            const cplx src = k * k * (medium.n_inside(x) - 1.0) * e.value;
            const double wq = area * rule.weights[q];
            for (int i = 0; i < 3; ++i)
                b(tr[static_cast<std::size_t>(i)]) +=
                    wq * (-(flux(0) * g[static_cast<std::size_t>(i)].x() + flux(1) * g[static_cast<std::size_t>(i)].y()) +
                          src * l[static_cast<std::size_t>(i)]);
        }
    }
    return b;
}

struct LinearSystem {
    Eigen::SparseMatrix<double> matrix;  ///< sparse part K
    DtNOperator dtn;                     ///< S = K + U_ring D U_ring^T
    std::vector<int> ring;
    Eigen::VectorXcd rhs;
};

inline LinearSystem assemble(const MediumSpec& medium, const IncidentField& v, const Mesh& mesh, int truncation)
{
    LinearSystem s;
    s.matrix = assemble_matrix(mesh, &medium, v.k());
    s.dtn = make_dtn(mesh, v.k(), truncation);
    s.ring = mesh.ring;
    s.rhs = assemble_load(mesh, medium, v);
    return s;
}

class SingularSystem : public std::runtime_error {
public:
    SingularSystem(const std::string& what, double cond) : std::runtime_error(what), condition(cond) {}
    double condition;
};

struct SolveReport {
    double residual = 0.0;  ///< ||S x - b|| / ||b||
    int refinements = 0;
    double capacitance_condition = 0.0;
};

/// Factorises K once; solves S x = b for any number of right-hand sides.
class Solver {
public:
    explicit Solver(const LinearSystem& sys) : k_(sys.matrix), dtn_(sys.dtn), ring_(sys.ring)
    {
        lu_.analyzePattern(k_);
        lu_.factorize(k_);
        if (lu_.info() != Eigen::Success)
            throw SingularSystem("solve: sparse factorization failed (k at a resonance of the truncated problem?)",
                                 std::numeric_limits<double>::infinity());
        const int n = static_cast<int>(k_.rows());
        const int r = static_cast<int>(dtn_.u.cols());
        Eigen::MatrixXd ufull = Eigen::MatrixXd::Zero(n, r);
        for (std::size_t i = 0; i < ring_.size(); ++i) ufull.row(ring_[i]) = dtn_.u.row(static_cast<Eigen::Index>(i));
        kinv_u_ = lu_.solve(ufull);
        Eigen::MatrixXcd cap = (ufull.transpose() * kinv_u_).cast<cplx>();
        for (int j = 0; j < r; ++j) cap(j, j) += 1.0 / dtn_.d(j);
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(cap).singularValues();
        cond_ = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
        cap_lu_ = cap.partialPivLu();
    }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const
    {
        Eigen::VectorXcd y = k_.cast<cplx>() * x;
        Eigen::VectorXcd ring_x(static_cast<Eigen::Index>(ring_.size()));
        for (std::size_t i = 0; i < ring_.size(); ++i) ring_x(static_cast<Eigen::Index>(i)) = x(ring_[i]);
        const Eigen::VectorXcd coef = dtn_.d.cwiseProduct(dtn_.u.transpose().cast<cplx>() * ring_x);
        const Eigen::VectorXcd back = dtn_.u.cast<cplx>() * coef;
        for (std::size_t i = 0; i < ring_.size(); ++i) y(ring_[i]) += back(static_cast<Eigen::Index>(i));
        return y;
    }

    Eigen::VectorXcd solve(const Eigen::VectorXcd& b, SolveReport* report = nullptr) const
    {
        SolveReport rep;
        rep.capacitance_condition = cond_;
        const double bn = b.norm();
        Eigen::VectorXcd x = Eigen::VectorXcd::Zero(b.size());
        if (bn == 0.0) {
            if (report) *report = rep;
            return x;
        }
        x = woodbury(b);
        Eigen::VectorXcd r = b - apply(x);
        rep.residual = r.norm() / bn;
        while (rep.residual > 1e-12 && rep.refinements < 3) {
            x += woodbury(r);
            r = b - apply(x);
            rep.residual = r.norm() / bn;
            ++rep.refinements;
        }
        if (report) *report = rep;
        if (!(rep.residual < 1e-9))
            throw SingularSystem("solve: relative residual " + std::to_string(rep.residual) + " above 1e-9", cond_);
        return x;
    }

    double capacitance_condition() const { return cond_; }

private:
    Eigen::VectorXcd kinv(const Eigen::VectorXcd& b) const
    {
        const Eigen::VectorXd re = lu_.solve(Eigen::VectorXd(b.real()));
        const Eigen::VectorXd im = lu_.solve(Eigen::VectorXd(b.imag()));
        Eigen::VectorXcd out(b.size());
        out.real() = re;
        out.imag() = im;
        return out;
    }

    Eigen::VectorXcd woodbury(const Eigen::VectorXcd& b) const
    {
        // S^{-1} = K^{-1} - K^{-1} U (D^{-1} + U^T K^{-1} U)^{-1} U^T K^{-1}
        const Eigen::VectorXcd y = kinv(b);
        Eigen::VectorXcd uy = Eigen::VectorXcd::Zero(dtn_.u.cols());
        for (std::size_t i = 0; i < ring_.size(); ++i) uy += dtn_.u.row(static_cast<Eigen::Index>(i)).transpose().cast<cplx>() * y(ring_[i]);
        const Eigen::VectorXcd s = cap_lu_.solve(uy);
        return y - kinv_u_.cast<cplx>() * s;
    }

    Eigen::SparseMatrix<double> k_;
    DtNOperator dtn_;
    std::vector<int> ring_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
    Eigen::MatrixXd kinv_u_;
    Eigen::PartialPivLU<Eigen::MatrixXcd> cap_lu_;
    double cond_ = 0.0;
};

inline Eigen::VectorXcd solve(const LinearSystem& sys, SolveReport* report = nullptr)
{
    return Solver(sys).solve(sys.rhs, report);
}

struct FarField {
    std::vector<double> theta;
    std::vector<cplx> values;
    double norm = 0.0;  ///< L^2(S^1)
    bool aliasing_warning = false;
};

/// u_inf(theta) = sum_m c_m gamma_m e^{im theta}, with c_m the trapezoid Fourier
/// coefficients of w on the ring and gamma_m = sqrt(2/(pi k)) e^{-i(m pi/2 + pi/4)} / H_m(kR).
/// The pattern is referred to the origin (phase factor e^{-ik xhat.c} for an
/// off-centre truncating disk).
inline FarField far_field(const Mesh& mesh, const Eigen::VectorXcd& w, double k, int truncation, int samples = 256)
{
    FarField ff;
    const int nr = static_cast<int>(mesh.ring.size());
    ff.aliasing_warning = nr < 8 * truncation;
    const auto table = special::hankel1_table(truncation, k * mesh.radius);
    std::vector<cplx> coef(static_cast<std::size_t>(2 * truncation + 1));
    for (int m = -truncation; m <= truncation; ++m) {
        cplx c = 0.0;
        for (int i = 0; i < nr; ++i) c += w(mesh.ring[static_cast<std::size_t>(i)]) * std::polar(1.0, -m * mesh.ring_theta[static_cast<std::size_t>(i)]);
        c /= double(nr);
        const int am = std::abs(m);
        cplx hm = table.value[static_cast<std::size_t>(am)];
        if (m < 0 && (am % 2)) hm = -hm;
        const cplx gamma = std::sqrt(2.0 / (kPi * k)) * std::polar(1.0, -(m * kPi / 2 + kPi / 4)) / hm;
        coef[static_cast<std::size_t>(m + truncation)] = c * gamma;
    }
    double sum = 0.0;
    for (int j = 0; j < samples; ++j) {
        const double th = 2.0 * kPi * j / samples;
        cplx u = 0.0;
        for (int m = -truncation; m <= truncation; ++m) u += coef[static_cast<std::size_t>(m + truncation)] * std::polar(1.0, m * th);
        u *= std::polar(1.0, -k * (std::cos(th) * mesh.center.x() + std::sin(th) * mesh.center.y()));
        ff.theta.push_back(th);
        ff.values.push_back(u);
        sum += std::norm(u);
    }
    ff.norm = std::sqrt(2.0 * kPi / samples * sum);
    return ff;
}

/// Relative L^2(S^1) distance between two far fields on the same grid.
inline double far_field_distance(const FarField& a, const FarField& b)
{
    if (a.values.size() != b.values.size()) throw std::invalid_argument("far fields on different grids");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += std::norm(a.values[i] - b.values[i]);
    return std::sqrt(2.0 * kPi / a.values.size() * s);
}

/// Separation-of-variables far field of a radially stratified disk centred at
/// the origin, for a plane wave at angle `incidence`. `coeff(m)` returns c_m.
template <class Coeff>
FarField series_far_field(Coeff coeff, double k, double incidence, int truncation, int samples = 256)
{
    FarField ff;
    std::vector<cplx> c;
    for (int m = 0; m <= truncation; ++m) c.push_back(coeff(m));
    double sum = 0.0;
    for (int j = 0; j < samples; ++j) {
        const double th = 2.0 * kPi * j / samples;
        cplx u = c[0];
        for (int m = 1; m <= truncation; ++m) u += 2.0 * c[static_cast<std::size_t>(m)] * std::cos(m * (th - incidence));
        u *= std::sqrt(2.0 / (kPi * k)) * std::polar(1.0, -kPi / 4);
        ff.theta.push_back(th);
        ff.values.push_back(u);
        sum += std::norm(u);
    }
    ff.norm = std::sqrt(2.0 * kPi / samples * sum);
    return ff;
}

struct ScatterSolution {
    const Mesh* mesh = nullptr;
    Eigen::VectorXcd w;
    FarField far;
    SolveReport report;
};

struct TransmissionResidual {
    double max_jump = 0.0;  ///< max |u - v| on the boundary samples
    double max_flux = 0.0;  ///< max |nu^T A grad u - d_nu v|
    int samples = 0;
};

/// Cauchy-data mismatch of u = v + w_h on the inclusion boundary; gradients
/// are taken from the inside triangle (one-sided).
inline TransmissionResidual transmission_residual(const Mesh& mesh, const Eigen::VectorXcd& w, const IncidentField& v,
                                                  const MediumSpec& medium, int samples)
{
    if (!mesh.interface_conforming) throw std::invalid_argument("transmission_residual: mesh must be interface-conforming");
    const TriangleLocator loc(mesh, true);
    TransmissionResidual res;
    for (const auto& bp : medium.domain.boundary_samples(samples)) {
        if (bp.at_vertex) continue;
        const Vec2 probe = bp.point - 1e-9 * mesh.h * bp.normal;
        const auto [t, l] = loc.find(probe);
        if (t < 0) throw std::runtime_error("transmission_residual: boundary point not covered by inside triangles");
        const auto& tr = mesh.triangles[static_cast<std::size_t>(t)];
        const Vec2 &p0 = mesh.vertices[tr[0]], &p1 = mesh.vertices[tr[1]], &p2 = mesh.vertices[tr[2]];
        const double area = 0.5 * cross2(p1 - p0, p2 - p0);
        const std::array<Vec2, 3> g{Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / (2 * area),
                                    Vec2(p2.y() - p0.y(), p0.x() - p2.x()) / (2 * area),
                                    Vec2(p0.y() - p1.y(), p1.x() - p0.x()) / (2 * area)};
        cplx wval = 0.0;
        CVec2 wgrad = CVec2::Zero();
        for (int i = 0; i < 3; ++i) {
            wval += l[static_cast<std::size_t>(i)] * w(tr[static_cast<std::size_t>(i)]);
            wgrad += w(tr[static_cast<std::size_t>(i)]) * g[static_cast<std::size_t>(i)].cast<cplx>();
        }
        const auto e = v.eval(bp.point);
        const Mat2 a = medium.a_inside(bp.point);
        const CVec2 grad_u = e.gradient + wgrad;
        const cplx flux = (a * bp.normal).cast<cplx>().dot(grad_u) - bp.normal.cast<cplx>().dot(e.gradient);
        res.max_jump = std::max(res.max_jump, std::abs(wval));
        res.max_flux = std::max(res.max_flux, std::abs(flux));
        ++res.samples;
    }
    return res;
}

inline void write_solution_csv(std::ostream& out, const Mesh& mesh, const Eigen::VectorXcd& w)
{
    out << "x,y,re_w,im_w\n" << std::setprecision(17);
    for (int i = 0; i < mesh.num_vertices(); ++i)
        out << mesh.vertices[static_cast<std::size_t>(i)].x() << ',' << mesh.vertices[static_cast<std::size_t>(i)].y() << ','
            << w(i).real() << ',' << w(i).imag() << '\n';
}

inline void write_far_field_csv(std::ostream& out, const FarField& ff)
{
    out << "theta,re_u,im_u\n" << std::setprecision(17);
    for (std::size_t i = 0; i < ff.values.size(); ++i)
        out << ff.theta[i] << ',' << ff.values[i].real() << ',' << ff.values[i].imag() << '\n';
}

}  // namespace nonscat

#endif  // NONSCAT_FEM_HPP
