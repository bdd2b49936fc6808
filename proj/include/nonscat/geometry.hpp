#ifndef NONSCAT_GEOMETRY_HPP
#define NONSCAT_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace nonscat {

using cplx = std::complex<double>;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using CVec2 = Eigen::Vector2cd;
using CMat2 = Eigen::Matrix2cd;

inline constexpr double kPi = std::numbers::pi;

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Rotation of the plane by angle `theta` (counterclockwise).
inline Mat2 rotation(double theta)
{
    Mat2 r;
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return r;
}

struct BoundaryPoint {
    double t = 0.0;  ///< parameter in [0, 1)
    Vec2 point = Vec2::Zero();
    Vec2 normal = Vec2::Zero();  ///< outward unit normal
    bool at_vertex = false;      ///< normal is a one-sided limit
};

struct DiskShape {
    Vec2 center = Vec2::Zero();
    double radius = 1.0;
};

/// Axis-aligned square [corner, corner + side]^2.
struct SquareShape {
    Vec2 corner = Vec2::Zero();
    double side = 1.0;
};

struct PolygonShape {
    std::vector<Vec2> vertices;  ///< counterclockwise
};

/// x = center + rho(theta) (cos theta, sin theta).
struct StarShape {
    Vec2 center = Vec2::Zero();
    std::function<double(double)> rho;
    std::function<double(double)> drho;
};

/// A bounded inclusion Omega with its boundary sampler.
class Domain {
public:
    using Shape = std::variant<DiskShape, SquareShape, PolygonShape, StarShape>;

    Domain() = default;
    explicit Domain(Shape shape) : shape_(std::move(shape))
    {
        if (auto* p = std::get_if<PolygonShape>(&shape_)) {
            if (p->vertices.size() < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
            if (signed_area(p->vertices) <= 0.0)
                throw std::invalid_argument("polygon vertices must be counterclockwise with positive area");
        }
        if (auto* d = std::get_if<DiskShape>(&shape_); d && d->radius <= 0.0)
            throw std::invalid_argument("disk radius must be positive");
        if (auto* s = std::get_if<SquareShape>(&shape_); s && s->side <= 0.0)
            throw std::invalid_argument("square side must be positive");
    }

    static Domain disk(Vec2 c, double r) { return Domain(DiskShape{c, r}); }
    static Domain square(Vec2 corner, double side) { return Domain(SquareShape{corner, side}); }
    static Domain unit_square() { return square(Vec2(0, 0), 1.0); }
    static Domain polygon(std::vector<Vec2> v) { return Domain(PolygonShape{std::move(v)}); }
    static Domain star(Vec2 c, std::function<double(double)> rho, std::function<double(double)> drho)
    {
        return Domain(StarShape{c, std::move(rho), std::move(drho)});
    }

    const Shape& shape() const { return shape_; }
    bool is_polygonal() const
    {
        return std::holds_alternative<SquareShape>(shape_) || std::holds_alternative<PolygonShape>(shape_);
    }

    static double signed_area(const std::vector<Vec2>& v)
    {
        double a = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) a += cross2(v[i], v[(i + 1) % v.size()]);
        return 0.5 * a;
    }

    /// Vertices for polygonal kinds (square corners listed counterclockwise).
    std::vector<Vec2> corners() const
    {
        if (auto* s = std::get_if<SquareShape>(&shape_)) {
            const Vec2 c = s->corner;
            return {c, c + Vec2(s->side, 0), c + Vec2(s->side, s->side), c + Vec2(0, s->side)};
        }
        if (auto* p = std::get_if<PolygonShape>(&shape_)) return p->vertices;
        return {};
    }

    /// Closed-set membership (boundary counts as inside).
    bool contains(const Vec2& x) const
    {
        return std::visit(
            [&](const auto& s) -> bool {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, DiskShape>) {
                    return (x - s.center).norm() <= s.radius * (1.0 + 1e-14);
                } else if constexpr (std::is_same_v<S, SquareShape>) {
                    const double tol = 1e-14 * s.side;
                    return x.x() >= s.corner.x() - tol && x.x() <= s.corner.x() + s.side + tol &&
                           x.y() >= s.corner.y() - tol && x.y() <= s.corner.y() + s.side + tol;
                } else if constexpr (std::is_same_v<S, PolygonShape>) {
                    return polygon_contains(s.vertices, x);
                } else {
                    const Vec2 d = x - s.center;
                    const double r = d.norm();
                    if (r == 0.0) return true;
                    return r <= s.rho(std::atan2(d.y(), d.x())) * (1.0 + 1e-14);
                }
            },
            shape_);
    }

    static bool polygon_contains(const std::vector<Vec2>& v, const Vec2& x)
    {
        // on-edge points count as inside
        const std::size_t n = v.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = v[i];
            const Vec2& b = v[(i + 1) % n];
            const Vec2 ab = b - a;
            const double len2 = ab.squaredNorm();
            const double s = std::clamp((x - a).dot(ab) / len2, 0.0, 1.0);
            if ((a + s * ab - x).norm() <= 1e-13 * std::sqrt(len2)) return true;
        }
        bool in = false;
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            if ((v[i].y() > x.y()) != (v[j].y() > x.y()) &&
                x.x() < (v[j].x() - v[i].x()) * (x.y() - v[i].y()) / (v[j].y() - v[i].y()) + v[i].x())
                in = !in;
        }
        return in;
    }

    /// Boundary point at parameter t in [0,1), counterclockwise.
    BoundaryPoint boundary(double t) const
    {
        t -= std::floor(t);
        return std::visit(
            [&](const auto& s) -> BoundaryPoint {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, DiskShape>) {
                    const double th = 2.0 * kPi * t;
                    const Vec2 nu(std::cos(th), std::sin(th));
                    return {t, s.center + s.radius * nu, nu, false};
                } else if constexpr (std::is_same_v<S, StarShape>) {
                    const double th = 2.0 * kPi * t;
                    const Vec2 e(std::cos(th), std::sin(th));
                    const Vec2 e_perp(-std::sin(th), std::cos(th));
                    const double r = s.rho(th);
                    const Vec2 tangent = s.drho(th) * e + r * e_perp;
                    return {t, s.center + r * e, Vec2(tangent.y(), -tangent.x()).normalized(), false};
                } else {
                    return polygon_boundary(corners(), t);
                }
            },
            shape_);
    }

    static BoundaryPoint polygon_boundary(const std::vector<Vec2>& v, double t)
    {
        const std::size_t n = v.size();
        double perimeter = 0.0;
        for (std::size_t i = 0; i < n; ++i) perimeter += (v[(i + 1) % n] - v[i]).norm();
        double s = t * perimeter;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 e = v[(i + 1) % n] - v[i];
            const double len = e.norm();
            if (s < len || i + 1 == n) {
                const Vec2 tangent = e / len;
                const double frac = std::clamp(s / len, 0.0, 1.0);
                BoundaryPoint bp;
                bp.t = t;
                bp.point = v[i] + frac * e;
                bp.normal = Vec2(tangent.y(), -tangent.x());
                // one-sided limit from the edge that starts at the vertex
                bp.at_vertex = std::abs(s) <= 1e-14 * perimeter;
                return bp;
            }
            s -= len;
        }
        return {};
    }

    /// N samples at t_j = (j + 1/2)/N.
    std::vector<BoundaryPoint> boundary_samples(int n) const
    {
        std::vector<BoundaryPoint> out;
        out.reserve(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) out.push_back(boundary((j + 0.5) / n));
        return out;
    }

    /// Closed polygonal approximation of the boundary with edge length <= h.
    /// Exact for polygonal kinds; vertices lie on the boundary otherwise.
    std::vector<Vec2> interface_polygon(double h) const
    {
        std::vector<Vec2> out;
        if (is_polygonal()) {
            const auto v = corners();
            for (std::size_t i = 0; i < v.size(); ++i) {
                const Vec2 a = v[i];
                const Vec2 b = v[(i + 1) % v.size()];
                const int segs = std::max(1, static_cast<int>(std::ceil((b - a).norm() / h - 1e-9)));
                for (int j = 0; j < segs; ++j) out.push_back(a + (b - a) * (double(j) / segs));
            }
            return out;
        }
        double length = 0.0;
        const int probe = 2048;
        for (int j = 0; j < probe; ++j) length += (boundary((j + 1.0) / probe).point - boundary(double(j) / probe).point).norm();
        const int segs = std::max(8, static_cast<int>(std::ceil(length / h)));
        for (int j = 0; j < segs; ++j) out.push_back(boundary(double(j) / segs).point);
        return out;
    }

    Vec2 center() const
    {
        if (auto* d = std::get_if<DiskShape>(&shape_)) return d->center;
        if (auto* s = std::get_if<StarShape>(&shape_)) return s->center;
        const auto v = corners();
        Eigen::AlignedBox2d box;
        for (const auto& p : v) box.extend(p);
        return box.center();
    }

    /// Radius of the smallest disk about center() containing the domain.
    double circumradius() const
    {
        if (auto* d = std::get_if<DiskShape>(&shape_)) return d->radius;
        const Vec2 c = center();
        double r = 0.0;
        if (is_polygonal()) {
            for (const auto& p : corners()) r = std::max(r, (p - c).norm());
            return r;
        }
        for (int j = 0; j < 2048; ++j) r = std::max(r, (boundary(j / 2048.0).point - c).norm());
        return r;
    }

private:
    Shape shape_;
};

}  // namespace nonscat

#endif  // NONSCAT_GEOMETRY_HPP
