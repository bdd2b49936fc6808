#ifndef NONSCAT_MESH_HPP
#define NONSCAT_MESH_HPP

// Quasi-uniform triangulation of a truncating disk, conforming to a
// polygonal inclusion boundary. Connectivity comes from the Delaunay
// triangulation (dual of Boost.Polygon's Voronoi diagram).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/polygon/voronoi.hpp>

#include "nonscat/geometry.hpp"

namespace nonscat {

struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;  ///< counterclockwise
    std::vector<char> inside;                   ///< per triangle: lies in the inclusion
    std::vector<int> ring;                      ///< boundary vertices sorted by angle
    std::vector<double> ring_theta;
    std::vector<Vec2> interface;                ///< polygon the mesh conforms to (may be empty)
    Vec2 center = Vec2::Zero();
    double radius = 1.0;
    double h = 0.1;
    bool interface_conforming = true;  ///< false when the interface polygon only approximates a curved boundary

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_triangles() const { return static_cast<int>(triangles.size()); }

    double signed_area(int t) const
    {
        const auto& tr = triangles[static_cast<std::size_t>(t)];
        const Vec2 &a = vertices[tr[0]], &b = vertices[tr[1]], &c = vertices[tr[2]];
        return 0.5 * cross2(b - a, c - a);
    }

    Vec2 centroid(int t) const
    {
        const auto& tr = triangles[static_cast<std::size_t>(t)];
        return (vertices[tr[0]] + vertices[tr[1]] + vertices[tr[2]]) / 3.0;
    }

    /// Smallest interior angle over all triangles, degrees.
    double min_angle_deg() const
    {
        double worst = 180.0;
        for (const auto& tr : triangles)
            for (int i = 0; i < 3; ++i) {
                const Vec2 a = vertices[tr[(i + 1) % 3]] - vertices[tr[i]];
                const Vec2 b = vertices[tr[(i + 2) % 3]] - vertices[tr[i]];
                worst = std::min(worst, std::atan2(std::abs(cross2(a, b)), a.dot(b)) * 180.0 / kPi);
            }
        return worst;
    }

    int count_inside() const { return static_cast<int>(std::count(inside.begin(), inside.end(), char(1))); }

    /// Plain-text dump: vertex list then triangle list (with inside flag).
    void write(std::ostream& out) const
    {
        out.precision(17);
        out << "vertices " << vertices.size() << '\n';
        for (const auto& v : vertices) out << v.x() << ' ' << v.y() << '\n';
        out << "triangles " << triangles.size() << '\n';
        for (std::size_t t = 0; t < triangles.size(); ++t)
            out << triangles[t][0] << ' ' << triangles[t][1] << ' ' << triangles[t][2] << ' ' << int(inside[t]) << '\n';
    }
};

namespace detail {

inline double segment_distance(const Vec2& x, const Vec2& a, const Vec2& b)
{
    const Vec2 ab = b - a;
    const double s = std::clamp((x - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (a + s * ab - x).norm();
}

/// Uniform bucket grid over segments, for distance-to-polyline queries.
class SegmentIndex {
public:
    SegmentIndex(const std::vector<Vec2>& poly, double cell) : poly_(poly), cell_(cell)
    {
        if (poly.empty()) return;
        Eigen::AlignedBox2d box;
        for (const auto& p : poly) box.extend(p);
        lo_ = box.min() - Vec2(cell, cell);
        nx_ = static_cast<int>(std::ceil(box.sizes().x() / cell)) + 3;
        ny_ = static_cast<int>(std::ceil(box.sizes().y() / cell)) + 3;
        buckets_.resize(static_cast<std::size_t>(nx_ * ny_));
        for (std::size_t i = 0; i < poly.size(); ++i) {
            Eigen::AlignedBox2d sb;
            sb.extend(poly[i]);
            sb.extend(poly[(i + 1) % poly.size()]);
            const auto [i0, j0] = bucket(sb.min());
            const auto [i1, j1] = bucket(sb.max());
            for (int a = i0; a <= i1; ++a)
                for (int b = j0; b <= j1; ++b) buckets_[static_cast<std::size_t>(b * nx_ + a)].push_back(static_cast<int>(i));
        }
    }

    /// Distance to the closed polyline, capped at `cap` (which must not exceed the cell size).
    double distance(const Vec2& x, double cap) const
    {
        if (poly_.empty()) return cap;
        const auto [ci, cj] = bucket(x);
        double d = cap;
        for (int a = ci - 1; a <= ci + 1; ++a)
            for (int b = cj - 1; b <= cj + 1; ++b) {
                if (a < 0 || b < 0 || a >= nx_ || b >= ny_) continue;
                for (int s : buckets_[static_cast<std::size_t>(b * nx_ + a)])
                    d = std::min(d, segment_distance(x, poly_[static_cast<std::size_t>(s)],
                                                     poly_[(static_cast<std::size_t>(s) + 1) % poly_.size()]));
            }
        return d;
    }

private:
    std::pair<int, int> bucket(const Vec2& x) const
    {
        return {static_cast<int>(std::floor((x.x() - lo_.x()) / cell_)), static_cast<int>(std::floor((x.y() - lo_.y()) / cell_))};
    }

    const std::vector<Vec2>& poly_;
    double cell_;
    Vec2 lo_ = Vec2::Zero();
    int nx_ = 0, ny_ = 0;
    std::vector<std::vector<int>> buckets_;
};

/// Delaunay triangles of a point set via the Voronoi dual. Voronoi vertices
/// shared by more than three sites (cocircular points) are fan-triangulated.
inline std::vector<std::array<int, 3>> delaunay(const std::vector<Vec2>& pts, const Vec2& center, double radius)
{
    using boost::polygon::point_data;
    const double scale = 1e9 / radius;
    std::vector<point_data<std::int32_t>> ip;
    ip.reserve(pts.size());
    for (const auto& p : pts) {
        const Vec2 q = (p - center) * scale;
        ip.emplace_back(static_cast<std::int32_t>(std::lround(q.x())), static_cast<std::int32_t>(std::lround(q.y())));
    }
    boost::polygon::voronoi_diagram<double> vd;
    boost::polygon::construct_voronoi(ip.begin(), ip.end(), &vd);

    std::vector<std::array<int, 3>> tris;
    std::vector<int> ring;
    for (const auto& v : vd.vertices()) {
        ring.clear();
        const auto* e = v.incident_edge();
        do {
            ring.push_back(static_cast<int>(e->cell()->source_index()));
            e = e->rot_next();
        } while (e != v.incident_edge());
        for (std::size_t i = 1; i + 1 < ring.size(); ++i) {
            std::array<int, 3> t{ring[0], ring[i], ring[i + 1]};
            if (cross2(pts[t[1]] - pts[t[0]], pts[t[2]] - pts[t[0]]) < 0) std::swap(t[1], t[2]);
            tris.push_back(t);
        }
    }
    return tris;
}

}  // namespace detail

/// Triangulates the disk |x - center| <= radius with element size ~h.
/// With an inclusion, its interface polygon (edge <= h) is embedded and each
/// triangle is classified inside/outside. `ring_min` forces a minimum number
/// of boundary vertices (far-field resolution).
inline Mesh generate_mesh(Vec2 center, double radius, const std::optional<Domain>& inclusion, double h, int ring_min = 0)
{
    if (!(h > 0.0) || !(radius > 0.0)) throw std::invalid_argument("generate_mesh: h and radius must be positive");
    if (h > 0.25 * radius) throw std::invalid_argument("generate_mesh: h too large for the truncating disk");
    Mesh mesh;
    mesh.center = center;
    mesh.radius = radius;
    mesh.h = h;

    if (inclusion) {
        mesh.interface = inclusion->interface_polygon(h);
        mesh.interface_conforming = inclusion->is_polygonal();
        for (const auto& p : mesh.interface)
            if ((p - center).norm() > 0.8 * radius)
                throw std::invalid_argument("generate_mesh: inclusion too close to the truncation boundary (margin < 0.2)");
    }

    auto& pts = mesh.vertices;
    // boundary ring
    const int nring = std::max(ring_min, static_cast<int>(std::ceil(2.0 * kPi * radius / h)));
    for (int i = 0; i < nring; ++i) {
        const double th = 2.0 * kPi * i / nring;
        pts.push_back(center + radius * Vec2(std::cos(th), std::sin(th)));
        mesh.ring.push_back(i);
        mesh.ring_theta.push_back(th);
    }
    for (const auto& p : mesh.interface) pts.push_back(p);

    // hexagonal lattice, cleared near the ring and the interface
    const double clear = 0.6 * h;
    const detail::SegmentIndex index(mesh.interface, h);
    const double dy = 0.5 * std::sqrt(3.0) * h;
    const int nj = static_cast<int>(std::ceil(radius / dy));
    const int ni = static_cast<int>(std::ceil(radius / h)) + 1;
    for (int j = -nj; j <= nj; ++j)
        for (int i = -ni; i <= ni; ++i) {
            const Vec2 p = center + Vec2((i + 0.5 * (std::abs(j) % 2)) * h, j * dy);
            if ((p - center).norm() > radius - clear) continue;
            if (index.distance(p, clear) < clear) continue;
            pts.push_back(p);
        }

    mesh.triangles = detail::delaunay(pts, center, radius);
    mesh.inside.assign(mesh.triangles.size(), 0);
    if (!mesh.interface.empty()) {
        for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
            const bool in = Domain::polygon_contains(mesh.interface, mesh.centroid(static_cast<int>(t)));
            mesh.inside[t] = in ? 1 : 0;
            // conformity: no vertex strictly on the other side
            for (int c : mesh.triangles[t]) {
                const Vec2& x = pts[static_cast<std::size_t>(c)];
                const bool on = index.distance(x, h) <= 1e-12 * radius;
                if (!on && Domain::polygon_contains(mesh.interface, x) != in)
                    throw std::runtime_error("generate_mesh: triangle straddles the interface");
            }
        }
    }
    return mesh;
}

/// Locates the triangle containing a point, optionally restricted to inside triangles.
class TriangleLocator {
public:
    TriangleLocator(const Mesh& mesh, bool inside_only) : mesh_(mesh)
    {
        cell_ = 2.0 * mesh.h;
        lo_ = mesh.center - Vec2(mesh.radius, mesh.radius) - Vec2(cell_, cell_);
        n_ = static_cast<int>(std::ceil(2.0 * (mesh.radius + cell_) / cell_)) + 1;
        buckets_.resize(static_cast<std::size_t>(n_ * n_));
        for (int t = 0; t < mesh.num_triangles(); ++t) {
            if (inside_only && !mesh.inside[static_cast<std::size_t>(t)]) continue;
            Eigen::AlignedBox2d box;
            for (int c : mesh.triangles[static_cast<std::size_t>(t)]) box.extend(mesh.vertices[static_cast<std::size_t>(c)]);
            const auto [i0, j0] = bucket(box.min());
            const auto [i1, j1] = bucket(box.max());
            for (int a = i0; a <= i1; ++a)
                for (int b = j0; b <= j1; ++b) buckets_[static_cast<std::size_t>(b * n_ + a)].push_back(t);
        }
    }

    /// Triangle index and barycentric coordinates, or -1 if not found.
    std::pair<int, std::array<double, 3>> find(const Vec2& x, double tol = 1e-12) const
    {
        const auto [i, j] = bucket(x);
        if (i < 0 || j < 0 || i >= n_ || j >= n_) return {-1, {}};
        for (int t : buckets_[static_cast<std::size_t>(j * n_ + i)]) {
            const auto& tr = mesh_.triangles[static_cast<std::size_t>(t)];
            const Vec2 &a = mesh_.vertices[tr[0]], &b = mesh_.vertices[tr[1]], &c = mesh_.vertices[tr[2]];
            const double area = cross2(b - a, c - a);
            const double l1 = cross2(c - b, x - b) / area;  // weight of a
            const double l2 = cross2(a - c, x - c) / area;  // weight of b
            const double l3 = 1.0 - l1 - l2;
            if (l1 >= -tol && l2 >= -tol && l3 >= -tol) return {t, {l1, l2, l3}};
        }
        return {-1, {}};
    }

private:
    std::pair<int, int> bucket(const Vec2& x) const
    {
        return {static_cast<int>(std::floor((x.x() - lo_.x()) / cell_)), static_cast<int>(std::floor((x.y() - lo_.y()) / cell_))};
    }

    const Mesh& mesh_;
    double cell_ = 1.0;
    Vec2 lo_ = Vec2::Zero();
    int n_ = 0;
    std::vector<std::vector<int>> buckets_;
};

}  // namespace nonscat

#endif  // NONSCAT_MESH_HPP
