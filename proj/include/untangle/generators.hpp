#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "untangle/error.hpp"
#include "untangle/mesh.hpp"

namespace untangle {

// Closed-surface generators. Every output passes validate() and is
// deterministic for fixed parameters.

inline TriMesh icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero())
{
    if (!(radius > 0.0))
        throw Error("sphere radius must be positive");
    if (subdivisions < 0 || subdivisions > 7)
        throw Error("sphere subdivisions must lie in [0, 7]");

    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                  {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    m.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
               {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (Vec3& v : m.vertices)
        v.normalize();

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            if (auto it = midpoint.find(key); it != midpoint.end())
                return it->second;
            const int idx = static_cast<int>(m.vertices.size());
            m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Face> next;
        next.reserve(m.faces.size() * 4);
        for (const Face& f : m.faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    for (Vec3& v : m.vertices)
        v = center + radius * v;
    return m;
}

/// Axis-aligned box centred at `center`, 8 vertices and 12 triangles.
inline TriMesh box(const Vec3& extents, const Vec3& center = Vec3::Zero())
{
    if (!(extents.array() > 0.0).all())
        throw Error("box extents must be positive");
    const Vec3 h = 0.5 * extents;
    TriMesh m;
    for (int i = 0; i < 8; ++i)
        m.vertices.push_back(center + Vec3((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z()));
    m.faces = {{0, 2, 1}, {1, 2, 3}, // -z
               {4, 5, 6}, {5, 7, 6}, // +z
               {0, 1, 4}, {1, 5, 4}, // -y
               {2, 6, 3}, {3, 6, 7}, // +y
               {0, 4, 2}, {2, 4, 6}, // -x
               {1, 3, 5}, {3, 7, 5}}; // +x
    return m;
}

/// Closed tube swept along a polyline with hemispherical end caps, plus the
/// per-vertex bookkeeping the skinned body needs.
struct SweptTube {
    TriMesh mesh;
    /// Arc length of each vertex's ring along the centreline; caps extend
    /// below 0 and beyond the total length.
    std::vector<double> arclength;
    /// First vertex of centreline ring i (each ring has `segments` vertices).
    std::vector<int> ring_begin;
    int segments = 0;
};

/// Sweeps a circle of radius `radii[i]` along `centerline[i]`. Consecutive
/// centreline points must be distinct; the frame is propagated by projection
/// so it does not twist on planar curves.
inline SweptTube sweep_tube(const std::vector<Vec3>& centerline, const std::vector<double>& radii, int segments,
                            int cap_rings)
{
    const std::size_t n = centerline.size();
    if (n < 2 || radii.size() != n)
        throw Error("tube needs at least two centreline points with one radius each");
    if (segments < 3 || cap_rings < 1)
        throw Error("tube needs at least 3 segments and 1 cap ring");
    for (double r : radii)
        if (!(r > 0.0))
            throw Error("tube radius must be positive");

    std::vector<Vec3> tangent(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 d = centerline[std::min(i + 1, n - 1)] - centerline[i == 0 ? 0 : i - 1];
        if (d.norm() == 0.0)
            throw Error("tube centreline has coincident points");
        tangent[i] = d.normalized();
    }
    std::vector<Vec3> normal(n), binormal(n);
    {
        const Vec3& t0 = tangent[0];
        const Vec3 seed = std::abs(t0.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
        normal[0] = (seed - seed.dot(t0) * t0).normalized();
    }
    for (std::size_t i = 1; i < n; ++i) {
        const Vec3 p = normal[i - 1] - normal[i - 1].dot(tangent[i]) * tangent[i];
        normal[i] = p.norm() > 1e-12 ? p.normalized() : normal[i - 1];
    }
    for (std::size_t i = 0; i < n; ++i)
        binormal[i] = tangent[i].cross(normal[i]);

    std::vector<double> s(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        s[i] = s[i - 1] + (centerline[i] - centerline[i - 1]).norm();

    SweptTube tube;
    tube.segments = segments;
    TriMesh& m = tube.mesh;
    auto add_ring = [&](const Vec3& c, double r, const Vec3& nrm, const Vec3& bin, double arc) {
        const int first = static_cast<int>(m.vertices.size());
        for (int j = 0; j < segments; ++j) {
            const double phi = 2.0 * std::numbers::pi * j / segments;
            m.vertices.push_back(c + r * (std::cos(phi) * nrm + std::sin(phi) * bin));
            tube.arclength.push_back(arc);
        }
        return first;
    };

    std::vector<int> rings;
    const int start_pole = static_cast<int>(m.vertices.size());
    m.vertices.push_back(centerline[0] - radii[0] * tangent[0]);
    tube.arclength.push_back(-radii[0]);
    for (int k = cap_rings - 1; k >= 1; --k) {
        const double beta = 0.5 * std::numbers::pi * k / cap_rings;
        const double off = radii[0] * std::sin(beta);
        rings.push_back(add_ring(centerline[0] - off * tangent[0], radii[0] * std::cos(beta), normal[0], binormal[0], -off));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int first = add_ring(centerline[i], radii[i], normal[i], binormal[i], s[i]);
        rings.push_back(first);
        tube.ring_begin.push_back(first);
    }
    for (int k = 1; k < cap_rings; ++k) {
        const double beta = 0.5 * std::numbers::pi * k / cap_rings;
        const double off = radii[n - 1] * std::sin(beta);
        rings.push_back(add_ring(centerline[n - 1] + off * tangent[n - 1], radii[n - 1] * std::cos(beta), normal[n - 1],
                                 binormal[n - 1], s[n - 1] + off));
    }
    const int end_pole = static_cast<int>(m.vertices.size());
    m.vertices.push_back(centerline[n - 1] + radii[n - 1] * tangent[n - 1]);
    tube.arclength.push_back(s[n - 1] + radii[n - 1]);

    for (int j = 0; j < segments; ++j) {
        const int jn = (j + 1) % segments;
        m.faces.push_back({start_pole, rings.front() + jn, rings.front() + j});
        m.faces.push_back({end_pole, rings.back() + j, rings.back() + jn});
    }
    for (std::size_t r = 0; r + 1 < rings.size(); ++r)
        for (int j = 0; j < segments; ++j) {
            const int jn = (j + 1) % segments;
            const int a = rings[r] + j, b = rings[r] + jn, c = rings[r + 1] + jn, d = rings[r + 1] + j;
            m.faces.push_back({a, b, c});
            m.faces.push_back({a, c, d});
        }
    return tube;
}

/// Centreline points spaced at most `spacing` apart along the segment [a, b], excluding a.
inline void append_segment(std::vector<Vec3>& pts, Vec3 a, Vec3 b, double spacing)
{
    const int steps = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing)));
    for (int k = 1; k <= steps; ++k)
        pts.push_back(a + (b - a) * (static_cast<double>(k) / steps));
}

/// Capsule along z: a cylinder of `length` between hemispherical caps.
inline TriMesh capsule(double radius, double length, int segments)
{
    if (!(radius > 0.0) || !(length > 0.0))
        throw Error("capsule radius and length must be positive");
    if (segments < 4)
        throw Error("capsule needs at least 4 segments");
    const double spacing = 2.0 * std::numbers::pi * radius / segments;
    std::vector<Vec3> line{Vec3(0, 0, -0.5 * length)};
    append_segment(line, line.front(), Vec3(0, 0, 0.5 * length), spacing);
    return sweep_tube(line, std::vector<double>(line.size(), radius), segments, std::max(2, segments / 4)).mesh;
}

/// A tube with two straight legs joined by a circular bend of `arc_angle`
/// radians in the xy-plane. Proportions are fixed relative to `radius` (bend
/// radius 2r, first leg 8r, second leg 7r) so that bends beyond pi swing the
/// second leg back into the first: at 200 degrees the end of the second leg
/// sinks about half a radius into the start of the first.
inline TriMesh bent_tube(double radius, double arc_angle, int segments)
{
    if (!(radius > 0.0))
        throw Error("bent tube radius must be positive");
    if (!(arc_angle > 0.0) || arc_angle > 1.5 * std::numbers::pi)
        throw Error("bent tube arc angle must lie in (0, 3*pi/2]");
    if (segments < 4)
        throw Error("bent tube needs at least 4 segments");

    const double bend = 2.0 * radius;
    const double spacing = 2.0 * std::numbers::pi * radius / segments;
    std::vector<Vec3> line{Vec3(8.0 * radius, -bend, 0.0)};
    append_segment(line, line.front(), Vec3(0.0, -bend, 0.0), spacing);
    const int arc_steps = std::max(2, static_cast<int>(std::ceil(bend * arc_angle / spacing)));
    for (int k = 1; k <= arc_steps; ++k) {
        const double phi = arc_angle * k / arc_steps;
        line.emplace_back(-bend * std::sin(phi), -bend * std::cos(phi), 0.0);
    }
    const Vec3 dir(-std::cos(arc_angle), std::sin(arc_angle), 0.0);
    const Vec3 arc_end = line.back();
    append_segment(line, arc_end, arc_end + 7.0 * radius * dir, spacing);
    return sweep_tube(line, std::vector<double>(line.size(), radius), segments, std::max(2, segments / 4)).mesh;
}

/// Two spheres whose surfaces are `gap` apart along +z; a negative gap makes
/// them overlap (gap -1 with unit radius puts the centres 1 apart).
inline TriMesh two_spheres(double gap, double radius = 1.0, int subdivisions = 4)
{
    if (!(2.0 * radius + gap > 0.0))
        throw Error("sphere pair needs distinct centres (gap > -2 * radius)");
    return merge({icosphere(radius, subdivisions), icosphere(radius, subdivisions, Vec3(0, 0, 2.0 * radius + gap))});
}

/// A coarse unit sphere and a fine 0.4-radius sphere sunk 0.1 into it; face
/// areas differ by about two orders of magnitude.
inline TriMesh mixed_area_pair()
{
    return merge({icosphere(1.0, 2), icosphere(0.4, 4, Vec3(0, 0, 1.3))});
}

} // namespace untangle
