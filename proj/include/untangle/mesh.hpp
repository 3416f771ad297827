#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "untangle/error.hpp"

namespace untangle {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Face = std::array<int, 3>;

/// Closed, oriented triangle surface. Faces are counter-clockwise seen from
/// outside. Several disconnected components may share one mesh.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    std::size_t num_vertices() const noexcept { return vertices.size(); }
    std::size_t num_faces() const noexcept { return faces.size(); }
    bool empty() const noexcept { return vertices.empty(); }
};

struct BoundingBox {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    bool valid() const { return (min.array() <= max.array()).all(); }
    Vec3 extent() const { return valid() ? Vec3(max - min) : Vec3::Zero(); }
    double diagonal() const { return extent().norm(); }
    Vec3 center() const { return 0.5 * (min + max); }
};

inline BoundingBox bounding_box(std::span<const Vec3> points)
{
    BoundingBox box;
    for (const Vec3& p : points) {
        box.min = box.min.cwiseMin(p);
        box.max = box.max.cwiseMax(p);
    }
    return box;
}

inline BoundingBox bounding_box(const TriMesh& mesh) { return bounding_box(mesh.vertices); }

/// Twice-area vector (b - a) x (c - a); its norm is 2 * area, its direction the outward normal.
inline Vec3 area_vector2(const Vec3& a, const Vec3& b, const Vec3& c) { return (b - a).cross(c - a); }

/// Cross-product magnitudes below this fraction of the squared bbox diagonal count as degenerate.
inline constexpr double kDegenerateAreaTolerance = 1e-12;

inline double degenerate_threshold(const TriMesh& mesh)
{
    const double d = bounding_box(mesh).diagonal();
    return kDegenerateAreaTolerance * d * d;
}

struct FaceGeometry {
    Vec3 unit_normal;
    double area = 0.0;
    Vec3 centroid;
};

inline FaceGeometry face_geometry(const TriMesh& mesh, std::size_t face)
{
    if (face >= mesh.faces.size())
        throw Error("face index " + std::to_string(face) + " out of range");
    const Face& f = mesh.faces[face];
    for (int v : f)
        if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertices.size())
            throw Error("face " + std::to_string(face) + " references missing vertex " + std::to_string(v));
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const Vec3 n2 = area_vector2(a, b, c);
    const double len = n2.norm();
    if (!(len >= degenerate_threshold(mesh)) || len == 0.0)
        throw Error("degenerate face " + std::to_string(face));
    return {n2 / len, 0.5 * len, (a + b + c) / 3.0};
}

/// Compressed vertex -> incident-face adjacency.
class VertexFaces {
public:
    VertexFaces() = default;

    explicit VertexFaces(const TriMesh& mesh)
        : offsets_(mesh.num_vertices() + 1, 0)
    {
        const auto n = static_cast<int>(mesh.num_vertices());
        for (const Face& f : mesh.faces)
            for (int v : f)
                if (v >= 0 && v < n)
                    ++offsets_[v + 1];
        std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
        faces_.resize(offsets_.back());
        std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
        for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi)
            for (int v : mesh.faces[fi])
                if (v >= 0 && v < n)
                    faces_[cursor[v]++] = static_cast<int>(fi);
    }

    std::span<const int> operator[](std::size_t vertex) const
    {
        return {faces_.data() + offsets_[vertex], offsets_[vertex + 1] - offsets_[vertex]};
    }

    std::size_t num_vertices() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }

private:
    std::vector<std::size_t> offsets_;
    std::vector<int> faces_;
};

/// Faces incident to `vertex`, in ascending face order.
inline std::vector<int> vertex_fan(const TriMesh& mesh, std::size_t vertex)
{
    if (vertex >= mesh.num_vertices())
        throw Error("vertex index " + std::to_string(vertex) + " out of range");
    std::vector<int> fan;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        if (t[0] == static_cast<int>(vertex) || t[1] == static_cast<int>(vertex) || t[2] == static_cast<int>(vertex))
            fan.push_back(static_cast<int>(f));
    }
    return fan;
}

/// Unique undirected edges as (low, high) vertex pairs, sorted.
inline std::vector<std::pair<int, int>> unique_edges(const TriMesh& mesh)
{
    std::vector<std::pair<int, int>> edges;
    edges.reserve(mesh.faces.size() * 3);
    for (const Face& f : mesh.faces)
        for (int k = 0; k < 3; ++k) {
            const int a = f[k], b = f[(k + 1) % 3];
            edges.emplace_back(std::min(a, b), std::max(a, b));
        }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

/// Number of connected components among vertices referenced by at least one face.
inline std::size_t connected_components(const TriMesh& mesh)
{
    std::vector<int> parent(mesh.num_vertices());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<bool> used(mesh.num_vertices(), false);
    for (const Face& f : mesh.faces)
        for (int k = 0; k < 3; ++k) {
            used[f[k]] = true;
            const int a = find(f[k]), b = find(f[(k + 1) % 3]);
            if (a != b)
                parent[a] = b;
        }
    std::size_t count = 0;
    for (std::size_t v = 0; v < parent.size(); ++v)
        if (used[v] && find(static_cast<int>(v)) == static_cast<int>(v))
            ++count;
    return count;
}

enum class ViolationKind {
    IndexOutOfRange,
    RepeatedIndex,
    DegenerateFace,
    BoundaryEdge,     // undirected edge used by a single face
    NonManifoldEdge,  // undirected edge used by more than two faces
    OrientationConflict, // two faces traverse the edge in the same direction
};

inline const char* to_string(ViolationKind kind)
{
    switch (kind) {
    case ViolationKind::IndexOutOfRange: return "index_out_of_range";
    case ViolationKind::RepeatedIndex: return "repeated_index";
    case ViolationKind::DegenerateFace: return "degenerate_face";
    case ViolationKind::BoundaryEdge: return "boundary_edge";
    case ViolationKind::NonManifoldEdge: return "non_manifold_edge";
    case ViolationKind::OrientationConflict: return "orientation_conflict";
    }
    return "unknown";
}

struct Violation {
    ViolationKind kind;
    int face = -1;                   // face-level violations
    std::pair<int, int> edge{-1, -1}; // edge-level violations, (low, high)
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
    std::size_t count(ViolationKind kind) const
    {
        return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                      [kind](const Violation& v) { return v.kind == kind; }));
    }
};

/// Checks index range, non-degeneracy, closure and consistent orientation.
/// Closure is exact at index level; nearby vertices are never welded.
inline ValidationReport validate(const TriMesh& mesh)
{
    ValidationReport report;
    const auto n = static_cast<long long>(mesh.num_vertices());
    const double tol = degenerate_threshold(mesh);

    struct EdgeUse {
        int forward = 0;  // traversed low -> high
        int backward = 0; // traversed high -> low
    };
    std::unordered_map<std::uint64_t, EdgeUse> edges;
    edges.reserve(mesh.faces.size() * 2);
    auto key = [](int lo, int hi) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(lo)) << 32) | static_cast<std::uint32_t>(hi);
    };

    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const Face& f = mesh.faces[fi];
        const int face = static_cast<int>(fi);
        if (std::any_of(f.begin(), f.end(), [n](int v) { return v < 0 || v >= n; })) {
            report.violations.push_back({ViolationKind::IndexOutOfRange, face});
            continue;
        }
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
            report.violations.push_back({ViolationKind::RepeatedIndex, face});
            continue;
        }
        const double len = area_vector2(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]).norm();
        if (!(len >= tol) || len == 0.0)
            report.violations.push_back({ViolationKind::DegenerateFace, face});
        for (int k = 0; k < 3; ++k) {
            const int a = f[k], b = f[(k + 1) % 3];
            EdgeUse& use = edges[key(std::min(a, b), std::max(a, b))];
            (a < b ? use.forward : use.backward) += 1;
        }
    }

    std::vector<std::pair<std::uint64_t, EdgeUse>> sorted(edges.begin(), edges.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
    for (const auto& [k, use] : sorted) {
        const std::pair<int, int> edge{static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu)};
        const int total = use.forward + use.backward;
        if (total == 1)
            report.violations.push_back({ViolationKind::BoundaryEdge, -1, edge});
        else if (total > 2)
            report.violations.push_back({ViolationKind::NonManifoldEdge, -1, edge});
        else if (use.forward != 1)
            report.violations.push_back({ViolationKind::OrientationConflict, -1, edge});
    }
    return report;
}

/// (1/6) sum of det(v0, v1, v2); positive for outward-oriented closed surfaces.
inline double signed_volume(const TriMesh& mesh)
{
    double sum = 0.0;
    for (const Face& f : mesh.faces)
        sum += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]]));
    return sum / 6.0;
}

/// Disjoint union; face indices of later meshes are re-based.
inline TriMesh merge(std::span<const TriMesh> meshes)
{
    TriMesh out;
    for (const TriMesh& m : meshes) {
        const int base = static_cast<int>(out.vertices.size());
        out.vertices.insert(out.vertices.end(), m.vertices.begin(), m.vertices.end());
        for (const Face& f : m.faces)
            out.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
    }
    return out;
}

inline TriMesh merge(std::initializer_list<TriMesh> meshes)
{
    return merge(std::span<const TriMesh>(meshes.begin(), meshes.size()));
}

inline TriMesh translated(TriMesh mesh, const Vec3& offset)
{
    for (Vec3& v : mesh.vertices)
        v += offset;
    return mesh;
}

inline TriMesh scaled(TriMesh mesh, double factor)
{
    for (Vec3& v : mesh.vertices)
        v *= factor;
    return mesh;
}

/// Reverses every face's winding (turns outward normals inward).
inline TriMesh flipped(TriMesh mesh)
{
    for (Face& f : mesh.faces)
        std::swap(f[1], f[2]);
    return mesh;
}

} // namespace untangle
