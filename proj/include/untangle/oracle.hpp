#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "untangle/error.hpp"
#include "untangle/mesh.hpp"

namespace untangle {

// Brute-force references for tests and acceptance runs. Nothing here touches
// the detector; the only shared code is mesh.hpp.

/// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0)
        return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3)
        return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0)
        return a + d1 / (d1 - d3) * ab;
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6)
        return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0)
        return a + d2 / (d2 - d6) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
        return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

/// Generalised winding number via summed signed solid angles.
class WindingOracle {
public:
    explicit WindingOracle(const TriMesh& mesh)
        : mesh_(mesh)
        , surface_tolerance_(1e-9 * bounding_box(mesh).diagonal())
    {
        unit_normals_.reserve(mesh.num_faces());
        for (const Face& f : mesh.faces) {
            const Vec3 n = area_vector2(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
            const double len = n.norm();
            unit_normals_.push_back(len > 0 ? Vec3(n / len) : Vec3::Zero());
        }
    }

    /// Throws when `p` lies within 1e-9 * bbox diagonal of the surface.
    double operator()(const Vec3& p) const
    {
        double total = 0.0;
        for (std::size_t fi = 0; fi < mesh_.num_faces(); ++fi) {
            const Face& f = mesh_.faces[fi];
            const Vec3 a = mesh_.vertices[f[0]] - p;
            const Vec3 b = mesh_.vertices[f[1]] - p;
            const Vec3 c = mesh_.vertices[f[2]] - p;
            const double plane = unit_normals_[fi].dot(a);
            if (std::abs(plane) <= surface_tolerance_ || unit_normals_[fi].isZero()) {
                const Vec3 q = closest_point_on_triangle(Vec3::Zero(), a, b, c);
                if (q.norm() <= surface_tolerance_)
                    throw Error("winding number query point lies on the surface");
            }
            const double la = a.norm(), lb = b.norm(), lc = c.norm();
            const double num = a.dot(b.cross(c));
            const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
            total += 2.0 * std::atan2(num, den);
        }
        return total / (4.0 * std::numbers::pi);
    }

    const TriMesh& mesh() const { return mesh_; }

private:
    const TriMesh& mesh_;
    double surface_tolerance_;
    std::vector<Vec3> unit_normals_;
};

inline double winding_number(const TriMesh& mesh, const Vec3& point) { return WindingOracle(mesh)(point); }

/// Hierarchical winding number: exact solid angles near the query, a dipole
/// term for clusters farther than `beta` times their radius. With beta >= 2 the
/// error stays far below the 0.1 rounding margin oracle_classify needs; tests
/// hold it against WindingOracle.
class WindingTree {
public:
    explicit WindingTree(const TriMesh& mesh, double beta = 2.5)
        : mesh_(mesh)
        , beta_(beta)
        , surface_tolerance_(1e-9 * bounding_box(mesh).diagonal())
    {
        if (!(beta > 1.0))
            throw Error("winding tree opening ratio must exceed 1");
        const std::size_t nf = mesh.num_faces();
        order_.resize(nf);
        centroids_.resize(nf);
        for (std::size_t f = 0; f < nf; ++f) {
            order_[f] = static_cast<int>(f);
            const Face& t = mesh.faces[f];
            centroids_[f] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
        }
        if (nf > 0)
            build(0, static_cast<int>(nf));
    }

    double operator()(const Vec3& p) const
    {
        if (nodes_.empty())
            return 0.0;
        double total = 0.0;
        int stack[128];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const Node& n = nodes_[stack[--top]];
            const Vec3 d = n.center - p;
            const double dist = d.norm();
            if (dist > beta_ * n.radius) {
                total += n.area.dot(d) / (dist * dist * dist);
                continue;
            }
            if (n.left < 0) {
                for (int i = n.begin; i < n.end; ++i)
                    total += solid_angle(order_[i], p);
                continue;
            }
            stack[top++] = n.left;
            stack[top++] = n.right;
        }
        return total / (4.0 * std::numbers::pi);
    }

private:
    struct Node {
        Vec3 center;
        Vec3 area; // sum of S_l n_l
        double radius = 0.0;
        int begin = 0, end = 0;
        int left = -1, right = -1;
    };

    static constexpr int kLeafSize = 8;

    int build(int begin, int end)
    {
        const int index = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        Node n;
        n.begin = begin;
        n.end = end;
        n.area = Vec3::Zero();
        Vec3 weighted = Vec3::Zero();
        double total_area = 0.0;
        Vec3 lo = Vec3::Constant(INFINITY), hi = Vec3::Constant(-INFINITY);
        for (int i = begin; i < end; ++i) {
            const Face& t = mesh_.faces[order_[i]];
            const Vec3 a2 = area_vector2(mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
            n.area += 0.5 * a2;
            weighted += a2.norm() * centroids_[order_[i]];
            total_area += a2.norm();
            lo = lo.cwiseMin(centroids_[order_[i]]);
            hi = hi.cwiseMax(centroids_[order_[i]]);
        }
        n.center = total_area > 0.0 ? Vec3(weighted / total_area) : Vec3(0.5 * (lo + hi));
        for (int i = begin; i < end; ++i)
            for (int v : mesh_.faces[order_[i]])
                n.radius = std::max(n.radius, (mesh_.vertices[v] - n.center).norm());
        if (end - begin > kLeafSize) {
            int axis;
            (hi - lo).maxCoeff(&axis);
            const int mid = begin + (end - begin) / 2;
            std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                             [&](int x, int y) { return centroids_[x][axis] < centroids_[y][axis]; });
            n.left = build(begin, mid);
            n.right = build(mid, end);
        }
        nodes_[index] = n;
        return index;
    }

    double solid_angle(int fi, const Vec3& p) const
    {
        const Face& f = mesh_.faces[fi];
        const Vec3 a = mesh_.vertices[f[0]] - p;
        const Vec3 b = mesh_.vertices[f[1]] - p;
        const Vec3 c = mesh_.vertices[f[2]] - p;
        if (closest_point_on_triangle(Vec3::Zero(), a, b, c).norm() <= surface_tolerance_)
            throw Error("winding number query point lies on the surface");
        const double la = a.norm(), lb = b.norm(), lc = c.norm();
        const double num = a.dot(b.cross(c));
        const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
        return 2.0 * std::atan2(num, den);
    }

    const TriMesh& mesh_;
    double beta_;
    double surface_tolerance_;
    std::vector<int> order_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
};

/// Ray-parity containment along a fixed skew direction (Moller-Trumbore).
/// Counts crossings of a single closed component; odd means inside.
inline bool inside_by_parity(const TriMesh& mesh, const Vec3& point)
{
    const Vec3 dir = Vec3(0.48, 0.57, 0.66).normalized();
    int crossings = 0;
    for (const Face& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3 e1 = mesh.vertices[f[1]] - a, e2 = mesh.vertices[f[2]] - a;
        const Vec3 pv = dir.cross(e2);
        const double det = e1.dot(pv);
        if (std::abs(det) < 1e-300)
            continue;
        const double inv = 1.0 / det;
        const Vec3 tv = point - a;
        const double u = tv.dot(pv) * inv;
        if (u < 0.0 || u > 1.0)
            continue;
        const Vec3 qv = tv.cross(e1);
        const double v = dir.dot(qv) * inv;
        if (v < 0.0 || u + v > 1.0)
            continue;
        if (e2.dot(qv) * inv > 0.0)
            ++crossings;
    }
    return crossings % 2 == 1;
}

/// Outward vertex normals weighted by each incident face's interior angle.
inline std::vector<Vec3> angle_weighted_normals(const TriMesh& mesh)
{
    std::vector<Vec3> normals(mesh.num_vertices(), Vec3::Zero());
    for (const Face& f : mesh.faces) {
        const Vec3 n = area_vector2(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
        const double len = n.norm();
        if (len == 0.0)
            continue;
        for (int k = 0; k < 3; ++k) {
            const Vec3& p = mesh.vertices[f[k]];
            const Vec3 e1 = (mesh.vertices[f[(k + 1) % 3]] - p).normalized();
            const Vec3 e2 = (mesh.vertices[f[(k + 2) % 3]] - p).normalized();
            const double angle = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
            normals[f[k]] += angle * n / len;
        }
    }
    for (Vec3& n : normals)
        if (n.norm() > 0.0)
            n.normalize();
    return normals;
}

enum class OracleLabel : std::uint8_t { V0, Vout, Vin, Indeterminate };

inline std::string_view to_string(OracleLabel l)
{
    switch (l) {
    case OracleLabel::V0: return "V0";
    case OracleLabel::Vout: return "Vout";
    case OracleLabel::Vin: return "Vin";
    case OracleLabel::Indeterminate: return "Indeterminate";
    }
    return "?";
}

/// Labels each vertex from the winding number just outside the surface:
/// 0 -> V0, >= 1 -> Vout, <= -1 -> Vin. Probes that land within 0.1 of a
/// half-integer are Indeterminate. `epsilon <= 0` selects 1e-4 * bbox diagonal.
inline std::vector<OracleLabel> oracle_classify(const TriMesh& mesh, double epsilon = 0.0)
{
    if (epsilon <= 0.0)
        epsilon = 1e-4 * bounding_box(mesh).diagonal();
    const WindingTree winding(mesh);
    const auto normals = angle_weighted_normals(mesh);
    std::vector<OracleLabel> labels(mesh.num_vertices(), OracleLabel::V0);
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        double w;
        try {
            w = winding(mesh.vertices[v] + epsilon * normals[v]);
        } catch (const Error&) {
            labels[v] = OracleLabel::Indeterminate;
            continue;
        }
        const double r = std::round(w);
        if (std::abs(w - r) > 0.4)
            labels[v] = OracleLabel::Indeterminate;
        else if (r >= 1.0)
            labels[v] = OracleLabel::Vout;
        else if (r <= -1.0)
            labels[v] = OracleLabel::Vin;
    }
    return labels;
}

/// Central-difference gradient of a scalar function.
inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x, double h)
{
    if (!(h > 0.0))
        throw Error("finite-difference step must be positive");
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

} // namespace untangle
