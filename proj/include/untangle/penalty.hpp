#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "untangle/detector.hpp"
#include "untangle/error.hpp"
#include "untangle/mesh.hpp"

namespace untangle {

/// Fraction of vertices caught in self-intersection, (|Vout| + |Vin|) / N.
struct PenaltyReport {
    double spt = 0.0;
    std::size_t count_v0 = 0;
    std::size_t count_vout = 0;
    std::size_t count_vin = 0;
    std::size_t unseen = 0;
    std::size_t num_vertices = 0;
};

inline PenaltyReport spt_value(const Classification& c, std::size_t num_vertices)
{
    if (num_vertices == 0)
        throw Error("penalty of a mesh without vertices is undefined");
    if (c.count_v0 + c.count_vout + c.count_vin + c.unseen.size() != num_vertices)
        throw Error("classification counts do not add up to " + std::to_string(num_vertices) + " vertices");
    PenaltyReport r;
    r.count_v0 = c.count_v0;
    r.count_vout = c.count_vout;
    r.count_vin = c.count_vin;
    r.unseen = c.unseen.size();
    r.num_vertices = num_vertices;
    r.spt = static_cast<double>(c.count_vout + c.count_vin) / static_cast<double>(num_vertices);
    return r;
}

struct GradientField {
    std::vector<Vec3> vectors;
    bool normalized = false;
    std::size_t zeroed_vertices = 0; // intersecting vertices whose fan sum was numerically zero

    double norm() const
    {
        double s = 0.0;
        for (const Vec3& g : vectors)
            s += g.squaredNorm();
        return std::sqrt(s);
    }
};

/// Sum of S_l * n_l over the faces around `vertex` (half the twice-area vectors).
inline Vec3 fan_area_vector(const TriMesh& mesh, std::span<const int> fan)
{
    Vec3 sum = Vec3::Zero();
    for (int f : fan) {
        const Face& t = mesh.faces[f];
        sum += area_vector2(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    }
    return 0.5 * sum;
}

/// (1/3) sum S_l n_l: the exact derivative of the enclosed volume with respect
/// to one vertex of a closed surface (the volume is affine in any single vertex).
inline Vec3 volume_derivative(const TriMesh& mesh, std::size_t vertex)
{
    return fan_area_vector(mesh, vertex_fan(mesh, vertex)) / 3.0;
}

/// Per-vertex penalty gradient. V0 vertices get zero; Vout vertices get
/// +(1/3) sum S_l n_l and Vin vertices its negative. With `normalize` each
/// nonzero vector becomes the unit vector of the fan sum.
inline GradientField spt_gradient(const TriMesh& mesh, const Classification& c, bool normalize,
                                  const VertexFaces* adjacency = nullptr)
{
    if (c.labels.size() != mesh.num_vertices())
        throw Error("classification has " + std::to_string(c.labels.size()) + " labels but the mesh has " +
                    std::to_string(mesh.num_vertices()) + " vertices");
    GradientField g;
    g.normalized = normalize;
    g.vectors.assign(mesh.num_vertices(), Vec3::Zero());
    if (c.count_vout + c.count_vin == 0)
        return g;

    VertexFaces local;
    if (!adjacency) {
        local = VertexFaces(mesh);
        adjacency = &local;
    }
    const double diag = bounding_box(mesh).diagonal();
    const double tiny = 1e-12 * diag * diag;
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        const Label l = c.labels[v];
        if (l == Label::V0)
            continue;
        const Vec3 sum = fan_area_vector(mesh, (*adjacency)[v]);
        const double len = sum.norm();
        if (!(len >= tiny) || len == 0.0) {
            ++g.zeroed_vertices;
            continue;
        }
        const double sign = l == Label::Vout ? 1.0 : -1.0;
        g.vectors[v] = normalize ? Vec3(sign * sum / len) : Vec3(sign * sum / 3.0);
    }
    return g;
}

/// Uniform-weight umbrella vectors: mean of the one-ring neighbours minus the vertex.
class UmbrellaOperator {
public:
    explicit UmbrellaOperator(const TriMesh& mesh)
        : offsets_(mesh.num_vertices() + 1, 0)
    {
        const auto edges = unique_edges(mesh);
        for (const auto& [a, b] : edges) {
            ++offsets_[a + 1];
            ++offsets_[b + 1];
        }
        for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
            offsets_[i + 1] += offsets_[i];
        neighbors_.resize(offsets_.back());
        std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
        for (const auto& [a, b] : edges) {
            neighbors_[cursor[a]++] = b;
            neighbors_[cursor[b]++] = a;
        }
    }

    std::span<const int> neighbors(std::size_t v) const
    {
        return {neighbors_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }

    std::vector<Vec3> apply(std::span<const Vec3> x) const
    {
        std::vector<Vec3> out(x.size(), Vec3::Zero());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto nb = neighbors(i);
            if (nb.empty())
                continue;
            Vec3 mean = Vec3::Zero();
            for (int j : nb)
                mean += x[j];
            out[i] = mean / static_cast<double>(nb.size()) - x[i];
        }
        return out;
    }

    /// Transpose of apply().
    std::vector<Vec3> apply_transpose(std::span<const Vec3> r) const
    {
        std::vector<Vec3> out(r.size(), Vec3::Zero());
        for (std::size_t i = 0; i < r.size(); ++i) {
            const auto nb = neighbors(i);
            if (nb.empty())
                continue;
            const Vec3 share = r[i] / static_cast<double>(nb.size());
            for (int j : nb)
                out[j] += share;
            out[i] -= r[i];
        }
        return out;
    }

private:
    std::vector<std::size_t> offsets_;
    std::vector<int> neighbors_;
};

struct LaplacianTerm {
    double value = 0.0;
    GradientField gradient;
};

/// Laplacian regularisation baseline: sum_i |delta_i(mesh) - delta_i(reference)|^2
/// with uniform umbrella vectors delta, and its analytic gradient.
inline LaplacianTerm laplacian_term(const TriMesh& mesh, const TriMesh& reference)
{
    if (mesh.num_vertices() != reference.num_vertices() || mesh.faces != reference.faces)
        throw Error("laplacian term needs meshes with identical topology");
    const UmbrellaOperator op(mesh);
    const auto d = op.apply(mesh.vertices);
    const auto d0 = op.apply(reference.vertices);
    std::vector<Vec3> residual(d.size());
    LaplacianTerm out;
    for (std::size_t i = 0; i < d.size(); ++i) {
        residual[i] = d[i] - d0[i];
        out.value += residual[i].squaredNorm();
    }
    out.gradient.vectors = op.apply_transpose(residual);
    for (Vec3& g : out.gradient.vectors)
        g *= 2.0;
    return out;
}

} // namespace untangle
