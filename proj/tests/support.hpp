#pragma once

// Test-side oracles. Nothing here calls the code it is used to check: the
// skinning reference composes Eigen affine transforms directly, and the
// gradient checks compare analytic results against central differences.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "untangle/untangle.hpp"

namespace untangle::test_support {

/// Linear blend skinning from first principles: each bone is an affine map
/// built from AngleAxis rotations chained root to leaf.
inline std::vector<Vec3> reference_lbs(const SkinnedModel& m, const PoseParams& pose, const ShapeParams& shape)
{
    const std::size_t nj = m.num_joints();
    std::vector<Eigen::Affine3d> bone(nj);
    for (std::size_t j = 0; j < nj; ++j) {
        const Vec3& w = pose.rotations[j];
        const Eigen::Matrix3d local =
            w.norm() == 0.0 ? Eigen::Matrix3d::Identity() : Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
        const int p = m.joints[j].parent;
        Eigen::Affine3d rot_world = Eigen::Affine3d::Identity();
        Vec3 origin;
        if (p < 0) {
            rot_world.linear() = local;
            origin = m.joints[j].rest + pose.translation;
        } else {
            rot_world.linear() = bone[p].linear() / shape.scales[p] * local;
            origin = bone[p] * m.joints[j].rest;
        }
        // x -> R_world * s_j * (x - rest_j) + origin
        bone[j] = Eigen::Translation3d(origin) * rot_world * Eigen::Scaling(shape.scales[j]) *
                  Eigen::Translation3d(-m.joints[j].rest);
    }
    std::vector<Vec3> out(m.rest.num_vertices(), Vec3::Zero());
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t e = m.weight_offsets[i]; e < m.weight_offsets[i + 1]; ++e)
            out[i] += m.weight_value[e] * (bone[m.weight_joint[e]] * m.rest.vertices[i]);
    return out;
}

/// Rotations N(0, sigma) per component, translation N(0, 0.1).
// Enclosed volume summed in extended precision, so volume differences from a
// single vertex move do not drown in cancellation.
inline long double extended_volume(const TriMesh& m)
{
    long double sum = 0.0L;
    for (const Face& f : m.faces) {
        const Vec3 &a = m.vertices[f[0]], &b = m.vertices[f[1]], &c = m.vertices[f[2]];
        const long double ax = a.x(), ay = a.y(), az = a.z(), bx = b.x(), by = b.y(), bz = b.z();
        const long double cx = c.x(), cy = c.y(), cz = c.z();
        sum += ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx) + az * (bx * cy - by * cx);
    }
    return sum / 6.0L;
}

inline PoseParams random_pose(const SkinnedModel& m, std::mt19937_64& rng, double sigma = 0.3)
{
    std::normal_distribution<double> rot(0.0, sigma), tr(0.0, 0.1);
    PoseParams p = PoseParams::zero(m.num_joints());
    for (Vec3& w : p.rotations)
        w = Vec3(rot(rng), rot(rng), rot(rng));
    p.translation = Vec3(tr(rng), tr(rng), tr(rng));
    clamp_rotations(p);
    return p;
}

inline ShapeParams random_shape(const SkinnedModel& m, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> s(0.8, 1.25);
    ShapeParams shape = ShapeParams::unit(m.num_joints());
    for (double& x : shape.scales)
        x = s(rng);
    return shape;
}

inline JointTargets random_targets(const SkinnedModel& m, std::mt19937_64& rng, const Camera& cam)
{
    JointTargets t = targets_from_pose(m, random_pose(m, rng), ShapeParams::unit(m.num_joints()), cam);
    std::uniform_real_distribution<double> conf(0.5, 1.0);
    for (double& c : t.confidence)
        c = conf(rng);
    return t;
}

/// |a - b| / |b| in the Euclidean norm (b = the finite-difference side).
inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

/// E_J gradient against central differences at h = 1e-6.
inline double ej_gradient_error(const SkinnedModel& m, const PoseParams& pose, const ShapeParams& shape,
                                const Camera& cam, const JointTargets& targets)
{
    const EnergyGradient eg = reprojection_energy(m, pose, shape, cam, targets);
    const auto f = [&](const Eigen::VectorXd& x) {
        return reprojection_energy(m, PoseParams::from_flat(x), shape, cam, targets).value;
    };
    return relative_error(eg.gradient, finite_difference(f, pose.flat(), 1e-6));
}

/// Worst column of the skinning Jacobian against central differences of
/// pose_mesh, each column relative to its own finite-difference norm.
inline double jacobian_error(const SkinnedModel& m, const PoseParams& pose, const ShapeParams& shape, double h = 1e-6)
{
    const PoseJacobian jac(m, pose, shape);
    const Eigen::VectorXd x0 = pose.flat();
    const std::size_t n = m.rest.num_vertices();
    double worst = 0.0;
    for (Eigen::Index c = 0; c < x0.size(); ++c) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(x0.size());
        e[c] = 1.0;
        const auto col = jac.apply(e);
        const auto up = pose_mesh(m, PoseParams::from_flat(x0 + h * e), shape);
        const auto down = pose_mesh(m, PoseParams::from_flat(x0 - h * e), shape);
        Eigen::VectorXd analytic(3 * n), fd(3 * n);
        for (std::size_t i = 0; i < n; ++i) {
            analytic.segment<3>(3 * i) = col[i];
            fd.segment<3>(3 * i) = (up.vertices[i] - down.vertices[i]) / (2.0 * h);
        }
        if (fd.norm() == 0.0 && analytic.norm() == 0.0)
            continue;
        worst = std::max(worst, relative_error(analytic, fd));
    }
    return worst;
}

inline Eigen::VectorXd flatten(std::span<const Vec3> v)
{
    Eigen::VectorXd x(3 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        x.segment<3>(3 * i) = v[i];
    return x;
}

/// Laplacian term gradient against central differences over every coordinate.
inline double laplacian_gradient_error(const TriMesh& mesh, const TriMesh& reference, double h = 1e-4)
{
    const LaplacianTerm lt = laplacian_term(mesh, reference);
    const auto f = [&](const Eigen::VectorXd& x) {
        TriMesh probe = mesh;
        for (std::size_t i = 0; i < probe.num_vertices(); ++i)
            probe.vertices[i] = x.segment<3>(3 * i);
        return laplacian_term(probe, reference).value;
    };
    return relative_error(flatten(lt.gradient.vectors), finite_difference(f, flatten(mesh.vertices), h));
}

inline TriMesh jittered(TriMesh mesh, std::mt19937_64& rng, double sigma)
{
    std::normal_distribution<double> d(0.0, sigma);
    for (Vec3& v : mesh.vertices)
        v += Vec3(d(rng), d(rng), d(rng));
    return mesh;
}

struct FdSweep {
    double worst_ej = 0.0;
    double worst_jacobian = 0.0;
    double worst_laplacian = 0.0;
};

/// The three gradient checks over `configs` seeded configurations
/// (seed = index); tolerances are applied by the caller.
inline FdSweep finite_difference_sweep(int configs)
{
    const SkinnedModel m = build_toy_body();
    const TriMesh sphere = icosphere(1.0, 2);
    const Camera cam;
    FdSweep out;
    for (int s = 0; s < configs; ++s) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(s));
        const PoseParams pose = random_pose(m, rng);
        const ShapeParams shape = random_shape(m, rng);
        const JointTargets targets = random_targets(m, rng, cam);
        out.worst_ej = std::max(out.worst_ej, ej_gradient_error(m, pose, shape, cam, targets));
        out.worst_jacobian = std::max(out.worst_jacobian, jacobian_error(m, pose, shape));
        const TriMesh reference = jittered(sphere, rng, 0.02);
        const TriMesh mesh = jittered(reference, rng, 0.05);
        out.worst_laplacian = std::max(out.worst_laplacian, laplacian_gradient_error(mesh, reference));
    }
    return out;
}

inline bool same_class(Label d, OracleLabel o)
{
    switch (d) {
    case Label::V0: return o == OracleLabel::V0;
    case Label::Vout: return o == OracleLabel::Vout;
    case Label::Vin: return o == OracleLabel::Vin;
    }
    return false;
}

struct Agreement {
    std::size_t compared = 0;
    std::size_t agreeing = 0;
    std::size_t indeterminate = 0;
    std::size_t fully_skipped = 0; // every incident face ray-parallel
    double fraction() const { return compared ? static_cast<double>(agreeing) / static_cast<double>(compared) : 1.0; }
};

/// Detector labels against oracle labels, excluding Indeterminate probes and
/// vertices whose incident faces were all skipped as ray-parallel.
inline Agreement agreement(const TriMesh& mesh, const Classification& c, const std::vector<OracleLabel>& oracle)
{
    std::vector<char> skipped(mesh.num_faces(), 0);
    for (int f : c.diagnostics.skipped_faces)
        skipped[f] = 1;
    const VertexFaces fans(mesh);
    Agreement a;
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        if (oracle[v] == OracleLabel::Indeterminate) {
            ++a.indeterminate;
            continue;
        }
        const auto fan = fans[v];
        if (!fan.empty() && std::all_of(fan.begin(), fan.end(), [&](int f) { return skipped[f] != 0; })) {
            ++a.fully_skipped;
            continue;
        }
        ++a.compared;
        if (same_class(c.labels[v], oracle[v]))
            ++a.agreeing;
    }
    return a;
}

} // namespace untangle::test_support
