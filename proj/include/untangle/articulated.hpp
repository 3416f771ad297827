#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "untangle/error.hpp"
#include "untangle/generators.hpp"
#include "untangle/mesh.hpp"

namespace untangle {

using Mat3 = Eigen::Matrix3d;

inline Mat3 skew(const Vec3& w)
{
    Mat3 k;
    k << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return k;
}

inline Vec3 unskew(const Mat3& k) { return {k(2, 1), k(0, 2), k(1, 0)}; }

/// Rotation matrix of an axis-angle vector.
inline Mat3 rodrigues(const Vec3& w)
{
    const double t2 = w.squaredNorm();
    const Mat3 k = skew(w);
    double a, b; // sin(t)/t, (1 - cos(t))/t^2
    if (t2 < 1e-12) {
        a = 1.0 - t2 / 6.0;
        b = 0.5 - t2 / 24.0;
    } else {
        const double t = std::sqrt(t2);
        a = std::sin(t) / t;
        b = (1.0 - std::cos(t)) / t2;
    }
    return Mat3::Identity() + a * k + b * k * k;
}

/// dR/dw_c for c = 0, 1, 2 (Gallego and Yezzi, 2015).
inline std::array<Mat3, 3> rodrigues_derivative(const Vec3& w)
{
    std::array<Mat3, 3> d;
    const double t2 = w.squaredNorm();
    if (t2 < 1e-12) {
        const Mat3 k = skew(w);
        for (int c = 0; c < 3; ++c) {
            const Mat3 e = skew(Vec3::Unit(c));
            d[c] = e + 0.5 * (e * k + k * e);
        }
        return d;
    }
    const Mat3 r = rodrigues(w);
    const Mat3 k = skew(w);
    for (int c = 0; c < 3; ++c) {
        const Vec3 tail = w.cross((Mat3::Identity() - r) * Vec3::Unit(c));
        d[c] = (w[c] * k + skew(tail)) / t2 * r;
    }
    return d;
}

struct Joint {
    std::string name;
    int parent = -1;
    Vec3 rest = Vec3::Zero(); // position in the template
};

/// Procedural stand-in for a learned body model: a template mesh, a joint
/// tree, sparse skinning weights and a sparse joint regressor.
struct SkinnedModel {
    TriMesh rest;
    std::vector<Joint> joints;
    // Skinning weights in compressed rows: vertex i owns [weight_offsets[i], weight_offsets[i+1]).
    std::vector<std::size_t> weight_offsets;
    std::vector<int> weight_joint;
    std::vector<double> weight_value;
    // Joint regressor rows: joint k owns [regressor_offsets[k], regressor_offsets[k+1]).
    std::vector<std::size_t> regressor_offsets;
    std::vector<int> regressor_vertex;
    std::vector<double> regressor_value;

    std::size_t num_joints() const { return joints.size(); }

    int joint_index(std::string_view name) const
    {
        for (std::size_t j = 0; j < joints.size(); ++j)
            if (joints[j].name == name)
                return static_cast<int>(j);
        throw Error("model has no joint named '" + std::string(name) + "'");
    }
};

/// Throws when the model breaks its structural invariants.
inline void check_model(const SkinnedModel& m)
{
    const std::size_t n = m.rest.num_vertices();
    if (m.joints.empty())
        throw Error("model has no joints");
    int roots = 0;
    for (std::size_t j = 0; j < m.joints.size(); ++j) {
        const int p = m.joints[j].parent;
        if (p < 0)
            ++roots;
        else if (p >= static_cast<int>(j))
            throw Error("joint " + m.joints[j].name + " does not follow its parent");
    }
    if (roots != 1 || m.joints[0].parent != -1)
        throw Error("model needs exactly one root, stored first");
    if (m.weight_offsets.size() != n + 1 || m.weight_offsets.back() != m.weight_joint.size() ||
        m.weight_joint.size() != m.weight_value.size())
        throw Error("skinning weight table does not match the template");
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t count = m.weight_offsets[i + 1] - m.weight_offsets[i];
        if (count == 0 || count > 4)
            throw Error("vertex " + std::to_string(i) + " has " + std::to_string(count) + " skinning weights");
        double sum = 0.0;
        for (std::size_t e = m.weight_offsets[i]; e < m.weight_offsets[i + 1]; ++e) {
            if (m.weight_joint[e] < 0 || m.weight_joint[e] >= static_cast<int>(m.joints.size()))
                throw Error("skinning weight refers to a missing joint");
            if (!(m.weight_value[e] >= 0.0 && m.weight_value[e] <= 1.0))
                throw Error("skinning weight outside [0, 1]");
            sum += m.weight_value[e];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw Error("skinning weights of vertex " + std::to_string(i) + " do not sum to 1");
    }
    if (m.regressor_offsets.size() != m.joints.size() + 1 || m.regressor_offsets.back() != m.regressor_vertex.size() ||
        m.regressor_vertex.size() != m.regressor_value.size())
        throw Error("joint regressor does not match the skeleton");
    for (int v : m.regressor_vertex)
        if (v < 0 || v >= static_cast<int>(n))
            throw Error("joint regressor refers to a missing vertex");
}

/// Per-joint axis-angle rotations plus a global translation.
struct PoseParams {
    std::vector<Vec3> rotations;
    Vec3 translation = Vec3::Zero();

    static PoseParams zero(std::size_t joints) { return {std::vector<Vec3>(joints, Vec3::Zero()), Vec3::Zero()}; }

    std::size_t size() const { return 3 * rotations.size() + 3; }

    /// Flat layout [w_0, ..., w_{J-1}, t].
    Eigen::VectorXd flat() const
    {
        Eigen::VectorXd x(size());
        for (std::size_t j = 0; j < rotations.size(); ++j)
            x.segment<3>(3 * j) = rotations[j];
        x.tail<3>() = translation;
        return x;
    }

    static PoseParams from_flat(const Eigen::VectorXd& x)
    {
        if (x.size() < 3 || x.size() % 3 != 0)
            throw Error("flat pose vector length must be a multiple of 3");
        PoseParams p;
        const auto joints = static_cast<std::size_t>(x.size() / 3 - 1);
        p.rotations.resize(joints);
        for (std::size_t j = 0; j < joints; ++j)
            p.rotations[j] = x.segment<3>(3 * j);
        p.translation = x.tail<3>();
        return p;
    }
};

/// Per-bone uniform scales; bone j is the geometry driven by joint j.
struct ShapeParams {
    std::vector<double> scales;

    static ShapeParams unit(std::size_t joints) { return {std::vector<double>(joints, 1.0)}; }
};

inline constexpr double kRotationLimit = std::numbers::pi;

inline void check_params(const SkinnedModel& m, const PoseParams& pose, const ShapeParams& shape)
{
    if (pose.rotations.size() != m.num_joints())
        throw Error("pose has " + std::to_string(pose.rotations.size()) + " rotations for " +
                    std::to_string(m.num_joints()) + " joints");
    if (shape.scales.size() != m.num_joints())
        throw Error("shape has " + std::to_string(shape.scales.size()) + " scales for " +
                    std::to_string(m.num_joints()) + " joints");
    for (std::size_t j = 0; j < pose.rotations.size(); ++j) {
        if (!pose.rotations[j].allFinite())
            throw Error("pose rotation of joint " + m.joints[j].name + " is not finite");
        if (pose.rotations[j].norm() >= kRotationLimit)
            throw Error("pose rotation of joint " + m.joints[j].name + " reaches the pi limit");
    }
    if (!pose.translation.allFinite())
        throw Error("pose translation is not finite");
    for (double s : shape.scales)
        if (!(s >= 0.5 && s <= 2.0))
            throw Error("shape scale outside [0.5, 2]");
}

/// Pulls every rotation strictly inside the joint limit.
inline void clamp_rotations(PoseParams& pose, double limit = kRotationLimit - 1e-6)
{
    for (Vec3& w : pose.rotations)
        if (const double n = w.norm(); n > limit)
            w *= limit / n;
}

/// World transforms of a posed skeleton. Bone j maps a template point x to
/// world[j] * scale[j] * (x - rest_j) + origin[j].
struct SkeletonState {
    std::vector<Mat3> local;
    std::vector<Mat3> world;
    std::vector<Vec3> origin; // posed joint positions, translation included
    std::vector<double> scale;
    std::vector<Vec3> rest;

    Vec3 apply(int j, const Vec3& x) const { return world[j] * (scale[j] * (x - rest[j])) + origin[j]; }
};

inline SkeletonState forward_kinematics(const SkinnedModel& m, const PoseParams& pose, const ShapeParams& shape)
{
    check_params(m, pose, shape);
    const std::size_t nj = m.num_joints();
    SkeletonState s;
    s.local.resize(nj);
    s.world.resize(nj);
    s.origin.resize(nj);
    s.scale = shape.scales;
    s.rest.resize(nj);
    for (std::size_t j = 0; j < nj; ++j) {
        const Joint& joint = m.joints[j];
        s.rest[j] = joint.rest;
        s.local[j] = rodrigues(pose.rotations[j]);
        if (joint.parent < 0) {
            s.world[j] = s.local[j];
            s.origin[j] = joint.rest + pose.translation;
        } else {
            const int p = joint.parent;
            s.world[j] = s.world[p] * s.local[j];
            s.origin[j] = s.origin[p] + s.world[p] * (s.scale[p] * (joint.rest - m.joints[p].rest));
        }
    }
    return s;
}

inline TriMesh pose_mesh(const SkinnedModel& m, const SkeletonState& s)
{
    TriMesh out;
    out.faces = m.rest.faces;
    out.vertices.resize(m.rest.num_vertices());
    for (std::size_t i = 0; i < m.rest.num_vertices(); ++i) {
        Vec3 x = Vec3::Zero();
        for (std::size_t e = m.weight_offsets[i]; e < m.weight_offsets[i + 1]; ++e)
            x += m.weight_value[e] * s.apply(m.weight_joint[e], m.rest.vertices[i]);
        out.vertices[i] = x;
    }
    return out;
}

/// Linear blend skinning of the template.
inline TriMesh pose_mesh(const SkinnedModel& m, const PoseParams& pose, const ShapeParams& shape)
{
    return pose_mesh(m, forward_kinematics(m, pose, shape));
}

inline std::vector<Vec3> regress_joints(const SkinnedModel& m, std::span<const Vec3> vertices)
{
    std::vector<Vec3> joints(m.num_joints(), Vec3::Zero());
    for (std::size_t k = 0; k < m.num_joints(); ++k)
        for (std::size_t e = m.regressor_offsets[k]; e < m.regressor_offsets[k + 1]; ++e)
            joints[k] += m.regressor_value[e] * vertices[m.regressor_vertex[e]];
    return joints;
}

/// Joints regressed from the posed mesh.
inline std::vector<Vec3> joints_3d(const SkinnedModel& m, const PoseParams& pose, const ShapeParams& shape)
{
    return regress_joints(m, pose_mesh(m, pose, shape).vertices);
}

/// Weak-perspective camera looking down -z: pixel = scale * (x, y) + principal.
struct Camera {
    double scale = 200.0;
    Vec2 principal = Vec2(256.0, 256.0);
};

inline std::vector<Vec2> project(std::span<const Vec3> points, const Camera& cam)
{
    if (!(cam.scale > 0.0))
        throw Error("camera scale must be positive");
    std::vector<Vec2> out;
    out.reserve(points.size());
    for (const Vec3& p : points)
        out.push_back(cam.scale * Vec2(p.x(), p.y()) + cam.principal);
    return out;
}

/// Derivative of skinned vertex positions with respect to the flat pose vector.
class PoseJacobian {
public:
    PoseJacobian(const SkinnedModel& model, const PoseParams& pose, const ShapeParams& shape)
        : model_(model)
        , state_(forward_kinematics(model, pose, shape))
        , omega_(model.num_joints())
    {
        for (std::size_t k = 0; k < model.num_joints(); ++k) {
            const auto d = rodrigues_derivative(pose.rotations[k]);
            const int p = model.joints[k].parent;
            const Mat3 frame = p < 0 ? Mat3::Identity() : state_.world[p];
            for (int c = 0; c < 3; ++c)
                omega_[k].col(c) = frame * unskew(d[c] * state_.local[k].transpose());
        }
    }

    const SkeletonState& state() const { return state_; }

    /// World angular velocity of joint k's subtree per unit change of its axis-angle components.
    const Mat3& angular_basis(std::size_t k) const { return omega_[k]; }

    std::size_t cols() const { return 3 * model_.num_joints() + 3; }

    /// Per-vertex displacement for a flat pose perturbation.
    std::vector<Vec3> apply(const Eigen::VectorXd& dpose) const
    {
        if (static_cast<std::size_t>(dpose.size()) != cols())
            throw Error("pose perturbation has the wrong length");
        const std::size_t nj = model_.num_joints();
        // a point attached to bone j moves by A_j x p - B_j
        std::vector<Vec3> a(nj), b(nj);
        for (std::size_t j = 0; j < nj; ++j) {
            const Vec3 w = omega_[j] * dpose.segment<3>(3 * j);
            const int p = model_.joints[j].parent;
            a[j] = w + (p < 0 ? Vec3::Zero() : a[p]);
            b[j] = w.cross(state_.origin[j]) + (p < 0 ? Vec3::Zero() : b[p]);
        }
        const Vec3 dt = dpose.tail<3>();
        std::vector<Vec3> out(model_.rest.num_vertices());
        for (std::size_t i = 0; i < out.size(); ++i) {
            Vec3 d = dt;
            for (std::size_t e = model_.weight_offsets[i]; e < model_.weight_offsets[i + 1]; ++e) {
                const int j = model_.weight_joint[e];
                const Vec3 x = state_.apply(j, model_.rest.vertices[i]);
                d += model_.weight_value[e] * (a[j].cross(x) - b[j]);
            }
            out[i] = d;
        }
        return out;
    }

    /// Pulls a per-vertex field back to the flat pose vector (transpose of apply).
    Eigen::VectorXd apply_transpose(std::span<const Vec3> g) const
    {
        if (g.size() != model_.rest.num_vertices())
            throw Error("vertex field has the wrong length");
        const std::size_t nj = model_.num_joints();
        std::vector<Vec3> p(nj, Vec3::Zero()), q(nj, Vec3::Zero());
        Vec3 total = Vec3::Zero();
        for (std::size_t i = 0; i < g.size(); ++i) {
            total += g[i];
            for (std::size_t e = model_.weight_offsets[i]; e < model_.weight_offsets[i + 1]; ++e) {
                const int j = model_.weight_joint[e];
                const Vec3 wg = model_.weight_value[e] * g[i];
                p[j] += state_.apply(j, model_.rest.vertices[i]).cross(wg);
                q[j] += wg;
            }
        }
        // children follow parents, so a reverse sweep accumulates subtrees
        for (std::size_t j = nj; j-- > 1;) {
            const int parent = model_.joints[j].parent;
            p[parent] += p[j];
            q[parent] += q[j];
        }
        Eigen::VectorXd out(cols());
        for (std::size_t k = 0; k < nj; ++k)
            out.segment<3>(3 * k) = omega_[k].transpose() * (p[k] - state_.origin[k].cross(q[k]));
        out.tail<3>() = total;
        return out;
    }

private:
    const SkinnedModel& model_;
    SkeletonState state_;
    std::vector<Mat3> omega_;
};

/// 2D joint targets with per-joint confidence.
struct JointTargets {
    std::vector<Vec2> joints;
    std::vector<double> confidence;
};

struct EnergyGradient {
    double value = 0.0;
    Eigen::VectorXd gradient;
};

/// E_J = sum_k conf_k |project(J_k) - target_k|^2 in pixels^2, with its
/// gradient over the flat pose vector.
inline EnergyGradient reprojection_energy(const SkinnedModel& m, const PoseParams& pose, const ShapeParams& shape,
                                          const Camera& cam, const JointTargets& targets)
{
    if (targets.joints.size() != m.num_joints() || targets.confidence.size() != m.num_joints())
        throw Error("expected " + std::to_string(m.num_joints()) + " target joints and confidences, got " +
                    std::to_string(targets.joints.size()) + " and " + std::to_string(targets.confidence.size()));
    for (double c : targets.confidence)
        if (!(c >= 0.0 && c <= 1.0))
            throw Error("joint confidence outside [0, 1]");

    const PoseJacobian jac(m, pose, shape);
    const TriMesh posed = pose_mesh(m, jac.state());
    const auto joints = regress_joints(m, posed.vertices);
    const auto pixels = project(joints, cam);

    EnergyGradient out;
    std::vector<Vec3> field(posed.num_vertices(), Vec3::Zero());
    for (std::size_t k = 0; k < m.num_joints(); ++k) {
        const Vec2 r = pixels[k] - targets.joints[k];
        out.value += targets.confidence[k] * r.squaredNorm();
        const Vec2 dj = 2.0 * targets.confidence[k] * cam.scale * r;
        for (std::size_t e = m.regressor_offsets[k]; e < m.regressor_offsets[k + 1]; ++e)
            field[m.regressor_vertex[e]] += m.regressor_value[e] * Vec3(dj.x(), dj.y(), 0.0);
    }
    out.gradient = jac.apply_transpose(field);
    return out;
}

/// Targets that a pose reproduces exactly, all confidences 1.
inline JointTargets targets_from_pose(const SkinnedModel& m, const PoseParams& pose, const ShapeParams& shape,
                                      const Camera& cam)
{
    const auto joints = joints_3d(m, pose, shape);
    return {project(joints, cam), std::vector<double>(m.num_joints(), 1.0)};
}

inline double mean_joint_error(const SkinnedModel& m, const PoseParams& pose, const ShapeParams& shape,
                               const Camera& cam, const JointTargets& targets)
{
    const auto pixels = project(joints_3d(m, pose, shape), cam);
    double sum = 0.0;
    for (std::size_t k = 0; k < pixels.size(); ++k)
        sum += (pixels[k] - targets.joints[k]).norm();
    return sum / static_cast<double>(pixels.size());
}

// ---------------------------------------------------------------------------
// Toy body

struct ToyBodyOptions {
    int segments = 24;     // vertices per tube ring, [8, 64]
    double spacing = 0.02; // centreline ring spacing, [0.005, 0.1]
    double blend = 0.08;   // blend half-width around interior joints, [0, 0.2]; capped at 0.4 of each adjacent bone
};

namespace detail {

struct TubeSpec {
    std::vector<Vec3> knots;           // centreline breakpoints
    std::vector<double> knot_radius;   // radius at each breakpoint
    std::vector<int> knot_joint;       // joint whose ring sits on the breakpoint, or -1
};

inline double smoothstep(double x)
{
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

} // namespace detail

/// Five disjoint swept tubes (trunk with head, two arms, two legs) in a
/// T-pose facing +z, 15 joints with the pelvis at the origin. About 10k
/// triangles at the defaults. Left is +x.
inline SkinnedModel build_toy_body(const ToyBodyOptions& opts = {})
{
    if (opts.segments < 8 || opts.segments > 64)
        throw Error("toy body segments must lie in [8, 64]");
    if (!(opts.spacing >= 0.005 && opts.spacing <= 0.1))
        throw Error("toy body spacing must lie in [0.005, 0.1]");
    if (!(opts.blend >= 0.0 && opts.blend <= 0.2))
        throw Error("toy body blend width must lie in [0, 0.2]");

    SkinnedModel m;
    auto add_joint = [&](std::string name, int parent, Vec3 rest) {
        m.joints.push_back({std::move(name), parent, rest});
        return static_cast<int>(m.joints.size() - 1);
    };
    const int pelvis = add_joint("pelvis", -1, Vec3(0, 0, 0));
    const int spine = add_joint("spine", pelvis, Vec3(0, 0.25, 0));
    const int neck = add_joint("neck", spine, Vec3(0, 0.5, 0));

    std::vector<detail::TubeSpec> tubes;
    tubes.push_back({{Vec3(0, -0.05, 0), Vec3(0, 0, 0), Vec3(0, 0.15, 0), Vec3(0, 0.25, 0), Vec3(0, 0.42, 0),
                      Vec3(0, 0.5, 0), Vec3(0, 0.54, 0), Vec3(0, 0.6, 0), Vec3(0, 0.7, 0)},
                     {0.13, 0.13, 0.115, 0.13, 0.14, 0.06, 0.045, 0.085, 0.09},
                     {-1, pelvis, -1, spine, -1, neck, -1, -1, -1}});
    for (const double side : {1.0, -1.0}) {
        const std::string prefix = side > 0 ? "l_" : "r_";
        const int shoulder = add_joint(prefix + "shoulder", spine, Vec3(side * 0.25, 0.45, 0));
        const int elbow = add_joint(prefix + "elbow", shoulder, Vec3(side * 0.52, 0.45, 0));
        const int wrist = add_joint(prefix + "wrist", elbow, Vec3(side * 0.78, 0.45, 0));
        tubes.push_back({{m.joints[shoulder].rest, m.joints[elbow].rest, m.joints[wrist].rest, Vec3(side * 0.86, 0.45, 0)},
                         {0.05, 0.04, 0.032, 0.035},
                         {shoulder, elbow, wrist, -1}});
    }
    for (const double side : {1.0, -1.0}) {
        const std::string prefix = side > 0 ? "l_" : "r_";
        const int hip = add_joint(prefix + "hip", pelvis, Vec3(side * 0.09, -0.25, 0));
        const int knee = add_joint(prefix + "knee", hip, Vec3(side * 0.09, -0.6, 0));
        const int ankle = add_joint(prefix + "ankle", knee, Vec3(side * 0.09, -0.95, 0));
        tubes.push_back({{m.joints[hip].rest, m.joints[knee].rest, m.joints[ankle].rest, Vec3(side * 0.09, -1.0, 0)},
                         {0.065, 0.048, 0.038, 0.04},
                         {hip, knee, ankle, -1}});
    }

    std::vector<TriMesh> parts;
    std::vector<std::vector<std::pair<int, double>>> weights; // per vertex, in merge order
    std::vector<std::vector<int>> regressor(m.joints.size());
    std::size_t base = 0;
    for (const auto& spec : tubes) {
        std::vector<Vec3> line{spec.knots.front()};
        std::vector<double> radii{spec.knot_radius.front()};
        std::vector<int> knot_point{0};
        for (std::size_t k = 1; k < spec.knots.size(); ++k) {
            const std::size_t before = line.size();
            append_segment(line, spec.knots[k - 1], spec.knots[k], opts.spacing);
            for (std::size_t i = before; i < line.size(); ++i) {
                const double f = static_cast<double>(i - before + 1) / static_cast<double>(line.size() - before);
                radii.push_back((1.0 - f) * spec.knot_radius[k - 1] + f * spec.knot_radius[k]);
            }
            knot_point.push_back(static_cast<int>(line.size() - 1));
        }
        const SweptTube tube = sweep_tube(line, radii, opts.segments, std::max(2, opts.segments / 4));

        // joints along this tube, ordered by arc length; the first owns everything before it
        std::vector<std::pair<double, int>> stations;
        for (std::size_t k = 0; k < spec.knots.size(); ++k) {
            if (spec.knot_joint[k] < 0)
                continue;
            const int ring = tube.ring_begin[knot_point[k]];
            stations.emplace_back(tube.arclength[ring], spec.knot_joint[k]);
            for (int j = 0; j < opts.segments; ++j)
                regressor[spec.knot_joint[k]].push_back(static_cast<int>(base) + ring + j);
        }
        const double tube_end = tube.arclength[tube.ring_begin.back()];
        for (std::size_t v = 0; v < tube.mesh.num_vertices(); ++v) {
            const double s = tube.arclength[v];
            std::size_t owner = 0;
            while (owner + 1 < stations.size() && stations[owner + 1].first <= s)
                ++owner;
            std::vector<std::pair<int, double>> w{{stations[owner].second, 1.0}};
            // blend with the neighbouring bone across an interior joint
            for (std::size_t k = 1; k < stations.size(); ++k) {
                const double next = k + 1 < stations.size() ? stations[k + 1].first : tube_end;
                const double h = std::min({opts.blend, 0.4 * (stations[k].first - stations[k - 1].first),
                                           0.4 * (next - stations[k].first)});
                const double d = s - stations[k].first;
                if (h > 0.0 && std::abs(d) < h) {
                    const double child = detail::smoothstep(0.5 + d / (2.0 * h));
                    w = {{stations[k - 1].second, 1.0 - child}, {stations[k].second, child}};
                    std::erase_if(w, [](const auto& e) { return e.second == 0.0; });
                }
            }
            weights.push_back(std::move(w));
        }
        base += tube.mesh.num_vertices();
        parts.push_back(tube.mesh);
    }
    m.rest = merge(std::span<const TriMesh>(parts));

    m.weight_offsets.push_back(0);
    for (const auto& w : weights) {
        for (const auto& [j, value] : w) {
            m.weight_joint.push_back(j);
            m.weight_value.push_back(value);
        }
        m.weight_offsets.push_back(m.weight_joint.size());
    }
    m.regressor_offsets.push_back(0);
    for (const auto& row : regressor) {
        for (int v : row) {
            m.regressor_vertex.push_back(v);
            m.regressor_value.push_back(1.0 / static_cast<double>(row.size()));
        }
        m.regressor_offsets.push_back(m.regressor_vertex.size());
    }
    check_model(m);
    return m;
}

/// Named flexion for pose presets: `joint` rotates about a fixed axis in its
/// parent frame. Elbows fold the forearm toward +z, knees fold the shin
/// toward -z, hips swing the leg forward, shoulders lower the arm.
struct Flexion {
    std::string_view name;
    std::string_view joint;
    Vec3 axis;
};

inline const std::array<Flexion, 12>& flexions()
{
    static const std::array<Flexion, 12> table{{
        {"elbow", "l_elbow", Vec3(0, -1, 0)},
        {"l_elbow", "l_elbow", Vec3(0, -1, 0)},
        {"r_elbow", "r_elbow", Vec3(0, 1, 0)},
        {"shoulder", "l_shoulder", Vec3(0, 0, -1)},
        {"l_shoulder", "l_shoulder", Vec3(0, 0, -1)},
        {"r_shoulder", "r_shoulder", Vec3(0, 0, 1)},
        {"knee", "l_knee", Vec3(1, 0, 0)},
        {"l_knee", "l_knee", Vec3(1, 0, 0)},
        {"r_knee", "r_knee", Vec3(1, 0, 0)},
        {"hip", "l_hip", Vec3(-1, 0, 0)},
        {"l_hip", "l_hip", Vec3(-1, 0, 0)},
        {"r_hip", "r_hip", Vec3(-1, 0, 0)},
    }};
    return table;
}

/// Sets the named flexion to `degrees` (replacing that joint's rotation).
inline void set_flexion(const SkinnedModel& m, PoseParams& pose, std::string_view name, double degrees)
{
    for (const Flexion& f : flexions())
        if (f.name == name) {
            pose.rotations[m.joint_index(f.joint)] = degrees * std::numbers::pi / 180.0 * f.axis;
            return;
        }
    throw Error("unknown flexion '" + std::string(name) + "'");
}

/// Parses "name:deg[,name:deg...]" on top of the zero pose.
inline PoseParams parse_pose_preset(const SkinnedModel& m, std::string_view spec)
{
    PoseParams pose = PoseParams::zero(m.num_joints());
    while (!spec.empty()) {
        const auto comma = spec.find(',');
        const std::string_view item = spec.substr(0, comma);
        spec = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
        const auto colon = item.find(':');
        if (colon == std::string_view::npos)
            throw Error("pose item '" + std::string(item) + "' must look like name:degrees");
        const std::string value(item.substr(colon + 1));
        char* end = nullptr;
        const double deg = std::strtod(value.c_str(), &end);
        if (value.empty() || end != value.c_str() + value.size())
            throw Error("pose item '" + std::string(item) + "' has a malformed angle");
        if (!(std::abs(deg) < 180.0))
            throw Error("pose angle must lie strictly between -180 and 180 degrees");
        set_flexion(m, pose, item.substr(0, colon), deg);
    }
    return pose;
}

} // namespace untangle
