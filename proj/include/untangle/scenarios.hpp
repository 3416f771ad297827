#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "untangle/articulated.hpp"
#include "untangle/optimizer.hpp"

namespace untangle {

// Fitting scenarios on the default toy body. Both use the default camera
// (200 px per unit, principal point at the centre of a 512 px canvas).

struct FitScenario {
    std::string name;
    PoseParams truth; // pose that generated the targets
    PoseParams init;
    JointTargets targets;
    Camera camera;
};

/// Step sizes that keep plain descent on E_J stable: the translation block of
/// its Hessian is 2 * scale^2 * sum(conf), about 1.2e6 at 200 px per unit.
inline OptimConfig fit_config()
{
    OptimConfig cfg;
    cfg.learning_rate = 1e-6;
    cfg.max_iters = 2000;
    return cfg;
}

inline FitOptions fit_options(bool use_spt)
{
    FitOptions f;
    f.use_spt = use_spt;
    f.spt_weight = 1000.0;
    return f;
}

namespace detail {

inline Vec3 rotation_between(const Vec3& from, const Vec3& to)
{
    const Eigen::AngleAxisd a(Eigen::Quaterniond::FromTwoVectors(from, to));
    return a.angle() * a.axis();
}

/// Left arm with its upper arm and forearm along the given world directions.
inline PoseParams left_arm_pose(const SkinnedModel& m, const Vec3& upper, const Vec3& fore)
{
    PoseParams p = PoseParams::zero(m.num_joints());
    const Vec3 ws = rotation_between(Vec3::UnitX(), upper.normalized());
    p.rotations[m.joint_index("l_shoulder")] = ws;
    p.rotations[m.joint_index("l_elbow")] =
        rotation_between(Vec3::UnitX(), rodrigues(ws).transpose() * fore.normalized());
    return p;
}

} // namespace detail

/// The left forearm crosses in front of the chest. Weak perspective cannot
/// tell that from a forearm slanting back through the torso, which is where
/// the fit starts; reprojection alone is already near its minimum there.
inline FitScenario limb_through_torso_scenario(const SkinnedModel& m, const Camera& cam = {})
{
    FitScenario s;
    s.name = "limb-through-torso";
    s.camera = cam;
    const ShapeParams shape = ShapeParams::unit(m.num_joints());
    s.truth = detail::left_arm_pose(m, Vec3(0.1, -1, 0.35), Vec3(-1, 0.1, 0.5));
    s.init = detail::left_arm_pose(m, Vec3(0.1, -1, 0.35), Vec3(-1, 0.1, -0.12));
    s.targets = targets_from_pose(m, s.truth, shape, cam);
    return s;
}

/// Targets from a mildly flexed pose; the fit starts from that pose with
/// Gaussian noise of `sigma` radians on every rotation component.
inline FitScenario synthetic_recovery_scenario(const SkinnedModel& m, std::uint64_t seed = 7, double sigma = 0.2,
                                               const Camera& cam = {})
{
    FitScenario s;
    s.name = "synthetic-recovery";
    s.camera = cam;
    s.truth = parse_pose_preset(m, "l_shoulder:40,r_elbow:30,l_knee:25,r_hip:20");
    s.targets = targets_from_pose(m, s.truth, ShapeParams::unit(m.num_joints()), cam);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    s.init = s.truth;
    for (Vec3& w : s.init.rotations)
        for (int c = 0; c < 3; ++c)
            w[c] += noise(rng);
    clamp_rotations(s.init);
    return s;
}

} // namespace untangle
