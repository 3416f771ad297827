#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "untangle/untangle.hpp"

using namespace untangle;
namespace ts = untangle::test_support;

namespace {

const SkinnedModel& body()
{
    static const SkinnedModel m = build_toy_body();
    return m;
}

Vec3 axis_angle(const Mat3& r)
{
    const Eigen::AngleAxisd a(r);
    return a.angle() * a.axis();
}

} // namespace

TEST(Rodrigues, MatchesAngleAxisAndSeries)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const Vec3 w(n(rng), n(rng), n(rng));
        const Mat3 ref = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
        EXPECT_LE((rodrigues(w) - ref).cwiseAbs().maxCoeff(), 1e-14);
    }
    EXPECT_EQ(rodrigues(Vec3::Zero()), Mat3::Identity());
    const Vec3 tiny(1e-8, -2e-8, 3e-8);
    EXPECT_LE((rodrigues(tiny) - (Mat3::Identity() + skew(tiny))).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Rodrigues, DerivativeMatchesFiniteDifferences)
{
    for (const Vec3& w : {Vec3(0.3, -0.2, 0.9), Vec3(0, 0, 0), Vec3(1e-7, 0, -1e-7), Vec3(2.5, 0.5, -1.0)}) {
        const auto d = rodrigues_derivative(w);
        for (int c = 0; c < 3; ++c) {
            const double h = 1e-6;
            const Mat3 fd = (rodrigues(w + h * Vec3::Unit(c)) - rodrigues(w - h * Vec3::Unit(c))) / (2 * h);
            EXPECT_LE((d[c] - fd).cwiseAbs().maxCoeff(), 1e-8) << w.transpose() << " component " << c;
        }
    }
}

TEST(ToyBody, ModelInvariants)
{
    const SkinnedModel& m = body();
    EXPECT_NO_THROW(check_model(m));
    EXPECT_TRUE(validate(m.rest).ok());
    EXPECT_GE(m.num_joints(), 12u);
    EXPECT_GE(m.rest.num_faces(), 1000u);
    EXPECT_LE(m.rest.num_faces(), 15000u);
    for (std::size_t i = 0; i < m.rest.num_vertices(); ++i) {
        double sum = 0.0;
        EXPECT_LE(m.weight_offsets[i + 1] - m.weight_offsets[i], 4u);
        for (std::size_t e = m.weight_offsets[i]; e < m.weight_offsets[i + 1]; ++e)
            sum += m.weight_value[e];
        EXPECT_NEAR(sum, 1.0, 1e-9);
    }
    for (std::size_t k = 0; k < m.num_joints(); ++k) {
        double sum = 0.0;
        for (std::size_t e = m.regressor_offsets[k]; e < m.regressor_offsets[k + 1]; ++e)
            sum += m.regressor_value[e];
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(ToyBody, DeterministicAndOptionRanges)
{
    const SkinnedModel a = build_toy_body(), b = build_toy_body();
    EXPECT_EQ(a.rest.vertices, b.rest.vertices);
    EXPECT_EQ(a.weight_value, b.weight_value);
    EXPECT_THROW(build_toy_body({.segments = 4}), Error);
    EXPECT_THROW(build_toy_body({.spacing = 0.5}), Error);
    EXPECT_THROW(build_toy_body({.blend = 0.3}), Error);
    const SkinnedModel coarse = build_toy_body({.segments = 12, .spacing = 0.05});
    EXPECT_TRUE(validate(coarse.rest).ok());
}

TEST(ToyBody, BentElbowSelfIntersects)
{
    const SkinnedModel& m = body();
    const TriMesh posed = pose_mesh(m, parse_pose_preset(m, "elbow:150"), ShapeParams::unit(m.num_joints()));
    EXPECT_GT(classify(posed).count_vout, 0u);
    const auto oracle = oracle_classify(posed);
    EXPECT_GT(std::count(oracle.begin(), oracle.end(), OracleLabel::Vout), 0);
}

TEST(PoseMesh, IdentityPoseIsTemplate)
{
    const SkinnedModel& m = body();
    const TriMesh posed = pose_mesh(m, PoseParams::zero(m.num_joints()), ShapeParams::unit(m.num_joints()));
    ASSERT_EQ(posed.vertices.size(), m.rest.vertices.size());
    for (std::size_t i = 0; i < posed.vertices.size(); ++i) // weights sum to one up to rounding
        EXPECT_LE((posed.vertices[i] - m.rest.vertices[i]).norm(), 1e-12);
    EXPECT_EQ(posed.faces, m.rest.faces);
}

TEST(PoseMesh, RootRotationIsRigid)
{
    const SkinnedModel& m = body();
    PoseParams p = PoseParams::zero(m.num_joints());
    p.rotations[0] = Vec3(0.4, -1.1, 0.7);
    p.translation = Vec3(0.3, 0.2, -0.5);
    const Mat3 r = rodrigues(p.rotations[0]);
    const TriMesh posed = pose_mesh(m, p, ShapeParams::unit(m.num_joints()));
    for (std::size_t i = 0; i < posed.num_vertices(); ++i)
        EXPECT_LE((posed.vertices[i] - (r * m.rest.vertices[i] + p.translation)).norm(), 1e-12);
}

TEST(PoseMesh, MatchesIndependentReference)
{
    const SkinnedModel& m = body();
    for (int seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
        const PoseParams p = ts::random_pose(m, rng, 0.6);
        const ShapeParams s = ts::random_shape(m, rng);
        const TriMesh posed = pose_mesh(m, p, s);
        const auto ref = ts::reference_lbs(m, p, s);
        for (std::size_t i = 0; i < ref.size(); ++i)
            ASSERT_LE((posed.vertices[i] - ref[i]).norm(), 1e-9) << "seed " << seed << " vertex " << i;
    }
}

TEST(PoseParams, FlatRoundTripAndLimits)
{
    const SkinnedModel& m = body();
    std::mt19937_64 rng(5);
    const PoseParams p = ts::random_pose(m, rng);
    const PoseParams q = PoseParams::from_flat(p.flat());
    EXPECT_EQ(q.rotations, p.rotations);
    EXPECT_EQ(q.translation, p.translation);
    PoseParams bad = p;
    bad.rotations[3] = Vec3(std::numbers::pi, 0, 0);
    EXPECT_THROW(pose_mesh(m, bad, ShapeParams::unit(m.num_joints())), Error);
    clamp_rotations(bad);
    EXPECT_LT(bad.rotations[3].norm(), std::numbers::pi);
    ShapeParams s = ShapeParams::unit(m.num_joints());
    s.scales[2] = 2.5;
    EXPECT_THROW(pose_mesh(m, p, s), Error);
}

TEST(Joints, IdentityTranslationAndWristChain)
{
    const SkinnedModel& m = body();
    const ShapeParams unit = ShapeParams::unit(m.num_joints());
    PoseParams p = PoseParams::zero(m.num_joints());
    const auto rest = joints_3d(m, p, unit);
    for (std::size_t k = 0; k < m.num_joints(); ++k)
        EXPECT_LE((rest[k] - m.joints[k].rest).norm(), 1e-12) << m.joints[k].name;

    p.translation = Vec3(0.2, -0.1, 0.4);
    const auto shifted = joints_3d(m, p, unit);
    for (std::size_t k = 0; k < m.num_joints(); ++k)
        EXPECT_LE((shifted[k] - rest[k] - p.translation).norm(), 1e-12);

    // wrist position by hand: rotate the forearm about the elbow
    const PoseParams bent = parse_pose_preset(m, "elbow:150");
    const int elbow = m.joint_index("l_elbow"), wrist = m.joint_index("l_wrist");
    const Vec3 expected =
        m.joints[elbow].rest + rodrigues(bent.rotations[elbow]) * (m.joints[wrist].rest - m.joints[elbow].rest);
    EXPECT_LE((joints_3d(m, bent, unit)[wrist] - expected).norm(), 1e-9);
}

TEST(Project, WeakPerspective)
{
    const Camera cam{100.0, Vec2(256, 256)};
    const std::vector<Vec3> pts{Vec3(0.5, -0.5, 3.0), Vec3(0.5, -0.5, -7.0)};
    const auto px = project(pts, cam);
    EXPECT_EQ(px[0], Vec2(306, 206));
    EXPECT_EQ(px[1], px[0]);
    const auto ortho = project(pts, Camera{1.0, Vec2::Zero()});
    EXPECT_EQ(ortho[0], Vec2(0.5, -0.5));
    EXPECT_THROW(project(pts, Camera{0.0, Vec2::Zero()}), Error);
}

TEST(ReprojectionEnergy, MinimumAndThreeFourFive)
{
    const SkinnedModel& m = body();
    const ShapeParams unit = ShapeParams::unit(m.num_joints());
    const PoseParams p = parse_pose_preset(m, "l_shoulder:30,r_knee:20");
    const Camera cam;
    JointTargets t = targets_from_pose(m, p, unit, cam);
    const EnergyGradient at_min = reprojection_energy(m, p, unit, cam, t);
    EXPECT_NEAR(at_min.value, 0.0, 1e-18);
    EXPECT_LE(at_min.gradient.cwiseAbs().maxCoeff(), 1e-9);

    t.joints[4] += Vec2(3, 4);
    EXPECT_NEAR(reprojection_energy(m, p, unit, cam, t).value, 25.0, 1e-9);
    t.joints.pop_back();
    EXPECT_THROW(reprojection_energy(m, p, unit, cam, t), Error);
}

TEST(ReprojectionEnergy, GradientMatchesFiniteDifferences)
{
    const SkinnedModel& m = body();
    const Camera cam;
    for (int seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(100 + seed));
        const PoseParams p = ts::random_pose(m, rng);
        const ShapeParams s = ts::random_shape(m, rng);
        EXPECT_LE(ts::ej_gradient_error(m, p, s, cam, ts::random_targets(m, rng, cam)), 1e-4);
    }
}

TEST(ReprojectionEnergy, InvariantUnderInPlaneRotation)
{
    const SkinnedModel& m = body();
    const ShapeParams unit = ShapeParams::unit(m.num_joints());
    const Camera cam;
    std::mt19937_64 rng(9);
    PoseParams p = ts::random_pose(m, rng);
    const JointTargets t = ts::random_targets(m, rng, cam);
    const double e0 = reprojection_energy(m, p, unit, cam, t).value;

    const Mat3 rz = rodrigues(Vec3(0, 0, 0.8));
    p.rotations[0] = axis_angle(rz * rodrigues(p.rotations[0]));
    p.translation = rz * p.translation;
    JointTargets rt = t;
    const Eigen::Matrix2d r2 = rz.topLeftCorner<2, 2>();
    for (Vec2& q : rt.joints)
        q = r2 * (q - cam.principal) + cam.principal;
    EXPECT_NEAR(reprojection_energy(m, p, unit, cam, rt).value, e0, 1e-9 * e0);
}

TEST(PoseJacobian, IdentityPoseColumnsMatchFiniteDifferences)
{
    const SkinnedModel& m = body();
    EXPECT_LE(ts::jacobian_error(m, PoseParams::zero(m.num_joints()), ShapeParams::unit(m.num_joints())), 1e-5);
}

TEST(PoseJacobian, RandomPoseColumnsMatchFiniteDifferences)
{
    const SkinnedModel& m = body();
    std::mt19937_64 rng(21);
    EXPECT_LE(ts::jacobian_error(m, ts::random_pose(m, rng), ts::random_shape(m, rng)), 1e-4);
}

TEST(PoseJacobian, TransposeIsAdjointAndTranslationSums)
{
    const SkinnedModel& m = body();
    std::mt19937_64 rng(4);
    const PoseJacobian jac(m, ts::random_pose(m, rng), ts::random_shape(m, rng));
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Vec3> g(m.rest.num_vertices());
    for (Vec3& v : g)
        v = Vec3(n(rng), n(rng), n(rng));
    Eigen::VectorXd x(jac.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] = n(rng);
    const auto jx = jac.apply(x);
    double lhs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        lhs += jx[i].dot(g[i]);
    const Eigen::VectorXd jtg = jac.apply_transpose(g);
    EXPECT_NEAR(lhs, x.dot(jtg), 1e-10 * std::abs(lhs));

    Vec3 total = Vec3::Zero();
    for (const Vec3& v : g)
        total += v;
    EXPECT_LE((jtg.tail<3>() - total).norm(), 1e-12 * total.norm() + 1e-12);
}

TEST(PosePresets, ParseAndReject)
{
    const SkinnedModel& m = body();
    const PoseParams p = parse_pose_preset(m, "elbow:90,r_knee:-30");
    EXPECT_NEAR(p.rotations[m.joint_index("l_elbow")].norm(), std::numbers::pi / 2, 1e-15);
    EXPECT_NEAR(p.rotations[m.joint_index("r_knee")].norm(), std::numbers::pi / 6, 1e-15);
    EXPECT_TRUE(parse_pose_preset(m, "").flat().isZero());
    EXPECT_THROW(parse_pose_preset(m, "wing:10"), Error);
    EXPECT_THROW(parse_pose_preset(m, "elbow"), Error);
    EXPECT_THROW(parse_pose_preset(m, "elbow:abc"), Error);
    EXPECT_THROW(parse_pose_preset(m, "elbow:180"), Error);
}
