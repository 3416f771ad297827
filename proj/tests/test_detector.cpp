#include <numbers>

#include <gtest/gtest.h>

#include "untangle/untangle.hpp"

using namespace untangle;

namespace {

/// One pixel holding the given facing sequence; fragment k lies on face k,
/// whose vertices are 3k..3k+2, at depth k.
struct SyntheticList {
    TriMesh mesh;
    FragmentBuffer buf;

    explicit SyntheticList(const std::vector<bool>& facing)
    {
        for (std::size_t k = 0; k < facing.size(); ++k) {
            const int b = static_cast<int>(3 * k);
            mesh.vertices.insert(mesh.vertices.end(), {Vec3(0, 0, double(k)), Vec3(1, 0, double(k)), Vec3(0, 1, double(k))});
            mesh.faces.push_back({b, b + 1, b + 2});
            buf.fragments.push_back(Fragment{static_cast<int>(k), facing[k], static_cast<double>(k)});
        }
        buf.grid.rows = buf.grid.cols = 1;
        buf.offsets = {0, static_cast<std::uint32_t>(facing.size())};
    }

    std::vector<Label> face_labels() const
    {
        const Classification c = walk_and_classify(mesh, buf);
        std::vector<Label> out;
        for (std::size_t k = 0; k < mesh.num_faces(); ++k) {
            out.push_back(c.labels[3 * k]);
            EXPECT_EQ(c.labels[3 * k + 1], out.back());
            EXPECT_EQ(c.labels[3 * k + 2], out.back());
        }
        return out;
    }
};

bool point_in_triangle_strict(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c)
{
    const auto cross = [](const Vec2& o, const Vec2& x, const Vec2& y) {
        return (x - o).x() * (y - o).y() - (x - o).y() * (y - o).x();
    };
    const double d1 = cross(a, b, p), d2 = cross(b, c, p), d3 = cross(c, a, p);
    return (d1 > 0 && d2 > 0 && d3 > 0) || (d1 < 0 && d2 < 0 && d3 < 0);
}

} // namespace

TEST(Walk, FrontBack)
{
    const SyntheticList s({true, false});
    EXPECT_EQ(s.face_labels(), (std::vector<Label>{Label::V0, Label::V0}));
}

TEST(Walk, NestedPairIsOuterInterpenetration)
{
    const SyntheticList s({true, true, false, false});
    EXPECT_EQ(s.face_labels(), (std::vector<Label>{Label::V0, Label::Vout, Label::Vout, Label::V0}));
}

TEST(Walk, InvertedPairIsInnerInterpenetration)
{
    const SyntheticList s({true, false, false, true});
    EXPECT_EQ(s.face_labels(), (std::vector<Label>{Label::V0, Label::V0, Label::Vin, Label::Vin}));
}

TEST(Walk, DeeperNestingGeneralizesMonotonically)
{
    const SyntheticList s({true, true, true, false, false, false});
    EXPECT_EQ(s.face_labels(),
              (std::vector<Label>{Label::V0, Label::Vout, Label::Vout, Label::Vout, Label::Vout, Label::V0}));
    const Classification c = walk_and_classify(s.mesh, s.buf);
    EXPECT_GT(c.diagnostics.deep_nesting, 0u);
    EXPECT_EQ(c.diagnostics.nonzero_terminal_counters, 0u);
}

TEST(Walk, UnbalancedListIsReportedNotFatal)
{
    const SyntheticList s({true, true, false});
    const Classification c = walk_and_classify(s.mesh, s.buf);
    EXPECT_EQ(c.diagnostics.nonzero_terminal_counters, 1u);
}

TEST(Walk, ConflictingLabelsResolveByPrecedence)
{
    // face 1 is reached from two pixels, once as V0 and once as Vout
    TriMesh mesh;
    for (int k = 0; k < 3; ++k) {
        mesh.vertices.insert(mesh.vertices.end(), {Vec3(0, 0, k), Vec3(1, 0, k), Vec3(0, 1, k)});
        mesh.faces.push_back({3 * k, 3 * k + 1, 3 * k + 2});
    }
    FragmentBuffer buf;
    buf.grid.rows = 1;
    buf.grid.cols = 2;
    buf.fragments = {{1, true, 0.0}, {2, false, 1.0}, {0, true, 0.0}, {1, true, 1.0}, {2, false, 2.0}, {0, false, 3.0}};
    buf.offsets = {0, 2, 6};
    const Classification c = walk_and_classify(mesh, buf);
    EXPECT_EQ(c.labels[3], Label::Vout);
    EXPECT_EQ(c.labels[0], Label::V0);
}

TEST(FitGrid, CubeFitsWithMargin)
{
    const TriMesh cube = box(Vec3(1, 1, 1), Vec3(0.5, 0.5, 0.5));
    const DetectionGrid g = fit_grid(cube, 512, 512, ViewAxis::PosZ);
    EXPECT_GE(g.pixel_size * g.cols, 1.0);
    const ScreenFrame f(ViewAxis::PosZ);
    for (const Vec3& p : cube.vertices) {
        const double px = (f.u(p) - g.origin.x()) / g.pixel_size, py = (f.v(p) - g.origin.y()) / g.pixel_size;
        EXPECT_GE(px, 2.0 - 1e-9);
        EXPECT_LE(px, g.cols - 2.0 + 1e-9);
        EXPECT_GE(py, 2.0 - 1e-9);
        EXPECT_LE(py, g.rows - 2.0 + 1e-9);
    }
}

TEST(FitGrid, FlatMeshAndErrors)
{
    const TriMesh flat{{{0, 0, 0}, {2, 0, 0}, {0, 0, 1}}, {{0, 1, 2}}};
    const DetectionGrid g = fit_grid(flat, 64, 64, ViewAxis::PosZ);
    EXPECT_NEAR(g.pixel_size, 2.0 / 60.0, 1e-15);
    EXPECT_THROW(fit_grid(TriMesh{}, 64, 64), Error);
    EXPECT_THROW(fit_grid(flat, 3, 64), Error);
}

TEST(FitGrid, ScreenCentreIndependentOfRayCount)
{
    const TriMesh m = bent_tube(0.2, 3.4, 16);
    const DetectionGrid a = fit_grid(m, 128, 128), b = fit_grid(m, 2048, 2048);
    const Vec2 ca = a.origin + 0.5 * a.pixel_size * Vec2(a.cols, a.rows);
    const Vec2 cb = b.origin + 0.5 * b.pixel_size * Vec2(b.cols, b.rows);
    EXPECT_LT((ca - cb).norm(), 1e-12);
    EXPECT_NEAR((a.pixel_size * (a.cols - 4)), (b.pixel_size * (b.cols - 4)), 1e-12);
}

TEST(Rasterize, SingleTriangleMatchesBruteForce)
{
    const TriMesh tri{{{0.013, 0.071, 0.3}, {0.917, 0.233, 0.1}, {0.377, 0.861, -0.2}}, {{0, 1, 2}}};
    const DetectionGrid g = fit_grid(tri, 97, 83);
    const FragmentBuffer buf = rasterize(tri, g);
    const ScreenFrame f(g.axis);
    const Vec2 a(f.u(tri.vertices[0]), f.v(tri.vertices[0])), b(f.u(tri.vertices[1]), f.v(tri.vertices[1])),
        c(f.u(tri.vertices[2]), f.v(tri.vertices[2]));
    std::size_t expected = 0;
    for (int r = 0; r < g.rows; ++r)
        for (int col = 0; col < g.cols; ++col) {
            const bool in = point_in_triangle_strict(g.pixel_center(r, col), a, b, c);
            expected += in;
            EXPECT_EQ(buf.pixel(r, col).size(), in ? 1u : 0u);
        }
    EXPECT_EQ(buf.fragments.size(), expected);
}

TEST(Rasterize, DepthIsInterpolatedAtPixelCentre)
{
    // plane z = 0.25 x + 0.5 y + 1
    const auto z = [](double x, double y) { return 0.25 * x + 0.5 * y + 1.0; };
    const TriMesh tri{{{0, 0, z(0, 0)}, {1, 0, z(1, 0)}, {0, 1, z(0, 1)}}, {{0, 1, 2}}};
    const DetectionGrid g = fit_grid(tri, 32, 32);
    const FragmentBuffer buf = rasterize(tri, g);
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c)
            for (const Fragment& fr : buf.pixel(r, c)) {
                const Vec2 p = g.pixel_center(r, c);
                EXPECT_NEAR(fr.depth, z(p.x(), p.y()), 1e-12);
                EXPECT_FALSE(fr.front_facing); // normal +z, rays travel +z
            }
}

TEST(Rasterize, SharedEdgeThroughPixelCentresIsClaimedOnce)
{
    // square split along its diagonal, which passes exactly through pixel centres
    const TriMesh quad{{{0, 0, 0}, {8, 0, 0}, {8, 8, 0}, {0, 8, 0}}, {{0, 1, 2}, {0, 2, 3}}};
    DetectionGrid g;
    g.rows = g.cols = 8;
    g.origin = Vec2(0, 0);
    g.pixel_size = 1.0;
    const FragmentBuffer buf = rasterize(quad, g);
    EXPECT_EQ(buf.fragments.size(), 64u);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            EXPECT_EQ(buf.pixel(r, c).size(), 1u);
}

TEST(Rasterize, RayParallelTriangleIsSkipped)
{
    const TriMesh tri{{{0, 0, 0}, {1, 0, 0}, {0, 0, 1}}, {{0, 1, 2}}};
    DetectionGrid g;
    g.rows = g.cols = 8;
    g.origin = Vec2(-1, -1);
    g.pixel_size = 0.5;
    const FragmentBuffer buf = rasterize(tri, g);
    EXPECT_TRUE(buf.fragments.empty());
    EXPECT_EQ(buf.skipped_faces, std::vector<int>{0});
}

TEST(Rasterize, ConvexListsAlternateFrontBack)
{
    const TriMesh s = icosphere(1.0, 3);
    for (ViewAxis axis : {ViewAxis::PosZ, ViewAxis::NegX, ViewAxis::PosY}) {
        const FragmentBuffer buf = rasterize(s, fit_grid(s, 128, 128, axis));
        std::size_t nonempty = 0;
        for (int r = 0; r < 128; ++r)
            for (int c = 0; c < 128; ++c) {
                const auto list = buf.pixel(r, c);
                if (list.empty())
                    continue;
                ++nonempty;
                ASSERT_EQ(list.size(), 2u);
                EXPECT_TRUE(list[0].front_facing);
                EXPECT_FALSE(list[1].front_facing);
                EXPECT_LT(list[0].depth, list[1].depth);
            }
        EXPECT_GT(nonempty, 1000u);
    }
}

TEST(Classify, ConvexMeshesAreClean)
{
    for (const TriMesh& m : {icosphere(1.0, 3), box(Vec3(1, 2, 3)), capsule(0.4, 1.5, 24)})
        for (ViewAxis axis : {ViewAxis::PosX, ViewAxis::NegY, ViewAxis::PosZ, ViewAxis::NegZ}) {
            const Classification c = classify(m, {256, 256, axis, 1});
            EXPECT_EQ(c.count_vout, 0u);
            EXPECT_EQ(c.count_vin, 0u);
            EXPECT_EQ(c.count_v0 + c.unseen.size(), m.num_vertices());
            EXPECT_EQ(c.diagnostics.nonzero_terminal_counters, 0u);
        }
}

TEST(Classify, OverlappingBoxesLabelTheBuriedFaces)
{
    // B's bottom face sits inside A and A's top face inside B
    const TriMesh a = box(Vec3(2, 2, 2));
    const TriMesh b = box(Vec3(1, 1, 2), Vec3(0, 0, 1.5));
    const Classification c = classify(merge({a, b}), {256, 256, ViewAxis::PosZ, 1});
    EXPECT_EQ(c.count_vin, 0u);
    EXPECT_EQ(c.count_vout, 8u);
    for (int i = 0; i < 8; ++i) {
        const bool a_top = (i & 4) != 0, b_bottom = (i & 4) == 0;
        EXPECT_EQ(c.labels[i], a_top ? Label::Vout : Label::V0) << "A corner " << i;
        EXPECT_EQ(c.labels[8 + i], b_bottom ? Label::Vout : Label::V0) << "B corner " << i;
    }
}

TEST(Classify, BentTubeIsOuterInterpenetrationOnly)
{
    const TriMesh t = bent_tube(0.2, 200 * std::numbers::pi / 180, 64);
    const Classification c = classify(t);
    EXPECT_GT(c.count_vout, 0u);
    EXPECT_EQ(c.count_vin, 0u);
}

TEST(Classify, CountsPartitionVertices)
{
    const TriMesh m = two_spheres(-1.0, 1.0, 3);
    const Classification c = classify(m);
    EXPECT_EQ(c.count_v0 + c.count_vout + c.count_vin + c.unseen.size(), m.num_vertices());
    for (int v : c.unseen)
        EXPECT_EQ(c.labels[v], Label::V0);
}

TEST(Classify, DeterministicAndThreadIndependent)
{
    const TriMesh m = two_spheres(-0.7, 1.0, 3);
    const Classification a = classify(m, {300, 200, ViewAxis::PosZ, 1});
    const Classification b = classify(m, {300, 200, ViewAxis::PosZ, 1});
    const Classification c = classify(m, {300, 200, ViewAxis::PosZ, 3});
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.labels, c.labels);
    EXPECT_EQ(a.unseen, c.unseen);
    EXPECT_EQ(a.diagnostics.fragments, c.diagnostics.fragments);
    EXPECT_EQ(a.diagnostics.nonzero_terminal_counters, c.diagnostics.nonzero_terminal_counters);
}

TEST(Classify, CoplanarDuplicatesAreCounted)
{
    const TriMesh s = icosphere(1.0, 1);
    const Classification c = classify(merge({s, s}), {64, 64, ViewAxis::PosZ, 1});
    EXPECT_GT(c.diagnostics.coincident_depths, 0u);
}

TEST(ViewAxisParsing, AcceptsSignedAndBareNames)
{
    EXPECT_EQ(parse_view_axis("+z"), ViewAxis::PosZ);
    EXPECT_EQ(parse_view_axis("z"), ViewAxis::PosZ);
    EXPECT_EQ(parse_view_axis("-x"), ViewAxis::NegX);
    EXPECT_THROW(parse_view_axis("w"), Error);
}
