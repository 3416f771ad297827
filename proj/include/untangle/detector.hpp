#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "untangle/error.hpp"
#include "untangle/mesh.hpp"

namespace untangle {

/// Direction in which detection rays travel.
enum class ViewAxis { PosX, NegX, PosY, NegY, PosZ, NegZ };

inline std::string_view to_string(ViewAxis axis)
{
    switch (axis) {
    case ViewAxis::PosX: return "+x";
    case ViewAxis::NegX: return "-x";
    case ViewAxis::PosY: return "+y";
    case ViewAxis::NegY: return "-y";
    case ViewAxis::PosZ: return "+z";
    case ViewAxis::NegZ: return "-z";
    }
    return "?";
}

inline ViewAxis parse_view_axis(std::string_view s)
{
    for (ViewAxis a : {ViewAxis::PosX, ViewAxis::NegX, ViewAxis::PosY, ViewAxis::NegY, ViewAxis::PosZ, ViewAxis::NegZ})
        if (s == to_string(a) || (s.size() == 1 && s == to_string(a).substr(1) && to_string(a)[0] == '+'))
            return a;
    throw Error("unknown view axis '" + std::string(s) + "' (expected one of +x -x +y -y +z -z)");
}

/// Right-handed screen frame (u, v, depth) with depth increasing along the rays.
struct ScreenFrame {
    int axis = 2;
    double sign = 1.0;

    explicit ScreenFrame(ViewAxis view)
        : axis(static_cast<int>(view) / 2)
        , sign(static_cast<int>(view) % 2 == 0 ? 1.0 : -1.0)
    {
    }

    double u(const Vec3& p) const { return p[(axis + 1) % 3]; }
    double v(const Vec3& p) const { return sign * p[(axis + 2) % 3]; }
    double depth(const Vec3& p) const { return sign * p[axis]; }
    Vec3 ray_direction() const { return sign * Vec3::Unit(axis); }
};

/// Orthographic screen of rows x cols detection rays, one per pixel centre.
struct DetectionGrid {
    int rows = 512;
    int cols = 512;
    ViewAxis axis = ViewAxis::PosZ;
    Vec2 origin = Vec2::Zero(); // lower-left corner in (u, v)
    double pixel_size = 1.0;

    /// Pixel-centre coordinates in (u, v).
    Vec2 pixel_center(int row, int col) const
    {
        return origin + pixel_size * Vec2(col + 0.5, row + 0.5);
    }

    std::size_t num_pixels() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Square-pixel grid that centres the projected bounding box and leaves at
/// least two pixels of margin on every side.
inline DetectionGrid fit_grid(const TriMesh& mesh, int rows, int cols, ViewAxis axis = ViewAxis::PosZ)
{
    if (mesh.empty())
        throw Error("cannot fit a detection grid to an empty mesh");
    if (rows < 4 || cols < 4)
        throw Error("detection grid needs at least 4 rows and 4 columns");
    const ScreenFrame frame(axis);
    double umin = INFINITY, umax = -INFINITY, vmin = INFINITY, vmax = -INFINITY;
    for (const Vec3& p : mesh.vertices) {
        umin = std::min(umin, frame.u(p));
        umax = std::max(umax, frame.u(p));
        vmin = std::min(vmin, frame.v(p));
        vmax = std::max(vmax, frame.v(p));
    }
    const double extent = std::max(umax - umin, vmax - vmin);
    DetectionGrid grid;
    grid.rows = rows;
    grid.cols = cols;
    grid.axis = axis;
    grid.pixel_size = extent > 0.0 ? extent / (std::min(rows, cols) - 4) : 1.0;
    grid.origin = Vec2(0.5 * (umin + umax) - 0.5 * cols * grid.pixel_size, 0.5 * (vmin + vmax) - 0.5 * rows * grid.pixel_size);
    return grid;
}

/// One triangle crossing one detection ray.
struct Fragment {
    int face = -1;
    bool front_facing = false;
    double depth = 0.0; // distance along the ray direction at the pixel centre
};

/// Projected area below this fraction of the screen area means the triangle is
/// (nearly) parallel to the rays; such faces produce no fragments.
inline constexpr double kParallelAreaFraction = 1e-14;

/// Per-pixel depth-sorted fragment lists in compressed row storage.
struct FragmentBuffer {
    DetectionGrid grid;
    std::vector<std::uint32_t> offsets; // num_pixels + 1
    std::vector<Fragment> fragments;
    std::vector<int> skipped_faces;     // ray-parallel faces, ascending
    std::size_t coincident_depths = 0;  // adjacent fragments with identical depth

    std::span<const Fragment> pixel(int row, int col) const
    {
        const std::size_t p = static_cast<std::size_t>(row) * grid.cols + col;
        return {fragments.data() + offsets[p], offsets[p + 1] - offsets[p]};
    }
};

namespace detail {

struct EdgeFn {
    double px, py; // canonical base point
    double dx, dy; // canonical direction
    double flip;   // +1 when the canonical direction equals the triangle's edge direction
    bool owned;    // top-left rule: this triangle owns centres exactly on the edge

    // Signed so that the triangle interior is positive. The canonical base makes
    // two triangles sharing an edge evaluate exact negatives of each other.
    double operator()(double x, double y) const { return flip * (dx * (y - py) - dy * (x - px)); }
};

inline EdgeFn make_edge(const Vec2& a, const Vec2& b)
{
    const double ex = b.x() - a.x(), ey = b.y() - a.y();
    const bool canonical = a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    const Vec2& base = canonical ? a : b;
    const Vec2& tip = canonical ? b : a;
    // y grows upward; for a counter-clockwise triangle left edges run downward
    // and top edges run toward -x.
    return {base.x(), base.y(), tip.x() - base.x(), tip.y() - base.y(), canonical ? 1.0 : -1.0,
            ey < 0.0 || (ey == 0.0 && ex < 0.0)};
}

inline bool covers(const EdgeFn& e, double value) { return value > 0.0 || (value == 0.0 && e.owned); }

} // namespace detail

namespace detail {

/// Calls visit(face, pixel, depth, front) for every covered pixel centre, in
/// face order; `skipped` receives ray-parallel faces.
template <class Visit>
void scan_triangles(const TriMesh& mesh, const DetectionGrid& grid, std::span<const Vec2> screen,
                    std::span<const double> depth, std::vector<int>* skipped, Visit&& visit)
{
    const double min_area2 = 2.0 * kParallelAreaFraction * static_cast<double>(grid.num_pixels());
    for (std::size_t fi = 0; fi < mesh.num_faces(); ++fi) {
        const Face& f = mesh.faces[fi];
        const Vec2 &s0 = screen[f[0]], &s1 = screen[f[1]], &s2 = screen[f[2]];
        const double area2 = (s1 - s0).x() * (s2 - s0).y() - (s1 - s0).y() * (s2 - s0).x();
        if (!(std::abs(area2) >= min_area2) || area2 == 0.0) {
            if (skipped)
                skipped->push_back(static_cast<int>(fi));
            continue;
        }
        const bool front = area2 < 0.0;
        // counter-clockwise order for the coverage test
        const int a = f[0], b = front ? f[2] : f[1], c = front ? f[1] : f[2];
        const EdgeFn eab = make_edge(screen[a], screen[b]);
        const EdgeFn ebc = make_edge(screen[b], screen[c]);
        const EdgeFn eca = make_edge(screen[c], screen[a]);
        const double inv_area = 1.0 / std::abs(area2);

        const double xmin = std::min({s0.x(), s1.x(), s2.x()}), xmax = std::max({s0.x(), s1.x(), s2.x()});
        const double ymin = std::min({s0.y(), s1.y(), s2.y()}), ymax = std::max({s0.y(), s1.y(), s2.y()});
        const int c0 = std::max(0, static_cast<int>(std::ceil(xmin - 0.5)));
        const int c1 = std::min(grid.cols - 1, static_cast<int>(std::floor(xmax - 0.5)));
        const int r0 = std::max(0, static_cast<int>(std::ceil(ymin - 0.5)));
        const int r1 = std::min(grid.rows - 1, static_cast<int>(std::floor(ymax - 0.5)));
        for (int row = r0; row <= r1; ++row) {
            const double y = row + 0.5;
            const std::size_t row_base = static_cast<std::size_t>(row) * grid.cols;
            for (int col = c0; col <= c1; ++col) {
                const double x = col + 0.5;
                const double wa = ebc(x, y), wb = eca(x, y), wc = eab(x, y);
                if (!covers(ebc, wa) || !covers(eca, wb) || !covers(eab, wc))
                    continue;
                visit(static_cast<int>(fi), row_base + col, (wa * depth[a] + wb * depth[b] + wc * depth[c]) * inv_area,
                      front);
            }
        }
    }
}

} // namespace detail

/// Orthographic rasterization of every triangle into per-pixel fragment lists.
/// A pixel centre belongs to a triangle when it lies strictly inside or on an
/// edge owned under the top-left rule. Lists are sorted by depth, ties broken
/// by face index.
inline FragmentBuffer rasterize(const TriMesh& mesh, const DetectionGrid& grid)
{
    FragmentBuffer buf;
    buf.grid = grid;
    const ScreenFrame frame(grid.axis);
    const std::size_t npix = grid.num_pixels();
    if (npix >= std::numeric_limits<std::uint32_t>::max())
        throw Error("detection grid has too many pixels");

    std::vector<Vec2> screen(mesh.num_vertices());
    std::vector<double> depth(mesh.num_vertices());
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
        const Vec3& p = mesh.vertices[i];
        screen[i] = Vec2((frame.u(p) - grid.origin.x()) / grid.pixel_size, (frame.v(p) - grid.origin.y()) / grid.pixel_size);
        depth[i] = frame.depth(p);
    }

    // Two passes over the same coverage test: count per pixel, then write in
    // place. Face order within a pixel is preserved.
    buf.offsets.assign(npix + 1, 0);
    detail::scan_triangles(mesh, grid, screen, depth, &buf.skipped_faces,
                           [&](int, std::size_t pixel, double, bool) { ++buf.offsets[pixel + 1]; });
    for (std::size_t p = 0; p < npix; ++p) {
        if (buf.offsets[p + 1] > std::numeric_limits<std::uint32_t>::max() - buf.offsets[p])
            throw Error("too many fragments for one detection pass");
        buf.offsets[p + 1] += buf.offsets[p];
    }
    buf.fragments.resize(buf.offsets.back());
    {
        std::vector<std::uint32_t> cursor(buf.offsets.begin(), buf.offsets.end() - 1);
        detail::scan_triangles(mesh, grid, screen, depth, nullptr, [&](int face, std::size_t pixel, double z, bool front) {
            buf.fragments[cursor[pixel]++] = Fragment{face, front, z};
        });
    }
    for (std::size_t p = 0; p < npix; ++p) {
        const auto begin = buf.fragments.begin() + buf.offsets[p];
        const auto end = buf.fragments.begin() + buf.offsets[p + 1];
        if (end - begin < 2)
            continue;
        // lists are short; insertion sort is stable so equal depths stay in face order
        for (auto it = begin + 1; it != end; ++it) {
            const Fragment key = *it;
            auto hole = it;
            while (hole != begin && (hole - 1)->depth > key.depth) {
                *hole = *(hole - 1);
                --hole;
            }
            *hole = key;
        }
        for (auto it = begin + 1; it != end; ++it)
            if (it->depth == (it - 1)->depth)
                ++buf.coincident_depths;
    }
    return buf;
}

/// Vertex classes. The numeric order is the conflict precedence: a vertex
/// reached by several fragments keeps the highest label.
enum class Label : std::uint8_t { V0 = 0, Vin = 1, Vout = 2 };

inline std::string_view to_string(Label l)
{
    switch (l) {
    case Label::V0: return "V0";
    case Label::Vin: return "Vin";
    case Label::Vout: return "Vout";
    }
    return "?";
}

struct DetectionDiagnostics {
    std::vector<int> skipped_faces;
    std::size_t fragments = 0;
    std::size_t coincident_depths = 0;
    std::size_t nonzero_terminal_counters = 0; // pixels whose walk does not return to zero
    std::size_t deep_nesting = 0;              // fragments with counters beyond the two-layer table
};

struct Classification {
    std::vector<Label> labels;
    std::size_t count_v0 = 0;
    std::size_t count_vout = 0;
    std::size_t count_vin = 0;
    std::vector<int> unseen; // vertices no fragment ever touched; labelled V0
    DetectionGrid grid;
    DetectionDiagnostics diagnostics;

    std::size_t num_vertices() const { return labels.size(); }
    bool intersecting() const { return count_vout + count_vin > 0; }
};

namespace detail {

// 0 = untouched, otherwise 1 + Label; merged with max.
using Mark = std::uint8_t;

inline Mark mark(Label l) { return static_cast<Mark>(1 + static_cast<int>(l)); }

struct WalkTotals {
    std::size_t nonzero_terminal = 0;
    std::size_t deep = 0;
};

/// Counter walk over one depth-sorted list; updates per-face marks.
inline void walk_pixel(std::span<const Fragment> list, std::vector<Mark>& face_marks, WalkTotals& totals)
{
    int counter = 0;
    for (const Fragment& frag : list) {
        Label label;
        if (frag.front_facing) {
            ++counter;
            label = counter == 1 ? Label::V0 : counter >= 2 ? Label::Vout : Label::Vin;
            if (counter > 2 || counter < 0)
                ++totals.deep;
        } else {
            --counter;
            label = counter == 0 ? Label::V0 : counter >= 1 ? Label::Vout : Label::Vin;
            if (counter > 1 || counter < -1)
                ++totals.deep;
        }
        Mark& m = face_marks[frag.face];
        m = std::max(m, mark(label));
    }
    if (counter != 0)
        ++totals.nonzero_terminal;
}

} // namespace detail

/// Walks every pixel list front to back with a facing counter and labels the
/// three vertices of each fragment's triangle. Pixel rows are split across
/// `threads` workers; the max-merge makes the result schedule-independent.
inline Classification walk_and_classify(const TriMesh& mesh, const FragmentBuffer& buf, unsigned threads = 1)
{
    const int rows = buf.grid.rows;
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows)));

    std::vector<std::vector<detail::Mark>> marks(threads, std::vector<detail::Mark>(mesh.num_faces(), 0));
    std::vector<detail::WalkTotals> totals(threads);
    auto work = [&](unsigned t) {
        const int begin = static_cast<int>(static_cast<long long>(rows) * t / threads);
        const int end = static_cast<int>(static_cast<long long>(rows) * (t + 1) / threads);
        for (int row = begin; row < end; ++row)
            for (int col = 0; col < buf.grid.cols; ++col) {
                const auto list = buf.pixel(row, col);
                if (!list.empty())
                    detail::walk_pixel(list, marks[t], totals[t]);
            }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(work, t);
    }
    for (unsigned t = 1; t < threads; ++t)
        for (std::size_t f = 0; f < marks[0].size(); ++f)
            marks[0][f] = std::max(marks[0][f], marks[t][f]);

    std::vector<detail::Mark> vertex_marks(mesh.num_vertices(), 0);
    for (std::size_t f = 0; f < mesh.num_faces(); ++f)
        if (const detail::Mark m = marks[0][f])
            for (int v : mesh.faces[f])
                vertex_marks[v] = std::max(vertex_marks[v], m);

    Classification out;
    out.grid = buf.grid;
    out.labels.assign(mesh.num_vertices(), Label::V0);
    for (std::size_t v = 0; v < vertex_marks.size(); ++v) {
        if (vertex_marks[v] == 0) {
            out.unseen.push_back(static_cast<int>(v));
            continue;
        }
        const auto label = static_cast<Label>(vertex_marks[v] - 1);
        out.labels[v] = label;
        switch (label) {
        case Label::V0: ++out.count_v0; break;
        case Label::Vin: ++out.count_vin; break;
        case Label::Vout: ++out.count_vout; break;
        }
    }
    out.diagnostics.skipped_faces = buf.skipped_faces;
    out.diagnostics.fragments = buf.fragments.size();
    out.diagnostics.coincident_depths = buf.coincident_depths;
    for (const auto& t : totals) {
        out.diagnostics.nonzero_terminal_counters += t.nonzero_terminal;
        out.diagnostics.deep_nesting += t.deep;
    }
    return out;
}

struct DetectOptions {
    int rows = 512;
    int cols = 512;
    ViewAxis axis = ViewAxis::PosZ;
    unsigned threads = 1;
};

/// Fit, rasterize, walk.
inline Classification classify(const TriMesh& mesh, const DetectOptions& opts = {})
{
    const DetectionGrid grid = fit_grid(mesh, opts.rows, opts.cols, opts.axis);
    return walk_and_classify(mesh, rasterize(mesh, grid), opts.threads);
}

} // namespace untangle
