#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "untangle/articulated.hpp"
#include "untangle/detector.hpp"
#include "untangle/error.hpp"
#include "untangle/mesh.hpp"
#include "untangle/penalty.hpp"

namespace untangle {

struct OptimConfig {
    double learning_rate = 1e-4;
    int max_iters = 500;
    int snapshot_every = 10;
    int rows = 512;
    int cols = 512;
    ViewAxis axis = ViewAxis::PosZ;
    bool normalize_gradient = true;
    bool stop_when_spt_zero = true;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    DetectOptions detect_options() const { return {rows, cols, axis, threads}; }
};

inline void check_config(const OptimConfig& cfg)
{
    if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate))
        throw Error("learning rate must be positive");
    if (cfg.max_iters < 1)
        throw Error("max_iters must be at least 1");
    if (cfg.snapshot_every < 1)
        throw Error("snapshot interval must be at least 1");
    if (cfg.rows < 4 || cfg.cols < 4)
        throw Error("detection grid needs at least 4x4 rays");
}

struct IterationRecord {
    int iter = 0;
    double spt = 0.0;
    std::size_t vout = 0;
    std::size_t vin = 0;
    std::optional<double> e_j;
    double grad_norm = 0.0;
    double elapsed_ms = 0.0; // detection plus gradient assembly
};

enum class Termination { SptZero, Converged, MaxIters };

inline std::string_view to_string(Termination t)
{
    switch (t) {
    case Termination::SptZero: return "spt_zero";
    case Termination::Converged: return "converged";
    case Termination::MaxIters: return "max_iters";
    }
    return "?";
}

struct RunTrace {
    std::vector<IterationRecord> iterations;
    std::vector<int> snapshot_iters;
    Termination termination = Termination::MaxIters;

    const IterationRecord& final() const { return iterations.back(); }

    /// Fraction of consecutive pairs whose spt does not increase.
    double non_increasing_fraction() const
    {
        if (iterations.size() < 2)
            return 1.0;
        std::size_t ok = 0;
        for (std::size_t i = 1; i < iterations.size(); ++i)
            if (iterations[i].spt <= iterations[i - 1].spt)
                ++ok;
        return static_cast<double>(ok) / static_cast<double>(iterations.size() - 1);
    }
};

/// Receives the mesh at every snapshot iteration.
using SnapshotSink = std::function<void(int iter, const TriMesh& mesh)>;

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Snapshots at multiples of `every` plus the final iteration, each once.
class SnapshotSchedule {
public:
    SnapshotSchedule(int every, const SnapshotSink& sink, RunTrace& trace)
        : every_(every)
        , sink_(sink)
        , trace_(trace)
    {
    }

    void regular(int iter, const TriMesh& mesh)
    {
        if (iter % every_ == 0)
            emit(iter, mesh);
    }

    void final(int iter, const TriMesh& mesh)
    {
        if (trace_.snapshot_iters.empty() || trace_.snapshot_iters.back() != iter)
            emit(iter, mesh);
    }

private:
    void emit(int iter, const TriMesh& mesh)
    {
        trace_.snapshot_iters.push_back(iter);
        if (sink_)
            sink_(iter, mesh);
    }

    int every_;
    const SnapshotSink& sink_;
    RunTrace& trace_;
};

} // namespace detail

struct VertexRun {
    TriMesh mesh;
    RunTrace trace;
};

/// Descends the penalty directly on vertex positions. With normalized
/// gradients the step is learning_rate times the initial bounding-box
/// diagonal; raw gradients use learning_rate as is.
inline VertexRun remove_vertex_space(const TriMesh& input, const OptimConfig& cfg, const SnapshotSink& sink = {})
{
    check_config(cfg);
    if (const auto report = validate(input); !report.ok())
        throw Error("input mesh is not a closed oriented manifold (" + std::to_string(report.violations.size()) +
                    " violations)");
    VertexRun run{input, {}};
    const VertexFaces adjacency(input);
    const double step = cfg.normalize_gradient ? cfg.learning_rate * bounding_box(input).diagonal() : cfg.learning_rate;
    detail::SnapshotSchedule snaps(cfg.snapshot_every, sink, run.trace);

    for (int k = 0;; ++k) {
        const auto t0 = detail::Clock::now();
        const Classification c = classify(run.mesh, cfg.detect_options());
        const PenaltyReport pr = spt_value(c, run.mesh.num_vertices());
        const GradientField g = spt_gradient(run.mesh, c, cfg.normalize_gradient, &adjacency);
        const double elapsed = detail::ms_since(t0);
        run.trace.iterations.push_back({k, pr.spt, pr.count_vout, pr.count_vin, std::nullopt, g.norm(), elapsed});
        snaps.regular(k, run.mesh);

        if (cfg.stop_when_spt_zero && pr.spt == 0.0) {
            run.trace.termination = Termination::SptZero;
            break;
        }
        if (k == cfg.max_iters) {
            run.trace.termination = Termination::MaxIters;
            break;
        }
        for (std::size_t i = 0; i < run.mesh.num_vertices(); ++i)
            run.mesh.vertices[i] -= step * g.vectors[i];
    }
    snaps.final(run.trace.iterations.back().iter, run.mesh);
    return run;
}

struct PoseRun {
    PoseParams pose;
    RunTrace trace;
};

/// Descends the penalty over pose parameters through the skinning Jacobian;
/// shape stays fixed. The learning rate applies to radians directly.
inline PoseRun remove_pose_space(const SkinnedModel& model, const PoseParams& pose0, const ShapeParams& shape,
                                 const OptimConfig& cfg, const SnapshotSink& sink = {})
{
    check_config(cfg);
    check_model(model);
    const VertexFaces adjacency(model.rest);
    PoseRun run{pose0, {}};
    check_params(model, run.pose, shape);
    detail::SnapshotSchedule snaps(cfg.snapshot_every, sink, run.trace);
    TriMesh posed;

    for (int k = 0;; ++k) {
        const auto t0 = detail::Clock::now();
        const PoseJacobian jac(model, run.pose, shape);
        posed = pose_mesh(model, jac.state());
        const Classification c = classify(posed, cfg.detect_options());
        const PenaltyReport pr = spt_value(c, posed.num_vertices());
        const GradientField g = spt_gradient(posed, c, cfg.normalize_gradient, &adjacency);
        const Eigen::VectorXd grad = jac.apply_transpose(g.vectors);
        const double elapsed = detail::ms_since(t0);
        run.trace.iterations.push_back({k, pr.spt, pr.count_vout, pr.count_vin, std::nullopt, grad.norm(), elapsed});
        snaps.regular(k, posed);

        if (cfg.stop_when_spt_zero && pr.spt == 0.0) {
            run.trace.termination = Termination::SptZero;
            break;
        }
        if (k == cfg.max_iters) {
            run.trace.termination = Termination::MaxIters;
            break;
        }
        run.pose = PoseParams::from_flat(run.pose.flat() - cfg.learning_rate * grad);
        clamp_rotations(run.pose);
    }
    snaps.final(run.trace.iterations.back().iter, posed);
    return run;
}

struct FitOptions {
    bool use_spt = true;
    /// Weight of the penalty gradient against E_J, whose pixel-squared units
    /// make the relative scale a calibration choice.
    double spt_weight = 1.0;
    /// Converged once no penalty remains (or it is unused) and the largest
    /// pose update falls below this many radians / length units.
    double step_tolerance = 1e-7;
};

/// Fits pose to 2D joints by descending E_J, plus the penalty when enabled.
/// spt is measured every iteration either way.
inline PoseRun fit_pose_2d(const SkinnedModel& model, const ShapeParams& shape, const Camera& cam,
                           const JointTargets& targets, const OptimConfig& cfg, const FitOptions& fit,
                           const PoseParams& pose0, const SnapshotSink& sink = {})
{
    check_config(cfg);
    check_model(model);
    if (!(fit.spt_weight >= 0.0) || !(fit.step_tolerance >= 0.0))
        throw Error("fit weights and tolerances must be non-negative");
    const VertexFaces adjacency(model.rest);
    PoseRun run{pose0, {}};
    detail::SnapshotSchedule snaps(cfg.snapshot_every, sink, run.trace);
    TriMesh posed;

    for (int k = 0;; ++k) {
        const auto t0 = detail::Clock::now();
        const EnergyGradient ej = reprojection_energy(model, run.pose, shape, cam, targets);
        const PoseJacobian jac(model, run.pose, shape);
        posed = pose_mesh(model, jac.state());
        const Classification c = classify(posed, cfg.detect_options());
        const PenaltyReport pr = spt_value(c, posed.num_vertices());
        Eigen::VectorXd grad = ej.gradient;
        if (fit.use_spt && pr.spt > 0.0) {
            const GradientField g = spt_gradient(posed, c, cfg.normalize_gradient, &adjacency);
            grad += fit.spt_weight * jac.apply_transpose(g.vectors);
        }
        const double elapsed = detail::ms_since(t0);
        run.trace.iterations.push_back({k, pr.spt, pr.count_vout, pr.count_vin, ej.value, grad.norm(), elapsed});
        snaps.regular(k, posed);

        const bool penalty_clear = !fit.use_spt || pr.spt == 0.0;
        if (penalty_clear && cfg.learning_rate * grad.lpNorm<Eigen::Infinity>() <= fit.step_tolerance) {
            run.trace.termination = Termination::Converged;
            break;
        }
        if (k == cfg.max_iters) {
            run.trace.termination = Termination::MaxIters;
            break;
        }
        run.pose = PoseParams::from_flat(run.pose.flat() - cfg.learning_rate * grad);
        clamp_rotations(run.pose);
    }
    snaps.final(run.trace.iterations.back().iter, posed);
    return run;
}

// ---------------------------------------------------------------------------
// Timing

struct BenchConfig {
    std::vector<int> rays{512};  // square grids
    std::vector<int> bodies{1};
    int warmup = 3;
    int reps = 20;
    unsigned threads = 1;
    /// Pose applied to every body; the default folds the left elbow so the
    /// gradient pass has work to do.
    std::string pose = "elbow:150";
};

struct BenchRow {
    int rays = 0;
    int bodies = 0;
    std::size_t triangles = 0;
    std::size_t fragments = 0;
    double median_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least-squares line through (x, y) with the coefficient of determination.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw Error("line fit needs at least two paired samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0)
        throw Error("line fit needs at least two distinct x values");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return f;
}

/// `count` copies of the posed toy body stacked along the view axis without
/// touching, so every copy covers the same pixels.
inline TriMesh stacked_bodies(const SkinnedModel& model, const PoseParams& pose, int count)
{
    if (count < 1)
        throw Error("need at least one body");
    const TriMesh one = pose_mesh(model, pose, ShapeParams::unit(model.num_joints()));
    const BoundingBox box = bounding_box(one);
    const double pitch = box.extent().z() + 0.1;
    std::vector<TriMesh> copies;
    for (int i = 0; i < count; ++i)
        copies.push_back(translated(one, Vec3(0, 0, pitch * i)));
    return merge(std::span<const TriMesh>(copies));
}

/// Median wall time of one detection-plus-gradient pass per (rays, bodies) cell.
inline std::vector<BenchRow> bench(const BenchConfig& cfg)
{
    if (cfg.rays.empty() || cfg.bodies.empty())
        throw Error("bench needs at least one ray count and one body count");
    if (cfg.reps < 1 || cfg.warmup < 0)
        throw Error("bench needs reps >= 1 and warmup >= 0");
    const SkinnedModel model = build_toy_body();
    const PoseParams pose = parse_pose_preset(model, cfg.pose);
    std::vector<BenchRow> rows;
    for (int bodies : cfg.bodies) {
        const TriMesh mesh = stacked_bodies(model, pose, bodies);
        const VertexFaces adjacency(mesh);
        for (int rays : cfg.rays) {
            if (rays < 4)
                throw Error("bench ray count must be at least 4");
            const DetectOptions opts{rays, rays, ViewAxis::PosZ, cfg.threads};
            std::vector<double> times;
            std::size_t fragments = 0;
            for (int r = 0; r < cfg.warmup + cfg.reps; ++r) {
                const auto t0 = detail::Clock::now();
                const Classification c = classify(mesh, opts);
                [[maybe_unused]] const GradientField g = spt_gradient(mesh, c, true, &adjacency);
                const double ms = detail::ms_since(t0);
                fragments = c.diagnostics.fragments;
                if (r >= cfg.warmup)
                    times.push_back(ms);
            }
            std::sort(times.begin(), times.end());
            const std::size_t n = times.size();
            const double median = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
            rows.push_back({rays, bodies, mesh.num_faces(), fragments, median, times.front(), times.back()});
        }
    }
    return rows;
}

} // namespace untangle
