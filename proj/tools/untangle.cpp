// Command-line front end. Exit codes: 0 success (for detect: no
// intersection), 2 intersection found (detect only), 1 any error.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "untangle/untangle.hpp"

namespace fs = std::filesystem;
using namespace untangle;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitIntersecting = 2;

struct Rays {
    int rows = 512;
    int cols = 512;
};

int parse_int(std::string_view s, std::string_view what)
{
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw Error("malformed " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

/// "HxW" or a single N for a square grid.
Rays parse_rays(const std::string& s)
{
    Rays r;
    if (const auto x = s.find('x'); x != std::string::npos) {
        r.rows = parse_int(std::string_view(s).substr(0, x), "ray count");
        r.cols = parse_int(std::string_view(s).substr(x + 1), "ray count");
    } else {
        r.rows = r.cols = parse_int(s, "ray count");
    }
    if (r.rows < 4 || r.cols < 4)
        throw Error("ray grid must be at least 4x4");
    return r;
}

std::vector<int> parse_int_list(const std::string& s, std::string_view what)
{
    std::vector<int> out;
    std::string_view rest(s);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        out.push_back(parse_int(rest.substr(0, comma), what));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (out.empty())
        throw Error("empty " + std::string(what) + " list");
    return out;
}

void write_json(const Json& j, const std::optional<fs::path>& path)
{
    if (!path) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    if (path->has_parent_path())
        fs::create_directories(path->parent_path());
    std::ofstream out(*path);
    if (!out)
        throw Error("cannot write " + path->string());
    out << j.dump(2) << '\n';
    if (!out)
        throw Error("failed writing " + path->string());
}

TriMesh load_valid(const fs::path& path)
{
    TriMesh mesh = load_obj(path);
    const auto report = validate(mesh);
    if (!report.ok())
        throw Error(path.string() + " is not a closed oriented manifold: " + std::to_string(report.violations.size()) +
                    " violations (run `untangle validate` for details)");
    return mesh;
}

/// Writes iter_<k>.obj into `dir` and remembers the paths for the trace.
struct SnapshotWriter {
    fs::path dir;
    std::vector<std::string> paths;

    SnapshotSink sink()
    {
        return [this](int iter, const TriMesh& mesh) {
            const fs::path p = dir / ("iter_" + std::to_string(iter) + ".obj");
            save_obj(mesh, p);
            paths.push_back(p.string());
        };
    }
};

struct Global {
    unsigned threads = 1;
    bool verbose = false;
};

void log_run(const Global& g, const RunTrace& trace)
{
    if (!g.verbose)
        return;
    for (const auto& r : trace.iterations)
        std::fprintf(stderr, "iter %d spt %.6f vout %zu vin %zu grad %.4g%s\n", r.iter, r.spt, r.vout, r.vin,
                     r.grad_norm, r.e_j ? (" e_j " + std::to_string(*r.e_j)).c_str() : "");
}

// -- gen ---------------------------------------------------------------------

struct GenArgs {
    fs::path out;
    double radius = 1.0;
    int subdiv = 3;
    std::vector<double> extents{1.0, 1.0, 1.0};
    double length = 2.0;
    int segments = 32;
    double tube_radius = 0.2;
    int tube_segments = 64;
    double angle_deg = 200.0;
    double gap = -1.0;
    int pair_subdiv = 4;
    std::string pose;
    ToyBodyOptions body;
};

void add_body_options(CLI::App* cmd, ToyBodyOptions& body)
{
    cmd->add_option("--segments", body.segments, "Vertices per tube ring")->capture_default_str();
    cmd->add_option("--spacing", body.spacing, "Centreline ring spacing")->capture_default_str();
    cmd->add_option("--blend", body.blend, "Skinning blend half-width at joints")->capture_default_str();
}

void setup_gen(CLI::App& app, GenArgs& a, std::function<TriMesh()>& make)
{
    auto* gen = app.add_subcommand("gen", "Generate a fixture mesh as OBJ");
    gen->require_subcommand(1);
    auto out = [&](CLI::App* c) { c->add_option("-o,--output", a.out, "Output OBJ file")->required(); };

    auto* sphere = gen->add_subcommand("sphere", "Icosphere");
    sphere->add_option("--radius", a.radius)->capture_default_str();
    sphere->add_option("--subdiv", a.subdiv, "Subdivision level, 0..7")->capture_default_str();
    out(sphere);
    sphere->callback([&] { make = [&] { return icosphere(a.radius, a.subdiv); }; });

    auto* bx = gen->add_subcommand("box", "Axis-aligned box");
    bx->add_option("--extents", a.extents, "Edge lengths x y z")->expected(3)->delimiter(',');
    out(bx);
    bx->callback([&] { make = [&] { return box(Vec3(a.extents[0], a.extents[1], a.extents[2])); }; });

    auto* cap = gen->add_subcommand("capsule", "Capsule along z");
    cap->add_option("--radius", a.radius)->capture_default_str();
    cap->add_option("--length", a.length, "Cylinder length between caps")->capture_default_str();
    cap->add_option("--segments", a.segments)->capture_default_str();
    out(cap);
    cap->callback([&] { make = [&] { return capsule(a.radius, a.length, a.segments); }; });

    auto* bent = gen->add_subcommand("bent-tube", "Tube bent back onto itself");
    bent->add_option("--radius", a.tube_radius)->capture_default_str();
    bent->add_option("--angle", a.angle_deg, "Bend angle in degrees")->capture_default_str();
    bent->add_option("--segments", a.tube_segments)->capture_default_str();
    out(bent);
    bent->callback([&] {
        make = [&] { return bent_tube(a.tube_radius, a.angle_deg * std::numbers::pi / 180.0, a.tube_segments); };
    });

    auto* pair = gen->add_subcommand("two-spheres", "Two unit spheres along z, surfaces `gap` apart");
    pair->add_option("--gap", a.gap, "Surface gap; negative overlaps")->capture_default_str();
    pair->add_option("--subdiv", a.pair_subdiv)->capture_default_str();
    out(pair);
    pair->callback([&] { make = [&] { return two_spheres(a.gap, 1.0, a.pair_subdiv); }; });

    auto* mixed = gen->add_subcommand("mixed-area", "Coarse and fine spheres overlapping (face areas ~100x apart)");
    out(mixed);
    mixed->callback([&] { make = [] { return mixed_area_pair(); }; });

    auto* body = gen->add_subcommand("toy-body", "Posed articulated toy body");
    body->add_option("--pose", a.pose, "Flexions as name:deg,... (e.g. elbow:150)");
    add_body_options(body, a.body);
    out(body);
    body->callback([&] {
        make = [&] {
            const SkinnedModel m = build_toy_body(a.body);
            return pose_mesh(m, parse_pose_preset(m, a.pose), ShapeParams::unit(m.num_joints()));
        };
    });
}

// -- detect ------------------------------------------------------------------

struct DetectArgs {
    fs::path mesh;
    std::string rays = "512x512";
    std::string axis = "+z";
    bool labels = false;
    std::optional<fs::path> out;
};

int run_detect(const DetectArgs& a, const Global& g)
{
    const Rays rays = parse_rays(a.rays);
    const ViewAxis axis = parse_view_axis(a.axis);
    const TriMesh mesh = load_valid(a.mesh);
    const Classification c = classify(mesh, {rays.rows, rays.cols, axis, g.threads});
    Json j;
    j["schema"] = kReportSchema;
    j["config"] = {{"mesh", a.mesh.string()}, {"rays", {rays.rows, rays.cols}}, {"axis", a.axis},
                   {"threads", g.threads}, {"labels", a.labels}};
    j["vertices"] = mesh.num_vertices();
    j["faces"] = mesh.num_faces();
    const Json body = classification_json(c, a.labels);
    for (const auto& [k, v] : body.items())
        j[k] = v;
    write_json(j, a.out);
    if (c.diagnostics.nonzero_terminal_counters > 0)
        std::fprintf(stderr, "warning: %zu pixel walks did not return to zero\n", c.diagnostics.nonzero_terminal_counters);
    return c.intersecting() ? kExitIntersecting : kExitOk;
}

// -- remove ------------------------------------------------------------------

struct OptimArgs {
    std::string rays = "512x512";
    std::string axis = "+z";
    OptimConfig cfg;
};

void add_optim_options(CLI::App* cmd, OptimArgs& o)
{
    cmd->add_option("--lr", o.cfg.learning_rate, "Learning rate")->capture_default_str();
    cmd->add_option("--iters", o.cfg.max_iters, "Iteration budget")->capture_default_str();
    cmd->add_option("--snapshot-every", o.cfg.snapshot_every, "Snapshot cadence")->capture_default_str();
    cmd->add_option("--rays", o.rays, "Detection grid HxW or N")->capture_default_str();
    cmd->add_option("--axis", o.axis, "Ray direction (+x -x +y -y +z -z)")->capture_default_str();
    cmd->add_flag("!--no-normalize", o.cfg.normalize_gradient, "Use raw area-weighted gradients");
    cmd->add_option("--seed", o.cfg.seed, "Recorded for reproducibility")->capture_default_str();
}

OptimConfig resolve(OptimArgs o, const Global& g)
{
    const Rays r = parse_rays(o.rays);
    o.cfg.rows = r.rows;
    o.cfg.cols = r.cols;
    o.cfg.axis = parse_view_axis(o.axis);
    o.cfg.threads = g.threads;
    check_config(o.cfg);
    return o.cfg;
}

struct RemoveArgs {
    std::optional<fs::path> mesh;
    std::string body_pose;
    ToyBodyOptions body;
    OptimArgs optim;
    fs::path out;
};

int run_remove(const RemoveArgs& a, const Global& g)
{
    const OptimConfig cfg = resolve(a.optim, g);
    fs::create_directories(a.out);
    SnapshotWriter snaps{a.out, {}};
    Json config = config_json(cfg);
    RunTrace trace;
    Json result;
    if (a.mesh) {
        config["mesh"] = a.mesh->string();
        config["space"] = "vertex";
        const TriMesh mesh = load_valid(*a.mesh);
        const VertexRun run = remove_vertex_space(mesh, cfg, snaps.sink());
        save_obj(run.mesh, a.out / "final.obj");
        trace = run.trace;
    } else {
        const SkinnedModel m = build_toy_body(a.body);
        const ShapeParams shape = ShapeParams::unit(m.num_joints());
        config["body"] = {{"pose", a.body_pose}, {"segments", a.body.segments}, {"spacing", a.body.spacing},
                          {"blend", a.body.blend}};
        config["space"] = "pose";
        const PoseRun run = remove_pose_space(m, parse_pose_preset(m, a.body_pose), shape, cfg, snaps.sink());
        save_obj(pose_mesh(m, run.pose, shape), a.out / "final.obj");
        result["final_pose"] = pose_json(m, run.pose);
        trace = run.trace;
    }
    Json j = trace_json(trace, std::move(config), snaps.paths);
    for (auto& [k, v] : result.items())
        j[k] = v;
    write_json(j, a.out / "trace.json");
    log_run(g, trace);
    std::printf("%s after %d iterations, spt %.6f -> %.6f\n", std::string(to_string(trace.termination)).c_str(),
                trace.final().iter, trace.iterations.front().spt, trace.final().spt);
    return kExitOk;
}

// -- fit ---------------------------------------------------------------------

struct FitArgs {
    std::optional<fs::path> targets;
    std::string scenario;
    std::string init;
    bool use_spt = true;
    double spt_weight = 1000.0;
    ToyBodyOptions body;
    OptimArgs optim;
    fs::path out;
};

int run_fit(const FitArgs& a, const Global& g)
{
    const OptimConfig cfg = resolve(a.optim, g);
    const SkinnedModel m = build_toy_body(a.body);
    const ShapeParams shape = ShapeParams::unit(m.num_joints());
    FitScenario s;
    if (a.targets) {
        std::ifstream in(*a.targets);
        if (!in)
            throw Error("cannot open " + a.targets->string());
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error(a.targets->string() + ": " + e.what());
        }
        const TargetsDocument t = parse_targets(doc);
        s.name = "targets";
        s.targets = t.targets;
        s.camera = t.camera;
        s.init = parse_pose_preset(m, a.init);
    } else if (a.scenario == "limb-through-torso") {
        s = limb_through_torso_scenario(m);
    } else if (a.scenario == "synthetic-recovery") {
        s = synthetic_recovery_scenario(m, cfg.seed == 0 ? 7 : cfg.seed);
    } else {
        throw Error("fit needs --targets FILE or --scenario {limb-through-torso, synthetic-recovery}");
    }
    if (s.targets.joints.size() != m.num_joints())
        throw Error("targets have " + std::to_string(s.targets.joints.size()) + " joints, the body has " +
                    std::to_string(m.num_joints()));

    fs::create_directories(a.out);
    if (!a.targets)
        write_json(targets_json(s.targets, s.camera), a.out / "targets.json");
    FitOptions fit = fit_options(a.use_spt);
    fit.spt_weight = a.spt_weight;
    SnapshotWriter snaps{a.out, {}};
    const PoseRun run = fit_pose_2d(m, shape, s.camera, s.targets, cfg, fit, s.init, snaps.sink());
    save_obj(pose_mesh(m, run.pose, shape), a.out / "final.obj");

    Json config = config_json(cfg);
    config["source"] = a.targets ? a.targets->string() : s.name;
    config["use_spt"] = fit.use_spt;
    config["spt_weight"] = fit.spt_weight;
    config["step_tolerance"] = fit.step_tolerance;
    config["camera"] = camera_json(s.camera);
    config["body"] = {{"segments", a.body.segments}, {"spacing", a.body.spacing}, {"blend", a.body.blend}};
    Json j = trace_json(run.trace, std::move(config), snaps.paths);
    const double err = mean_joint_error(m, run.pose, shape, s.camera, s.targets);
    j["final"] = {{"spt", run.trace.final().spt}, {"e_j", *run.trace.final().e_j}, {"mean_joint_error_px", err}};
    j["final_pose"] = pose_json(m, run.pose);
    write_json(j, a.out / "trace.json");
    log_run(g, run.trace);
    std::printf("%s after %d iterations, spt %.6f, mean joint error %.3f px\n",
                std::string(to_string(run.trace.termination)).c_str(), run.trace.final().iter, run.trace.final().spt, err);
    return kExitOk;
}

// -- bench -------------------------------------------------------------------

struct BenchArgs {
    std::string rays = "512";
    std::string bodies = "1";
    BenchConfig cfg;
    std::optional<fs::path> out;
    std::optional<fs::path> csv;
};

int run_bench(BenchArgs a, const Global& g)
{
    a.cfg.rays = parse_int_list(a.rays, "ray count");
    a.cfg.bodies = parse_int_list(a.bodies, "body count");
    a.cfg.threads = g.threads;
    const auto rows = bench(a.cfg);
    write_json(bench_json(a.cfg, rows), a.out);
    if (a.csv) {
        std::ofstream out(*a.csv);
        if (!out)
            throw Error("cannot write " + a.csv->string());
        out << "rays,bodies,triangles,fragments,median_ms,min_ms,max_ms\n";
        for (const auto& r : rows)
            out << r.rays << ',' << r.bodies << ',' << r.triangles << ',' << r.fragments << ',' << r.median_ms << ','
                << r.min_ms << ',' << r.max_ms << '\n';
    }
    return kExitOk;
}

// -- validate ----------------------------------------------------------------

int run_validate(const fs::path& path, const std::optional<fs::path>& out)
{
    const TriMesh mesh = load_obj(path);
    const auto report = validate(mesh);
    Json j;
    j["schema"] = kReportSchema;
    j["config"] = {{"mesh", path.string()}};
    j["vertices"] = mesh.num_vertices();
    j["faces"] = mesh.num_faces();
    j["components"] = connected_components(mesh);
    j["ok"] = report.ok();
    Json v = Json::array();
    for (const auto& x : report.violations) {
        Json e{{"kind", to_string(x.kind)}};
        if (x.face >= 0)
            e["face"] = x.face;
        if (x.edge.first >= 0)
            e["edge"] = {x.edge.first, x.edge.second};
        v.push_back(std::move(e));
    }
    j["violations"] = std::move(v);
    write_json(j, out);
    return report.ok() ? kExitOk : kExitError;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Self-intersection detection and removal for closed triangle meshes"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--threads", g.threads, "Worker threads (falls back to UNTANGLE_THREADS)")
        ->envname("UNTANGLE_THREADS")
        ->check(CLI::Range(1u, 256u))
        ->capture_default_str();
    app.add_flag("-v,--verbose", g.verbose, "Per-iteration progress on stderr");

    GenArgs gen;
    std::function<TriMesh()> make;
    setup_gen(app, gen, make);

    fs::path validate_path;
    std::optional<fs::path> validate_out;
    auto* val = app.add_subcommand("validate", "Check closure and orientation of an OBJ mesh");
    val->add_option("mesh", validate_path)->required();
    val->add_option("-o,--output", validate_out, "Report file (default stdout)");

    DetectArgs det;
    auto* detect = app.add_subcommand("detect", "Classify vertices by ray-sampled self-intersection");
    detect->add_option("mesh", det.mesh)->required();
    detect->add_option("--rays", det.rays, "Detection grid HxW or N")->capture_default_str();
    detect->add_option("--axis", det.axis, "Ray direction (+x -x +y -y +z -z)")->capture_default_str();
    detect->add_flag("--labels", det.labels, "Include per-vertex labels");
    detect->add_option("-o,--output", det.out, "Report file (default stdout)");

    RemoveArgs rem;
    auto* remove = app.add_subcommand("remove", "Descend the penalty until self-intersection is gone");
    auto* rem_mesh = remove->add_option("mesh", rem.mesh, "Input OBJ (vertex-space descent)");
    auto* rem_body = remove->add_option("--body", rem.body_pose, "Toy-body pose preset (pose-space descent)");
    rem_mesh->excludes(rem_body);
    add_optim_options(remove, rem.optim);
    add_body_options(remove, rem.body);
    remove->add_option("-o,--output", rem.out, "Output directory")->required();

    FitArgs fit;
    fit.optim.cfg = fit_config();
    auto* fitc = app.add_subcommand("fit", "Fit toy-body pose to 2D joints");
    auto* fit_targets = fitc->add_option("--targets", fit.targets, "Targets JSON {joints, confidence, camera}");
    auto* fit_scenario = fitc->add_option("--scenario", fit.scenario, "Built-in scenario")
                             ->check(CLI::IsMember({"limb-through-torso", "synthetic-recovery"}));
    fit_targets->excludes(fit_scenario);
    fitc->add_option("--init", fit.init, "Initial pose preset when fitting --targets");
    fitc->add_flag("--use-spt,!--no-spt", fit.use_spt, "Include the penalty term (default on)");
    fitc->add_option("--spt-weight", fit.spt_weight, "Penalty gradient weight")->capture_default_str();
    add_optim_options(fitc, fit.optim);
    add_body_options(fitc, fit.body);
    fitc->add_option("-o,--output", fit.out, "Output directory")->required();

    BenchArgs bch;
    auto* benchc = app.add_subcommand("bench", "Time detection plus gradient per iteration");
    benchc->add_option("--rays-list", bch.rays, "Square ray counts, comma-separated")->capture_default_str();
    benchc->add_option("--bodies-list", bch.bodies, "Stacked body counts, comma-separated")->capture_default_str();
    benchc->add_option("--reps", bch.cfg.reps, "Timed iterations per cell")->capture_default_str();
    benchc->add_option("--warmup", bch.cfg.warmup, "Untimed iterations per cell")->capture_default_str();
    benchc->add_option("--pose", bch.cfg.pose, "Body pose preset")->capture_default_str();
    benchc->add_option("-o,--output", bch.out, "JSON table file (default stdout)");
    benchc->add_option("--csv", bch.csv, "Also write the table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (app.got_subcommand("gen")) {
            save_obj(make(), gen.out);
            return kExitOk;
        }
        if (*val)
            return run_validate(validate_path, validate_out);
        if (*detect)
            return run_detect(det, g);
        if (*remove) {
            if (!rem.mesh && rem.body_pose.empty())
                throw Error("remove needs a mesh path or --body POSE");
            return run_remove(rem, g);
        }
        if (*fitc)
            return run_fit(fit, g);
        if (*benchc)
            return run_bench(bch, g);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
    return kExitError;
}
