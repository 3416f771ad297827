#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "untangle/articulated.hpp"
#include "untangle/detector.hpp"
#include "untangle/error.hpp"
#include "untangle/optimizer.hpp"

namespace untangle {

// JSON documents emitted by the command-line tool. Every top-level report
// carries "schema": 1 and the resolved configuration that produced it.

inline constexpr int kReportSchema = 1;

using Json = nlohmann::ordered_json;

inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }
inline Json vec_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

inline Json classification_json(const Classification& c, bool with_labels)
{
    Json j;
    j["rays"] = {c.grid.rows, c.grid.cols};
    j["axis"] = std::string(to_string(c.grid.axis));
    j["counts"] = {{"v0", c.count_v0}, {"vout", c.count_vout}, {"vin", c.count_vin}, {"unseen", c.unseen.size()}};
    j["spt"] = c.labels.empty() ? 0.0
                                : static_cast<double>(c.count_vout + c.count_vin) / static_cast<double>(c.labels.size());
    j["skipped_faces"] = c.diagnostics.skipped_faces.size();
    j["nonzero_terminal_counters"] = c.diagnostics.nonzero_terminal_counters;
    j["diagnostics"] = {{"fragments", c.diagnostics.fragments},
                        {"coincident_depths", c.diagnostics.coincident_depths},
                        {"deep_nesting", c.diagnostics.deep_nesting}};
    if (with_labels) {
        Json labels = Json::array();
        for (Label l : c.labels)
            labels.push_back(std::string(to_string(l)));
        j["labels"] = std::move(labels);
    }
    return j;
}

inline Json config_json(const OptimConfig& cfg)
{
    return {{"learning_rate", cfg.learning_rate},
            {"max_iters", cfg.max_iters},
            {"snapshot_every", cfg.snapshot_every},
            {"rays", {cfg.rows, cfg.cols}},
            {"axis", std::string(to_string(cfg.axis))},
            {"normalize_gradient", cfg.normalize_gradient},
            {"stop_when_spt_zero", cfg.stop_when_spt_zero},
            {"seed", cfg.seed},
            {"threads", cfg.threads}};
}

inline Json iteration_json(const IterationRecord& r)
{
    Json j{{"iter", r.iter}, {"spt", r.spt}, {"vout", r.vout}, {"vin", r.vin}};
    if (r.e_j)
        j["e_j"] = *r.e_j;
    j["grad_norm"] = r.grad_norm;
    j["elapsed_ms"] = r.elapsed_ms;
    return j;
}

/// {schema, config, iterations, termination, snapshots}; `snapshots` holds
/// the file written for each snapshot iteration, in order.
inline Json trace_json(const RunTrace& trace, Json config, const std::vector<std::string>& snapshots)
{
    Json j;
    j["schema"] = kReportSchema;
    j["config"] = std::move(config);
    Json its = Json::array();
    for (const auto& r : trace.iterations)
        its.push_back(iteration_json(r));
    j["iterations"] = std::move(its);
    j["termination"] = std::string(to_string(trace.termination));
    j["snapshots"] = snapshots;
    return j;
}

inline Json pose_json(const SkinnedModel& m, const PoseParams& pose)
{
    Json rot = Json::object();
    for (std::size_t k = 0; k < m.num_joints(); ++k)
        rot[m.joints[k].name] = vec_json(pose.rotations[k]);
    return {{"rotations", std::move(rot)}, {"translation", vec_json(pose.translation)}};
}

inline Json camera_json(const Camera& cam) { return {{"scale", cam.scale}, {"principal", vec_json(cam.principal)}}; }

inline Json targets_json(const JointTargets& t, const Camera& cam)
{
    Json joints = Json::array();
    for (const Vec2& p : t.joints)
        joints.push_back(vec_json(p));
    return {{"joints", std::move(joints)}, {"confidence", t.confidence}, {"camera", camera_json(cam)}};
}

struct TargetsDocument {
    JointTargets targets;
    Camera camera;
};

/// Reads {joints: [[x, y], ...], confidence: [c, ...], camera: {scale,
/// principal}}. Missing confidence means 1 for every joint; a missing camera
/// means the default one.
inline TargetsDocument parse_targets(const nlohmann::json& j)
{
    TargetsDocument doc;
    try {
        for (const auto& p : j.at("joints")) {
            if (!p.is_array() || p.size() != 2)
                throw Error("every target joint must be an [x, y] pair");
            doc.targets.joints.emplace_back(p[0].get<double>(), p[1].get<double>());
        }
        if (j.contains("confidence"))
            doc.targets.confidence = j.at("confidence").get<std::vector<double>>();
        else
            doc.targets.confidence.assign(doc.targets.joints.size(), 1.0);
        if (j.contains("camera")) {
            const auto& c = j.at("camera");
            doc.camera.scale = c.at("scale").get<double>();
            const auto pp = c.at("principal").get<std::vector<double>>();
            if (pp.size() != 2)
                throw Error("camera principal point must be [x, y]");
            doc.camera.principal = Vec2(pp[0], pp[1]);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed targets document: ") + e.what());
    }
    if (doc.targets.confidence.size() != doc.targets.joints.size())
        throw Error("targets need one confidence per joint");
    if (!(doc.camera.scale > 0.0))
        throw Error("camera scale must be positive");
    return doc;
}

/// Published per-iteration time at 512x512 rays with one body, measured on
/// different hardware; echoed for context and never compared against.
inline Json reference_timing_json()
{
    return {{"rays", 512}, {"bodies", 1}, {"median_ms", 56.76}, {"hardware", "published reference measurement on other hardware"}};
}

inline Json bench_json(const BenchConfig& cfg, const std::vector<BenchRow>& rows)
{
    Json j;
    j["schema"] = kReportSchema;
    j["config"] = {{"rays", cfg.rays}, {"bodies", cfg.bodies}, {"warmup", cfg.warmup},
                   {"reps", cfg.reps}, {"threads", cfg.threads}, {"pose", cfg.pose}};
    Json table = Json::array();
    for (const BenchRow& r : rows)
        table.push_back({{"rays", r.rays}, {"bodies", r.bodies}, {"triangles", r.triangles}, {"fragments", r.fragments},
                         {"median_ms", r.median_ms}, {"min_ms", r.min_ms}, {"max_ms", r.max_ms}});
    j["rows"] = std::move(table);

    // One line per ray count over the body counts measured at it.
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_rays;
    for (const BenchRow& r : rows) {
        by_rays[r.rays].first.push_back(static_cast<double>(r.bodies));
        by_rays[r.rays].second.push_back(r.median_ms);
    }
    Json fits = Json::array();
    for (const auto& [rays, xy] : by_rays) {
        auto sorted = xy.first;
        std::sort(sorted.begin(), sorted.end());
        if (std::unique(sorted.begin(), sorted.end()) - sorted.begin() < 2)
            continue;
        const LinearFit f = fit_line(xy.first, xy.second);
        fits.push_back({{"rays", rays}, {"ms_per_body", f.slope}, {"intercept_ms", f.intercept}, {"r2", f.r2}});
    }
    if (!fits.empty())
        j["linear_fit"] = std::move(fits);
    j["reference_timing"] = reference_timing_json();
    return j;
}

} // namespace untangle
