#pragma once

#include "scatlab/lens.hpp"
#include "scatlab/scene.hpp"
#include "scatlab/shapes.hpp"
#include "scatlab/variation.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#ifndef SCATLAB_VERSION
#define SCATLAB_VERSION "0.0.0"
#endif

namespace scatlab::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = SCATLAB_VERSION;

// ---------------------------------------------------------------------------
// Number formatting and compact JSON

/// 17 significant digits: every double round-trips exactly. Non-finite values become null.
inline std::string format_double(double x) {
    if (!std::isfinite(x)) return "null";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <typename J>
void append_json(std::string& out, const J& j) {
    using V = typename J::value_t;
    switch (j.type()) {
        case V::object: {
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += nlohmann::json(it.key()).dump();
                out += ':';
                append_json(out, it.value());
            }
            out += '}';
            break;
        }
        case V::array: {
            out += '[';
            bool first = true;
            for (const auto& x : j) {
                if (!first) out += ',';
                first = false;
                append_json(out, x);
            }
            out += ']';
            break;
        }
        case V::number_float: out += format_double(j.template get<double>()); break;
        default: out += j.dump(); break;
    }
}

/// Compact single-line serialization with %.17g floats.
template <typename J>
std::string dump(const J& j) {
    std::string out;
    append_json(out, j);
    return out;
}

inline Json vec_json(const Vec3& v, int dim) {
    Json a = Json::array();
    for (int i = 0; i < dim; ++i) a.push_back(v[i]);
    return a;
}

inline Json opt_json(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

inline Json values_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Json phase_json(const PhasePoint& p, int dim) { return {{"q", vec_json(p.q, dim)}, {"v", vec_json(p.v, dim)}}; }

// ---------------------------------------------------------------------------
// Headers

/// Provenance carried on the first line of every output file.
struct Header {
    std::string kind;                     // trajectory, lens, comparison, ...
    std::optional<std::string> scene_hash;
    std::optional<std::string> spec;
    std::uint64_t seed = 0;
    std::vector<std::string> invocation;  // argv, echoed verbatim
    Json extra = Json::object();          // kind-specific fields
};

inline Json header_json(const Header& h) {
    Json j = {{"format", "scatlab/" + h.kind},
              {"version", kVersion},
              {"scene_hash", h.scene_hash ? Json(*h.scene_hash) : Json(nullptr)},
              {"spec", h.spec ? Json(*h.spec) : Json(nullptr)},
              {"seed", h.seed},
              {"invocation", h.invocation}};
    for (auto it = h.extra.begin(); it != h.extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

/// A single JSON document whose first line is the header and whose remaining
/// lines are the body: {"header":{...},\n"<key>":{...}}.
inline void write_document(std::ostream& os, const Header& h, const std::string& key, const Json& body) {
    os << "{\"header\":" << dump(header_json(h)) << ",\n" << nlohmann::json(key).dump() << ':' << dump(body) << "}\n";
}

// ---------------------------------------------------------------------------
// Scenes

inline Json landmarks_json(const LivshitsScene& l) {
    return {{"focus_left", vec_json(l.focus_left, 2)},   {"focus_right", vec_json(l.focus_right, 2)},
            {"end_left", vec_json(l.end_left, 2)},       {"end_right", vec_json(l.end_right, 2)},
            {"pocket_depth", l.pocket_depth},            {"pocket_floor_radius", l.pocket_floor_radius},
            {"deformation", l.deformation}};
}

/// Scene wrapped with a header; `load_scene_file` reads it back.
inline void write_scene_document(std::ostream& os, const Header& h, const Scene& s, const Json& landmarks = nullptr) {
    Json body = Json::parse(scene_to_json(s).dump());
    os << "{\"header\":" << dump(header_json(h)) << ",\n\"scene\":" << dump(body);
    if (!landmarks.is_null()) os << ",\n\"landmarks\":" << dump(landmarks);
    os << "}\n";
}

/// Reads a bare scene file or a scene document written by `write_scene_document`.
inline Scene load_scene_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scene file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("scene file " + path + ": " + e.what());
    }
    if (j.is_object() && j.contains("header")) {
        scatlab::detail::reject_unknown_keys(j, {"header", "scene", "landmarks"}, "scene document");
        if (!j.contains("scene")) throw InputError("scene document " + path + " has no scene");
        return scene_from_json(j.at("scene"));
    }
    return scene_from_json(j);
}

inline Json validation_json(const ValidationReport& r) {
    Json gaps = Json::array();
    for (const auto& g : r.gaps) gaps.push_back({{"first", g.first}, {"second", g.second}, {"gap", g.gap}});
    return {{"passed", r.passed()},
            {"violation", r.violation ? Json(*r.violation) : Json(nullptr)},
            {"violated_invariant", r.violated_invariant.empty() ? Json(nullptr) : Json(r.violated_invariant)},
            {"gaps", gaps},
            {"max_obstacle_radius", r.max_obstacle_radius},
            {"ball_radius", r.ball_radius},
            {"min_gradient_norm", r.min_gradient_norm},
            {"min_curvature", r.min_curvature},
            {"max_curvature", r.max_curvature},
            {"flatness_flag", r.flatness_flag},
            {"connected", r.connected}};
}

// ---------------------------------------------------------------------------
// Trajectories

inline Json trajectory_summary_json(const Scene& s, const Trajectory& tr) {
    const int dim = s.dimension;
    Json j = {{"dimension", dim},
              {"ball_radius", s.ball_radius},
              {"entry", phase_json(tr.entry, dim)},
              {"status", to_string(tr.status)},
              {"total_time", tr.total_time},
              {"events", tr.events.size()}};
    if (tr.exited()) {
        j["reflections"] = reflection_count(tr);
        j["exit"] = phase_json(tr.exit, dim);
        j["sojourn"] = sojourn_time(s, tr);
    }
    if (tr.status == TrajectoryStatus::trapped) j["cutoff_reason"] = tr.cutoff_reason;
    return j;
}

inline Json event_json(const Event& e, int dim) {
    return {{"t", e.t},
            {"x", vec_json(e.x, dim)},
            {"obstacle", e.obstacle},
            {"type", to_string(e.type)},
            {"v_in", vec_json(e.v_in, dim)},
            {"v_out", vec_json(e.v_out, dim)}};
}

/// JSONL: header (with entry, status, total time) then one event per line.
inline void write_trajectory(std::ostream& os, Header h, const Scene& s, const Trajectory& tr) {
    h.kind = "trajectory";
    const Json summary = trajectory_summary_json(s, tr);
    for (auto it = summary.begin(); it != summary.end(); ++it) h.extra[it.key()] = it.value();
    os << dump(header_json(h)) << '\n';
    for (const auto& e : tr.events) os << dump(event_json(e, s.dimension)) << '\n';
}

// ---------------------------------------------------------------------------
// Lens tables

inline std::vector<std::string> param_names(int dim) {
    if (dim == 2) return {"position_angle", "direction_angle"};
    return {"position_height", "position_azimuth", "incidence", "direction_azimuth"};
}

inline Json lens_sample_json(const LensSample& x, int dim) {
    Json j = {{"index", x.index},
              {"params", x.params},
              {"entry", phase_json(x.entry, dim)},
              {"status", to_string(x.status)},
              {"t", opt_json(x.t)},
              {"reflections", x.reflections},
              {"theta", x.theta ? vec_json(*x.theta, dim) : Json(nullptr)},
              {"sojourn", opt_json(x.sojourn)}};
    if (!x.error.empty()) j["error"] = x.error;
    return j;
}

inline Json lens_header_extra(const LensTable& t) {
    const auto sum = t.summary();
    Json counts = Json::object();
    for (auto s : {SampleStatus::free, SampleStatus::scattered, SampleStatus::trapped, SampleStatus::gliding_rejected,
                   SampleStatus::tangent_flagged, SampleStatus::failed})
        counts[to_string(s)] = sum.count(s);
    return {{"dimension", t.dimension},
            {"ball_radius", t.ball_radius},
            {"max_reflections", t.spec.limits.max_reflections},
            {"max_time_factor", t.spec.limits.max_time_factor},
            {"samples", t.samples.size()},
            {"status_counts", counts}};
}

inline Header lens_header(Header h, const LensTable& t) {
    h.kind = "lens";
    h.scene_hash = hash_hex(t.scene_hash);
    h.spec = t.spec.label();
    h.seed = t.spec.seed;
    const Json extra = lens_header_extra(t);
    for (auto it = extra.begin(); it != extra.end(); ++it) h.extra[it.key()] = it.value();
    return h;
}

inline void write_lens_table(std::ostream& os, const Header& h, const LensTable& t) {
    os << dump(header_json(lens_header(h, t))) << '\n';
    for (const auto& x : t.samples) os << dump(lens_sample_json(x, t.dimension)) << '\n';
}

/// CSV export: a '#'-prefixed header line, the column names, then one row per sample.
inline void write_lens_csv(std::ostream& os, const Header& h, const LensTable& t) {
    os << "# " << dump(header_json(lens_header(h, t))) << '\n';
    const int dim = t.dimension;
    for (const auto& n : param_names(dim)) os << n << ',';
    os << "status,t,reflections,";
    const char* axes[] = {"theta_x", "theta_y", "theta_z"};
    for (int i = 0; i < dim; ++i) os << axes[i] << ',';
    os << "sojourn\n";
    auto opt = [](const std::optional<double>& x) { return x ? format_double(*x) : std::string(); };
    for (const auto& x : t.samples) {
        for (double p : x.params) os << format_double(p) << ',';
        os << to_string(x.status) << ',' << opt(x.t) << ',' << x.reflections << ',';
        for (int i = 0; i < dim; ++i) os << (x.theta ? format_double((*x.theta)[i]) : std::string()) << ',';
        os << opt(x.sojourn) << '\n';
    }
}

namespace detail {

inline Vec3 vec_from_json(const nlohmann::json& j, int dim, const std::string& where) {
    if (!j.is_array() || static_cast<int>(j.size()) != dim) throw InputError(where + ": expected " + std::to_string(dim) + " numbers");
    Vec3 v = Vec3::Zero();
    for (int i = 0; i < dim; ++i) v[i] = j[i].get<double>();
    return v;
}

inline std::optional<double> opt_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

}  // namespace detail

inline LensTable read_lens_table(std::istream& in, const std::string& name = "lens table") {
    std::string line;
    if (!std::getline(in, line)) throw InputError(name + ": empty file");
    LensTable t;
    try {
        const auto h = nlohmann::json::parse(line);
        if (h.value("format", "") != "scatlab/lens") throw InputError(name + ": not a lens table");
        for (const char* k : {"scene_hash", "spec", "version", "seed", "dimension", "ball_radius", "max_reflections",
                              "max_time_factor", "samples"})
            if (!h.contains(k)) throw InputError(name + ": header lacks '" + k + "'");
        t.scene_hash = std::stoull(h.at("scene_hash").get<std::string>(), nullptr, 16);
        TraceLimits lim;
        lim.max_reflections = h.at("max_reflections").get<std::size_t>();
        lim.max_time_factor = h.at("max_time_factor").get<double>();
        t.spec = parse_sample_spec(h.at("spec").get<std::string>(), h.at("seed").get<std::uint64_t>(), lim);
        t.dimension = h.at("dimension").get<int>();
        t.ball_radius = h.at("ball_radius").get<double>();
        if (t.dimension != 2 && t.dimension != 3) throw InputError(name + ": bad dimension");
        const auto n = h.at("samples").get<std::size_t>();
        t.samples.reserve(n);
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const std::string where = name + " line " + std::to_string(lineno);
            const auto j = nlohmann::json::parse(line);
            LensSample x;
            x.index = j.at("index").get<std::size_t>();
            x.params = j.at("params").get<std::vector<double>>();
            x.entry.q = detail::vec_from_json(j.at("entry").at("q"), t.dimension, where);
            x.entry.v = detail::vec_from_json(j.at("entry").at("v"), t.dimension, where);
            x.status = sample_status_from_string(j.at("status").get<std::string>());
            x.t = detail::opt_from_json(j.at("t"));
            x.reflections = j.at("reflections").get<std::size_t>();
            if (!j.at("theta").is_null()) x.theta = detail::vec_from_json(j.at("theta"), t.dimension, where);
            x.sojourn = detail::opt_from_json(j.at("sojourn"));
            if (j.contains("error")) x.error = j.at("error").get<std::string>();
            if (x.index != t.samples.size()) throw InputError(where + ": samples out of order");
            t.samples.push_back(std::move(x));
        }
        if (t.samples.size() != n) throw InputError(name + ": header announces " + std::to_string(n) + " samples, found " +
                                                    std::to_string(t.samples.size()));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(name + ": " + e.what());
    } catch (const std::invalid_argument&) {
        throw InputError(name + ": bad scene hash");
    }
    return t;
}

inline LensTable load_lens_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open lens table " + path);
    return read_lens_table(in, path);
}

// ---------------------------------------------------------------------------
// Reports

inline Json comparison_json(const ComparisonReport& r) {
    return {{"verdict", r.verdict()},
            {"indistinguishable", r.indistinguishable},
            {"tolerance", r.tolerance},
            {"samples", r.samples},
            {"matched", r.matched},
            {"both_trapped", r.both_trapped},
            {"excluded", r.excluded},
            {"status_mismatch", r.status_mismatch},
            {"reflection_mismatch", r.reflection_mismatch},
            {"max_abs_dt", r.max_abs_dt},
            {"mean_abs_dt", r.mean_abs_dt},
            {"exceed_count", r.exceed_count},
            {"exceed_fraction", r.exceed_fraction}};
}

inline Json rank_json(const RankReport& r) {
    return {{"singular_values", values_json(r.singular_values)}, {"rank", r.rank}, {"tolerance", r.tolerance}};
}

inline Json regularity_json(const RegularityResult& r) {
    return {{"time", r.time},
            {"meets_obstacle", r.meets_obstacle},
            {"regular", r.regular},
            {"position_by_direction", rank_json(r.position_by_direction)},
            {"direction_by_position", rank_json(r.direction_by_position)}};
}

inline Json conjugate_json(const ConjugateResult& r) {
    return {{"singular_values", values_json(r.singular_values)},
            {"rank", r.rank},
            {"tolerance", r.tolerance},
            {"conjugate", r.conjugate},
            {"smallest_singular_value", r.smallest_singular_value},
            {"path_length", r.path_length}};
}

inline Json trapped_json(const TrappedEstimate& e) {
    Json levels = Json::array();
    for (const auto& l : e.levels)
        levels.push_back({{"spec", l.spec.label()},
                          {"samples", l.samples},
                          {"trapped", l.trapped},
                          {"fraction", l.fraction},
                          {"cluster_radius", l.cluster_radius}});
    return {{"levels", levels}, {"fractions_non_increasing", e.fractions_non_increasing()}};
}

inline Json spectrum_json(const std::vector<SojournBin>& bins) {
    Json a = Json::array();
    for (const auto& b : bins) a.push_back({{"sojourn", b.sojourn}, {"min", b.min}, {"max", b.max}, {"count", b.count}});
    return {{"bins", a}};
}

// ---------------------------------------------------------------------------
// SVG for planar scenes

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string svg_point(const Vec3& p) { return format_double(p.x()) + ',' + format_double(p.y()); }

}  // namespace detail

/// Points where a trajectory changes direction: entry, events, and the exit
/// (or the state at the cutoff time).
inline std::vector<Vec3> trajectory_vertices(const Trajectory& tr) {
    std::vector<Vec3> pts{tr.entry.q};
    for (const auto& e : tr.events) pts.push_back(e.x);
    pts.push_back(tr.exited() ? tr.exit.q : state_at(tr, tr.total_time).q);
    return pts;
}

/// One path per obstacle outline, one polyline per trajectory segment and a
/// marker per event. Coordinates are written unchanged; the y axis is flipped
/// by a transform.
inline void write_svg(std::ostream& os, const Header& h, const Scene& s, const std::vector<Trajectory>& trajectories) {
    if (s.dimension != 2) throw InvalidParameters("SVG rendering needs a planar scene");
    const double a = s.a();
    const std::string lo = format_double(-1.05 * a), size = format_double(2.1 * a);
    const std::string stroke = format_double(a / 500.0);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << lo << ' ' << lo << ' ' << size << ' ' << size
       << "\"><metadata>" << detail::xml_escape(dump(header_json(h))) << "</metadata>\n";
    os << "<g transform=\"scale(1,-1)\" fill=\"none\" stroke-width=\"" << stroke << "\">\n";
    os << "<circle cx=\"0\" cy=\"0\" r=\"" << format_double(a) << "\" stroke=\"#999999\"/>\n";
    const double spacing = scatlab::detail::sample_spacing(s);
    for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
        const auto pts = s.obstacles[i].boundary_samples(spacing);
        os << "<path class=\"obstacle\" data-index=\"" << i << "\" stroke=\"#000000\" fill=\"#dddddd\" d=\"";
        for (std::size_t k = 0; k < pts.size(); ++k) os << (k ? " L" : "M") << detail::svg_point(pts[k]);
        os << " Z\"/>\n";
    }
    const std::string marker = format_double(a / 200.0);
    for (std::size_t n = 0; n < trajectories.size(); ++n) {
        const auto& tr = trajectories[n];
        const auto pts = trajectory_vertices(tr);
        for (std::size_t k = 0; k + 1 < pts.size(); ++k)
            os << "<polyline class=\"segment\" data-trajectory=\"" << n << "\" stroke=\"#1f5fbf\" points=\""
               << detail::svg_point(pts[k]) << ' ' << detail::svg_point(pts[k + 1]) << "\"/>\n";
        for (const auto& e : tr.events)
            os << "<circle class=\"event " << to_string(e.type) << "\" cx=\"" << format_double(e.x.x()) << "\" cy=\""
               << format_double(e.x.y()) << "\" r=\"" << marker << "\" fill=\""
               << (e.type == EventType::transversal ? "#c0392b" : "#e67e22") << "\" stroke=\"none\"/>\n";
    }
    os << "</g>\n</svg>\n";
}

}  // namespace scatlab::io
