#pragma once

#include "scatlab/obstacle.hpp"
#include "scatlab/types.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace scatlab {

/// Reference ball of radius `ball_radius` centered at the origin, holding the obstacles.
struct Scene {
    int dimension = 3;
    double ball_radius = 10.0;
    std::vector<Obstacle> obstacles;
    std::string name;

    double a() const { return ball_radius; }
};

// ---------------------------------------------------------------------------
// Scene files

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    if (!obj.is_object()) throw InputError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
        if (!ok.count(key)) throw InputError(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
T require(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw InputError(where + ": missing key '" + std::string(key) + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(where + ": bad value for '" + std::string(key) + "': " + e.what());
    }
}

inline Vec3 vec_from(const std::vector<double>& v, int dim, const std::string& where) {
    if (static_cast<int>(v.size()) != dim) throw InputError(where + ": expected " + std::to_string(dim) + " components");
    Vec3 out = Vec3::Zero();
    for (int i = 0; i < dim; ++i) out[i] = v[i];
    return out;
}

inline Vec2 vec2_from(const nlohmann::json& obj, const char* key, const std::string& where) {
    const auto v = require<std::vector<double>>(obj, key, where);
    if (v.size() != 2) throw InputError(where + ": '" + key + "' needs two components");
    return {v[0], v[1]};
}

inline CurvePiece piece_from_json(const nlohmann::json& j, const std::string& where) {
    const auto type = require<std::string>(j, "type", where);
    if (type == "segment") {
        reject_unknown_keys(j, {"type", "from", "to"}, where);
        return Segment{vec2_from(j, "from", where), vec2_from(j, "to", where)};
    }
    if (type == "arc") {
        reject_unknown_keys(j, {"type", "center", "radius", "start", "sweep"}, where);
        return CircularArc{vec2_from(j, "center", where), require<double>(j, "radius", where),
                           require<double>(j, "start", where), require<double>(j, "sweep", where)};
    }
    if (type == "elliptic_arc") {
        reject_unknown_keys(j, {"type", "center", "semi_axes", "start", "sweep"}, where);
        const Vec2 axes = vec2_from(j, "semi_axes", where);
        return EllipticArc{vec2_from(j, "center", where), axes.x(), axes.y(), require<double>(j, "start", where),
                           require<double>(j, "sweep", where)};
    }
    throw InputError(where + ": unknown piece type '" + type + "'");
}

inline Obstacle obstacle_from_json(const nlohmann::json& j, int dim, const std::string& where) {
    reject_unknown_keys(j, {"kind", "center", "params", "rotation"}, where);
    const auto kind = require<std::string>(j, "kind", where);
    const Vec3 center = vec_from(require<std::vector<double>>(j, "center", where), dim, where + ".center");
    std::vector<double> rotation;
    if (j.contains("rotation")) rotation = require<std::vector<double>>(j, "rotation", where);
    const auto& params = j.contains("params") ? j.at("params") : throw InputError(where + ": missing key 'params'");
    const std::string pw = where + ".params";
    auto axes = [&]() {
        Vec3 a = vec_from(require<std::vector<double>>(params, "semi_axes", pw), dim, pw + ".semi_axes");
        if (dim == 2) a.z() = 1.0;
        return a;
    };
    if (kind == "sphere") {
        reject_unknown_keys(params, {"radius"}, pw);
        return Obstacle(dim, center, SphereShape{require<double>(params, "radius", pw)}, rotation);
    }
    if (kind == "ellipsoid") {
        reject_unknown_keys(params, {"semi_axes"}, pw);
        return Obstacle(dim, center, EllipsoidShape{axes()}, rotation);
    }
    if (kind == "superellipsoid") {
        reject_unknown_keys(params, {"semi_axes", "exponent"}, pw);
        return Obstacle(dim, center, SuperellipsoidShape{axes(), require<double>(params, "exponent", pw)}, rotation);
    }
    if (kind == "curve") {
        reject_unknown_keys(params, {"pieces"}, pw);
        if (dim != 2) throw InputError(where + ": curve obstacles need dimension 2");
        const auto& arr = params.contains("pieces") ? params.at("pieces") : throw InputError(pw + ": missing 'pieces'");
        if (!arr.is_array()) throw InputError(pw + ".pieces: expected an array");
        std::vector<CurvePiece> pieces;
        for (std::size_t i = 0; i < arr.size(); ++i) pieces.push_back(piece_from_json(arr[i], pw + ".pieces[" + std::to_string(i) + "]"));
        if (pieces.empty()) throw InputError(pw + ".pieces: empty");
        return Obstacle(dim, center, CurveShape{PiecewiseCurve(std::move(pieces))}, rotation);
    }
    throw InputError(where + ": unknown obstacle kind '" + kind + "'");
}

}  // namespace detail

inline Scene scene_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"dimension", "ball_radius", "obstacles", "name"}, "scene");
    Scene s;
    s.dimension = detail::require<int>(j, "dimension", "scene");
    if (s.dimension != 2 && s.dimension != 3) throw InputError("scene: dimension must be 2 or 3");
    s.ball_radius = detail::require<double>(j, "ball_radius", "scene");
    s.name = detail::require<std::string>(j, "name", "scene");
    if (!j.contains("obstacles") || !j.at("obstacles").is_array()) throw InputError("scene: 'obstacles' must be an array");
    const auto& obs = j.at("obstacles");
    for (std::size_t i = 0; i < obs.size(); ++i)
        s.obstacles.push_back(detail::obstacle_from_json(obs[i], s.dimension, "obstacles[" + std::to_string(i) + "]"));
    return s;
}

inline nlohmann::json scene_to_json(const Scene& s) {
    nlohmann::json obs = nlohmann::json::array();
    for (const auto& o : s.obstacles) {
        nlohmann::json center = nlohmann::json::array();
        for (int i = 0; i < s.dimension; ++i) center.push_back(o.center()[i]);
        nlohmann::json entry = {{"kind", o.kind_name()}, {"center", center}, {"params", o.params_json()}};
        if (!o.rotation().empty()) entry["rotation"] = o.rotation();
        obs.push_back(entry);
    }
    return {{"dimension", s.dimension}, {"ball_radius", s.ball_radius}, {"obstacles", obs}, {"name", s.name}};
}

inline Scene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scene file " + path);
    try {
        return scene_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("scene file " + path + ": " + e.what());
    }
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hash of the canonical (sorted-key, compact) scene serialization.
inline std::uint64_t scene_hash(const Scene& s) { return fnv1a64(scene_to_json(s).dump()); }

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Boundary frames

inline double implicit_value(const Obstacle& o, const Vec3& x) { return o.value(x); }

/// Local boundary geometry at a boundary point.
struct SurfaceFrame {
    Vec3 point;
    Vec3 normal;          // unit, pointing out of the obstacle into the exterior
    Basis tangent_basis;  // 3 x (n-1), orthonormal, orthogonal to normal
    Mat shape;            // (n-1) x (n-1) shape operator in tangent_basis
    Mat3 shape_ambient;   // same operator acting on ambient vectors, zero along the normal
    double gradient_norm = 0.0;
};

inline constexpr double kGradientFloor = 1e-10;

inline SurfaceFrame surface_frame(const Obstacle& o, const Vec3& x) {
    const Vec3 g = o.gradient(x);
    const double gn = g.norm();
    if (!(gn > kGradientFloor)) throw SingularGradient("gradient vanishes at the requested point");
    const double scale = std::max(1.0, o.bounding_sphere().second);
    if (std::abs(o.value(x)) / gn > 1e-6 * scale) throw InvalidParameters("point is not on the obstacle boundary");
    SurfaceFrame f;
    f.point = x;
    f.normal = g / gn;
    f.gradient_norm = gn;
    const int dim = o.dimension();
    f.tangent_basis = detail::transverse_basis(f.normal, dim);
    const Mat3 proj = Mat3::Identity() - f.normal * f.normal.transpose();
    Mat3 hs = proj * o.hessian(x) * proj / gn;
    hs = (0.5 * (hs + hs.transpose())).eval();
    if (dim == 2) {
        hs.row(2).setZero();
        hs.col(2).setZero();
    }
    f.shape_ambient = hs;
    f.shape = f.tangent_basis.transpose() * hs * f.tangent_basis;
    return f;
}

/// Principal curvatures (ascending) from a shape operator.
inline Eigen::VectorXd principal_curvatures(const Mat& shape) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (shape + shape.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

/// Nearest boundary point of `o` to `y`, by alternating Newton projection onto
/// the level set and a tangential step toward `y`.
inline Vec3 closest_boundary_point(const Obstacle& o, const Vec3& y, Vec3 start) {
    if (const auto* s = std::get_if<SphereShape>(&o.shape())) {
        const Vec3 d = y - o.center();
        if (d.norm() > 0.0) return o.center() + s->radius * d.normalized();
    }
    if (o.is_distance_field()) return y - o.value(y) * o.gradient(y);

    Vec3 x = std::move(start);
    const int dim = o.dimension();
    auto to_surface = [&] {
        for (int it = 0; it < 30; ++it) {
            const Vec3 g = o.gradient(x);
            const double f = o.value(x);
            const double g2 = g.squaredNorm();
            if (g2 <= 0.0) break;
            x -= f / g2 * g;
            if (dim == 2) x.z() = 0.0;
            if (std::abs(f) < 1e-15 * std::max(1.0, std::sqrt(g2))) break;
        }
    };
    for (int outer = 0; outer < 200; ++outer) {
        to_surface();
        const Vec3 g = o.gradient(x);
        const double gn = g.norm();
        if (gn <= 0.0) break;
        const Vec3 n = g / gn;
        const Basis e = detail::transverse_basis(n, dim);
        const Vec3 r = y - x;
        const Eigen::VectorXd rhs = e.transpose() * r;
        if (rhs.norm() < 1e-14 * std::max(1.0, r.norm())) break;
        // Newton step for the foot point: (I + d S) du = tangential residual.
        const Mat3 p = Mat3::Identity() - n * n.transpose();
        const Mat s = e.transpose() * (p * o.hessian(x) * p / gn) * e;
        const Mat m = Mat::Identity(rhs.size(), rhs.size()) + r.dot(n) * s;
        Eigen::VectorXd du;
        if (Eigen::SelfAdjointEigenSolver<Mat>(m).eigenvalues().minCoeff() > 0.1)
            du = m.ldlt().solve(rhs);
        else
            du = rhs / (2.0 * (1.0 + std::abs(r.dot(n)) * s.norm()));
        x += e * du;
    }
    to_surface();
    return x;
}

// ---------------------------------------------------------------------------
// Validation

struct ObstacleGap {
    std::size_t first = 0;
    std::size_t second = 0;
    double gap = 0.0;
};

struct ValidationReport {
    std::vector<ObstacleGap> gaps;
    double max_obstacle_radius = 0.0;  // largest |x| over boundary samples
    double ball_radius = 0.0;
    double min_gradient_norm = std::numeric_limits<double>::infinity();
    double min_curvature = std::numeric_limits<double>::infinity();
    double max_curvature = -std::numeric_limits<double>::infinity();
    bool flatness_flag = false;
    bool connected = true;
    std::optional<std::string> violation;  // "<invariant>: <detail>"
    std::string violated_invariant;

    bool passed() const { return !violation; }
};

namespace detail {

inline double sample_spacing(const Scene& s) { return s.ball_radius / (s.dimension == 2 ? 400.0 : 60.0); }

inline double pair_gap(const Obstacle& p, const Obstacle& q, const std::vector<Vec3>& ps, const std::vector<Vec3>& qs) {
    double best = std::numeric_limits<double>::infinity();
    Vec3 bp = ps.front(), bq = qs.front();
    for (const auto& x : ps)
        for (const auto& y : qs) {
            const double d = (x - y).squaredNorm();
            if (d < best) {
                best = d;
                bp = x;
                bq = y;
            }
        }
    // Alternating projections from the closest sample pair.
    for (int it = 0; it < 50; ++it) {
        bp = closest_boundary_point(p, bq, bp);
        bq = closest_boundary_point(q, bp, bq);
    }
    // Overlapping obstacles report a negative gap.
    const double d = (bp - bq).norm();
    bool overlap = p.value(bq) < 0.0 || q.value(bp) < 0.0;
    for (const auto& x : ps) overlap = overlap || q.value(x) < 0.0;
    for (const auto& y : qs) overlap = overlap || p.value(y) < 0.0;
    return overlap ? -d : d;
}

inline bool exterior_connected(const Scene& s) {
    const int res = s.dimension == 2 ? 400 : 100;  // cells across the ball diameter
    const double h = 2.0 * s.ball_radius / res;
    const int nz = s.dimension == 2 ? 1 : res;
    auto idx = [&](int i, int j, int k) { return (static_cast<std::size_t>(k) * res + j) * res + i; };
    auto center = [&](int i, int j, int k) {
        return Vec3(-s.ball_radius + (i + 0.5) * h, -s.ball_radius + (j + 0.5) * h,
                    s.dimension == 2 ? 0.0 : -s.ball_radius + (k + 0.5) * h);
    };
    std::vector<char> state(static_cast<std::size_t>(res) * res * nz, 0);  // 0 blocked, 1 free, 2 reached
    std::size_t free_cells = 0;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < res; ++j)
            for (int i = 0; i < res; ++i) {
                const Vec3 c = center(i, j, k);
                if (c.norm() >= s.ball_radius) continue;
                bool inside = false;
                for (const auto& o : s.obstacles) {
                    const auto [bc, br] = o.bounding_sphere();
                    if ((c - bc).norm() > br + h) continue;
                    if (o.value(c) <= 0.0) {
                        inside = true;
                        break;
                    }
                }
                if (!inside) {
                    state[idx(i, j, k)] = 1;
                    ++free_cells;
                }
            }
    // Seed from the free cell nearest to the ball boundary on the -x axis.
    std::deque<std::array<int, 3>> queue;
    for (int i = 0; i < res && queue.empty(); ++i) {
        const int j = res / 2, k = nz / 2;
        if (state[idx(i, j, k)] == 1) {
            state[idx(i, j, k)] = 2;
            queue.push_back({i, j, k});
        }
    }
    std::size_t reached = queue.size();
    while (!queue.empty()) {
        const auto [i, j, k] = queue.front();
        queue.pop_front();
        const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& d : nb) {
            const int a = i + d[0], b = j + d[1], c = k + d[2];
            if (a < 0 || b < 0 || c < 0 || a >= res || b >= res || c >= nz) continue;
            auto& st = state[idx(a, b, c)];
            if (st != 1) continue;
            st = 2;
            ++reached;
            queue.push_back({a, b, c});
        }
    }
    return reached == free_cells;
}

}  // namespace detail

/// Flatness threshold on principal curvatures, relative to the ball radius.
inline double flatness_threshold(const Scene& s) { return 1e-6 / s.ball_radius; }

/// Measures every scene invariant; `violation` names the first one that fails.
inline ValidationReport inspect_scene(const Scene& s) {
    ValidationReport r;
    r.ball_radius = s.ball_radius;
    auto fail = [&r](const std::string& invariant, const std::string& detail) {
        if (!r.violation) {
            r.violation = invariant + ": " + detail;
            r.violated_invariant = invariant;
        }
    };
    if (s.dimension != 2 && s.dimension != 3) fail("dimension", "must be 2 or 3");
    if (!(s.ball_radius > 0.0)) {
        fail("ball_radius", "must be positive");
        return r;
    }
    for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
        if (s.obstacles[i].dimension() != s.dimension) fail("dimension", "obstacle " + std::to_string(i) + " has the wrong dimension");
        if (auto p = s.obstacles[i].parameter_problem()) fail("degenerate_obstacle", "obstacle " + std::to_string(i) + ": " + *p);
    }
    if (r.violation) return r;

    const double spacing = detail::sample_spacing(s);
    std::vector<std::vector<Vec3>> samples;
    for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
        const auto& o = s.obstacles[i];
        samples.push_back(o.boundary_samples(spacing));
        for (const auto& x : samples.back()) {
            r.max_obstacle_radius = std::max(r.max_obstacle_radius, x.norm());
            const double gn = o.gradient(x).norm();
            r.min_gradient_norm = std::min(r.min_gradient_norm, gn);
            if (!(gn > kGradientFloor)) {
                fail("regular_boundary", "obstacle " + std::to_string(i) + " has a singular boundary point");
                continue;
            }
            const auto k = principal_curvatures(surface_frame(o, x).shape);
            r.min_curvature = std::min(r.min_curvature, k.minCoeff());
            r.max_curvature = std::max(r.max_curvature, k.maxCoeff());
            if (k.cwiseAbs().maxCoeff() < flatness_threshold(s)) {
                r.flatness_flag = true;
                if (k.minCoeff() < -1e-3 * flatness_threshold(s))
                    fail("flat_patch_convexity", "obstacle " + std::to_string(i) + " has a flat non-convex patch");
            }
        }
    }
    if (r.max_obstacle_radius >= s.ball_radius)
        fail("containment", "obstacle reaches radius " + std::to_string(r.max_obstacle_radius) + " >= ball radius");

    for (std::size_t i = 0; i < s.obstacles.size(); ++i)
        for (std::size_t j = i + 1; j < s.obstacles.size(); ++j) {
            const double g = detail::pair_gap(s.obstacles[i], s.obstacles[j], samples[i], samples[j]);
            r.gaps.push_back({i, j, g});
            if (!(g > 0.0)) fail("disjoint", "obstacles " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
        }
    if (!r.violation) {
        r.connected = detail::exterior_connected(s);
        if (!r.connected) fail("connected_exterior", "exterior of the obstacles is not connected");
    }
    return r;
}

/// Throws ValidationFailed on the first violated invariant.
inline ValidationReport validate_scene(const Scene& s) {
    auto r = inspect_scene(s);
    if (r.violation) throw ValidationFailed(r.violated_invariant, *r.violation);
    return r;
}

}  // namespace scatlab
