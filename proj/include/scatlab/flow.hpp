#pragma once

#include "scatlab/scene.hpp"
#include "scatlab/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace scatlab {

/// A point of the unit sphere bundle: position and unit direction.
struct PhasePoint {
    Vec3 q = Vec3::Zero();
    Vec3 v = Vec3::UnitX();
};

enum class EventType { transversal, tangent };

inline const char* to_string(EventType t) { return t == EventType::transversal ? "transversal" : "tangent"; }

struct Event {
    double t = 0.0;  // time since entry
    Vec3 x;
    std::size_t obstacle = 0;
    EventType type = EventType::transversal;
    Vec3 v_in;
    Vec3 v_out;
};

enum class TrajectoryStatus { exited, trapped, gliding_rejected };

inline const char* to_string(TrajectoryStatus s) {
    switch (s) {
        case TrajectoryStatus::exited: return "exited";
        case TrajectoryStatus::trapped: return "trapped";
        case TrajectoryStatus::gliding_rejected: return "gliding_rejected";
    }
    return "unknown";
}

struct Trajectory {
    PhasePoint entry;
    std::vector<Event> events;
    TrajectoryStatus status = TrajectoryStatus::exited;
    PhasePoint exit;           // valid when exited
    double total_time = 0.0;   // time at exit, or time reached when cut off
    std::string cutoff_reason; // set when trapped
    std::vector<double> segments;

    bool exited() const { return status == TrajectoryStatus::exited; }
};

struct TraceLimits {
    std::size_t max_reflections = 10000;
    double max_time_factor = 1000.0;  // T_max = factor * a
};

/// Numerical constants of the flow. All lengths are relative to the ball radius a.
struct FlowTolerances {
    static constexpr double tangency = 1e-7;       // |<v, nu>| at or below this is a tangency
    static constexpr double rehit_guard = 1e-9;    // t_min after an event, times a
    static constexpr double march_divisions = 1024.0;  // marching step a / 1024
    static constexpr double polish = 1e-12;        // geometric residual |F| / |grad F|, times a
    static constexpr int polish_iterations = 200;
    static constexpr double gliding = 1e-6;        // arc distance between consecutive tangencies, times a
};

struct Hit {
    double t = 0.0;
    std::size_t obstacle = 0;
    Vec3 point;
};

/// Largest t with |q + t v| = a, i.e. where the line leaves the ball; nullopt if the line misses it.
inline std::optional<double> ball_exit_time(const Vec3& q, const Vec3& v, double a) {
    const double b = q.dot(v);
    const double c = q.squaredNorm() - a * a;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    return -b + std::sqrt(disc);
}

namespace detail {

inline std::optional<std::pair<double, double>> sphere_interval(const Vec3& q, const Vec3& v, const Vec3& c, double r) {
    const Vec3 d = q - c;
    const double b = d.dot(v);
    const double disc = b * b - (d.squaredNorm() - r * r);
    if (disc < 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    return std::make_pair(-b - s, -b + s);
}

/// Polishes a root of f(t) = F(q + t v) inside [lo, hi] with f(lo) > 0 >= f(hi).
inline double polish_root(const Obstacle& o, const Vec3& q, const Vec3& v, double lo, double hi, double a) {
    double t = hi;
    for (int it = 0; it < FlowTolerances::polish_iterations; ++it) {
        const Vec3 x = q + t * v;
        const double f = o.value(x);
        const Vec3 g = o.gradient(x);
        const double gn = g.norm();
        if (gn > 0.0 && std::abs(f) / gn <= FlowTolerances::polish * a) return t;
        if (f > 0.0) lo = t; else hi = t;
        if (hi - lo <= 1e-3 * FlowTolerances::polish * a) return hi;
        const double df = g.dot(v);
        double next = (df != 0.0) ? t - f / df : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        t = next;
    }
    throw RootPolishFailed("root polish did not converge in 200 iterations");
}

/// Minimizer of f(t) on [lo, hi] given f' < 0 at lo and f' > 0 at hi (bisection on f').
inline double minimize_along(const Obstacle& o, const Vec3& q, const Vec3& v, double lo, double hi) {
    for (int it = 0; it < 100 && hi - lo > 1e-16 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (o.gradient(q + mid * v).dot(v) < 0.0) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// First entering root of obstacle `o` along the ray on [t_begin, t_end].
inline std::optional<double> first_root(const Obstacle& o, const Vec3& q, const Vec3& v, double t_begin, double t_end,
                                        double a) {
    const double h = a / FlowTolerances::march_divisions;
    const bool distance_field = o.is_distance_field();
    double t = t_begin;
    double f = o.value(q + t * v);
    // Starting inside or on the boundary: skip to where the ray is outside again.
    if (f <= 0.0) {
        double t_in = t;
        while (f <= 0.0) {
            t_in = t;
            t += h;
            if (t > t_end) return std::nullopt;
            f = o.value(q + t * v);
        }
        double lo = t_in, hi = t;  // f(lo) <= 0 < f(hi)
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (o.value(q + mid * v) <= 0.0) lo = mid; else hi = mid;
        }
        t = hi;
        f = o.value(q + t * v);
    }
    double g = o.gradient(q + t * v).dot(v);
    while (t < t_end) {
        const double step = distance_field ? std::max(h, f) : h;
        const double tn = std::min(t + step, t_end);
        const Vec3 xn = q + tn * v;
        const double fn = o.value(xn);
        if (fn <= 0.0) return polish_root(o, q, v, t, tn, a);
        const double gn = o.gradient(xn).dot(v);
        if (g < 0.0 && gn > 0.0) {
            // F dips between samples: look for a grazing contact.
            const double tm = minimize_along(o, q, v, t, tn);
            if (o.value(q + tm * v) <= 0.0) return polish_root(o, q, v, t, tm, a);
        }
        t = tn;
        f = fn;
        g = gn;
    }
    return std::nullopt;
}

}  // namespace detail

/// Smallest t in (t_min, max_advance] where the ray enters an obstacle.
inline std::optional<Hit> first_hit(const Scene& scene, const PhasePoint& p, double max_advance, double t_min = 0.0) {
    std::optional<Hit> best;
    for (std::size_t i = 0; i < scene.obstacles.size(); ++i) {
        const auto& o = scene.obstacles[i];
        const auto [bc, br] = o.bounding_sphere();
        const auto iv = detail::sphere_interval(p.q, p.v, bc, br * (1.0 + 1e-9) + 1e-9 * scene.a());
        if (!iv) continue;
        const double lo = std::max(iv->first, t_min);
        double hi = std::min(iv->second, max_advance);
        if (best) hi = std::min(hi, best->t);
        if (lo > hi) continue;
        if (auto t = detail::first_root(o, p.q, p.v, lo, hi, scene.a())) {
            if (!best || *t < best->t) best = Hit{*t, i, p.q + *t * p.v};
        }
    }
    return best;
}

/// Specular reflection of v in the plane with unit normal nu; requires <v, nu> < 0.
inline Vec3 reflect(const Vec3& v, const Vec3& nu) {
    const double c = v.dot(nu);
    if (!(c < 0.0)) throw TangentIncidence("reflect: direction does not point into the boundary");
    return (v - 2.0 * c * nu).normalized();
}

/// Inward unit normal of the reference sphere at q.
inline Vec3 ball_inward_normal(const Vec3& q) { return -q.normalized(); }

/// Follows the billiard flow from `entry` until it leaves the ball, is cut off, or glides.
inline Trajectory trace(const Scene& scene, const PhasePoint& entry, const TraceLimits& limits = {}) {
    const double a = scene.a();
    const double t_max = limits.max_time_factor * a;
    Trajectory tr;
    tr.entry = entry;
    Vec3 pos = entry.q;
    Vec3 dir = entry.v.normalized();
    double time = 0.0;
    for (;;) {
        const auto exit_dist = ball_exit_time(pos, dir, a);
        const double advance = exit_dist ? std::max(0.0, *exit_dist) : 0.0;
        const double guard = tr.events.empty() ? 0.0 : FlowTolerances::rehit_guard * a;
        const auto hit = first_hit(scene, {pos, dir}, advance, guard);
        if (hit && time + hit->t > t_max) {
            tr.status = TrajectoryStatus::trapped;
            tr.cutoff_reason = "max_time";
            tr.total_time = t_max;
            tr.segments.push_back(t_max - time);
            return tr;
        }
        if (!hit) {
            if (time + advance > t_max) {
                tr.status = TrajectoryStatus::trapped;
                tr.cutoff_reason = "max_time";
                tr.total_time = t_max;
                tr.segments.push_back(t_max - time);
                return tr;
            }
            time += advance;
            pos += advance * dir;
            tr.segments.push_back(advance);
            tr.status = TrajectoryStatus::exited;
            tr.exit = {pos, dir};
            tr.total_time = time;
            return tr;
        }
        time += hit->t;
        tr.segments.push_back(hit->t);
        pos = hit->point;
        const auto& obstacle = scene.obstacles[hit->obstacle];
        const Vec3 nu = obstacle.gradient(pos).normalized();
        const double c = dir.dot(nu);
        Event ev{time, pos, hit->obstacle, EventType::transversal, dir, dir};
        if (c >= -FlowTolerances::tangency) {
            ev.type = EventType::tangent;
            if (!tr.events.empty()) {
                const auto& prev = tr.events.back();
                if (prev.type == EventType::tangent && prev.obstacle == hit->obstacle &&
                    (prev.x - pos).norm() < FlowTolerances::gliding * a) {
                    tr.events.push_back(ev);
                    tr.status = TrajectoryStatus::gliding_rejected;
                    tr.total_time = time;
                    return tr;
                }
            }
        } else {
            ev.v_out = reflect(dir, nu);
            dir = ev.v_out;
        }
        tr.events.push_back(ev);
        if (tr.events.size() >= limits.max_reflections) {
            tr.status = TrajectoryStatus::trapped;
            tr.cutoff_reason = "max_reflections";
            tr.total_time = time;
            return tr;
        }
    }
}

/// Travelling time t_K, or why there is none.
struct TravelTime {
    enum class Kind { time, trapped, gliding_rejected } kind = Kind::time;
    double value = 0.0;

    bool has_time() const { return kind == Kind::time; }
};

inline TravelTime travelling_time(const Scene& scene, const PhasePoint& entry, const TraceLimits& limits = {}) {
    if (entry.v.dot(ball_inward_normal(entry.q)) == 0.0) return {TravelTime::Kind::time, 0.0};
    const auto tr = trace(scene, entry, limits);
    switch (tr.status) {
        case TrajectoryStatus::exited: return {TravelTime::Kind::time, tr.total_time};
        case TrajectoryStatus::trapped: return {TravelTime::Kind::trapped, 0.0};
        case TrajectoryStatus::gliding_rejected: return {TravelTime::Kind::gliding_rejected, 0.0};
    }
    return {};
}

inline void require_exited(const Trajectory& tr) {
    if (!tr.exited()) throw NotScattered(std::string("trajectory did not exit: ") + to_string(tr.status));
}

/// Incoming and outgoing directions of a scattered trajectory.
inline std::pair<Vec3, Vec3> omega_theta(const Trajectory& tr) {
    require_exited(tr);
    return {tr.entry.v, tr.exit.v};
}

/// Sojourn time T' - 2a, where T' is measured between the tangent hyperplanes
/// Z_omega (behind the entry) and Z_{-theta} (beyond the exit).
inline double sojourn_time(const Scene& scene, const Trajectory& tr) {
    require_exited(tr);
    const double a = scene.a();
    const auto [omega, theta] = omega_theta(tr);
    const double before = tr.entry.q.dot(omega) + a;
    const double after = a - tr.exit.q.dot(theta);
    return before + tr.total_time + after - 2.0 * a;
}

/// Number of boundary points of the trajectory (transversal and tangent).
inline std::size_t reflection_count(const Trajectory& tr) {
    require_exited(tr);
    return tr.events.size();
}

/// Position and direction at time t, continuing straight past the exit.
inline PhasePoint state_at(const Trajectory& tr, double t) {
    Vec3 pos = tr.entry.q;
    Vec3 dir = tr.entry.v;
    double time = 0.0;
    for (const auto& ev : tr.events) {
        if (ev.t > t) break;
        pos = ev.x;
        dir = ev.v_out;
        time = ev.t;
    }
    return {pos + (t - time) * dir, dir};
}

/// Entry point on the sphere of radius a for the line with direction `v`
/// passing at transverse offset `impact` (impact orthogonal to v).
inline PhasePoint entry_for_line(double a, const Vec3& v, const Vec3& impact) {
    const double b2 = impact.squaredNorm();
    if (b2 > a * a) throw InvalidParameters("impact parameter exceeds the ball radius");
    return {impact - std::sqrt(a * a - b2) * v, v};
}

}  // namespace scatlab
