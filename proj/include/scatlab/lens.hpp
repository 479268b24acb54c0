#pragma once

#include "scatlab/flow.hpp"
#include "scatlab/parallel.hpp"
#include "scatlab/sampling.hpp"
#include "scatlab/scene.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace scatlab {

enum class SampleStatus { free, scattered, trapped, gliding_rejected, tangent_flagged, failed };

inline const char* to_string(SampleStatus s) {
    switch (s) {
        case SampleStatus::free: return "free";
        case SampleStatus::scattered: return "scattered";
        case SampleStatus::trapped: return "trapped";
        case SampleStatus::gliding_rejected: return "gliding_rejected";
        case SampleStatus::tangent_flagged: return "tangent_flagged";
        case SampleStatus::failed: return "failed";
    }
    return "unknown";
}

inline SampleStatus sample_status_from_string(const std::string& s) {
    for (auto st : {SampleStatus::free, SampleStatus::scattered, SampleStatus::trapped, SampleStatus::gliding_rejected,
                    SampleStatus::tangent_flagged, SampleStatus::failed})
        if (s == to_string(st)) return st;
    throw InputError("unknown sample status '" + s + "'");
}

struct LensSample {
    std::size_t index = 0;
    std::vector<double> params;
    PhasePoint entry;
    SampleStatus status = SampleStatus::free;
    std::optional<double> t;        // travelling time, for free and scattered samples
    std::size_t reflections = 0;    // boundary events seen (all events when cut off)
    std::optional<Vec3> theta;      // exit direction, when the ray left the ball
    std::optional<double> sojourn;  // for free and scattered samples
    std::string error;              // numeric failure message when status is failed

    bool has_time() const { return t.has_value(); }
};

struct LensSummary {
    std::size_t total = 0;
    std::array<std::size_t, 6> by_status{};  // indexed by SampleStatus

    std::size_t count(SampleStatus s) const { return by_status[static_cast<std::size_t>(s)]; }
    double fraction(SampleStatus s) const { return total ? static_cast<double>(count(s)) / total : 0.0; }
};

struct LensTable {
    std::uint64_t scene_hash = 0;
    SampleSpec spec;
    int dimension = 3;
    double ball_radius = 10.0;
    std::vector<LensSample> samples;

    LensSummary summary() const {
        LensSummary s;
        s.total = samples.size();
        for (const auto& x : samples) ++s.by_status[static_cast<std::size_t>(x.status)];
        return s;
    }
};

/// Classifies one traced entry.
inline LensSample lens_sample(const Scene& scene, const PhaseSample& ps, const TraceLimits& limits, std::size_t index) {
    LensSample out;
    out.index = index;
    out.params = ps.params;
    out.entry = ps.entry;
    try {
        const auto tr = trace(scene, ps.entry, limits);
        out.reflections = tr.events.size();
        switch (tr.status) {
            case TrajectoryStatus::trapped: out.status = SampleStatus::trapped; return out;
            case TrajectoryStatus::gliding_rejected: out.status = SampleStatus::gliding_rejected; return out;
            case TrajectoryStatus::exited: break;
        }
        out.theta = tr.exit.v;
        const bool tangent = std::any_of(tr.events.begin(), tr.events.end(),
                                         [](const Event& e) { return e.type == EventType::tangent; });
        if (tangent) {
            out.status = SampleStatus::tangent_flagged;
            return out;
        }
        out.status = tr.events.empty() ? SampleStatus::free : SampleStatus::scattered;
        out.t = tr.total_time;
        out.sojourn = sojourn_time(scene, tr);
    } catch (const NumericError& e) {
        out.status = SampleStatus::failed;
        out.error = e.what();
        out.t.reset();
        out.theta.reset();
        out.sojourn.reset();
    }
    return out;
}

/// Traces every entry of `spec`; per-sample numeric failures are recorded, not thrown.
inline LensTable build_lens_table(const Scene& scene, const SampleSpec& spec, unsigned workers = 0) {
    LensTable table;
    table.scene_hash = scene_hash(scene);
    table.spec = spec;
    table.dimension = scene.dimension;
    table.ball_radius = scene.a();
    const auto entries = sample_phase_sphere(spec, scene.a(), scene.dimension);
    table.samples.resize(entries.size());
    parallel_for(
        entries.size(), [&](std::size_t i) { table.samples[i] = lens_sample(scene, entries[i], spec.limits, i); },
        workers);
    return table;
}

// ---------------------------------------------------------------------------
// Trapped set

struct TrappedLevel {
    SampleSpec spec;
    std::size_t samples = 0;
    std::size_t trapped = 0;
    double fraction = 0.0;
    double cluster_radius = 0.0;  // heuristic, in normalized parameter units
};

struct TrappedEstimate {
    std::vector<TrappedLevel> levels;

    bool fractions_non_increasing() const {
        for (std::size_t i = 1; i < levels.size(); ++i)
            if (levels[i].fraction > levels[i - 1].fraction) return false;
        return true;
    }
};

/// Largest distance, in normalized parameter space, from a trapped sample to
/// the nearest sample that is not trapped. A stable positive value suggests an
/// open trapped region; a shrinking one is consistent with measure zero.
inline double trapped_cluster_radius(const LensTable& t) {
    std::vector<const LensSample*> trapped, other;
    for (const auto& s : t.samples) (s.status == SampleStatus::trapped ? trapped : other).push_back(&s);
    if (trapped.empty()) return 0.0;
    if (other.empty()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (const auto* a : trapped) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto* b : other) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < a->params.size(); ++k) {
                const double d = a->params[k] - b->params[k];
                d2 += d * d;
            }
            best = std::min(best, d2);
        }
        worst = std::max(worst, std::sqrt(best));
    }
    return worst;
}

/// Trapped fraction and cluster diagnostic over a ladder of at least three
/// increasing sample counts.
inline TrappedEstimate estimate_trapped(const Scene& scene, const std::vector<SampleSpec>& ladder, unsigned workers = 0) {
    if (ladder.size() < 3) throw InvalidParameters("estimate_trapped: need at least three resolutions");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (!(ladder[i].size() > ladder[i - 1].size()))
            throw InvalidParameters("estimate_trapped: resolutions must increase");
    TrappedEstimate est;
    for (const auto& spec : ladder) {
        const auto table = build_lens_table(scene, spec, workers);
        const auto sum = table.summary();
        est.levels.push_back({spec, sum.total, sum.count(SampleStatus::trapped), sum.fraction(SampleStatus::trapped),
                              trapped_cluster_radius(table)});
    }
    return est;
}

// ---------------------------------------------------------------------------
// Scattering length spectrum

struct SojournBin {
    double sojourn = 0.0;  // mean of the cluster
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;
};

struct SpectrumOptions {
    double angular_tolerance = 1e-3;  // radians between exit direction and theta
    double gap = 0.0;                 // cluster gap; 0 means 1e-3 * a
    std::size_t impacts = 101;        // grid: impacts per side (odd includes the central ray)
    bool monte_carlo = false;
    std::uint64_t seed = 0;
    TraceLimits limits;
};

/// Radius of the impact disc that covers every obstacle's shadow.
inline double shadow_radius(const Scene& scene) {
    double r = 0.0;
    for (const auto& o : scene.obstacles) {
        const auto [c, br] = o.bounding_sphere();
        r = std::max(r, c.norm() + br);
    }
    return scene.obstacles.empty() ? scene.a() : std::min(r, scene.a());
}

/// Sojourn times of (omega, theta)-rays, clustered and sorted.
inline std::vector<SojournBin> scattering_spectrum(const Scene& scene, Vec3 omega, Vec3 theta,
                                                   const SpectrumOptions& opt = {}, unsigned workers = 0) {
    if (omega.norm() == 0.0 || theta.norm() == 0.0) throw InvalidParameters("scattering_spectrum: zero direction");
    omega.normalize();
    theta.normalize();
    const int dim = scene.dimension;
    const double R = shadow_radius(scene);
    const Basis e = detail::transverse_basis(omega, dim);
    std::vector<Vec3> impacts;
    if (opt.monte_carlo) {
        Xoshiro256 rng(opt.seed);
        while (impacts.size() < opt.impacts) {
            const double u = 2.0 * rng.uniform() - 1.0;
            const double w = dim == 3 ? 2.0 * rng.uniform() - 1.0 : 0.0;
            if (u * u + w * w > 1.0) continue;
            Vec3 p = R * u * Vec3(e.col(0));
            if (dim == 3) p += R * w * Vec3(e.col(1));
            impacts.push_back(p);
        }
    } else {
        const std::size_t n = std::max<std::size_t>(opt.impacts, 1);
        auto coord = [&](std::size_t i) { return n == 1 ? 0.0 : R * (2.0 * i / (n - 1.0) - 1.0); };
        for (std::size_t i = 0; i < n; ++i) {
            if (dim == 2) {
                impacts.push_back(coord(i) * Vec3(e.col(0)));
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                const double u = coord(i), w = coord(j);
                if (u * u + w * w <= R * R * (1.0 + 1e-12)) impacts.push_back(u * Vec3(e.col(0)) + w * Vec3(e.col(1)));
            }
        }
    }
    std::vector<std::optional<double>> times(impacts.size());
    parallel_for(
        impacts.size(),
        [&](std::size_t i) {
            const double b = impacts[i].norm();
            if (b >= scene.a()) return;
            try {
                const auto tr = trace(scene, entry_for_line(scene.a(), omega, impacts[i]), opt.limits);
                if (!tr.exited()) return;
                for (const auto& ev : tr.events)
                    if (ev.type == EventType::tangent) return;
                const double ang = std::acos(std::clamp(tr.exit.v.dot(theta), -1.0, 1.0));
                if (ang <= opt.angular_tolerance) times[i] = sojourn_time(scene, tr);
            } catch (const NumericError&) {
            }
        },
        workers);
    std::vector<double> kept;
    for (const auto& t : times)
        if (t) kept.push_back(*t);
    std::sort(kept.begin(), kept.end());
    const double gap = opt.gap > 0.0 ? opt.gap : 1e-3 * scene.a();
    std::vector<SojournBin> bins;
    for (std::size_t i = 0; i < kept.size();) {
        std::size_t j = i + 1;
        while (j < kept.size() && kept[j] - kept[j - 1] <= gap) ++j;
        double sum = 0.0;
        for (std::size_t k = i; k < j; ++k) sum += kept[k];
        bins.push_back({sum / (j - i), kept[i], kept[j - 1], j - i});
        i = j;
    }
    return bins;
}

// ---------------------------------------------------------------------------
// Comparison

struct ComparisonReport {
    std::size_t samples = 0;
    std::size_t matched = 0;            // both samples carry a travelling time
    std::size_t both_trapped = 0;
    std::size_t excluded = 0;           // tangent-flagged, gliding or failed on either side
    std::size_t status_mismatch = 0;
    std::size_t reflection_mismatch = 0;
    double max_abs_dt = 0.0;
    double mean_abs_dt = 0.0;
    std::size_t exceed_count = 0;
    double exceed_fraction = 0.0;
    double tolerance = 0.0;
    bool indistinguishable = true;

    const char* verdict() const { return indistinguishable ? "indistinguishable" : "distinguishable"; }
};

inline double default_time_tolerance(double a) { return 1e-6 * a; }

/// Joins two tables sample by sample. Samples that are tangent-flagged,
/// gliding or failed on either side are excluded; both-trapped counts as
/// agreement; free versus scattered is a status mismatch.
inline ComparisonReport compare_lens(const LensTable& k, const LensTable& l, double tolerance) {
    if (!(k.spec == l.spec)) throw SpecMismatch("tables use different sample specs");
    if (k.samples.size() != l.samples.size()) throw SpecMismatch("tables have different sample counts");
    if (k.dimension != l.dimension || k.ball_radius != l.ball_radius)
        throw SpecMismatch("tables use different reference balls");
    ComparisonReport r;
    r.samples = k.samples.size();
    r.tolerance = tolerance;
    double sum = 0.0;
    auto excluded = [](SampleStatus s) {
        return s == SampleStatus::tangent_flagged || s == SampleStatus::gliding_rejected || s == SampleStatus::failed;
    };
    for (std::size_t i = 0; i < k.samples.size(); ++i) {
        const auto& a = k.samples[i];
        const auto& b = l.samples[i];
        if (a.index != b.index || a.params != b.params) throw SpecMismatch("sample " + std::to_string(i) + " differs in entry");
        if (excluded(a.status) || excluded(b.status)) {
            ++r.excluded;
            continue;
        }
        if (a.status != b.status) ++r.status_mismatch;
        if (a.status == SampleStatus::trapped && b.status == SampleStatus::trapped) {
            ++r.both_trapped;
            continue;
        }
        if (a.has_time() && b.has_time()) {
            ++r.matched;
            if (a.reflections != b.reflections) ++r.reflection_mismatch;
            const double dt = std::abs(*a.t - *b.t);
            sum += dt;
            r.max_abs_dt = std::max(r.max_abs_dt, dt);
            if (dt > tolerance) ++r.exceed_count;
        }
    }
    r.mean_abs_dt = r.matched ? sum / r.matched : 0.0;
    r.exceed_fraction = r.matched ? static_cast<double>(r.exceed_count) / r.matched : 0.0;
    r.indistinguishable = r.exceed_fraction == 0.0 && r.status_mismatch == 0;
    return r;
}

// ---------------------------------------------------------------------------
// Boundary distance

namespace detail {

struct BoundarySamples {
    std::vector<Vec3> points;
    std::vector<std::size_t> obstacle;
};

inline BoundarySamples scene_boundary_samples(const Scene& s, double spacing) {
    BoundarySamples out;
    for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
        for (const auto& x : s.obstacles[i].boundary_samples(spacing)) {
            out.points.push_back(x);
            out.obstacle.push_back(i);
        }
    }
    return out;
}

/// Index of the nearest point of `to` for every point of `from`, using a bucket grid.
inline std::vector<std::size_t> nearest_indices(const std::vector<Vec3>& from, const std::vector<Vec3>& to, double cell) {
    struct KeyHash {
        std::size_t operator()(const std::array<long long, 3>& k) const {
            return static_cast<std::size_t>(k[0] * 73856093LL ^ k[1] * 19349663LL ^ k[2] * 83492791LL);
        }
    };
    auto key = [cell](const Vec3& x) {
        return std::array<long long, 3>{static_cast<long long>(std::floor(x.x() / cell)),
                                        static_cast<long long>(std::floor(x.y() / cell)),
                                        static_cast<long long>(std::floor(x.z() / cell))};
    };
    std::unordered_map<std::array<long long, 3>, std::vector<std::size_t>, KeyHash> grid;
    Eigen::AlignedBox3d box;
    for (std::size_t i = 0; i < to.size(); ++i) {
        grid[key(to[i])].push_back(i);
        box.extend(to[i]);
    }
    for (const auto& x : from) box.extend(x);
    const long long max_ring = static_cast<long long>(std::ceil(box.diagonal().norm() / cell)) + 1;
    std::vector<std::size_t> out(from.size(), 0);
    for (std::size_t n = 0; n < from.size(); ++n) {
        const Vec3& x = from[n];
        const auto k = key(x);
        double best = std::numeric_limits<double>::infinity();
        // Grow the search shell until the nearest candidate is provably found.
        for (long long ring = 0;; ++ring) {
            for (long long i = -ring; i <= ring; ++i)
                for (long long j = -ring; j <= ring; ++j)
                    for (long long m = -ring; m <= ring; ++m) {
                        if (std::max({std::llabs(i), std::llabs(j), std::llabs(m)}) != ring) continue;
                        const auto it = grid.find({k[0] + i, k[1] + j, k[2] + m});
                        if (it == grid.end()) continue;
                        for (std::size_t c : it->second) {
                            const double d2 = (x - to[c]).squaredNorm();
                            if (d2 < best) {
                                best = d2;
                                out[n] = c;
                            }
                        }
                    }
            if (best <= (ring * cell) * (ring * cell) || ring > max_ring) break;
        }
    }
    return out;
}

/// max over samples of `from` of the distance to the boundary of `to`: the
/// nearest sample of `to` seeds a projection onto its obstacle surface.
inline double directed_hausdorff(const BoundarySamples& from, const Scene& to, const BoundarySamples& to_samples,
                                 double cell) {
    if (from.points.empty()) return 0.0;
    if (to_samples.points.empty()) return std::numeric_limits<double>::infinity();
    const auto near = nearest_indices(from.points, to_samples.points, cell);
    double worst = 0.0;
    for (std::size_t n = 0; n < from.points.size(); ++n) {
        const Vec3& x = from.points[n];
        const Vec3& y = to_samples.points[near[n]];
        double d = (x - y).norm();
        try {
            const Vec3 z = closest_boundary_point(to.obstacles[to_samples.obstacle[near[n]]], x, y);
            if (z.allFinite()) d = std::min(d, (x - z).norm());
        } catch (const NumericError&) {
        }
        worst = std::max(worst, d);
    }
    return worst;
}

}  // namespace detail

/// Symmetric Hausdorff distance between the obstacle boundaries, resolved at the given spacing.
inline double boundary_distance(const Scene& k, const Scene& l, double spacing) {
    if (k.dimension != l.dimension) throw InvalidParameters("boundary_distance: scenes differ in dimension");
    if (!(spacing > 0.0)) throw InvalidParameters("boundary_distance: spacing must be positive");
    const auto pk = detail::scene_boundary_samples(k, spacing);
    const auto pl = detail::scene_boundary_samples(l, spacing);
    const double cell = 4.0 * spacing;
    return std::max(detail::directed_hausdorff(pk, l, pl, cell), detail::directed_hausdorff(pl, k, pk, cell));
}

}  // namespace scatlab
