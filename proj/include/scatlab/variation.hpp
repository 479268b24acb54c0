#pragma once

#include "scatlab/flow.hpp"
#include "scatlab/scene.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace scatlab {

/// Transverse variation of a ray: columns of `position` and `direction` are the
/// components, in `basis`, of position and direction perturbations orthogonal
/// to the ray direction `v`.
struct JacobiFrame {
    Mat position;   // A, (n-1) x (n-1), length per unit perturbation
    Mat direction;  // B, (n-1) x (n-1)
    Basis basis;    // 3 x (n-1), orthonormal, orthogonal to v
    Vec3 v;

    static JacobiFrame seeded(const Vec3& v, int dim, const Mat& position, const Mat& direction) {
        return {position, direction, detail::transverse_basis(v, dim), v};
    }
    int rank_dim() const { return static_cast<int>(basis.cols()); }
};

/// A^T B - B^T A; conserved by free flight and reflection.
inline Mat symplectic_form(const JacobiFrame& f) {
    return f.position.transpose() * f.direction - f.direction.transpose() * f.position;
}

/// Pairing between two frames attached to the same ray.
inline Mat symplectic_pairing(const JacobiFrame& f, const JacobiFrame& g) {
    return f.position.transpose() * g.direction - f.direction.transpose() * g.position;
}

inline JacobiFrame propagate_free(JacobiFrame f, double t) {
    if (t < 0.0) throw InvalidParameters("propagate_free: negative time");
    f.position += t * f.direction;
    return f;
}

/// Data of one reflection needed by the linearized map.
struct Incidence {
    Vec3 v_in;
    Vec3 normal;      // unit, pointing into the exterior
    Mat3 shape;       // ambient shape operator at the reflection point
    double cos_incidence = 0.0;  // -<v_in, normal>
};

inline Incidence incidence_from(const Vec3& v_in, const SurfaceFrame& frame) {
    return {v_in, frame.normal, frame.shape_ambient, -v_in.dot(frame.normal)};
}

inline Incidence incidence_at(const Scene& scene, const Event& ev) {
    return incidence_from(ev.v_in, surface_frame(scene.obstacles[ev.obstacle], ev.x));
}

/// Linearized specular reflection. A perturbed ray meets the boundary at the
/// tangent-plane point dx = dq - (<dq,nu>/<v,nu>) v, where the normal turns by
/// S dx; differentiating v' = v - 2<v,nu>nu gives the new direction variation.
inline JacobiFrame propagate_reflection(const JacobiFrame& f, const Incidence& inc) {
    const Vec3& v = inc.v_in;
    const Vec3& nu = inc.normal;
    const double c = v.dot(nu);
    if (!(c < -FlowTolerances::tangency)) throw TangentIncidence("propagate_reflection: grazing or outgoing incidence");
    const Mat3 mirror = Mat3::Identity() - 2.0 * nu * nu.transpose();
    const Vec3 v_out = (mirror * v).normalized();

    const Eigen::Matrix<double, 3, Eigen::Dynamic> dq = f.basis * f.position;
    const Eigen::Matrix<double, 3, Eigen::Dynamic> dv = f.basis * f.direction;
    Basis next_basis = mirror * f.basis;
    detail::reorthonormalize(next_basis, v_out);

    JacobiFrame out;
    out.v = v_out;
    out.basis = next_basis;
    out.position = next_basis.transpose() * (mirror * dq);
    Eigen::Matrix<double, 3, Eigen::Dynamic> dv_out(3, dq.cols());
    for (Eigen::Index k = 0; k < dq.cols(); ++k) {
        const Vec3 q = dq.col(k);
        const Vec3 dx = q - (q.dot(nu) / c) * v;
        const Vec3 dnu = inc.shape * dx;
        dv_out.col(k) = mirror * Vec3(dv.col(k)) - 2.0 * v.dot(dnu) * nu - 2.0 * c * dnu;
    }
    out.direction = next_basis.transpose() * dv_out;
    return out;
}

/// Carries `frame`, attached to the ray at time t_from, to time t_to along the trajectory.
inline JacobiFrame propagate_along(const Scene& scene, const Trajectory& tr, JacobiFrame frame, double t_from,
                                   double t_to) {
    double time = t_from;
    for (const auto& ev : tr.events) {
        if (ev.t <= t_from) continue;
        if (ev.t > t_to) break;
        if (ev.type == EventType::tangent) throw TangentOnPath("tangent event before the requested time");
        frame = propagate_free(std::move(frame), ev.t - time);
        frame = propagate_reflection(frame, incidence_at(scene, ev));
        time = ev.t;
    }
    return propagate_free(std::move(frame), t_to - time);
}

/// Transverse blocks of the flow differential at time t.
struct FlowDifferentials {
    Mat position_by_direction;  // eta -> pr1 F_t(x, eta)
    Mat direction_by_position;  // y -> pr2 F_t(y, xi)
    Basis basis;                // transverse basis at time t
};

inline Trajectory trace_for_variation(const Scene& scene, const PhasePoint& entry, double t, const TraceLimits& limits) {
    auto tr = trace(scene, entry, limits);
    if (!tr.exited() && t > tr.total_time) throw NotScattered("trajectory is cut off before the requested time");
    for (const auto& ev : tr.events) {
        if (ev.t > t) break;
        if (ev.type == EventType::tangent) throw TangentOnPath("tangent event before the requested time");
    }
    return tr;
}

inline FlowDifferentials flow_differentials(const Scene& scene, const PhasePoint& entry, double t,
                                            const TraceLimits& limits = {}) {
    const auto tr = trace_for_variation(scene, entry, t, limits);
    const int k = scene.dimension - 1;
    const Mat I = Mat::Identity(k, k), Z = Mat::Zero(k, k);
    const auto by_dir = propagate_along(scene, tr, JacobiFrame::seeded(entry.v, scene.dimension, Z, I), 0.0, t);
    const auto by_pos = propagate_along(scene, tr, JacobiFrame::seeded(entry.v, scene.dimension, I, Z), 0.0, t);
    return {by_dir.position, by_pos.direction, by_dir.basis};
}

/// Transverse basis at time t obtained by mirroring the entry basis at every event.
inline Basis transported_basis(const Trajectory& tr, int dim, double t) {
    Basis basis = detail::transverse_basis(tr.entry.v, dim);
    for (const auto& ev : tr.events) {
        if (ev.t > t) break;
        if (ev.type != EventType::transversal) continue;
        const Vec3 nu = (ev.v_out - ev.v_in).normalized();
        basis = (Mat3::Identity() - 2.0 * nu * nu.transpose()) * basis;
        detail::reorthonormalize(basis, ev.v_out);
    }
    return basis;
}

/// Central differences of traced orbits. `h` is a length: positions move by h,
/// directions turn by h / a.
inline FlowDifferentials fd_flow_jacobian(const Scene& scene, const PhasePoint& entry, double t, double h,
                                          const TraceLimits& limits = {}) {
    const auto ref = trace(scene, entry, limits);
    const int dim = scene.dimension;
    const int k = dim - 1;
    const Basis e0 = detail::transverse_basis(entry.v, dim);
    const Basis et = transported_basis(ref, dim, t);
    auto itinerary = [](const Trajectory& tr) {
        std::vector<std::size_t> out;
        for (const auto& ev : tr.events) out.push_back(ev.obstacle * 2 + (ev.type == EventType::tangent ? 1 : 0));
        return out;
    };
    const auto ref_itinerary = itinerary(ref);
    auto run = [&](const PhasePoint& p) {
        const auto tr = trace(scene, p, limits);
        if (tr.status != ref.status || itinerary(tr) != ref_itinerary)
            throw ItineraryChanged("perturbed orbit changed its itinerary");
        return state_at(tr, t);
    };
    const double dh = h / scene.a();
    FlowDifferentials out{Mat(k, k), Mat(k, k), et};
    for (int c = 0; c < k; ++c) {
        const Vec3 e = e0.col(c);
        const auto pp = run({entry.q + h * e, entry.v});
        const auto pm = run({entry.q - h * e, entry.v});
        out.direction_by_position.col(c) = et.transpose() * ((pp.v - pm.v) / (2.0 * h));
        const auto dp = run({entry.q, (entry.v + dh * e).normalized()});
        const auto dm = run({entry.q, (entry.v - dh * e).normalized()});
        out.position_by_direction.col(c) = et.transpose() * ((dp.q - dm.q) / (2.0 * dh));
    }
    return out;
}

struct RankReport {
    Mat matrix;
    Eigen::VectorXd singular_values;  // descending
    int rank = 0;
    double tolerance = 0.0;
};

/// Counts singular values above tolerance * max(largest singular value, scale).
/// `scale` is the size of the block in the absence of focusing; it keeps 1 x 1
/// blocks from being full rank whenever they are nonzero.
inline RankReport rank_report(const Mat& m, double tolerance, double scale = 0.0) {
    Eigen::JacobiSVD<Mat> svd(m);
    RankReport r{m, svd.singularValues(), 0, tolerance};
    const double top = std::max(r.singular_values.size() ? r.singular_values[0] : 0.0, scale);
    for (Eigen::Index i = 0; i < r.singular_values.size(); ++i)
        if (top > 0.0 && r.singular_values[i] > tolerance * top) ++r.rank;
    return r;
}

struct RegularityResult {
    RankReport position_by_direction;
    RankReport direction_by_position;
    double time = 0.0;
    bool meets_obstacle = false;  // rays that never touch the obstacle are not subject to the test
    bool regular = false;
};

inline constexpr double kRankTolerance = 1e-6;

/// Rank test of both flow differentials at t = exit time + a.
inline RegularityResult regularity_test(const Scene& scene, const PhasePoint& entry, double tolerance = kRankTolerance,
                                        const TraceLimits& limits = {}) {
    const auto tr = trace(scene, entry, limits);
    require_exited(tr);
    const double t = tr.total_time + scene.a();
    const auto d = flow_differentials(scene, entry, t, limits);
    RegularityResult r;
    r.time = t;
    // Free flight over time t gives t for the first block and 1 / t is the
    // matching curvature scale for the second.
    r.position_by_direction = rank_report(d.position_by_direction, tolerance, t);
    r.direction_by_position = rank_report(d.direction_by_position, tolerance, 1.0 / t);
    r.meets_obstacle = !tr.events.empty();
    const int full = scene.dimension - 1;
    r.regular = !r.meets_obstacle ||
                (r.position_by_direction.rank == full && r.direction_by_position.rank == full);
    return r;
}

struct ConjugateResult {
    bool conjugate = false;
    double smallest_singular_value = 0.0;
    Eigen::VectorXd singular_values;
    int rank = 0;  // singular values above tolerance * scale
    double path_length = 0.0;
    double tolerance = 0.0;
};

inline constexpr double kConjugateTolerance = 1e-4;

/// Differential of the map sending a direction perturbation just after the
/// reflection at event i to the boundary point where the perturbed ray meets
/// the obstacle near event j. The boundary points are conjugate when it is
/// singular relative to max(largest singular value, path length between them).
inline ConjugateResult conjugate_test(const Scene& scene, const Trajectory& tr, std::size_t i, std::size_t j,
                                      double tolerance = kConjugateTolerance) {
    if (!(i < j) || j >= tr.events.size()) throw IndexOutOfRange("conjugate_test: need i < j < event count");
    const auto& ei = tr.events[i];
    const auto& ej = tr.events[j];
    if (ei.type != EventType::transversal || ej.type != EventType::transversal)
        throw TangentIncidence("conjugate_test: endpoint event is tangent");
    const int dim = scene.dimension;
    const int k = dim - 1;
    auto frame = JacobiFrame::seeded(ei.v_out, dim, Mat::Zero(k, k), Mat::Identity(k, k));
    double time = ei.t;
    for (std::size_t m = i + 1; m < j; ++m) {
        const auto& ev = tr.events[m];
        if (ev.type == EventType::tangent) throw TangentOnPath("conjugate_test: tangent event between endpoints");
        frame = propagate_free(std::move(frame), ev.t - time);
        frame = propagate_reflection(frame, incidence_at(scene, ev));
        time = ev.t;
    }
    frame = propagate_free(std::move(frame), ej.t - time);
    const auto sf = surface_frame(scene.obstacles[ej.obstacle], ej.x);
    const Vec3& v = ej.v_in;
    const double c = v.dot(sf.normal);
    const Mat3 along_ray = Mat3::Identity() - v * sf.normal.transpose() / c;
    const Mat dG = sf.tangent_basis.transpose() * along_ray * frame.basis * frame.position;
    Eigen::JacobiSVD<Mat> svd(dG);
    ConjugateResult r;
    r.singular_values = svd.singularValues();
    r.smallest_singular_value = r.singular_values.minCoeff();
    r.path_length = ej.t - ei.t;
    r.tolerance = tolerance;
    const double scale = std::max(r.singular_values.maxCoeff(), r.path_length);
    for (Eigen::Index m = 0; m < r.singular_values.size(); ++m)
        if (r.singular_values[m] > tolerance * scale) ++r.rank;
    r.conjugate = r.smallest_singular_value <= tolerance * scale;
    return r;
}

}  // namespace scatlab
