#pragma once

#include "scatlab/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <variant>
#include <vector>

namespace scatlab {

using Vec2 = Eigen::Vector2d;

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Straight piece from `from` to `to`, parameter u in [0, 1].
struct Segment {
    Vec2 from;
    Vec2 to;

    Vec2 point(double u) const { return from + u * (to - from); }
    Vec2 d1(double) const { return to - from; }
    Vec2 d2(double) const { return Vec2::Zero(); }
    double length() const { return (to - from).norm(); }

    double closest(const Vec2& x) const {
        const Vec2 d = to - from;
        const double len2 = d.squaredNorm();
        return len2 > 0.0 ? std::clamp((x - from).dot(d) / len2, 0.0, 1.0) : 0.0;
    }
};

/// Circular arc; angle = start + u * sweep, sweep > 0 runs counter-clockwise.
struct CircularArc {
    Vec2 center;
    double radius = 1.0;
    double start = 0.0;
    double sweep = std::numbers::pi;

    Vec2 point(double u) const {
        const double a = start + u * sweep;
        return center + radius * Vec2(std::cos(a), std::sin(a));
    }
    Vec2 d1(double u) const {
        const double a = start + u * sweep;
        return radius * sweep * Vec2(-std::sin(a), std::cos(a));
    }
    Vec2 d2(double u) const {
        const double a = start + u * sweep;
        return -radius * sweep * sweep * Vec2(std::cos(a), std::sin(a));
    }
    double length() const { return radius * std::abs(sweep); }

    double closest(const Vec2& x) const {
        const Vec2 r = x - center;
        // Angle of x relative to the arc start, wrapped into the sweep direction.
        double rel = std::atan2(r.y(), r.x()) - start;
        if (sweep < 0) rel = -rel;
        rel = std::fmod(rel, 2.0 * std::numbers::pi);
        if (rel < 0) rel += 2.0 * std::numbers::pi;
        const double span = std::abs(sweep);
        if (rel <= span) return rel / span;
        // Outside the arc: pick the nearer endpoint.
        return (x - point(0.0)).squaredNorm() <= (x - point(1.0)).squaredNorm() ? 0.0 : 1.0;
    }
};

/// Arc of the ellipse center + (A cos s, B sin s), s = start + u * sweep.
struct EllipticArc {
    Vec2 center;
    double semi_major = 2.0;  // along x
    double semi_minor = 1.0;  // along y
    double start = 0.0;
    double sweep = std::numbers::pi;

    Vec2 point(double u) const {
        const double s = start + u * sweep;
        return center + Vec2(semi_major * std::cos(s), semi_minor * std::sin(s));
    }
    Vec2 d1(double u) const {
        const double s = start + u * sweep;
        return sweep * Vec2(-semi_major * std::sin(s), semi_minor * std::cos(s));
    }
    Vec2 d2(double u) const {
        const double s = start + u * sweep;
        return -sweep * sweep * Vec2(semi_major * std::cos(s), semi_minor * std::sin(s));
    }
    double length() const {
        // Composite Simpson on the speed; pieces are smooth so 256 panels is plenty.
        constexpr int panels = 256;
        double sum = 0.0;
        for (int i = 0; i <= panels; ++i) {
            const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            sum += w * d1(static_cast<double>(i) / panels).norm();
        }
        return sum / (3.0 * panels);
    }

    double closest(const Vec2& x) const {
        constexpr int samples = 48;
        int best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= samples; ++i) {
            const double d2v = (point(static_cast<double>(i) / samples) - x).squaredNorm();
            if (d2v < best_d2) {
                best_d2 = d2v;
                best = i;
            }
        }
        double lo = std::max(0, best - 1) / static_cast<double>(samples);
        double hi = std::min(samples, best + 1) / static_cast<double>(samples);
        double u = static_cast<double>(best) / samples;
        // Newton on g(u) = d/du |p(u) - x|^2 / 2, kept inside [lo, hi].
        for (int it = 0; it < 40; ++it) {
            const Vec2 r = point(u) - x;
            const Vec2 t = d1(u);
            const double g = r.dot(t);
            const double dg = t.squaredNorm() + r.dot(d2(u));
            if (g == 0.0) break;
            double next = (dg > 0.0) ? u - g / dg : 0.5 * (lo + hi);
            if (std::abs(next - u) < 1e-16) { u = next; break; }
            if (g > 0) hi = std::min(hi, u); else lo = std::max(lo, u);
            if (next <= lo || next >= hi) next = 0.5 * (lo + hi);
            u = next;
        }
        return std::clamp(u, 0.0, 1.0);
    }
};

using CurvePiece = std::variant<Segment, CircularArc, EllipticArc>;

/// Result of a nearest-point query on a closed curve.
struct CurveProjection {
    double signed_distance = 0.0;  // positive outside the enclosed region
    Vec2 point;
    Vec2 normal;          // unit, pointing out of the enclosed region
    Vec2 tangent;         // unit, in traversal direction
    double curvature = 0.0;  // > 0 where the enclosed region is convex
    std::size_t piece = 0;
};

/// Closed, counter-clockwise, C^1 planar curve made of analytic pieces. The
/// enclosed region lies to the left of the traversal direction.
class PiecewiseCurve {
public:
    PiecewiseCurve() = default;

    explicit PiecewiseCurve(std::vector<CurvePiece> pieces) : pieces_(std::move(pieces)) {
        if (pieces_.empty()) throw InvalidParameters("curve needs at least one piece");
        bounds_.reserve(pieces_.size());
        for (const auto& p : pieces_) bounds_.push_back(bound_of(p));
    }

    const std::vector<CurvePiece>& pieces() const { return pieces_; }

    static Vec2 point_of(const CurvePiece& p, double u) {
        return std::visit([u](const auto& s) { return s.point(u); }, p);
    }
    static Vec2 d1_of(const CurvePiece& p, double u) {
        return std::visit([u](const auto& s) { return s.d1(u); }, p);
    }
    static Vec2 d2_of(const CurvePiece& p, double u) {
        return std::visit([u](const auto& s) { return s.d2(u); }, p);
    }
    static double length_of(const CurvePiece& p) {
        return std::visit([](const auto& s) { return s.length(); }, p);
    }

    /// Largest endpoint gap and largest tangent-angle jump between consecutive pieces.
    std::pair<double, double> join_defects() const {
        double gap = 0.0, kink = 0.0;
        for (std::size_t i = 0; i < pieces_.size(); ++i) {
            const auto& a = pieces_[i];
            const auto& b = pieces_[(i + 1) % pieces_.size()];
            gap = std::max(gap, (point_of(a, 1.0) - point_of(b, 0.0)).norm());
            const Vec2 ta = d1_of(a, 1.0).normalized();
            const Vec2 tb = d1_of(b, 0.0).normalized();
            kink = std::max(kink, std::abs(std::atan2(cross2(ta, tb), ta.dot(tb))));
        }
        return {gap, kink};
    }

    /// Shoelace area over a fine polyline; positive for counter-clockwise curves.
    double signed_area() const {
        double area = 0.0;
        for (const auto& p : pieces_) {
            constexpr int n = 256;
            for (int i = 0; i < n; ++i) {
                area += 0.5 * cross2(point_of(p, static_cast<double>(i) / n), point_of(p, static_cast<double>(i + 1) / n));
            }
        }
        return area;
    }

    double length() const {
        double total = 0.0;
        for (const auto& p : pieces_) total += length_of(p);
        return total;
    }

    /// Center and radius of a circle containing the whole curve.
    std::pair<Vec2, double> bounding_circle() const {
        Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
        Vec2 hi = -lo;
        for (const auto& b : bounds_) {
            lo = lo.cwiseMin(b.center - Vec2::Constant(b.radius));
            hi = hi.cwiseMax(b.center + Vec2::Constant(b.radius));
        }
        const Vec2 c = 0.5 * (lo + hi);
        double r = 0.0;
        for (const auto& b : bounds_) r = std::max(r, (b.center - c).norm() + b.radius);
        return {c, r};
    }

    CurveProjection project(const Vec2& x) const {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_piece = 0;
        double best_u = 0.0;
        for (std::size_t i = 0; i < pieces_.size(); ++i) {
            const double lower = (x - bounds_[i].center).norm() - bounds_[i].radius;
            if (lower > 0.0 && lower * lower >= best) continue;
            const double u = std::visit([&x](const auto& s) { return s.closest(x); }, pieces_[i]);
            const double d2v = (point_of(pieces_[i], u) - x).squaredNorm();
            if (d2v < best) {
                best = d2v;
                best_piece = i;
                best_u = u;
            }
        }
        CurveProjection out;
        const auto& piece = pieces_[best_piece];
        out.piece = best_piece;
        out.point = point_of(piece, best_u);
        const Vec2 d1 = d1_of(piece, best_u);
        const Vec2 d2 = d2_of(piece, best_u);
        out.tangent = d1.normalized();
        out.normal = Vec2(out.tangent.y(), -out.tangent.x());
        out.curvature = cross2(d1, d2) / std::pow(d1.norm(), 3);
        const double dist = std::sqrt(best);
        out.signed_distance = (x - out.point).dot(out.normal) >= 0.0 ? dist : -dist;
        return out;
    }

    /// Points spaced at most `spacing` apart along the curve.
    std::vector<Vec2> sample(double spacing) const {
        std::vector<Vec2> pts;
        for (const auto& p : pieces_) {
            const int n = std::max(1, static_cast<int>(std::ceil(length_of(p) / spacing * speed_ratio(p))));
            for (int i = 0; i < n; ++i) pts.push_back(point_of(p, static_cast<double>(i) / n));
        }
        return pts;
    }

private:
    struct Bound {
        Vec2 center;
        double radius;
    };

    static double speed_ratio(const CurvePiece& p) {
        if (const auto* e = std::get_if<EllipticArc>(&p)) return e->semi_major / e->semi_minor;
        return 1.0;
    }

    static Bound bound_of(const CurvePiece& p) {
        if (const auto* s = std::get_if<Segment>(&p)) {
            return {0.5 * (s->from + s->to), 0.5 * s->length()};
        }
        if (const auto* c = std::get_if<CircularArc>(&p)) return {c->center, c->radius};
        const auto& e = std::get<EllipticArc>(p);
        return {e.center, std::max(e.semi_major, e.semi_minor)};
    }

    std::vector<CurvePiece> pieces_;
    std::vector<Bound> bounds_;
};

}  // namespace scatlab
