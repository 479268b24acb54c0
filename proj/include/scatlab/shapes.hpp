#pragma once

#include "scatlab/scene.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace scatlab {

struct LivshitsParams {
    double semi_major = 2.0;
    double semi_minor = 1.2;
    double wall_thickness = 0.4;
    double smoothing_radius = 0.1;  // radius of the rounded tooth tops at the foci
    double deformation = 0.0;       // extra depth of both hidden pockets
    std::optional<double> ball_radius;  // default: 1.3 x obstacle extent, rounded up
};

/// Livshits-type planar obstacle plus the landmarks of its mirror.
struct LivshitsScene {
    Scene scene;
    Vec3 focus_left;   // f1
    Vec3 focus_right;  // f2
    Vec3 end_left;     // P
    Vec3 end_right;    // Q
    double pocket_depth = 0.0;      // depth of the straight pocket walls below the major axis
    double pocket_floor_radius = 0.0;
    double deformation = 0.0;

    double focal_offset() const { return focus_right.x(); }
};

/// Obstacle whose boundary contains the upper half E of the ellipse
/// x^2/A^2 + y^2/B^2 = 1 as a mirror facing down. Below the major axis the
/// cavity under E is closed off except between the foci: two rounded teeth
/// touch the axis exactly at f1 and f2, and the strips between P and f1 and
/// between f2 and Q continue into pockets with vertical walls. Rays from
/// outside reach E only across (f1, f2), reflect back across [f1, f2] and never
/// enter a pocket; `deformation` deepens both pockets without changing
/// anything a scattering ray can touch.
inline LivshitsScene livshits_scene(const LivshitsParams& p) {
    const double A = p.semi_major, B = p.semi_minor, W = p.wall_thickness, rho = p.smoothing_radius;
    if (!(A > B && B > 0.0)) throw InvalidParameters("livshits: need semi-major > semi-minor > 0");
    if (!(W > 0.0)) throw InvalidParameters("livshits: wall thickness must be positive");
    const double c = std::sqrt(A * A - B * B);
    const double focal_gap = A - c;
    if (!(rho > 0.0) || rho >= focal_gap || rho >= c)
        throw InvalidParameters("livshits: smoothing radius must be positive and smaller than the focal gap");
    const double rp = 0.5 * (focal_gap - rho);        // pocket floor radius
    const double D = std::max(2.0 * rp, 0.25 * B);     // straight pocket wall depth
    const double reserve = A;                          // room below the pocket for deformation
    const double H = D + rp + W + reserve;             // depth of the leg bottoms
    const double delta = p.deformation;
    if (delta < 0.0 || delta >= reserve) throw InvalidParameters("livshits: deformation must lie in [0, semi-major)");
    const double Rl = 0.5 * (A + W - c + rho);         // leg bottom radius
    const double pi = std::numbers::pi;

    std::vector<CurvePiece> pc;
    auto wall = [&](double x, double y0, double y1) {
        // Split at -D so the undeformed part of each pocket wall is shared.
        const double mid = -D;
        if (y0 > y1) {  // going down
            pc.push_back(Segment{{x, y0}, {x, mid}});
            if (delta > 0.0) pc.push_back(Segment{{x, mid}, {x, mid - delta}});
        } else {
            if (delta > 0.0) pc.push_back(Segment{{x, mid - delta}, {x, mid}});
            pc.push_back(Segment{{x, mid}, {x, y1}});
        }
    };
    // E from P to Q.
    pc.push_back(EllipticArc{{0.0, 0.0}, A, B, pi, -pi});
    // Right pocket.
    wall(A, 0.0, -D - delta);
    pc.push_back(CircularArc{{0.5 * (A + c + rho), -D - delta}, rp, 0.0, -pi});
    wall(c + rho, -D - delta, -rho);
    // Right tooth, top touching f2.
    pc.push_back(CircularArc{{c, -rho}, rho, 0.0, pi});
    pc.push_back(Segment{{c - rho, -rho}, {c - rho, -H}});
    pc.push_back(CircularArc{{0.5 * (c - rho + A + W), -H}, Rl, pi, pi});
    pc.push_back(Segment{{A + W, -H}, {A + W, 0.0}});
    // Outer dome.
    pc.push_back(EllipticArc{{0.0, 0.0}, A + W, B + W, 0.0, pi});
    pc.push_back(Segment{{-A - W, 0.0}, {-A - W, -H}});
    pc.push_back(CircularArc{{-0.5 * (c - rho + A + W), -H}, Rl, pi, pi});
    // Left tooth, top touching f1.
    pc.push_back(Segment{{-c + rho, -H}, {-c + rho, -rho}});
    pc.push_back(CircularArc{{-c, -rho}, rho, 0.0, pi});
    wall(-c - rho, -rho, -D - delta);
    // Left pocket.
    pc.push_back(CircularArc{{-0.5 * (A + c + rho), -D - delta}, rp, 0.0, -pi});
    wall(-A, -D - delta, 0.0);

    LivshitsScene out;
    out.scene.dimension = 2;
    const double extent = std::hypot(A + W, H + Rl);
    out.scene.ball_radius = p.ball_radius ? *p.ball_radius : std::ceil(1.3 * extent);
    if (!(out.scene.ball_radius > extent)) throw InvalidParameters("livshits: ball radius too small for the obstacle");
    out.scene.obstacles.emplace_back(2, Vec3::Zero(), CurveShape{PiecewiseCurve(std::move(pc))});
    out.scene.name = delta > 0.0 ? "livshits-deformed" : "livshits";
    out.focus_left = Vec3(-c, 0.0, 0.0);
    out.focus_right = Vec3(c, 0.0, 0.0);
    out.end_left = Vec3(-A, 0.0, 0.0);
    out.end_right = Vec3(A, 0.0, 0.0);
    out.pocket_depth = D;
    out.pocket_floor_radius = rp;
    out.deformation = delta;
    return out;
}

/// Planar shell whose inner face is a concave circular arc of `radius` about
/// `center`, spanning `half_angle` either side of direction `facing_angle`
/// (measured at the center, pointing from the center to the mirror).
inline Obstacle bowl_obstacle(const Vec2& center, double radius, double thickness, double facing_angle,
                              double half_angle) {
    if (!(radius > 0.0 && thickness > 0.0 && half_angle > 0.0 && half_angle < std::numbers::pi / 2))
        throw InvalidParameters("bowl: bad parameters");
    const double pi = std::numbers::pi;
    const double lo = facing_angle - half_angle, hi = facing_angle + half_angle;
    const double mid = radius + 0.5 * thickness;
    auto dir = [](double a) { return Vec2(std::cos(a), std::sin(a)); };
    std::vector<CurvePiece> pc;
    pc.push_back(CircularArc{center, radius + thickness, lo, 2.0 * half_angle});
    pc.push_back(CircularArc{center + mid * dir(hi), 0.5 * thickness, hi, pi});
    pc.push_back(CircularArc{center, radius, hi, -2.0 * half_angle});
    pc.push_back(CircularArc{center + mid * dir(lo), 0.5 * thickness, lo + pi, pi});
    return Obstacle(2, Vec3::Zero(), CurveShape{PiecewiseCurve(std::move(pc))});
}

}  // namespace scatlab
