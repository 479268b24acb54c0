#pragma once

#include "scatlab/shapes.hpp"
#include "scatlab/flow.hpp"

#include <cmath>
#include <numbers>

namespace scatlab::testing {

inline Scene empty_scene(int dim = 3, double a = 10.0) {
    Scene s;
    s.dimension = dim;
    s.ball_radius = a;
    s.name = "empty";
    return s;
}

inline Scene sphere_scene(double r = 1.0, int dim = 3, double a = 10.0, Vec3 center = Vec3::Zero()) {
    Scene s = empty_scene(dim, a);
    s.name = "sphere";
    s.obstacles.emplace_back(dim, center, SphereShape{r});
    return s;
}

/// Two unit spheres centered at (+-3, 0, 0).
inline Scene two_sphere_scene(int dim = 3, double a = 10.0) {
    Scene s = empty_scene(dim, a);
    s.name = "two-spheres";
    s.obstacles.emplace_back(dim, Vec3(-3, 0, 0), SphereShape{1.0});
    s.obstacles.emplace_back(dim, Vec3(3, 0, 0), SphereShape{1.0});
    return s;
}

/// Rotated ellipsoid next to a sphere.
inline Scene ellipsoid_scene(int dim = 3, double a = 10.0) {
    Scene s = empty_scene(dim, a);
    s.name = "ellipsoid-sphere";
    if (dim == 3) {
        s.obstacles.emplace_back(3, Vec3(-2.5, 0.5, 0.0), EllipsoidShape{Vec3(2.0, 1.0, 1.5)},
                                 std::vector<double>{0.3, -0.2, 0.5});
        s.obstacles.emplace_back(3, Vec3(3.0, -1.0, 0.5), SphereShape{1.2});
    } else {
        s.obstacles.emplace_back(2, Vec3(-2.5, 0.5, 0.0), EllipsoidShape{Vec3(2.0, 1.0, 1.0)},
                                 std::vector<double>{0.4});
        s.obstacles.emplace_back(2, Vec3(3.0, -1.0, 0.0), SphereShape{1.2});
    }
    return s;
}

/// Concave bowl of radius r centered at the origin facing direction `alpha`
/// from vertical, and a small disc whose top point is the bowl's center of
/// curvature. A ray reflected at that top point toward the bowl comes back to it.
struct RefocusFixture {
    Scene scene;
    PhasePoint entry;
    double radius = 0.0;
};

inline RefocusFixture refocus_fixture(double r = 3.0, double a = 10.0, double alpha = std::numbers::pi / 6) {
    RefocusFixture f;
    f.radius = r;
    f.scene = empty_scene(2, a);
    f.scene.name = "refocus";
    const double facing = std::numbers::pi / 2 - alpha;  // direction from the center to the mirror
    f.scene.obstacles.push_back(bowl_obstacle(Vec2(0, 0), r, 0.3, facing, 0.25));
    const double rho = 0.5;
    f.scene.obstacles.emplace_back(2, Vec3(0.0, -rho, 0.0), SphereShape{rho});
    // Arrive at the origin with the mirror image of the bowl direction.
    const Vec3 v_in(std::sin(alpha), -std::cos(alpha), 0.0);
    const auto exit_back = ball_exit_time(Vec3::Zero(), -v_in, a);
    f.entry = {-(*exit_back) * v_in, v_in};
    return f;
}

/// Planar beam from (-a, 0) along +x, focused by a concave arc onto the point
/// where regularity_test evaluates the differential (exit time + a).
struct FocusFixture {
    Scene scene;
    PhasePoint entry;
    double mirror_radius = 0.0;
    double source_distance = 0.0;
};

inline FocusFixture focus_fixture(double a = 10.0, double d = 5.0) {
    FocusFixture f;
    f.source_distance = d;
    // Normal incidence, retro-reflection: exit time 2d, evaluation at 2d + a, so
    // the image distance is d + a and 1/d + 1/(d + a) = 2/r.
    f.mirror_radius = 2.0 / (1.0 / d + 1.0 / (d + a));
    f.scene = empty_scene(2, a);
    f.scene.name = "focus";
    const Vec2 vertex(-a + d, 0.0);
    const Vec2 center = vertex - Vec2(f.mirror_radius, 0.0);
    f.scene.obstacles.push_back(bowl_obstacle(center, f.mirror_radius, 0.3, 0.0, 0.25));
    f.entry = {Vec3(-a, 0, 0), Vec3(1, 0, 0)};
    return f;
}

}  // namespace scatlab::testing
