#include "fixtures.hpp"
#include "scatlab/scene.hpp"
#include "scatlab/shapes.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace scatlab;
using scatlab::testing::empty_scene;

namespace {

Obstacle unit_sphere(int dim = 3) { return Obstacle(dim, Vec3::Zero(), SphereShape{1.0}); }

std::vector<Obstacle> builtin_obstacles() {
    std::vector<Obstacle> out;
    out.emplace_back(3, Vec3(0.5, -0.2, 0.1), SphereShape{1.3});
    out.emplace_back(3, Vec3(0.1, 0.2, 0.3), EllipsoidShape{Vec3(2.0, 1.0, 1.5)}, std::vector<double>{0.3, -0.2, 0.5});
    out.emplace_back(3, Vec3::Zero(), SuperellipsoidShape{Vec3(1.0, 1.5, 1.2), 4.0}, std::vector<double>{0.1, 0.7, 0.0});
    out.emplace_back(2, Vec3(1.0, 0.0, 0.0), EllipsoidShape{Vec3(2.0, 1.0, 1.0)}, std::vector<double>{0.8});
    out.push_back(livshits_scene({}).scene.obstacles.front());
    out.push_back(bowl_obstacle(Vec2(0.2, 0.1), 2.0, 0.4, 0.3, 0.5));
    return out;
}

}  // namespace

TEST(ImplicitValue, SphereConvention) {
    const auto s = unit_sphere();
    EXPECT_DOUBLE_EQ(implicit_value(s, Vec3(2, 0, 0)), 3.0);
    EXPECT_DOUBLE_EQ(implicit_value(s, Vec3(1, 0, 0)), 0.0);
    EXPECT_DOUBLE_EQ(implicit_value(s, Vec3(0, 0, 0)), -1.0);
}

TEST(SurfaceFrame, SphereOfRadiusTwo) {
    const Obstacle s(3, Vec3::Zero(), SphereShape{2.0});
    const auto f = surface_frame(s, Vec3(2, 0, 0));
    EXPECT_NEAR((f.normal - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((f.shape - 0.5 * Mat::Identity(2, 2)).norm(), 0.0, 1e-14);
}

TEST(SurfaceFrame, EllipseVertexCurvature) {
    // Closed form for (A cos s, B sin s): kappa = AB / (A^2 sin^2 s + B^2 cos^2 s)^{3/2}.
    const double A = 2.0, B = 1.0;
    auto kappa = [&](double s) {
        return A * B / std::pow(A * A * std::sin(s) * std::sin(s) + B * B * std::cos(s) * std::cos(s), 1.5);
    };
    const Obstacle e(2, Vec3::Zero(), EllipsoidShape{Vec3(A, B, 1.0)});
    const auto f = surface_frame(e, Vec3(2, 0, 0));
    EXPECT_NEAR((f.normal - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
    EXPECT_NEAR(f.shape(0, 0), kappa(0.0), 1e-12);
    EXPECT_NEAR(f.shape(0, 0), 2.0, 1e-12);
    for (double s : {0.3, 1.1, 2.0, 4.4}) {
        const auto g = surface_frame(e, Vec3(A * std::cos(s), B * std::sin(s), 0));
        EXPECT_NEAR(g.shape(0, 0), kappa(s), 1e-10) << "s=" << s;
    }
}

TEST(SurfaceFrame, InteriorPointIsRejected) {
    EXPECT_THROW(surface_frame(unit_sphere(), Vec3::Zero()), SingularGradient);
    EXPECT_THROW(surface_frame(unit_sphere(), Vec3(0.5, 0, 0)), InvalidParameters);
}

TEST(SurfaceFrame, NormalsOnRandomBoundaryPoints) {
    std::mt19937_64 rng(7);
    for (const auto& o : builtin_obstacles()) {
        auto pts = o.boundary_samples(0.2);
        std::shuffle(pts.begin(), pts.end(), rng);
        pts.resize(std::min<std::size_t>(pts.size(), 40));
        for (const auto& x : pts) {
            const auto f = surface_frame(o, x);
            EXPECT_NEAR(f.normal.norm(), 1.0, 1e-12) << o.kind_name();
            EXPECT_GT(f.normal.dot(o.gradient(x)), 0.0) << o.kind_name();
            EXPECT_NEAR((f.shape - f.shape.transpose()).norm(), 0.0, 1e-12);
        }
    }
}

TEST(SurfaceFrame, ShapeOperatorMatchesNormalMapDifferences) {
    // Differentiate the normal field along tangent directions on the surface.
    std::mt19937_64 rng(11);
    for (const auto& o : builtin_obstacles()) {
        auto pts = o.boundary_samples(0.3);
        std::shuffle(pts.begin(), pts.end(), rng);
        pts.resize(std::min<std::size_t>(pts.size(), 25));
        const double h = 1e-5;
        for (const auto& x : pts) {
            const auto f = surface_frame(o, x);
            for (Eigen::Index k = 0; k < f.tangent_basis.cols(); ++k) {
                const Vec3 t = f.tangent_basis.col(k);
                auto normal_at = [&](const Vec3& y) {
                    const Vec3 on = closest_boundary_point(o, y, y);
                    return Vec3(o.gradient(on).normalized());
                };
                const Vec3 xp = closest_boundary_point(o, x + h * t, x + h * t);
                const Vec3 xm = closest_boundary_point(o, x - h * t, x - h * t);
                // Curvature jumps at C1 joins of piecewise curves.
                if ((surface_frame(o, xp).shape - surface_frame(o, xm).shape).norm() > 1e-3) continue;
                const Vec3 dn = (normal_at(x + h * t) - normal_at(x - h * t)) / (2 * h);
                const Vec3 expected = f.shape_ambient * t;
                const double scale = std::max(1.0, expected.norm());
                EXPECT_LT((dn - expected).norm() / scale, 1e-5) << o.kind_name();
            }
        }
    }
}

TEST(ValidateScene, TwoSpheresPassWithGapFour) {
    Scene s = empty_scene(3, 10.0);
    s.obstacles.emplace_back(3, Vec3(-3, 0, 0), SphereShape{1.0});
    s.obstacles.emplace_back(3, Vec3(3, 0, 0), SphereShape{1.0});
    const auto r = validate_scene(s);
    ASSERT_EQ(r.gaps.size(), 1u);
    EXPECT_NEAR(r.gaps[0].gap, 4.0, 1e-9);
    EXPECT_TRUE(r.connected);
    EXPECT_FALSE(r.flatness_flag);
}

TEST(ValidateScene, ContainmentFailure) {
    Scene s = empty_scene(3, 10.0);
    s.obstacles.emplace_back(3, Vec3::Zero(), SphereShape{11.0});
    try {
        validate_scene(s);
        FAIL() << "expected ValidationFailed";
    } catch (const ValidationFailed& e) {
        EXPECT_EQ(e.invariant(), "containment");
    }
}

TEST(ValidateScene, OverlapAndDegenerateFixturesFail) {
    Scene overlap = empty_scene(3, 10.0);
    overlap.obstacles.emplace_back(3, Vec3(-0.5, 0, 0), SphereShape{1.0});
    overlap.obstacles.emplace_back(3, Vec3(0.5, 0, 0), SphereShape{1.0});
    EXPECT_EQ(inspect_scene(overlap).violated_invariant, "disjoint");

    Scene degenerate = empty_scene(3, 10.0);
    degenerate.obstacles.emplace_back(3, Vec3::Zero(), SphereShape{0.0});
    EXPECT_EQ(inspect_scene(degenerate).violated_invariant, "degenerate_obstacle");
    EXPECT_THROW(validate_scene(degenerate), ValidationFailed);
}

TEST(ValidateScene, SuperellipsoidRaisesFlatnessFlag) {
    Scene s = empty_scene(3, 10.0);
    s.obstacles.emplace_back(3, Vec3::Zero(), SuperellipsoidShape{Vec3(2.0, 2.0, 2.0), 8.0});
    const auto r = validate_scene(s);
    EXPECT_TRUE(r.flatness_flag);
    EXPECT_GE(r.min_curvature, 0.0);
}

TEST(ValidateScene, LivshitsAndBowlScenesPass) {
    const auto base = livshits_scene({});
    EXPECT_TRUE(inspect_scene(base.scene).passed()) << inspect_scene(base.scene).violation.value_or("");
    LivshitsParams p;
    p.deformation = 0.3;
    EXPECT_TRUE(inspect_scene(livshits_scene(p).scene).passed());
    EXPECT_TRUE(inspect_scene(scatlab::testing::refocus_fixture().scene).passed());
    EXPECT_TRUE(inspect_scene(scatlab::testing::focus_fixture().scene).passed());
}

TEST(Livshits, FociAndArcIdentity) {
    LivshitsParams p;
    p.semi_major = 2.0;
    p.semi_minor = 1.0;
    p.smoothing_radius = 0.05;
    const auto l = livshits_scene(p);
    EXPECT_NEAR(l.focus_left.x(), -std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(l.focus_right.x(), std::sqrt(3.0), 1e-15);
    // Every point of the half-ellipse arc satisfies |x - f1| + |x - f2| = 2A.
    for (int i = 0; i <= 200; ++i) {
        const double s = std::numbers::pi * i / 200.0;
        const Vec3 x(2.0 * std::cos(s), std::sin(s), 0.0);
        EXPECT_NEAR((x - l.focus_left).norm() + (x - l.focus_right).norm(), 4.0, 1e-9);
        EXPECT_NEAR(l.scene.obstacles[0].value(x), 0.0, 1e-12);
    }
}

TEST(Livshits, InvalidParameters) {
    LivshitsParams p;
    p.smoothing_radius = 1.0;  // focal gap is A - c = 0.4
    EXPECT_THROW(livshits_scene(p), InvalidParameters);
    p = {};
    p.semi_minor = 3.0;
    EXPECT_THROW(livshits_scene(p), InvalidParameters);
}

TEST(Livshits, DeformationOnlyMovesPocketPoints) {
    const auto base = livshits_scene({});
    LivshitsParams p;
    p.deformation = 0.3;
    const auto deformed = livshits_scene(p);
    const auto& kb = base.scene.obstacles[0];
    const auto& kd = deformed.scene.obstacles[0];
    // Boundary points of either curve that are not on the other lie below the pocket wall split.
    for (const auto& x : kd.boundary_samples(0.01)) {
        if (std::abs(kb.value(x)) > 1e-9) EXPECT_LT(x.y(), -base.pocket_depth + 1e-12);
    }
    for (const auto& x : kb.boundary_samples(0.01)) {
        if (std::abs(kd.value(x)) > 1e-9) EXPECT_LT(x.y(), -base.pocket_depth + 1e-12);
    }
}

TEST(SceneJson, RoundTripAndStrictKeys) {
    const auto l = livshits_scene({});
    const auto j = scene_to_json(l.scene);
    const auto back = scene_from_json(j);
    EXPECT_EQ(scene_hash(back), scene_hash(l.scene));

    auto bad = j;
    bad["colour"] = "red";
    EXPECT_THROW(scene_from_json(bad), InputError);
    auto bad_obstacle = scene_to_json(scatlab::testing::sphere_scene());
    bad_obstacle["obstacles"][0]["params"]["radius_typo"] = 1.0;
    EXPECT_THROW(scene_from_json(bad_obstacle), InputError);
}

TEST(SceneJson, HashIsFnv1a) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_NE(scene_hash(scatlab::testing::sphere_scene(1.0)), scene_hash(scatlab::testing::sphere_scene(1.01)));
}
