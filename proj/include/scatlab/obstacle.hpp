#pragma once

#include "scatlab/curve.hpp"
#include "scatlab/types.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace scatlab {

struct SphereShape {
    double radius = 1.0;
};

struct EllipsoidShape {
    Vec3 semi_axes = Vec3::Ones();
};

/// sum |y_i / a_i|^p = 1. p = 2 is the ellipsoid; large p flattens the faces.
struct SuperellipsoidShape {
    Vec3 semi_axes = Vec3::Ones();
    double exponent = 4.0;
};

struct CurveShape {
    PiecewiseCurve curve;
};

using ShapeKind = std::variant<SphereShape, EllipsoidShape, SuperellipsoidShape, CurveShape>;

inline Mat3 rotation_matrix(int dim, const std::vector<double>& rotation) {
    if (rotation.empty()) return Mat3::Identity();
    if (dim == 2) {
        if (rotation.size() != 1) throw InputError("2D rotation takes one angle");
        return Eigen::AngleAxisd(rotation[0], Vec3::UnitZ()).toRotationMatrix();
    }
    if (rotation.size() != 3) throw InputError("3D rotation takes a rotation vector of three components");
    const Vec3 w(rotation[0], rotation[1], rotation[2]);
    const double angle = w.norm();
    if (angle == 0.0) return Mat3::Identity();
    return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

/// A compact obstacle with C^3 boundary given as the zero set of F:
/// F < 0 inside, F = 0 on the boundary, F > 0 outside.
class Obstacle {
public:
    Obstacle(int dim, Vec3 center, ShapeKind shape, std::vector<double> rotation = {})
        : dim_(dim), center_(std::move(center)), shape_(std::move(shape)), rotation_(std::move(rotation)),
          rot_(rotation_matrix(dim, rotation_)) {
        if (dim != 2 && dim != 3) throw InvalidParameters("dimension must be 2 or 3");
        if (dim == 2) center_.z() = 0.0;
        if (std::holds_alternative<CurveShape>(shape_) && dim != 2)
            throw InvalidParameters("curve obstacles are planar");
    }

    int dimension() const { return dim_; }
    const Vec3& center() const { return center_; }
    const ShapeKind& shape() const { return shape_; }
    const std::vector<double>& rotation() const { return rotation_; }

    std::string kind_name() const {
        return std::visit(
            [](const auto& s) -> std::string {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, SphereShape>) return "sphere";
                else if constexpr (std::is_same_v<T, EllipsoidShape>) return "ellipsoid";
                else if constexpr (std::is_same_v<T, SuperellipsoidShape>) return "superellipsoid";
                else return "curve";
            },
            shape_);
    }

    /// True when F is a signed distance (Lipschitz constant 1), which lets the
    /// ray marcher take steps of size F.
    bool is_distance_field() const { return std::holds_alternative<CurveShape>(shape_); }

    double value(const Vec3& x) const {
        return std::visit([&](const auto& s) { return value_impl(s, x); }, shape_);
    }

    Vec3 gradient(const Vec3& x) const {
        return std::visit([&](const auto& s) { return gradient_impl(s, x); }, shape_);
    }

    Mat3 hessian(const Vec3& x) const {
        return std::visit([&](const auto& s) { return hessian_impl(s, x); }, shape_);
    }

    /// Sphere guaranteed to contain the obstacle.
    std::pair<Vec3, double> bounding_sphere() const {
        if (const auto* c = std::get_if<CurveShape>(&shape_)) {
            auto [bc, r] = c->curve.bounding_circle();
            return {rot_ * Vec3(bc.x(), bc.y(), 0.0) + center_, r};
        }
        if (const auto* s = std::get_if<SphereShape>(&shape_)) return {center_, s->radius};
        return {center_, active_axes().maxCoeff()};
    }

    /// Points on the boundary with spacing of roughly `spacing`.
    std::vector<Vec3> boundary_samples(double spacing) const {
        std::vector<Vec3> pts;
        if (const auto* c = std::get_if<CurveShape>(&shape_)) {
            for (const auto& p : c->curve.sample(spacing)) pts.push_back(center_ + rot_ * Vec3(p.x(), p.y(), 0.0));
            return pts;
        }
        const Vec3 axes = active_axes();
        const double stretch = axes.maxCoeff() / axes.head(dim_).minCoeff();
        const double rmax = axes.maxCoeff();
        if (dim_ == 2) {
            const int n = std::max(8, static_cast<int>(std::ceil(2.0 * std::numbers::pi * rmax * stretch / spacing)));
            for (int i = 0; i < n; ++i) {
                const double a = 2.0 * std::numbers::pi * (i + 0.5) / n;
                pts.push_back(radial_point(Vec3(std::cos(a), std::sin(a), 0.0)));
            }
            return pts;
        }
        const int n = std::max(16, static_cast<int>(std::ceil(4.0 * std::numbers::pi * rmax * rmax * stretch * stretch /
                                                               (spacing * spacing))));
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < n; ++i) {
            const double z = 1.0 - (2.0 * i + 1.0) / n;
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = golden * i;
            pts.push_back(radial_point(Vec3(rho * std::cos(phi), rho * std::sin(phi), z)));
        }
        return pts;
    }

    /// Description of the first degenerate shape parameter, if any.
    std::optional<std::string> parameter_problem() const { return check_parameters(); }

    /// Shape parameters as they appear in the scene file.
    nlohmann::json params_json() const {
        return std::visit(
            [this](const auto& s) -> nlohmann::json {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, SphereShape>) {
                    return {{"radius", s.radius}};
                } else if constexpr (std::is_same_v<T, EllipsoidShape>) {
                    return {{"semi_axes", axes_json(s.semi_axes)}};
                } else if constexpr (std::is_same_v<T, SuperellipsoidShape>) {
                    return {{"semi_axes", axes_json(s.semi_axes)}, {"exponent", s.exponent}};
                } else {
                    nlohmann::json pieces = nlohmann::json::array();
                    for (const auto& p : s.curve.pieces()) pieces.push_back(piece_json(p));
                    return {{"pieces", pieces}};
                }
            },
            shape_);
    }

private:
    Vec3 local(const Vec3& x) const {
        Vec3 y = rot_.transpose() * (x - center_);
        if (dim_ == 2) y.z() = 0.0;
        return y;
    }

    Vec3 active_axes() const {
        if (const auto* e = std::get_if<EllipsoidShape>(&shape_)) return mask(e->semi_axes);
        if (const auto* e = std::get_if<SuperellipsoidShape>(&shape_)) return mask(e->semi_axes);
        if (const auto* s = std::get_if<SphereShape>(&shape_)) return mask(Vec3::Constant(s->radius));
        return Vec3::Zero();
    }

    Vec3 mask(Vec3 axes) const {
        if (dim_ == 2) axes.z() = 0.0;
        return axes;
    }

    Vec3 radial_point(const Vec3& dir) const {
        // Scale the direction until it lands on F = 0 along the ray from the center.
        const Vec3 axes = active_axes();
        double p = 2.0;
        if (const auto* s = std::get_if<SuperellipsoidShape>(&shape_)) p = s->exponent;
        Vec3 y = Vec3::Zero();
        double sum = 0.0;
        for (int i = 0; i < dim_; ++i) {
            y[i] = axes[i] * dir[i];
            sum += std::pow(std::abs(dir[i]), p);
        }
        y /= std::pow(sum, 1.0 / p);
        return center_ + rot_ * y;
    }

    std::optional<std::string> check_parameters() const {
        return std::visit(
            [this](const auto& s) -> std::optional<std::string> {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, SphereShape>) {
                    if (!(s.radius > 0.0)) return "sphere radius must be positive";
                } else if constexpr (std::is_same_v<T, CurveShape>) {
                    auto [gap, kink] = s.curve.join_defects();
                    if (gap > 1e-9) return "curve pieces do not close up";
                    if (kink > 1e-7) return "curve pieces do not join tangentially";
                    if (s.curve.signed_area() <= 0.0) return "curve must run counter-clockwise";
                } else {
                    for (int i = 0; i < dim_; ++i)
                        if (!(s.semi_axes[i] > 0.0)) return "semi-axes must be positive";
                    if constexpr (std::is_same_v<T, SuperellipsoidShape>) {
                        if (!(s.exponent >= 2.0)) return "superellipsoid exponent must be >= 2";
                    }
                }
                return std::nullopt;
            },
            shape_);
    }

    double value_impl(const SphereShape& s, const Vec3& x) const {
        Vec3 d = x - center_;
        if (dim_ == 2) d.z() = 0.0;
        return d.squaredNorm() - s.radius * s.radius;
    }
    Vec3 gradient_impl(const SphereShape&, const Vec3& x) const {
        Vec3 d = 2.0 * (x - center_);
        if (dim_ == 2) d.z() = 0.0;
        return d;
    }
    Mat3 hessian_impl(const SphereShape&, const Vec3&) const {
        Mat3 h = 2.0 * Mat3::Identity();
        if (dim_ == 2) h(2, 2) = 0.0;
        return h;
    }

    double value_impl(const EllipsoidShape& e, const Vec3& x) const { return power_value(e.semi_axes, 2.0, x); }
    Vec3 gradient_impl(const EllipsoidShape& e, const Vec3& x) const { return power_gradient(e.semi_axes, 2.0, x); }
    Mat3 hessian_impl(const EllipsoidShape& e, const Vec3& x) const { return power_hessian(e.semi_axes, 2.0, x); }

    double value_impl(const SuperellipsoidShape& e, const Vec3& x) const {
        return power_value(e.semi_axes, e.exponent, x);
    }
    Vec3 gradient_impl(const SuperellipsoidShape& e, const Vec3& x) const {
        return power_gradient(e.semi_axes, e.exponent, x);
    }
    Mat3 hessian_impl(const SuperellipsoidShape& e, const Vec3& x) const {
        return power_hessian(e.semi_axes, e.exponent, x);
    }

    double power_value(const Vec3& axes, double p, const Vec3& x) const {
        const Vec3 y = local(x);
        double sum = -1.0;
        for (int i = 0; i < dim_; ++i) sum += std::pow(std::abs(y[i] / axes[i]), p);
        return sum;
    }
    Vec3 power_gradient(const Vec3& axes, double p, const Vec3& x) const {
        const Vec3 y = local(x);
        Vec3 g = Vec3::Zero();
        for (int i = 0; i < dim_; ++i) {
            const double s = y[i] / axes[i];
            g[i] = p * std::pow(std::abs(s), p - 1.0) * (s < 0 ? -1.0 : 1.0) / axes[i];
        }
        return rot_ * g;
    }
    Mat3 power_hessian(const Vec3& axes, double p, const Vec3& x) const {
        const Vec3 y = local(x);
        Mat3 h = Mat3::Zero();
        for (int i = 0; i < dim_; ++i) {
            const double s = std::abs(y[i] / axes[i]);
            h(i, i) = p * (p - 1.0) * (p == 2.0 ? 1.0 : std::pow(s, p - 2.0)) / (axes[i] * axes[i]);
        }
        return rot_ * h * rot_.transpose();
    }

    CurveProjection project(const CurveShape& c, const Vec3& x) const {
        const Vec3 y = local(x);
        return c.curve.project(Vec2(y.x(), y.y()));
    }
    double value_impl(const CurveShape& c, const Vec3& x) const { return project(c, x).signed_distance; }
    Vec3 gradient_impl(const CurveShape& c, const Vec3& x) const {
        const auto pr = project(c, x);
        return rot_ * Vec3(pr.normal.x(), pr.normal.y(), 0.0);
    }
    Mat3 hessian_impl(const CurveShape& c, const Vec3& x) const {
        // Hessian of a signed distance: kappa / (1 + kappa d) along the tangent.
        const auto pr = project(c, x);
        const double denom = 1.0 + pr.curvature * pr.signed_distance;
        const double k = std::abs(denom) > 1e-12 ? pr.curvature / denom : 0.0;
        const Vec3 t = rot_ * Vec3(pr.tangent.x(), pr.tangent.y(), 0.0);
        return k * t * t.transpose();
    }

    nlohmann::json axes_json(const Vec3& a) const {
        nlohmann::json arr = nlohmann::json::array();
        for (int i = 0; i < dim_; ++i) arr.push_back(a[i]);
        return arr;
    }

    static nlohmann::json piece_json(const CurvePiece& p) {
        if (const auto* s = std::get_if<Segment>(&p)) {
            return {{"type", "segment"}, {"from", {s->from.x(), s->from.y()}}, {"to", {s->to.x(), s->to.y()}}};
        }
        if (const auto* c = std::get_if<CircularArc>(&p)) {
            return {{"type", "arc"},
                    {"center", {c->center.x(), c->center.y()}},
                    {"radius", c->radius},
                    {"start", c->start},
                    {"sweep", c->sweep}};
        }
        const auto& e = std::get<EllipticArc>(p);
        return {{"type", "elliptic_arc"},
                {"center", {e.center.x(), e.center.y()}},
                {"semi_axes", {e.semi_major, e.semi_minor}},
                {"start", e.start},
                {"sweep", e.sweep}};
    }

    int dim_;
    Vec3 center_;
    ShapeKind shape_;
    std::vector<double> rotation_;
    Mat3 rot_;
};

}  // namespace scatlab
