#pragma once

#include "scatlab/flow.hpp"
#include "scatlab/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace scatlab {

/// How entries on S*_+(S0) are chosen.
struct SampleSpec {
    enum class Mode { grid, monte_carlo } mode = Mode::grid;
    std::size_t positions = 1;   // grid: points on S0
    std::size_t directions = 1;  // grid: inward directions per point
    std::size_t count = 1;       // monte_carlo: total entries
    std::uint64_t seed = 0;
    TraceLimits limits;

    std::size_t size() const { return mode == Mode::grid ? positions * directions : count; }

    /// "grid:PxD" or "mc:N".
    std::string label() const {
        return mode == Mode::grid ? "grid:" + std::to_string(positions) + "x" + std::to_string(directions)
                                  : "mc:" + std::to_string(count);
    }

    bool operator==(const SampleSpec& o) const {
        return mode == o.mode && positions == o.positions && directions == o.directions && count == o.count &&
               seed == o.seed && limits.max_reflections == o.limits.max_reflections &&
               limits.max_time_factor == o.limits.max_time_factor;
    }
};

namespace detail {

inline std::size_t parse_count(const std::string& s, const std::string& whole) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw InvalidParameters("bad sample spec '" + whole + "'");
    const auto n = std::stoull(s);
    if (n == 0) throw InvalidParameters("sample spec counts must be at least 1: '" + whole + "'");
    return static_cast<std::size_t>(n);
}

}  // namespace detail

inline SampleSpec parse_sample_spec(const std::string& text, std::uint64_t seed = 0, const TraceLimits& limits = {}) {
    SampleSpec s;
    s.seed = seed;
    s.limits = limits;
    if (text.rfind("grid:", 0) == 0) {
        const auto body = text.substr(5);
        const auto x = body.find('x');
        if (x == std::string::npos) throw InvalidParameters("bad sample spec '" + text + "'");
        s.mode = SampleSpec::Mode::grid;
        s.positions = detail::parse_count(body.substr(0, x), text);
        s.directions = detail::parse_count(body.substr(x + 1), text);
        return s;
    }
    if (text.rfind("mc:", 0) == 0) {
        s.mode = SampleSpec::Mode::monte_carlo;
        s.count = detail::parse_count(text.substr(3), text);
        return s;
    }
    throw InvalidParameters("bad sample spec '" + text + "' (expected grid:POSxDIR or mc:N)");
}

inline nlohmann::json to_json(const SampleSpec& s) {
    return {{"label", s.label()},
            {"seed", s.seed},
            {"max_reflections", s.limits.max_reflections},
            {"max_time_factor", s.limits.max_time_factor}};
}

inline SampleSpec sample_spec_from_json(const nlohmann::json& j) {
    try {
        TraceLimits lim;
        lim.max_reflections = j.at("max_reflections").get<std::size_t>();
        lim.max_time_factor = j.at("max_time_factor").get<double>();
        return parse_sample_spec(j.at("label").get<std::string>(), j.at("seed").get<std::uint64_t>(), lim);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad sample spec record: ") + e.what());
    }
}

/// One entry of S*_+(S0) with its intrinsic coordinates, each scaled to [0, 1]:
/// 2D (position angle, direction angle); 3D (position height, position azimuth,
/// 1 - cos incidence, direction azimuth).
struct PhaseSample {
    std::vector<double> params;
    PhasePoint entry;
};

/// Entry built from normalized intrinsic coordinates.
inline PhasePoint entry_from_params(const std::vector<double>& p, double a, int dim) {
    const double pi = std::numbers::pi;
    if (dim == 2) {
        const double phi = 2.0 * pi * p[0];
        const double psi = -0.5 * pi + pi * p[1];  // angle from the inward normal
        const Vec3 q(a * std::cos(phi), a * std::sin(phi), 0.0);
        const Vec3 nu = ball_inward_normal(q);
        const Vec3 e = detail::transverse_basis(nu, 2).col(0);
        return {q, (std::cos(psi) * nu + std::sin(psi) * e).normalized()};
    }
    const double z = 1.0 - 2.0 * p[0];
    const double phi = 2.0 * pi * p[1];
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 q = a * Vec3(rho * std::cos(phi), rho * std::sin(phi), z);
    const Vec3 nu = ball_inward_normal(q);
    const double cos_inc = 1.0 - p[2];
    const double sin_inc = std::sqrt(std::max(0.0, 1.0 - cos_inc * cos_inc));
    const double az = 2.0 * pi * p[3];
    const Basis e = detail::transverse_basis(nu, 3);
    const Vec3 v = cos_inc * nu + sin_inc * (std::cos(az) * Vec3(e.col(0)) + std::sin(az) * Vec3(e.col(1)));
    return {q, v.normalized()};
}

/// Grid: 2D uses equally spaced position and direction angles (cell centers);
/// 3D uses a Fibonacci lattice on S0 and a Fibonacci lattice on the inward
/// hemisphere (uniform in cos incidence), both equal-area. Monte Carlo draws
/// the same coordinates uniformly from the seeded xoshiro256** stream.
inline std::vector<PhaseSample> sample_phase_sphere(const SampleSpec& spec, double a, int dim) {
    std::vector<PhaseSample> out;
    out.reserve(spec.size());
    auto frac = [](double x) { return x - std::floor(x); };
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);  // golden ratio conjugate, in turns
    if (spec.mode == SampleSpec::Mode::grid) {
        const double P = static_cast<double>(spec.positions), D = static_cast<double>(spec.directions);
        for (std::size_t i = 0; i < spec.positions; ++i)
            for (std::size_t j = 0; j < spec.directions; ++j) {
                std::vector<double> p;
                if (dim == 2) {
                    p = {(i + 0.5) / P, (j + 0.5) / D};
                } else {
                    p = {(i + 0.5) / P, frac(i * golden), (j + 0.5) / D, frac(j * golden)};
                }
                out.push_back({p, entry_from_params(p, a, dim)});
            }
        return out;
    }
    Xoshiro256 rng(spec.seed);
    for (std::size_t k = 0; k < spec.count; ++k) {
        std::vector<double> p(dim == 2 ? 2 : 4);
        for (auto& x : p) x = rng.uniform();
        out.push_back({p, entry_from_params(p, a, dim)});
    }
    return out;
}

}  // namespace scatlab
