#include "scatlab/io.hpp"
#include "scatlab/lens.hpp"
#include "scatlab/sampling.hpp"
#include "scatlab/scene.hpp"
#include "scatlab/shapes.hpp"
#include "scatlab/variation.hpp"

#include <CLI11.hpp>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace scatlab;
using io::Json;

namespace {

enum Exit : int { ok = 0, distinguishable = 1, bad_input = 2, numeric_failure = 3, unexpected_difference = 4 };

struct Options {
    std::string scene, scene_b, out, spec, omega, theta, entry, svg;
    std::uint64_t seed = 0;
    std::optional<std::size_t> nmax;
    std::optional<double> tmax;
    std::optional<double> tol;
    bool expect_equal = false;
    std::vector<std::string> tables;  // compare: two lens table files
    std::vector<std::string> invocation;
};

// ---------------------------------------------------------------------------
// Argument parsing helpers

std::vector<double> parse_csv(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const char* begin = item.c_str();
        char* end = nullptr;
        errno = 0;
        const double x = std::strtod(begin, &end);
        while (end && *end == ' ') ++end;
        if (item.empty() || end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(x))
            throw InvalidParameters(flag + ": bad number '" + item + "'");
        out.push_back(x);
    }
    if (out.empty()) throw InvalidParameters(flag + ": expected comma-separated numbers");
    return out;
}

Vec3 parse_direction(const std::string& text, int dim, const std::string& flag) {
    const auto x = parse_csv(text, flag);
    if (static_cast<int>(x.size()) != dim) throw InvalidParameters(flag + ": expected " + std::to_string(dim) + " components");
    Vec3 v = Vec3::Zero();
    for (int i = 0; i < dim; ++i) v[i] = x[i];
    if (v.norm() == 0.0) throw InvalidParameters(flag + ": zero vector");
    return v.normalized();
}

/// --entry takes either position then direction (2n numbers) or the normalized
/// intrinsic coordinates used by lens tables (2 numbers in 2D, 4 in 3D).
PhasePoint parse_entry(const std::string& text, const Scene& s) {
    const auto x = parse_csv(text, "--entry");
    const int dim = s.dimension;
    const double a = s.a();
    if (static_cast<int>(x.size()) == 2 * dim) {
        PhasePoint p;
        for (int i = 0; i < dim; ++i) {
            p.q[i] = x[i];
            p.v[i] = x[dim + i];
        }
        p.v[2] = dim == 2 ? 0.0 : p.v[2];
        if (std::abs(p.q.norm() - a) > 1e-9 * a) throw InvalidParameters("--entry: position is not on the sphere of radius a");
        if (p.v.norm() == 0.0) throw InvalidParameters("--entry: zero direction");
        p.v.normalize();
        if (p.v.dot(ball_inward_normal(p.q)) < 0.0) throw InvalidParameters("--entry: direction points out of the ball");
        return p;
    }
    if (static_cast<int>(x.size()) == (dim == 2 ? 2 : 4)) {
        for (double u : x)
            if (u < 0.0 || u > 1.0) throw InvalidParameters("--entry: intrinsic coordinates must lie in [0, 1]");
        return entry_from_params(x, a, dim);
    }
    throw InvalidParameters("--entry: expected " + std::to_string(2 * dim) + " numbers (position, direction) or " +
                            std::to_string(dim == 2 ? 2 : 4) + " intrinsic coordinates");
}

TraceLimits limits_for(const Options& o, const Scene& s) {
    TraceLimits lim;
    if (o.nmax) lim.max_reflections = *o.nmax;
    if (o.tmax) {
        if (!(*o.tmax > 0.0)) throw InvalidParameters("--tmax must be positive");
        lim.max_time_factor = *o.tmax / s.a();
    }
    return lim;
}

Scene load_valid_scene(const std::string& path) {
    if (path.empty()) throw InvalidParameters("--scene is required");
    auto s = io::load_scene_file(path);
    validate_scene(s);
    return s;
}

io::Header header_for(const Options& o, const std::string& kind, const Scene* s) {
    io::Header h;
    h.kind = kind;
    if (s) h.scene_hash = hash_hex(scene_hash(*s));
    if (!o.spec.empty()) h.spec = o.spec;
    h.seed = o.seed;
    h.invocation = o.invocation;
    return h;
}

/// Writes to --out, or stdout when it is empty.
template <typename Writer>
void emit(const std::string& path, Writer&& write) {
    if (path.empty()) {
        write(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path);
    write(f);
    if (!f) throw InputError("failed writing " + path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_validate(const Options& o) {
    if (o.scene.empty()) throw InvalidParameters("--scene is required");
    const auto s = io::load_scene_file(o.scene);
    const auto r = inspect_scene(s);
    emit(o.out, [&](std::ostream& os) { io::write_document(os, header_for(o, "validation", &s), "report", io::validation_json(r)); });
    if (!r.passed()) {
        std::cerr << "scatlab: " << *r.violation << '\n';
        return bad_input;
    }
    return ok;
}

void write_svg_file(const std::string& path, const Options& o, const Scene& s, const std::vector<Trajectory>& trs) {
    emit(path, [&](std::ostream& os) { io::write_svg(os, header_for(o, "render", &s), s, trs); });
}

int cmd_trace(const Options& o) {
    const auto s = load_valid_scene(o.scene);
    if (o.entry.empty()) throw InvalidParameters("--entry is required");
    const auto tr = trace(s, parse_entry(o.entry, s), limits_for(o, s));
    emit(o.out, [&](std::ostream& os) { io::write_trajectory(os, header_for(o, "trajectory", &s), s, tr); });
    if (!o.svg.empty()) write_svg_file(o.svg, o, s, {tr});
    return ok;
}

SampleSpec spec_for(const Options& o, const Scene& s, const std::string& fallback = "") {
    const std::string text = o.spec.empty() ? fallback : o.spec;
    if (text.empty()) throw InvalidParameters("--spec is required");
    return parse_sample_spec(text, o.seed, limits_for(o, s));
}

int cmd_lens(const Options& o) {
    const auto s = load_valid_scene(o.scene);
    const auto table = build_lens_table(s, spec_for(o, s));
    const auto h = header_for(o, "lens", &s);
    emit(o.out, [&](std::ostream& os) {
        if (ends_with(o.out, ".csv"))
            io::write_lens_csv(os, h, table);
        else
            io::write_lens_table(os, h, table);
    });
    return ok;
}

/// Three levels whose sample counts grow by about a factor 10 each, ending at --spec.
std::vector<SampleSpec> trapped_ladder(const Options& o, const Scene& s) {
    if (o.spec.empty()) {
        std::vector<SampleSpec> l;
        for (const char* t : {"grid:10x10", "grid:40x25", "grid:100x100"})
            l.push_back(parse_sample_spec(t, o.seed, limits_for(o, s)));
        return l;
    }
    const auto top = spec_for(o, s);
    std::vector<SampleSpec> l;
    for (double f : {0.01, 0.1}) {
        auto x = top;
        if (top.mode == SampleSpec::Mode::grid) {
            const double g = std::sqrt(f);
            x.positions = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(top.positions * g)));
            x.directions = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(top.directions * g)));
        } else {
            x.count = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(top.count * f)));
        }
        l.push_back(x);
    }
    l.push_back(top);
    return l;
}

int cmd_trapped(const Options& o) {
    const auto s = load_valid_scene(o.scene);
    const auto ladder = trapped_ladder(o, s);
    const auto est = estimate_trapped(s, ladder);
    auto h = header_for(o, "trapped", &s);
    h.spec = ladder.back().label();
    emit(o.out, [&](std::ostream& os) { io::write_document(os, h, "estimate", io::trapped_json(est)); });
    return ok;
}

int cmd_sls(const Options& o) {
    const auto s = load_valid_scene(o.scene);
    if (o.omega.empty()) throw InvalidParameters("--omega is required");
    const Vec3 omega = parse_direction(o.omega, s.dimension, "--omega");
    const Vec3 theta = o.theta.empty() ? Vec3(-omega) : parse_direction(o.theta, s.dimension, "--theta");
    SpectrumOptions opt;
    opt.limits = limits_for(o, s);
    opt.seed = o.seed;
    if (o.tol) {
        if (!(*o.tol > 0.0)) throw InvalidParameters("--tol must be positive");
        opt.angular_tolerance = *o.tol;
    }
    if (!o.spec.empty()) {
        const auto sp = parse_sample_spec(o.spec, o.seed);
        if (sp.mode == SampleSpec::Mode::grid) {
            if (sp.directions != sp.positions && sp.directions != 1)
                throw InvalidParameters("sls: --spec grid:NxN or grid:Nx1 (N impacts per side)");
            opt.impacts = sp.positions;
        } else {
            opt.monte_carlo = true;
            opt.impacts = sp.count;
        }
    }
    const auto bins = scattering_spectrum(s, omega, theta, opt);
    auto h = header_for(o, "spectrum", &s);
    Json body = io::spectrum_json(bins);
    body["omega"] = io::vec_json(omega, s.dimension);
    body["theta"] = io::vec_json(theta, s.dimension);
    body["angular_tolerance"] = opt.angular_tolerance;
    body["impacts"] = opt.impacts;
    emit(o.out, [&](std::ostream& os) { io::write_document(os, h, "spectrum", body); });
    return ok;
}

int cmd_compare(const Options& o) {
    LensTable k, l;
    std::optional<double> hausdorff;
    if (!o.tables.empty()) {
        if (o.tables.size() != 2) throw InvalidParameters("compare: give two lens table files");
        if (!o.scene.empty() || !o.scene_b.empty())
            throw InvalidParameters("compare: give either two lens tables or --scene and --scene-b");
        k = io::load_lens_table(o.tables[0]);
        l = io::load_lens_table(o.tables[1]);
    } else {
        if (o.scene.empty() || o.scene_b.empty())
            throw InvalidParameters("compare: give two lens tables or --scene and --scene-b");
        const auto sk = load_valid_scene(o.scene);
        const auto sl = load_valid_scene(o.scene_b);
        if (sk.dimension != sl.dimension || sk.ball_radius != sl.ball_radius)
            throw SpecMismatch("compare: scenes differ in dimension or ball radius");
        const auto spec = spec_for(o, sk);
        k = build_lens_table(sk, spec);
        l = build_lens_table(sl, spec);
        hausdorff = boundary_distance(sk, sl, sk.a() / 2000.0);
    }
    const double tol = o.tol ? *o.tol : default_time_tolerance(k.ball_radius);
    if (!(tol >= 0.0)) throw InvalidParameters("--tol must be non-negative");
    const auto r = compare_lens(k, l, tol);
    io::Header h;
    h.kind = "comparison";
    h.scene_hash = hash_hex(k.scene_hash);
    h.spec = k.spec.label();
    h.seed = k.spec.seed;
    h.invocation = o.invocation;
    h.extra["scene_hash_b"] = hash_hex(l.scene_hash);
    Json body = io::comparison_json(r);
    if (hausdorff) body["boundary_distance"] = *hausdorff;
    emit(o.out, [&](std::ostream& os) { io::write_document(os, h, "report", body); });
    if (r.indistinguishable) return ok;
    return o.expect_equal ? unexpected_difference : distinguishable;
}

int cmd_conjugate(const Options& o) {
    const auto s = load_valid_scene(o.scene);
    if (o.entry.empty()) throw InvalidParameters("--entry is required");
    const auto tr = trace(s, parse_entry(o.entry, s), limits_for(o, s));
    constexpr std::size_t kMaxEvents = 1000;
    if (tr.events.size() > kMaxEvents)
        throw InvalidParameters("conjugate: trajectory has more than 1000 events; lower --nmax or --tmax");
    const double tol = o.tol ? *o.tol : kConjugateTolerance;
    Json pairs = Json::array();
    bool any = false;
    for (std::size_t i = 0; i < tr.events.size(); ++i) {
        if (tr.events[i].type != EventType::transversal) continue;
        for (std::size_t j = i + 1; j < tr.events.size(); ++j) {
            if (tr.events[j - 1].type == EventType::tangent && j - 1 > i) break;
            if (tr.events[j].type != EventType::transversal) continue;
            const auto c = conjugate_test(s, tr, i, j, tol);
            Json p = {{"i", i}, {"j", j}};
            const Json cj = io::conjugate_json(c);
            for (auto it = cj.begin(); it != cj.end(); ++it) p[it.key()] = it.value();
            pairs.push_back(p);
            any = any || c.conjugate;
        }
    }
    Json body = {{"trajectory", io::trajectory_summary_json(s, tr)}, {"any_conjugate", any}, {"pairs", pairs}};
    emit(o.out, [&](std::ostream& os) { io::write_document(os, header_for(o, "conjugate", &s), "result", body); });
    return ok;
}

int cmd_regularity(const Options& o) {
    const auto s = load_valid_scene(o.scene);
    const double tol = o.tol ? *o.tol : kRankTolerance;
    const auto lim = limits_for(o, s);
    Json body;
    if (!o.entry.empty()) {
        if (!o.spec.empty()) throw InvalidParameters("regularity: give either --entry or --spec");
        const auto r = regularity_test(s, parse_entry(o.entry, s), tol, lim);
        body = io::regularity_json(r);
    } else {
        // Every scattered sample of the lens table: tangent, trapped and free rays are not tested.
        const auto table = build_lens_table(s, spec_for(o, s));
        Json rows = Json::array();
        std::size_t tested = 0, regular = 0;
        for (const auto& x : table.samples) {
            if (x.status != SampleStatus::scattered) continue;
            ++tested;
            Json row = {{"index", x.index}};
            try {
                const auto r = regularity_test(s, x.entry, tol, lim);
                if (r.regular) ++regular;
                row["regular"] = r.regular;
                row["position_by_direction_rank"] = r.position_by_direction.rank;
                row["direction_by_position_rank"] = r.direction_by_position.rank;
            } catch (const NumericError& e) {
                row["regular"] = false;
                row["error"] = e.what();
            }
            rows.push_back(row);
        }
        body = {{"tested", tested},
                {"regular", regular},
                {"fraction_regular", tested ? static_cast<double>(regular) / tested : 1.0},
                {"tolerance", tol},
                {"samples", rows}};
    }
    emit(o.out, [&](std::ostream& os) { io::write_document(os, header_for(o, "regularity", &s), "result", body); });
    return ok;
}

int cmd_livshits(const Options& o) {
    if (o.out.empty()) throw InvalidParameters("livshits: --out PREFIX is required");
    const auto base = livshits_scene({});
    LivshitsParams p;
    p.deformation = 0.05 * base.scene.a();
    const auto deformed = livshits_scene(p);
    validate_scene(base.scene);
    validate_scene(deformed.scene);
    const std::string base_path = o.out + ".base.json", deformed_path = o.out + ".deformed.json";
    emit(base_path, [&](std::ostream& os) {
        io::write_scene_document(os, header_for(o, "scene", &base.scene), base.scene, io::landmarks_json(base));
    });
    emit(deformed_path, [&](std::ostream& os) {
        io::write_scene_document(os, header_for(o, "scene", &deformed.scene), deformed.scene, io::landmarks_json(deformed));
    });
    auto h = header_for(o, "livshits", &base.scene);
    h.extra["base"] = base_path;
    h.extra["deformed"] = deformed_path;
    Json body = {{"scene_hash_base", hash_hex(scene_hash(base.scene))},
                 {"scene_hash_deformed", hash_hex(scene_hash(deformed.scene))},
                 {"landmarks", io::landmarks_json(base)},
                 {"deformation", deformed.deformation},
                 {"boundary_distance", boundary_distance(base.scene, deformed.scene, base.scene.a() / 2000.0)}};
    io::write_document(std::cout, h, "pair", body);
    return ok;
}

int cmd_render(const Options& o) {
    const auto s = load_valid_scene(o.scene);
    const std::string path = !o.svg.empty() ? o.svg : o.out;
    if (path.empty()) throw InvalidParameters("render: --svg or --out is required");
    if (s.dimension != 2) throw InvalidParameters("render: SVG output needs a planar scene");
    const auto lim = limits_for(o, s);
    std::vector<Trajectory> trs;
    if (!o.entry.empty()) trs.push_back(trace(s, parse_entry(o.entry, s), lim));
    if (!o.spec.empty())
        for (const auto& x : sample_phase_sphere(spec_for(o, s), s.a(), s.dimension)) trs.push_back(trace(s, x.entry, lim));
    write_svg_file(path, o, s, trs);
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    o.invocation.emplace_back("scatlab");
    for (int i = 1; i < argc; ++i) o.invocation.emplace_back(argv[i]);

    CLI::App app{"Exterior billiard scattering lab"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(io::kVersion));

    auto scene = [&](CLI::App* c) { c->add_option("--scene", o.scene, "Scene JSON file"); };
    auto out = [&](CLI::App* c) { c->add_option("--out", o.out, "Output file (default: stdout)"); };
    auto limits = [&](CLI::App* c) {
        c->add_option("--nmax", o.nmax, "Maximum boundary events per trajectory")->check(CLI::PositiveNumber);
        c->add_option("--tmax", o.tmax, "Maximum trajectory time (length units)");
    };
    auto spec = [&](CLI::App* c, const char* help) {
        c->add_option("--spec", o.spec, help);
        c->add_option("--seed", o.seed, "Seed for mc: specs");
    };
    auto entry = [&](CLI::App* c) {
        c->add_option("--entry", o.entry, "Entry: position,direction or intrinsic coordinates in [0,1]");
    };
    auto tol = [&](CLI::App* c, const char* help) { c->add_option("--tol", o.tol, help); };

    auto* validate = app.add_subcommand("validate", "Check a scene and print its validation report");
    scene(validate);
    out(validate);

    auto* trace_c = app.add_subcommand("trace", "Trace one entry and write the JSONL trajectory");
    scene(trace_c);
    entry(trace_c);
    limits(trace_c);
    out(trace_c);
    trace_c->add_option("--svg", o.svg, "Also render the trajectory (planar scenes)");

    auto* lens = app.add_subcommand("lens", "Sample the travelling-time table (JSONL, or CSV for .csv paths)");
    scene(lens);
    spec(lens, "grid:POSxDIR or mc:N");
    limits(lens);
    out(lens);

    auto* trapped = app.add_subcommand("trapped", "Trapped fraction over a resolution ladder ending at --spec");
    scene(trapped);
    spec(trapped, "Finest level: grid:POSxDIR or mc:N (default ladder 10x10, 40x25, 100x100)");
    limits(trapped);
    out(trapped);

    auto* sls = app.add_subcommand("sls", "Scattering length spectrum for (omega, theta)");
    scene(sls);
    sls->add_option("--omega", o.omega, "Incoming direction");
    sls->add_option("--theta", o.theta, "Outgoing direction (default -omega)");
    spec(sls, "Impact grid grid:NxN, or mc:N");
    tol(sls, "Angular tolerance in radians");
    limits(sls);
    out(sls);

    auto* compare = app.add_subcommand("compare", "Compare two lens tables");
    compare->add_option("tables", o.tables, "Two lens table files");
    scene(compare);
    compare->add_option("--scene-b", o.scene_b, "Second scene (tables are built with --spec)");
    spec(compare, "Sampling when comparing scenes");
    tol(compare, "Time tolerance (default 1e-6 a)");
    limits(compare);
    compare->add_flag("--expect-equal", o.expect_equal, "Exit 4 when the tables are distinguishable");
    out(compare);

    auto* conjugate = app.add_subcommand("conjugate", "Conjugate test for every pair of reflections of one entry");
    scene(conjugate);
    entry(conjugate);
    tol(conjugate, "Relative singular value threshold");
    limits(conjugate);
    out(conjugate);

    auto* regularity = app.add_subcommand("regularity", "Rank test of the flow differentials");
    scene(regularity);
    entry(regularity);
    spec(regularity, "Test every scattered sample of this spec instead of one entry");
    tol(regularity, "Relative singular value threshold");
    limits(regularity);
    out(regularity);

    auto* livshits = app.add_subcommand("livshits", "Write the Livshits scene pair PREFIX.base.json, PREFIX.deformed.json");
    out(livshits);

    auto* render = app.add_subcommand("render", "SVG of a planar scene and optional trajectories");
    scene(render);
    entry(render);
    spec(render, "Also draw every sampled entry");
    limits(render);
    out(render);
    render->add_option("--svg", o.svg, "SVG output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : bad_input;
    }

    try {
        if (*validate) return cmd_validate(o);
        if (*trace_c) return cmd_trace(o);
        if (*lens) return cmd_lens(o);
        if (*trapped) return cmd_trapped(o);
        if (*sls) return cmd_sls(o);
        if (*compare) return cmd_compare(o);
        if (*conjugate) return cmd_conjugate(o);
        if (*regularity) return cmd_regularity(o);
        if (*livshits) return cmd_livshits(o);
        if (*render) return cmd_render(o);
    } catch (const InputError& e) {
        std::cerr << "scatlab: " << e.what() << '\n';
        return bad_input;
    } catch (const NumericError& e) {
        std::cerr << "scatlab: numeric failure: " << e.what() << '\n';
        return numeric_failure;
    } catch (const std::exception& e) {
        std::cerr << "scatlab: " << e.what() << '\n';
        return numeric_failure;
    }
    return bad_input;
}
