#include "fixtures.hpp"
#include "scatlab/io.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

using namespace scatlab;
using namespace scatlab::testing;

namespace {

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

io::Header test_header() {
    io::Header h;
    h.kind = "test";
    h.invocation = {"scatlab", "test"};
    return h;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST(FormatDouble, SeventeenDigitsRoundTrip) {
    EXPECT_EQ(io::format_double(20.0), "20");
    EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(io::format_double(-2.0), "-2");
    EXPECT_EQ(io::format_double(std::numeric_limits<double>::infinity()), "null");
    Xoshiro256 rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double x = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<int>(rng.uniform() * 40) - 20);
        EXPECT_EQ(std::strtod(io::format_double(x).c_str(), nullptr), x);
    }
}

TEST(Dump, CompactOrderedAndExactFloats) {
    io::Json j = {{"b", 1}, {"a", 0.1}, {"s", "x\"y"}, {"v", {1.5, -0.0}}, {"n", nullptr}, {"t", true}};
    EXPECT_EQ(io::dump(j), R"({"b":1,"a":0.10000000000000001,"s":"x\"y","v":[1.5,-0],"n":null,"t":true})");
}

TEST(Header, CarriesProvenance) {
    auto h = test_header();
    h.scene_hash = "00000000000000ff";
    h.spec = "grid:2x2";
    h.seed = 42;
    h.extra["k"] = 1;
    const auto j = nlohmann::json::parse(io::dump(io::header_json(h)));
    EXPECT_EQ(j["format"], "scatlab/test");
    EXPECT_EQ(j["version"], io::kVersion);
    EXPECT_EQ(j["scene_hash"], "00000000000000ff");
    EXPECT_EQ(j["spec"], "grid:2x2");
    EXPECT_EQ(j["seed"], 42);
    EXPECT_EQ(j["invocation"], nlohmann::json({"scatlab", "test"}));
    EXPECT_EQ(j["k"], 1);
}

TEST(Document, HeaderOnFirstLineAndValidJson) {
    std::ostringstream os;
    io::write_document(os, test_header(), "report", {{"x", 1.25}});
    const auto lines = lines_of(os.str());
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0].rfind("{\"header\":{", 0), 0u);
    const auto j = nlohmann::json::parse(os.str());
    EXPECT_EQ(j["report"]["x"], 1.25);
}

TEST(TrajectoryJsonl, HeaderThenOneEventPerLine) {
    const auto s = sphere_scene(1.0, 3);
    const auto tr = trace(s, {Vec3(-10, 0, 0), Vec3::UnitX()});
    std::ostringstream os;
    io::write_trajectory(os, test_header(), s, tr);
    const auto lines = lines_of(os.str());
    ASSERT_EQ(lines.size(), 2u);
    const auto h = nlohmann::json::parse(lines[0]);
    EXPECT_EQ(h["format"], "scatlab/trajectory");
    EXPECT_EQ(h["status"], "exited");
    EXPECT_EQ(h["total_time"].get<double>(), 18.0);
    EXPECT_EQ(h["sojourn"].get<double>(), -2.0);
    const auto e = nlohmann::json::parse(lines[1]);
    std::vector<std::string> keys;
    for (auto it = e.begin(); it != e.end(); ++it) keys.push_back(it.key());
    std::sort(keys.begin(), keys.end());
    EXPECT_EQ(keys, (std::vector<std::string>{"obstacle", "t", "type", "v_in", "v_out", "x"}));
    EXPECT_EQ(e["type"], "transversal");
    EXPECT_EQ(e["x"], nlohmann::json({-1.0, 0.0, 0.0}));
    EXPECT_EQ(e["t"].get<double>(), 9.0);
}

TEST(TrajectoryJsonl, PlanarVectorsHaveTwoComponentsAndTrappedHasNoTime) {
    const auto s = two_sphere_scene(2);
    TraceLimits lim;
    lim.max_reflections = 5;
    // The orbit between the inner poles is cut off.
    const auto tr = trace(s, {Vec3::Zero(), Vec3::UnitX()}, lim);
    ASSERT_EQ(tr.status, TrajectoryStatus::trapped);
    std::ostringstream os;
    io::write_trajectory(os, test_header(), s, tr);
    const auto lines = lines_of(os.str());
    const auto h = nlohmann::json::parse(lines[0]);
    EXPECT_EQ(h["status"], "trapped");
    EXPECT_FALSE(h.contains("exit"));
    EXPECT_FALSE(h.contains("sojourn"));
    EXPECT_TRUE(h.contains("cutoff_reason"));
    EXPECT_EQ(nlohmann::json::parse(lines[1])["x"].size(), 2u);
}

TEST(LensJsonl, RoundTripIsExact) {
    for (const auto& [scene, spec] : {std::pair{ellipsoid_scene(3), parse_sample_spec("mc:300", 9)},
                                      std::pair{two_sphere_scene(2), parse_sample_spec("grid:12x20")}}) {
        const auto t = build_lens_table(scene, spec);
        std::stringstream ss;
        io::write_lens_table(ss, test_header(), t);
        const auto back = io::read_lens_table(ss);
        EXPECT_EQ(back.scene_hash, t.scene_hash);
        EXPECT_EQ(back.spec, t.spec);
        EXPECT_EQ(back.dimension, t.dimension);
        EXPECT_EQ(back.ball_radius, t.ball_radius);
        ASSERT_EQ(back.samples.size(), t.samples.size());
        for (std::size_t i = 0; i < t.samples.size(); ++i) {
            const auto& a = t.samples[i];
            const auto& b = back.samples[i];
            EXPECT_EQ(a.params, b.params);
            EXPECT_EQ(a.entry.q, b.entry.q);
            EXPECT_EQ(a.entry.v, b.entry.v);
            EXPECT_EQ(a.status, b.status);
            EXPECT_EQ(a.t, b.t);
            EXPECT_EQ(a.reflections, b.reflections);
            EXPECT_EQ(a.theta, b.theta);
            EXPECT_EQ(a.sojourn, b.sojourn);
        }
        const auto r = compare_lens(t, back, 0.0);
        EXPECT_TRUE(r.indistinguishable);
        EXPECT_EQ(r.max_abs_dt, 0.0);
    }
}

TEST(LensJsonl, RejectsMalformedInput) {
    const auto t = build_lens_table(sphere_scene(), parse_sample_spec("grid:3x3"));
    std::stringstream good;
    io::write_lens_table(good, test_header(), t);
    const auto text = good.str();
    auto read = [](const std::string& s) {
        std::istringstream in(s);
        return io::read_lens_table(in);
    };
    EXPECT_THROW(read(""), InputError);
    EXPECT_THROW(read("not json\n"), InputError);
    EXPECT_THROW(read("{\"format\":\"scatlab/trajectory\"}\n"), InputError);
    // Truncated body: header announces more samples than present.
    EXPECT_THROW(read(text.substr(0, text.rfind('{'))), InputError);
    // Corrupted status.
    auto bad = text;
    bad.replace(bad.find("\"free\"", bad.find('\n')), 6, "\"gone\"");
    EXPECT_THROW(read(bad), InputError);
}

TEST(LensCsv, ColumnsAndRows) {
    const auto t = build_lens_table(sphere_scene(1.0, 2), parse_sample_spec("grid:4x50"));
    std::ostringstream os;
    io::write_lens_csv(os, test_header(), t);
    const auto lines = lines_of(os.str());
    ASSERT_EQ(lines.size(), 2 + t.samples.size());
    EXPECT_EQ(lines[0].rfind("# {", 0), 0u);
    EXPECT_EQ(lines[1], "position_angle,direction_angle,status,t,reflections,theta_x,theta_y,sojourn");
    for (std::size_t i = 2; i < lines.size(); ++i) EXPECT_EQ(std::count(lines[i].begin(), lines[i].end(), ','), 7);
}

TEST(ReportJson, RankAndConjugateFields) {
    const auto f = focus_fixture();
    const auto r = regularity_test(f.scene, f.entry);
    const auto j = nlohmann::json::parse(io::dump(io::rank_json(r.position_by_direction)));
    EXPECT_TRUE(j.contains("singular_values"));
    EXPECT_EQ(j["rank"], r.position_by_direction.rank);
    EXPECT_EQ(j["tolerance"].get<double>(), r.position_by_direction.tolerance);
    const auto rf = refocus_fixture();
    const auto c = conjugate_test(rf.scene, trace(rf.scene, rf.entry), 0, 2);
    const auto cj = nlohmann::json::parse(io::dump(io::conjugate_json(c)));
    EXPECT_EQ(cj["conjugate"], true);
    EXPECT_EQ(cj["rank"], c.rank);
    EXPECT_EQ(c.rank, 0);
    EXPECT_EQ(cj["singular_values"].size(), 1u);
}

TEST(SceneDocument, LoadsBackWithHeader) {
    const auto l = livshits_scene({});
    const auto path = (std::filesystem::temp_directory_path() / "scatlab_scene_doc_test.json").string();
    {
        std::ofstream f(path);
        io::write_scene_document(f, test_header(), l.scene, io::landmarks_json(l));
    }
    const auto back = io::load_scene_file(path);
    EXPECT_EQ(scene_hash(back), scene_hash(l.scene));
    std::filesystem::remove(path);
}

TEST(Svg, OnePathPerObstacleAndOnePolylinePerSegment) {
    const auto s = ellipsoid_scene(2);
    std::vector<Trajectory> trs;
    std::size_t segments = 0, events = 0;
    for (const auto& x : sample_phase_sphere(parse_sample_spec("grid:6x5"), s.a(), 2)) {
        trs.push_back(trace(s, x.entry));
        segments += trs.back().events.size() + 1;
        events += trs.back().events.size();
    }
    std::ostringstream os;
    io::write_svg(os, test_header(), s, trs);
    const auto svg = os.str();
    EXPECT_EQ(svg.rfind("<svg ", 0), 0u);
    EXPECT_EQ(count_of(svg, "<path class=\"obstacle\""), s.obstacles.size());
    EXPECT_EQ(count_of(svg, "<polyline class=\"segment\""), segments);
    EXPECT_EQ(count_of(svg, "<circle class=\"event"), events);
    EXPECT_THROW(io::write_svg(os, test_header(), sphere_scene(), {}), InvalidParameters);
}

TEST(Svg, CoordinatesAreWrittenUnchanged) {
    const auto s = sphere_scene(1.0, 2);
    const auto tr = trace(s, {Vec3(-10, 0, 0), Vec3::UnitX()});
    std::ostringstream os;
    io::write_svg(os, test_header(), s, {tr});
    EXPECT_NE(os.str().find("points=\"-10,0 -1,0\""), std::string::npos);
    EXPECT_NE(os.str().find("cx=\"-1\" cy=\"0\""), std::string::npos);
}
