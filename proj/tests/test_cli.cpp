#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const std::string kCli = SCATLAB_CLI;
const std::string kScenes = SCATLAB_SCENES;

std::string scene(const std::string& name) { return kScenes + "/" + name; }

/// Fresh scratch directory per test.
class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("scatlab_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    /// Runs the CLI with stdout to `stdout_name` (in the scratch dir) and returns the exit status.
    int run(const std::string& args, const std::string& stdout_name = "stdout.txt") const {
        const std::string cmd = kCli + " " + args + " > " + path(stdout_name) + " 2> " + path("stderr.txt");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string read(const std::string& name) const {
        std::ifstream f(path(name));
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }

    std::string first_line(const std::string& name) const {
        const auto s = read(name);
        return s.substr(0, s.find('\n'));
    }

    std::string body(const std::string& name) const {
        const auto s = read(name);
        const auto p = s.find('\n');
        return p == std::string::npos ? std::string() : s.substr(p + 1);
    }

    nlohmann::json document(const std::string& name) const { return nlohmann::json::parse(read(name)); }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, TraceEmptySceneDiametricEntryReportsTime20) {
    ASSERT_EQ(run("trace --scene " + scene("empty3.json") + " --entry=-10,0,0,1,0,0 --out " + path("t.jsonl")), 0);
    const auto h = nlohmann::json::parse(first_line("t.jsonl"));
    EXPECT_EQ(h["total_time"].get<double>(), 20.0);
    EXPECT_EQ(h["status"], "exited");
    EXPECT_EQ(body("t.jsonl"), "");
}

TEST_F(Cli, TraceSphereWritesOneEventAndSvg) {
    ASSERT_EQ(run("trace --scene " + scene("sphere2.json") + " --entry=-10,0,1,0 --out " + path("t.jsonl") + " --svg " +
                  path("t.svg")),
              0);
    const auto h = nlohmann::json::parse(first_line("t.jsonl"));
    EXPECT_EQ(h["total_time"].get<double>(), 18.0);
    const auto e = nlohmann::json::parse(body("t.jsonl"));
    EXPECT_EQ(e["x"], nlohmann::json({-1.0, 0.0}));
    const auto svg = read("t.svg");
    EXPECT_NE(svg.find("<path class=\"obstacle\""), std::string::npos);
    EXPECT_NE(svg.find("points=\"-10,0 -1,0\""), std::string::npos);
}

TEST_F(Cli, HeadersCarryVersionSceneHashSpecSeedAndInvocation) {
    ASSERT_EQ(run("lens --scene " + scene("sphere3.json") + " --spec mc:50 --seed 7 --out " + path("k.jsonl")), 0);
    const auto h = nlohmann::json::parse(first_line("k.jsonl"));
    EXPECT_EQ(h["format"], "scatlab/lens");
    EXPECT_FALSE(h["version"].get<std::string>().empty());
    EXPECT_EQ(h["scene_hash"].get<std::string>().size(), 16u);
    EXPECT_EQ(h["spec"], "mc:50");
    EXPECT_EQ(h["seed"], 7);
    const auto inv = h["invocation"];
    EXPECT_EQ(inv[1], "lens");
    EXPECT_EQ(inv[inv.size() - 1], path("k.jsonl"));
}

TEST_F(Cli, CompareTableWithItselfIsIndistinguishable) {
    ASSERT_EQ(run("lens --scene " + scene("ellipse_disc2.json") + " --spec grid:20x30 --out " + path("k.jsonl")), 0);
    EXPECT_EQ(run("compare " + path("k.jsonl") + " " + path("k.jsonl") + " --expect-equal --out " + path("r.json")), 0);
    const auto r = document("r.json")["report"];
    EXPECT_EQ(r["verdict"], "indistinguishable");
    EXPECT_EQ(r["max_abs_dt"].get<double>(), 0.0);
}

TEST_F(Cli, CompareDistinguishableExitCodes) {
    ASSERT_EQ(run("lens --scene " + scene("sphere3.json") + " --spec grid:8x400 --out " + path("k.jsonl")), 0);
    ASSERT_EQ(run("lens --scene " + scene("sphere3_r1.01.json") + " --spec grid:8x400 --out " + path("l.jsonl")), 0);
    EXPECT_EQ(run("compare " + path("k.jsonl") + " " + path("l.jsonl") + " --out " + path("r.json")), 1);
    EXPECT_GE(document("r.json")["report"]["max_abs_dt"].get<double>(), 0.019);
    EXPECT_EQ(run("compare " + path("k.jsonl") + " " + path("l.jsonl") + " --expect-equal"), 4);
    // Different sampling specs cannot be compared.
    ASSERT_EQ(run("lens --scene " + scene("sphere3.json") + " --spec grid:8x300 --out " + path("m.jsonl")), 0);
    EXPECT_EQ(run("compare " + path("k.jsonl") + " " + path("m.jsonl")), 2);
}

TEST_F(Cli, LivshitsPairTablesCompareEqual) {
    const std::string prefix = path("pair");
    ASSERT_EQ(run("livshits --out " + prefix, "pair.json"), 0);
    const auto pair = document("pair.json")["pair"];
    EXPECT_NE(pair["scene_hash_base"], pair["scene_hash_deformed"]);
    EXPECT_NEAR(pair["boundary_distance"].get<double>(), pair["deformation"].get<double>(),
                0.2 * pair["deformation"].get<double>());
    ASSERT_EQ(run("lens --scene " + prefix + ".base.json --spec grid:40x30 --out " + path("k.jsonl")), 0);
    ASSERT_EQ(run("lens --scene " + prefix + ".deformed.json --spec grid:40x30 --out " + path("l.jsonl")), 0);
    EXPECT_EQ(run("compare " + path("k.jsonl") + " " + path("l.jsonl") + " --expect-equal --out " + path("r.json")), 0);
    const auto r = document("r.json")["report"];
    EXPECT_EQ(r["verdict"], "indistinguishable");
    EXPECT_GT(r["matched"].get<int>(), 0);
}

TEST_F(Cli, SpectrumOfSphereBackscatter) {
    ASSERT_EQ(run("sls --scene " + scene("sphere3.json") + " --omega 1,0,0 --theta=-1,0,0 --out " + path("s.json")), 0);
    const auto bins = document("s.json")["spectrum"]["bins"];
    ASSERT_EQ(bins.size(), 1u);
    EXPECT_NEAR(bins[0]["sojourn"].get<double>(), -2.0, 1e-4);
}

TEST_F(Cli, TrappedLadderAndValidation) {
    ASSERT_EQ(run("trapped --scene " + scene("sphere2.json") + " --out " + path("t.json")), 0);
    const auto est = document("t.json")["estimate"];
    ASSERT_EQ(est["levels"].size(), 3u);
    for (const auto& l : est["levels"]) EXPECT_EQ(l["trapped"], 0);
    EXPECT_EQ(run("validate --scene " + scene("two_spheres3.json") + " --out " + path("v.json")), 0);
    EXPECT_EQ(document("v.json")["report"]["passed"], true);
}

TEST_F(Cli, RegularityAndConjugateReports) {
    ASSERT_EQ(run("regularity --scene " + scene("sphere3.json") + " --entry=-10,0,0,0.999,0.0447,0 --out " + path("r.json")),
              0);
    const auto r = document("r.json")["result"];
    EXPECT_EQ(r["regular"], true);
    EXPECT_EQ(r["position_by_direction"]["rank"], 2);
    EXPECT_TRUE(r["position_by_direction"].contains("singular_values"));
    EXPECT_TRUE(r["position_by_direction"].contains("tolerance"));
    ASSERT_EQ(run("regularity --scene " + scene("ellipsoid_sphere3.json") + " --spec grid:10x60 --out " + path("s.json")), 0);
    EXPECT_EQ(document("s.json")["result"]["fraction_regular"].get<double>(), 1.0);
    ASSERT_EQ(run("conjugate --scene " + scene("two_spheres2.json") + " --entry 0.5,0.52 --out " + path("c.json")), 0);
    EXPECT_EQ(document("c.json")["result"]["any_conjugate"], false);
}

TEST_F(Cli, BadInputExitsTwo) {
    const std::string bad = path("bad.json");
    std::ofstream(bad) << R"({"name":"x","dimension":3,"ball_radius":10,"obstacles":[],"extra":1})";
    EXPECT_EQ(run("validate --scene " + bad), 2);
    EXPECT_EQ(run("trace --scene " + path("missing.json") + " --entry 0.5,0.5"), 2);
    EXPECT_EQ(run("trace --scene " + scene("sphere3.json") + " --entry 1,2"), 2);
    EXPECT_EQ(run("trace --scene " + scene("sphere3.json") + " --entry=-9,0,0,1,0,0"), 2);
    EXPECT_EQ(run("lens --scene " + scene("sphere3.json") + " --spec grid:0x3"), 2);
    EXPECT_EQ(run("lens --scene " + scene("sphere3.json") + " --spec lattice:3"), 2);
    EXPECT_EQ(run("lens --scene " + scene("sphere3.json") + " --bogus 1"), 2);
    EXPECT_EQ(run("render --scene " + scene("sphere3.json") + " --svg " + path("x.svg")), 2);
    EXPECT_EQ(run(""), 2);
}

TEST_F(Cli, NumericFailureExitsThree) {
    // Cut off before the first reflection: the orbit never exits, so no differential exists.
    EXPECT_EQ(run("regularity --scene " + scene("sphere3.json") + " --entry=-10,0,0,1,0,0 --tmax 5"), 3);
}

TEST_F(Cli, RepeatedInvocationsGiveIdenticalBodies) {
    const std::vector<std::pair<std::string, std::string>> cmds = {
        {"lens --scene " + scene("ellipse_disc2.json") + " --spec mc:300 --seed 11", "a.jsonl"},
        {"lens --scene " + scene("ellipsoid_sphere3.json") + " --spec grid:6x30", "b.csv"},
        {"trace --scene " + scene("two_spheres2.json") + " --entry 0.5,0.52", "c.jsonl"},
        {"sls --scene " + scene("ellipse_disc2.json") + " --omega 1,0 --theta 0,1 --spec grid:501x1", "d.json"},
        {"render --scene " + scene("ellipse_disc2.json") + " --spec grid:6x4", "e.svg"},
    };
    for (const auto& [args, name] : cmds) {
        ASSERT_EQ(run(args + " --out " + path("1_" + name)), 0) << args;
        ASSERT_EQ(run(args + " --out " + path("2_" + name)), 0) << args;
        EXPECT_FALSE(body("1_" + name).empty()) << args;
        EXPECT_EQ(body("1_" + name), body("2_" + name)) << args;
    }
}
