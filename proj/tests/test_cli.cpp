#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "nonscat/experiments.hpp"

namespace fs = std::filesystem;
namespace ex = nonscat::exp;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("nonscat_test_" + name);
    fs::remove_all(p);
    return p;
}

nlohmann::json manifest(const fs::path& dir)
{
    std::ifstream in(dir / "manifest.json");
    return nlohmann::json::parse(in);
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int shell(const std::string& args)
{
    const int r = std::system((std::string(NONSCAT_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(r);
}

}  // namespace

TEST(Config, ParsesSectionsAndValidates)
{
    const auto c = ex::Config::from_string("[mesh]\nh = 0.02\nlevels = 2\n[medium]\neps = 0.02, 0.05\n");
    EXPECT_DOUBLE_EQ(c.num("mesh.h", 1.0, 0.0, 1.0), 0.02);
    EXPECT_EQ(c.integer("mesh.levels", 1, 1, 5), 2);
    EXPECT_EQ(c.list("medium.eps", {}, 0.0, 1.0), (std::vector<double>{0.02, 0.05}));
    EXPECT_DOUBLE_EQ(c.num("solver.M", 24, 1, 100), 24.0);
    EXPECT_THROW(c.num("mesh.h", 1.0, 0.05, 1.0), ex::ConfigError);
    EXPECT_THROW(c.integer("mesh.h", 1, 0, 5), ex::ConfigError);
    EXPECT_THROW(c.str("mesh.h", "", {"a", "b"}), ex::ConfigError);
}

TEST(Config, RejectsGarbage)
{
    const auto c = ex::Config::from_string("[mesh]\nh = 0.02x\n");
    EXPECT_THROW(c.num("mesh.h", 1.0, 0.0, 1.0), ex::ConfigError);
    EXPECT_THROW(ex::Config::from_string("[mesh\nh = 1\n"), ex::ConfigError);
    EXPECT_THROW(ex::Config::from_file("/nonexistent/x.ini"), ex::ConfigError);
}

TEST(Config, GridSyntaxAndUnusedKeys)
{
    EXPECT_EQ(ex::Config::parse_list("v", "1:3:5"), (std::vector<double>{1, 1.5, 2, 2.5, 3}));
    EXPECT_THROW(ex::Config::parse_list("v", "1:3:1"), ex::ConfigError);
    const auto c = ex::Config::from_string("[a]\nx = 1\ny = 2\n");
    c.num("a.x", 0, 0, 10);
    EXPECT_EQ(c.unused(), std::vector<std::string>{"a.y"});
}

TEST(Run, ManifestOnSuccess)
{
    const auto out = scratch("ok");
    ex::RunOptions opt;
    opt.out = out;
    const auto r = ex::run("nondegeneracy-scan", ex::Config{}, opt);
    EXPECT_EQ(r.exit_code, 0);
    const auto m = manifest(out);
    EXPECT_EQ(m["status"], "pass");
    EXPECT_EQ(m["version"], NONSCAT_VERSION);
    EXPECT_EQ(m["seed"], 1);
    EXPECT_EQ(m["checks"].size(), 2u);
    EXPECT_TRUE(fs::exists(out / "scan.csv"));
    EXPECT_EQ(m["metrics"]["zeros"], 2.0);
}

TEST(Run, ManifestOnConfigError)
{
    const auto out = scratch("err");
    ex::RunOptions opt;
    opt.out = out;
    const auto r = ex::run("mie-validate", ex::Config::from_string("[mesh]\nh = 5\n"), opt);
    EXPECT_EQ(r.exit_code, 2);
    const auto m = manifest(out);
    EXPECT_EQ(m["status"], "error");
    EXPECT_NE(m["error"].get<std::string>().find("mesh.h"), std::string::npos);
    EXPECT_EQ(ex::run("no-such-experiment", ex::Config{}, opt).exit_code, 2);
}

TEST(Run, FailingCheckGivesExitOne)
{
    // one fit size cannot show a decrease, two equal sizes cannot be strictly decreasing
    const auto out = scratch("fail");
    ex::RunOptions opt;
    opt.out = out;
    const auto r = ex::run("herglotz-fit", ex::Config::from_string("[solver]\nM = 16, 16\n"), opt);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_EQ(manifest(out)["status"], "fail");
}

TEST(Run, SeedDeterminism)
{
    const auto c = ex::Config::from_string("[hodograph]\ncount = 5\nidentity_count = 2\nfem_demo = false\n");
    ex::RunOptions a, b, d;
    a.out = scratch("seed_a");
    b.out = scratch("seed_b");
    d.out = scratch("seed_d");
    a.seed = b.seed = 11;
    d.seed = 12;
    ASSERT_EQ(ex::run("hodograph-certify", c, a).exit_code, 0);
    ASSERT_EQ(ex::run("hodograph-certify", c, b).exit_code, 0);
    ASSERT_EQ(ex::run("hodograph-certify", c, d).exit_code, 0);
    EXPECT_EQ(slurp(a.out / "certificates.json"), slurp(b.out / "certificates.json"));
    EXPECT_EQ(slurp(a.out / "identities.csv"), slurp(b.out / "identities.csv"));
    EXPECT_NE(slurp(a.out / "certificates.json"), slurp(d.out / "certificates.json"));
    EXPECT_EQ(manifest(a.out)["seed"], 11);
}

TEST(Sweep, ParallelRowsMatchSerialInOrder)
{
    const std::vector<double> ks{9, 1, 5, 3};
    ex::RunOptions s, p;
    s.out = scratch("sweep_s");
    p.out = scratch("sweep_p");
    EXPECT_EQ(ex::sweep("radial-te", "k", ks, ex::Config{}, s, 1), 0);
    EXPECT_EQ(ex::sweep("radial-te", "k", ks, ex::Config{}, p, 4), 0);
    const std::string a = slurp(s.out / "sweep.csv");
    EXPECT_EQ(a, slurp(p.out / "sweep.csv"));
    std::istringstream in(a);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("k,status,", 0), 0u);
    std::vector<std::string> first;
    while (std::getline(in, line)) first.push_back(line.substr(0, line.find(',')));
    EXPECT_EQ(first, (std::vector<std::string>{"9", "1", "5", "3"}));
}

TEST(Sweep, RejectsBadParameter)
{
    ex::RunOptions o;
    o.out = scratch("sweep_bad");
    EXPECT_EQ(ex::sweep("radial-te", "q", {1}, ex::Config{}, o), 2);
    EXPECT_EQ(ex::sweep("hodograph-certify", "k", {1}, ex::Config{}, o), 2);
    EXPECT_EQ(manifest(o.out)["status"], "error");
}

TEST(Sweep, PointErrorsAreRecordedAndSweepContinues)
{
    ex::RunOptions o;
    o.out = scratch("sweep_err");
    // k = 0 is outside the accepted range, the other point runs
    EXPECT_EQ(ex::sweep("nondegeneracy-scan", "k", {0.0, 2.0}, ex::Config{}, o), 2);
    const std::string csv = slurp(o.out / "sweep.csv");
    EXPECT_NE(csv.find("\n0,error,"), std::string::npos);
    EXPECT_NE(csv.find("\n2,pass,"), std::string::npos);
}

TEST(Binary, ExitCodes)
{
    const auto out = scratch("bin");
    EXPECT_EQ(shell("run nondegeneracy-scan --out " + out.string()), 0);
    EXPECT_EQ(shell("run nondegeneracy-scan --seed 3 --out " + out.string()), 0);
    EXPECT_EQ(manifest(out)["seed"], 3);
    EXPECT_EQ(shell("run nope --out " + out.string()), 2);
    EXPECT_EQ(shell("run mie-validate --config /nonexistent.ini --out " + out.string()), 2);
    EXPECT_EQ(shell("frobnicate"), 2);
    EXPECT_EQ(shell("sweep radial-te --param k --values 2,4 --out " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / "sweep.csv"));
    EXPECT_EQ(shell("sweep radial-te --param k --values x --out " + out.string()), 2);
}

TEST(Binary, ShippedConfigsParse)
{
    const fs::path dir = fs::path(NONSCAT_SOURCE_DIR) / "configs";
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".ini") continue;
        const auto c = ex::Config::from_file(e.path());
        EXPECT_TRUE(ex::registry().count(e.path().stem().string())) << e.path();
        EXPECT_FALSE(c.echo().empty());
        ++n;
    }
    EXPECT_EQ(n, 9);
}
