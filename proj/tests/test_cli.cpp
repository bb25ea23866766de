#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "phonoq/cli.hpp"

using namespace phonoq;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "phonoq");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("phonoq_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  void write(const std::string& name, const std::string& text) const { io::write_file(path(name), text); }
  fs::path dir;
};

}  // namespace

TEST_F(CliTest, SynthThenFitTlsWithinTwoSigma) {
  ASSERT_EQ(run({"synth", "--preset", "table1-grid", "--seed", "7", "--out-dir", path("t1"), "-o", path("s.json")}).code, 0);
  const auto r = run({"fit-tls", "-i", path("t1/loss.csv"), "-o", path("fit.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = io::read_json(path("fit.json"));
  EXPECT_EQ(j.at("version").get<std::string>(), io::version());
  EXPECT_EQ(j.at("inputs").at(0).at("fnv1a").get<std::string>(), io::hash_file(path("t1/loss.csv")));
  EXPECT_TRUE(j.contains("seed"));
  const auto& p = j.at("result").at("params");
  const std::map<std::string, double> truth = {
      {"f_delta0_diss", 1.26e-5}, {"n_c", 10.0}, {"beta", 0.56}, {"d", 1.9}, {"q_rel_t0", 8.3e6}};
  for (const auto& [k, v] : truth)
    EXPECT_LE(std::abs(p.at(k).at("value").get<double>() - v), 2 * p.at(k).at("sigma").get<double>()) << k;
  EXPECT_TRUE(fs::exists(path("fit.plot.csv")));
  const auto plot = io::read_csv(path("fit.plot.csv"));
  EXPECT_EQ(plot.rows.size(), 210u);
  EXPECT_TRUE(plot.has("model_q_i"));
}

TEST_F(CliTest, SweepPlanExample) {
  const auto r = run({"sweep-plan", "--fr", "499.5e6", "--kappa", "2e3", "--span", "1e4", "--n", "201"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = io::json::parse(r.out).at("result");
  EXPECT_EQ(j.at("points_hz").size(), 201u);
  EXPECT_NEAR(j.at("w").get<double>(), 5.0, 1e-9);
}

TEST_F(CliTest, CsvFormatEmitsPlotTable) {
  const auto r = run({"--format", "csv", "sweep-plan", "--fr", "1e9", "--kappa", "1e3", "--span", "5e3", "--n", "11"});
  ASSERT_EQ(r.code, 0);
  const auto t = io::parse_csv(r.out);
  EXPECT_EQ(t.rows.size(), 11u);
  EXPECT_TRUE(t.has("freq_hz"));
}

TEST_F(CliTest, MissingInputNamesPath) {
  const auto r = run({"fit-tls", "-i", path("nope.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(path("nope.csv")), std::string::npos);
}

TEST_F(CliTest, UnknownSubcommandIsUsageError) {
  const auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 64);
  EXPECT_NE(r.err.find("usage:"), std::string::npos);
  EXPECT_EQ(run({}).code, 64);
}

TEST_F(CliTest, BadFlagIsInputError) { EXPECT_EQ(run({"sweep-plan", "--fr", "abc"}).code, 2); }

TEST_F(CliTest, EvenPointCountRejected) {
  EXPECT_EQ(run({"sweep-plan", "--fr", "1e9", "--kappa", "1e3", "--span", "5e3", "--n", "10"}).code, 2);
}

TEST_F(CliTest, ValidateReports) {
  write("ok.json", R"({"f_delta0_diss":1.26e-5,"beta":0.56,"n_c":10,"d":1.9,"q_rel_t0":8.3e6,"t0_k":0.25})");
  auto r = run({"validate", path("ok.json")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "ok\n");

  write("neg.json", R"({"f_delta0_diss":1.26e-5,"beta":0.56,"n_c":-3,"d":1.9,"q_rel_t0":8.3e6})");
  r = run({"validate", path("neg.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("n_c"), std::string::npos);

  write("d5.json", R"({"f_delta0_diss":1.26e-5,"beta":0.56,"n_c":10,"d":5,"q_rel_t0":8.3e6})");
  r = run({"validate", path("d5.json")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("warning: d = 5 outside the fit bounds"), std::string::npos);

  write("beta.json", R"({"f_delta0_diss":1.26e-5,"beta":2.5,"n_c":10,"d":1.9,"q_rel_t0":8.3e6})");
  r = run({"validate", path("beta.json")});
  EXPECT_NE(r.out.find("beta = 2.5 outside"), std::string::npos);

  write("broken.json", R"({"beta": )");
  EXPECT_EQ(run({"validate", path("broken.json")}).code, 2);
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  ASSERT_EQ(run({"synth", "--preset", "fig1g-reflection", "--out-dir", path("a"), "-o", path("a.json")}).code, 0);
  ASSERT_EQ(run({"synth", "--preset", "fig1g-reflection", "--out-dir", path("b"), "-o", path("b.json")}).code, 0);
  EXPECT_EQ(io::read_file(path("a/trace.csv")), io::read_file(path("b/trace.csv")));
  const auto r1 = run({"fit-s11", "-i", path("a/trace.csv")});
  const auto r2 = run({"fit-s11", "-i", path("a/trace.csv")});
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_EQ(r1.out, r2.out);
  const auto m1 = run({"--seed", "5", "mc-variance", "--ratio", "10", "--trials", "500", "--bootstrap", "50"});
  const auto m2 = run({"--seed", "5", "mc-variance", "--ratio", "10", "--trials", "500", "--bootstrap", "50"});
  EXPECT_EQ(m1.out, m2.out);
  EXPECT_EQ(io::json::parse(m1.out).at("seed").get<int>(), 5);
}

TEST_F(CliTest, EveryFitCommandRunsOnItsPreset) {
  struct Case {
    std::string preset;
    std::vector<std::string> args;
  };
  const std::vector<Case> cases = {
      {"fig3-freqshift", {"fit-freqshift", "-i", "freqshift.csv"}},
      {"fig3-freqshift", {"fit-participation", "-i", "participation.csv"}},
      {"appB-radiation", {"fit-radiation", "-i", "radiation.csv"}},
      {"fig4-ringdown", {"fit-thermal", "-i", "thermal.csv", "--loss", "ringdown_loss.csv"}},
      {"appF-gaincal", {"calib", "-i", "sweep.csv", "--s21", "s21.csv"}},
      {"17-resonance-admittance", {"vfit", "-i", "admittance.csv", "--pairs", "17"}},
      {"sec5-ringdown", {"ringdown", "-i", ".", "--fr", "500e6"}},
  };
  for (const auto& c : cases) {
    const auto d = path(c.preset);
    if (!fs::exists(d)) {
      ASSERT_EQ(run({"synth", "--preset", c.preset, "--out-dir", d, "-o", d + ".json"}).code, 0);
    }
    auto args = c.args;
    for (auto& a : args)
      if (a.find(".csv") != std::string::npos || a == ".") a = (fs::path(d) / a).lexically_normal().string();
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << c.args[0] << ": " << r.err;
    const auto j = io::json::parse(r.out);
    EXPECT_TRUE(j.at("converged").get<bool>()) << c.args[0];
    EXPECT_FALSE(j.at("inputs").empty()) << c.args[0];
  }
}

TEST_F(CliTest, NonConvergedFitExitsThree) {
  // Too few samples for the requested pole count.
  write("y.csv", "freq_hz,re_siemens,im_siemens\n1e8,1e-3,1e-3\n2e8,1e-3,2e-3\n3e8,1e-3,3e-3\n");
  EXPECT_EQ(run({"vfit", "-i", path("y.csv"), "--pairs", "5"}).code, 3);
}
