#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hamlab/cli.hpp"

using namespace hamlab;

namespace {

std::string src(const std::string& rel) { return std::string(HAMLAB_SOURCE_DIR) + "/" + rel; }

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream o, e;
  int c = cli::dispatch(std::move(args), o, e);
  return {c, o.str(), e.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("hamlab_cli_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Cli, ArithPsiExamples) {
  auto r = run({"arith", "psi", "--alpha", "1,0.6180339887", "--Q", "1"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("psi=2.6180339", 0), 0u) << r.out;

  auto res = run({"arith", "psi", "--alpha", "1,0.5", "--Q", "2"});
  EXPECT_EQ(res.code, 2);
  EXPECT_NE(res.out.find("resonant k=1,-2"), std::string::npos) << res.out;

  auto budget = run({"--budget", "100", "arith", "psi", "--alpha", "1,0.6180339887", "--Q", "5"});
  EXPECT_EQ(budget.code, 3);
}

TEST(Cli, ArithOthers) {
  auto d = run({"arith", "delta", "--alpha", "1,0.6180339887498949", "--x", "3"});
  EXPECT_EQ(d.code, 0);
  EXPECT_EQ(d.out.rfind("delta=1.14589803", 0), 0u) << d.out;

  auto r = run({"arith", "resonance", "--alpha", "0,1", "--qmax", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("resonant=true k=1,0"), std::string::npos);

  auto nr = run({"arith", "resonance", "--alpha", "1,0.6180339887498949", "--qmax", "10"});
  EXPECT_EQ(nr.code, 0);
  EXPECT_NE(nr.out.find("k=5,-8"), std::string::npos);

  auto g = run({"arith", "dioph", "--alpha", "1,0.6180339887498949", "--tau", "1", "--qmax", "20"});
  EXPECT_EQ(g.code, 0);
  EXPECT_EQ(g.out.rfind("gamma=0.38196601", 0), 0u) << g.out;
}

TEST(Cli, UsageErrors) {
  auto missing = run({"simulate", "--eps", "0.1"});
  EXPECT_EQ(missing.code, 64);
  EXPECT_NE(missing.err.find("--model"), std::string::npos);
  EXPECT_NE(missing.err.find("Usage"), std::string::npos);

  EXPECT_EQ(run({"arith", "psi", "--alpha", "1,0.5", "--Q", "2", "--bogus"}).code, 64);
  EXPECT_EQ(run({}).code, 64);
  EXPECT_EQ(run({"arith", "psi", "--alpha", "1,x", "--Q", "2"}).code, 64);
  EXPECT_EQ(run({"arith", "psi", "--alpha", "0,0", "--Q", "2"}).code, 64);
  EXPECT_EQ(run({"--override", "bogus=1", "arith", "psi", "--alpha", "1,0.7", "--Q", "1"}).code, 64);
}

TEST(Cli, HelpOnEveryLevel) {
  for (auto args : std::vector<std::vector<std::string>>{
           {"--help"}, {"arith", "--help"}, {"arith", "psi", "--help"}, {"check", "g3", "--help"}, {"experiment", "--help"}}) {
    auto r = run(args);
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("Usage"), std::string::npos);
  }
  EXPECT_NE(run({"check", "g3", "--help"}).out.find("--rho"), std::string::npos);
}

TEST(Cli, ModelValidate) {
  auto ok = run({"model", "validate", src("models/coupled.json")});
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("modes=4"), std::string::npos) << ok.out;

  auto dir = scratch("model");
  std::ofstream(dir / "bad.json") << R"({"n":2,"alpha":[2,1],"modes":[]})";
  EXPECT_EQ(run({"model", "validate", (dir / "bad.json").string()}).code, 65);
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_EQ(run({"model", "validate", (dir / "broken.json").string()}).code, 65);
  EXPECT_EQ(run({"model", "validate", (dir / "absent.json").string()}).code, 65);
}

TEST(Cli, ChecksUseExitCodes) {
  auto h = run({"check", "g1", "--model", src("models/conditions/g1_cos_theta1.json")});
  EXPECT_EQ(h.code, 0) << h.out << h.err;
  EXPECT_NE(h.out.find("holds=true"), std::string::npos);
  EXPECT_NE(h.out.find("witness.theta_bar="), std::string::npos);

  auto f = run({"check", "g2", "--model", src("models/conditions/g2_square.json")});
  EXPECT_EQ(f.code, 1);
  EXPECT_NE(f.out.find("holds=false"), std::string::npos);

  auto dir = scratch("check");
  auto g3 = run({"check", "g3", "--model", src("models/conditions/g3_quadratic.json"), "--m", "2", "--json",
                 (dir / "g3.json").string()});
  EXPECT_EQ(g3.code, 0);
  EXPECT_NE(g3.out.find("warning="), std::string::npos);
  auto j = nlohmann::json::parse(slurp(dir / "g3.json"));
  EXPECT_EQ(j["condition"], "G3");
  EXPECT_TRUE(j["holds"].get<bool>());

  EXPECT_EQ(run({"check", "g4", "--model", src("models/conditions/g4_rank_one.json")}).code, 1);
  // G1 on a non-resonant alpha without --d is a usage error
  EXPECT_EQ(run({"check", "g1", "--model", src("models/g2_golden.json")}).code, 64);
}

TEST(Cli, SimulateWritesTrajectory) {
  auto dir = scratch("sim");
  auto out = (dir / "traj.csv").string();
  auto r = run({"simulate", "--model", src("models/constant_force.json"), "--eps", "0.01", "--theta0", "0.25,0", "--I0",
                "0,0", "--T", "1", "--h", "0.1", "--record-every", "5", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  auto csv = slurp(out);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,theta_1,theta_2,I_1,I_2,H,driftI");
  int rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 3);  // t = 0, 0.5, 1
  EXPECT_NE(r.out.find("steps=10"), std::string::npos);
  // last drift is 2 pi eps T
  double drift = std::stod(last.substr(last.rfind(',') + 1));
  EXPECT_NEAR(drift, kTwoPi * 0.01, 1e-12);

  auto bad = run({"simulate", "--model", src("models/coupled.json"), "--eps", "0.01", "--theta0", "0,0", "--I0", "0,0",
                  "--T", "1", "--h", "0.1", "--scheme", "splitting", "--out", out});
  EXPECT_EQ(bad.code, 70);
  EXPECT_NE(bad.err.find("SchemeUnavailable"), std::string::npos);
}

TEST(Cli, NormalformReport) {
  auto dir = scratch("nf");
  auto r = run({"normalform", "--model", src("models/g2_golden.json"), "--eps", "0.01", "--probes", "8", "--json",
                (dir / "nf.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* key : {"K=", "smallest_divisor=", "remainder=", "chi_weighted_norm="})
    EXPECT_NE(r.out.find(key), std::string::npos) << key;
  auto j = nlohmann::json::parse(slurp(dir / "nf.json"));
  EXPECT_GT(j["remainder"].get<double>(), 0.0);
  EXPECT_EQ(run({"normalform", "--model", src("models/g2_golden.json"), "--eps", "0.01", "--mode", "res:x"}).code, 65);
}

TEST(Cli, ExperimentAndFitDeterministic) {
  auto a = scratch("exp_a"), b = scratch("exp_b");
  auto cfg = src("configs/diffusion_constant_force.json");
  auto r1 = run({"experiment", "diffusion", "--config", cfg, "--out", a.string()});
  ASSERT_EQ(r1.code, 0) << r1.err;
  auto r2 = run({"--threads", "3", "experiment", "diffusion", "--config", cfg, "--out", b.string()});
  ASSERT_EQ(r2.code, 0);
  for (const char* f : {"records.csv", "fit.json", "summary.txt"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;

  auto fit = run({"fit", "--records", (a / "records.csv").string()});
  ASSERT_EQ(fit.code, 0) << fit.err;
  EXPECT_NE(fit.out.find("n_points=3"), std::string::npos);
  auto slope = std::stod(fit.out.substr(fit.out.find("slope=") + 6));
  EXPECT_NEAR(slope, -1.0, 1e-3);

  EXPECT_EQ(run({"experiment", "stability", "--config", cfg, "--out", a.string()}).code, 64);
  EXPECT_EQ(run({"experiment", "diffusion", "--config", src("configs/missing.json"), "--out", a.string()}).code, 65);
}
