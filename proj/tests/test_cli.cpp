#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vasiplab/cli/app.hpp"

using namespace vasiplab;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string stderr_text;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vasiplab_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(VASIPLAB_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

nlohmann::json report(const fs::path& out, const std::string& cmd) { return nlohmann::json::parse(slurp(out / (cmd + ".json"))); }

}  // namespace

TEST(CliGolden, ParamsMatchesLibrary) {
  const auto dir = scratch("params");
  const auto out = dir / "out";
  ASSERT_EQ(run("params --alpha 0.25 --d 1 --out " + out.string(), dir).code, 0);
  const auto r = report(out, "params");
  const auto p = vasip_gamma(0.25, 1, 1e-4);
  EXPECT_EQ(r["result"]["params"], to_json(p));
  EXPECT_EQ(r["result"]["chain"], to_json(check_constraint_chain(p)));
  EXPECT_NEAR(r["result"]["params"]["gamma_inf"].get<double>(), 0.997655, 1e-5);
  EXPECT_TRUE(r["pass"].get<bool>());
  EXPECT_EQ(slurp(out / "constraints.csv").rfind("group,name,slack,holds,boundary\n", 0), 0u);
}

TEST(CliGolden, UlamDensityMatchesLibrary) {
  const auto dir = scratch("ulam");
  const auto cfg = write_config(dir, R"({"ulam": {"beta": 0.2, "alpha_max": 0.49, "n_bins": 512}})");
  const auto out = dir / "out";
  ASSERT_EQ(run("ulam --config " + cfg.string() + " --out " + out.string(), dir).code, 0);
  const DensityGrid h = invariant_density(UlamOperator(PMParam(0.2, 0.49), 512));
  std::istringstream csv(slurp(out / "ulam_density.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "bin,x,density");
  Eigen::Index b = 0;
  while (std::getline(csv, line)) {
    const auto last = line.rfind(',');
    EXPECT_EQ(std::stod(line.substr(last + 1)), h[b]) << b;
    ++b;
  }
  EXPECT_EQ(b, 512);
}

TEST(CliGolden, DecayMatchesLibrary) {
  const auto dir = scratch("decay");
  const auto cfg = write_config(dir, R"({"schedule": {"kind": "constant", "beta": 0.25, "alpha_max": 0.49},
    "decay": {"kind": "A4", "n_min": 1, "n_max": 80, "n_bins": 1024}})");
  const auto out = dir / "out";
  ASSERT_EQ(run("decay --config " + cfg.string() + " --out " + out.string(), dir).code, 0);
  const auto s = MapSchedule::constant(0.25, 0.49);
  const auto rep = check_decay(s, Observable::scalar(polynomial({-0.5, 1.0})), DecayKind::A4, 0, 0, NRange{1, 80}, 1024, {});
  EXPECT_EQ(report(out, "decay")["result"], to_json(rep));
}

TEST(CliGolden, SplitMatchesLibrary) {
  const auto dir = scratch("split");
  const auto cfg = write_config(dir, R"({"split": {"source": "matrix", "matrix": [[2, 1], [1, 0.5]]}})");
  const auto out = dir / "out";
  ASSERT_EQ(run("split --config " + cfg.string() + " --out " + out.string(), dir).code, 0);
  Eigen::MatrixXd m(2, 2);
  m << 2, 1, 1, 0.5;
  const auto r = report(out, "split");
  EXPECT_EQ(r["result"]["split"], to_json(covariance_split(m)));
  EXPECT_EQ(r["result"]["split"]["dim_w2"], 1);
}

TEST(CliGolden, BlocksDefaultToVasipExponents) {
  const auto dir = scratch("blocks");
  const auto cfg = write_config(dir, R"({"blocks": {"horizon": 12}})");
  const auto out = dir / "out";
  ASSERT_EQ(run("blocks --config " + cfg.string() + " --alpha 0.25 --d 1 --out " + out.string(), dir).code, 0);
  const auto p = vasip_gamma(0.25, 1);
  const auto r = report(out, "blocks");
  EXPECT_EQ(r["result"]["source"], "vasip_gamma");
  auto expected = to_json(block_plan(p.c, p.a, 12));
  for (const auto& [k, v] : expected.items()) EXPECT_EQ(r["result"][k], v) << k;
  EXPECT_TRUE(fs::exists(out / "blocks_summary.csv"));
}

TEST(CliDeterminism, RepeatRunsAreByteIdentical) {
  const auto dir = scratch("determinism");
  const auto cfg = write_config(dir, R"({"seed": 77,
    "schedule": {"kind": "periodic", "betas": [0.1, 0.3], "alpha_max": 0.49},
    "simulate": {"n": 2000, "m": 200, "orbit_length": 500, "n_bins": 1024}})");
  const auto a = dir / "a", b = dir / "b", c = dir / "c";
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + a.string(), dir).code, 0);
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + b.string(), dir).code, 0);
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --workers 3 --out " + c.string(), dir).code, 0);
  for (const char* f : {"orbit.csv", "trace.csv", "simulate.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(c / f)) << f;
  }
  const auto d = dir / "d";
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --seed 78 --out " + d.string(), dir).code, 0);
  EXPECT_NE(slurp(a / "trace.csv"), slurp(d / "trace.csv"));
  EXPECT_EQ(slurp(a / "orbit.csv"), slurp(d / "orbit.csv"));
  EXPECT_EQ(report(d, "simulate")["seed"], 78);
}

TEST(CliErrors, MalformedConfigWritesNothing) {
  const auto dir = scratch("malformed");
  const auto cfg = write_config(dir, R"({"schedule": {"kind": "constant", )");
  const auto out = dir / "out";
  const auto r = run("simulate --config " + cfg.string() + " --out " + out.string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(CliErrors, SchemaViolationsNameTheField) {
  const auto dir = scratch("schema");
  const auto out = dir / "out";
  struct Case {
    const char* cmd;
    const char* config;
    const char* path;
  };
  const Case cases[] = {
      {"simulate", R"({"schedule": {"kind": "constant", "beta": 0.7, "alpha_max": 0.49}})", "/schedule"},
      {"simulate", R"({"schedule": {"kind": "constant", "beta": 0.1, "alpha_max": 0.49}, "simulate": {"m": "many"}})",
       "/simulate/m"},
      {"ulam", R"({"ulam": {"beta": 0.1, "bins": 10}})", "/ulam/bins"},
      {"decay", R"({"schedule": {"kind": "constant", "beta": 0.1, "alpha_max": 0.49}, "decay": {"kind": "B7"}})",
       "/decay/kind"},
      {"quenched", R"({"schedule": {"kind": "constant", "beta": 0.1, "alpha_max": 0.49}})", "/schedule/kind"},
      {"simulate", R"({"observable": {"components": [{"type": "spline"}]}})", "/observable/components/0/type"},
      {"params", R"({"colour": 1})", "/colour"},
      {"clt", R"({})", "/schedule"},
  };
  for (const auto& c : cases) {
    const auto cfg = write_config(dir, c.config);
    const auto r = run(std::string(c.cmd) + " --config " + cfg.string() + " --out " + out.string(), dir);
    EXPECT_EQ(r.code, 2) << c.config;
    EXPECT_NE(r.stderr_text.find(c.path), std::string::npos) << r.stderr_text;
    EXPECT_FALSE(fs::exists(out)) << c.config;
  }
}

TEST(CliErrors, UsageErrorsExitTwo) {
  const auto dir = scratch("usage");
  EXPECT_EQ(run("", dir).code, 2);
  EXPECT_EQ(run("frobnicate", dir).code, 2);
  EXPECT_EQ(run("params --alpha", dir).code, 2);
  EXPECT_EQ(run("params --config /nonexistent/file.json", dir).code, 2);
  EXPECT_EQ(run("params --alpha 0.6 --out " + (dir / "out").string(), dir).code, 2);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(CliErrors, FailedCheckExitsOne) {
  const auto dir = scratch("fail");
  const auto out = dir / "out";
  // Zero margin puts gamma on the boundary, so the strict chain fails.
  EXPECT_EQ(run("params --alpha 0.25 --d 1 --margin 0 --out " + out.string(), dir).code, 1);
  const auto r = report(out, "params");
  EXPECT_FALSE(r["pass"].get<bool>());
  EXPECT_FALSE(r["result"]["chain"]["all_hold"].get<bool>());
}

TEST(CliConfig, SectionAccessors) {
  const auto j = nlohmann::json::parse(R"({"x": {"n": 1e5, "f": 0.5, "b": true, "v": [1, 2], "s": ["a"]}})");
  const cli::Section s(j.at("x"), "/x");
  EXPECT_EQ(s.integer("n"), 100000);
  EXPECT_EQ(s.positive("missing", 3), 3);
  EXPECT_THROW(s.integer("f"), ValidationError);
  EXPECT_TRUE(s.boolean("b", false));
  EXPECT_EQ(s.numbers("v"), (std::vector<double>{1, 2}));
  EXPECT_EQ(s.strings("s", {}), std::vector<std::string>{"a"});
  try {
    s.allow({"n", "f", "b", "v"});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.path(), "/x/s");
  }
}

TEST(CliConfig, ObservableParsing) {
  const auto phi = cli::parse_observable(nlohmann::json::parse(R"({"components": [
      {"type": "polynomial", "coeffs": [0, 0, 1]},
      {"type": "piecewise_linear", "knots": [0, 1], "values": [1, 3]},
      {"type": "coboundary", "psi": {"type": "polynomial", "coeffs": [0, 1]}, "beta": 0.0}]})"),
                                         "/observable");
  ASSERT_EQ(phi.dim(), 3);
  EXPECT_DOUBLE_EQ(phi.component(0).f(0.5), 0.25);
  EXPECT_DOUBLE_EQ(phi.component(1).f(0.5), 2.0);
  // psi(x) - psi(2x mod 1) at x = 0.25.
  EXPECT_DOUBLE_EQ(phi.component(2).f(0.25), -0.25);
  EXPECT_DOUBLE_EQ(cli::parse_observable(nullptr, "/observable").component(0).f(0.75), 0.25);
  EXPECT_THROW(cli::parse_observable(nlohmann::json::parse(R"({"components": []})"), "/observable"), ValidationError);
}

TEST(CliConfig, CsvWriterIsLocaleIndependent) {
  cli::CsvWriter w("a,b");
  w.row(0.1, 1e-300);
  w.row(true, "x");
  EXPECT_EQ(w.str(), "a,b\n0.10000000000000001,1e-300\ntrue,x\n");
}
