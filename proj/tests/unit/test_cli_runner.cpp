#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjm/cli.hpp"
#include "hjm/config.hpp"
#include "hjm/runner.hpp"

namespace fs = std::filesystem;
using namespace hjm;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hjmlab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

ExperimentConfig from_text(const std::string& text) {
  std::istringstream in(text);
  return build_config(parse_config_text(in));
}

struct Cli {
  int code = -1;
  std::string out, err;
};

Cli cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hjmlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Cli r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace

TEST(Config, MinimalFileTakesDefaults) {
  const ExperimentConfig c = from_text("experiment = simulate\n");
  EXPECT_EQ(c.experiment, "simulate");
  EXPECT_EQ(c.steps, 100);
  EXPECT_EQ(c.factors, 8);
  EXPECT_EQ(c.paths, 1000);
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.volatility, "sine");
  EXPECT_DOUBLE_EQ(c.initial_rate, 0.03);
  EXPECT_EQ(c.psi_mode, "pointwise");
}

TEST(Config, CounterexampleDefaultsToFineGrid) {
  EXPECT_EQ(from_text("experiment = counterexample").steps, 10000);
  EXPECT_EQ(from_text("experiment = counterexample\nsteps = 2000").steps, 2000);
}

TEST(Config, CommentsAndWhitespace) {
  const ExperimentConfig c = from_text("# lab\n\n  experiment=divergence   # trailing\nk_max = 4\n");
  EXPECT_EQ(c.experiment, "divergence");
  EXPECT_EQ(c.k_max, 4);
}

TEST(Config, ErrorsCarryLineNumbersAndAreAggregated) {
  try {
    from_text("experiment = simulate\nsteps = 1\nsigma0_typo = 0.3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.issues().size(), 2u);
    EXPECT_EQ(e.issues()[0].line, 2);
    EXPECT_EQ(e.issues()[0].key, "steps");
    EXPECT_EQ(e.issues()[1].line, 3);
    EXPECT_EQ(e.issues()[1].key, "sigma0_typo");
    const std::string what = e.what();
    EXPECT_NE(what.find("line 2"), std::string::npos);
    EXPECT_NE(what.find("sigma0_typo"), std::string::npos);
  }
}

TEST(Config, MissingExperiment) {
  try {
    from_text("steps = 50\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.issues().size(), 1u);
    EXPECT_EQ(e.issues()[0].key, "experiment");
  }
}

TEST(Config, MalformedLineAndBadValues) {
  EXPECT_THROW(from_text("experiment simulate"), ConfigError);
  EXPECT_THROW(from_text("experiment = simulate\nsteps = ten"), ConfigError);
  EXPECT_THROW(from_text("experiment = simulate\npsi_mode = sometimes"), ConfigError);
  EXPECT_THROW(from_text("experiment = replicate\nsteps = 100\nrefine = 3"), ConfigError);
  EXPECT_THROW(from_text("experiment = bagchi-check"), ConfigError);
  EXPECT_THROW(from_text("experiment = counterexample\nsteps = 500"), ConfigError);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"not-an-experiment"}).code, kExitUsage);
  EXPECT_EQ(cli({"simulate", "--steps", "1"}).code, kExitUsage);
  const fs::path dir = scratch("badcfg");
  std::ofstream(dir / "bad.cfg") << "experiment = simulate\nsigma0_typo = 1\n";
  const Cli r = cli({"simulate", "--config", (dir / "bad.cfg").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(cli({"--help"}).code, kExitOk); }

TEST(Cli, SeedPrecedence) {
  const fs::path dir = scratch("seed");
  std::ofstream(dir / "c.cfg") << "experiment = counterexample\nseed = 3\nsteps = 1000\npaths = 5\n";
  const std::string cfg = (dir / "c.cfg").string();
  auto seed_of = [&](const std::vector<std::string>& extra) {
    std::vector<std::string> args{"counterexample", "--config", cfg, "--out", (dir / "o").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    cli(args);
    return nlohmann::json::parse(slurp(dir / "o" / "manifest.json"))["config"]["seed"].get<std::string>();
  };
  unsetenv("LAB_SEED");
  EXPECT_EQ(seed_of({}), "3");
  setenv("LAB_SEED", "11", 1);
  EXPECT_EQ(seed_of({}), "11");
  EXPECT_EQ(seed_of({"--seed", "19"}), "19");
  unsetenv("LAB_SEED");
}

TEST(Runner, CounterexampleIsByteReproducible) {
  const fs::path a = scratch("cx_a"), b = scratch("cx_b");
  ASSERT_NE(cli({"counterexample", "--paths", "100", "--seed", "7", "--out", a.string()}).code, kExitUsage);
  ASSERT_NE(cli({"counterexample", "--paths", "100", "--seed", "7", "--out", b.string()}).code, kExitUsage);
  const std::string first = slurp(a / "counterexample.csv");
  EXPECT_EQ(lines(a / "counterexample.csv").size(), 101u);
  EXPECT_EQ(first, slurp(b / "counterexample.csv"));
}

TEST(Runner, ThreadCountDoesNotChangeOutput) {
  const fs::path one = scratch("t1"), four = scratch("t4");
  for (const auto& [dir, threads] : {std::pair{one, "1"}, std::pair{four, "4"}}) {
    cli({"nonreplicable", "--paths", "24", "--steps", "40", "--factors", "4", "--threads", threads, "--out",
         dir.string()});
  }
  EXPECT_EQ(slurp(one / "claims.csv"), slurp(four / "claims.csv"));
  for (const auto& [dir, threads] : {std::pair{one, "1"}, std::pair{four, "3"}}) {
    cli({"simulate", "--paths", "20", "--steps", "30", "--factors", "3", "--threads", threads, "--out",
         dir.string()});
  }
  EXPECT_EQ(slurp(one / "martingale.csv"), slurp(four / "martingale.csv"));
}

TEST(Runner, DivergenceTableHasKNondecreasingRows) {
  ExperimentConfig c = from_text("experiment = divergence\nfactors = 64\nsteps = 128\nk_max = 10\n");
  c.out = scratch("div");
  const RunManifest m = run_experiment(c);
  EXPECT_TRUE(m.passed());
  const auto rows = lines(c.out / "divergence.csv");
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0], "K,min_norm_sq");
  double prev = 0.0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double v = std::stod(rows[k].substr(rows[k].find(',') + 1));
    EXPECT_GE(v, prev);
    EXPECT_GE(v, static_cast<double>(k) - 1.0);
    prev = v;
  }
}

TEST(Runner, ZeroClaimHasZeroResidualColumn) {
  ExperimentConfig c = from_text("experiment = replicate\nclaim = zero\nfactors = 4\nsteps = 40\npaths = 10\n");
  c.out = scratch("zero");
  const RunManifest m = run_experiment(c);
  EXPECT_TRUE(m.passed());
  const auto rows = lines(c.out / "replication.csv");
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0], "path,claim,hedge_terminal,residual");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string residual = rows[r].substr(rows[r].rfind(',') + 1);
    EXPECT_EQ(std::stod(residual), 0.0) << rows[r];
  }
}

TEST(Runner, ManifestListsEveryFileWritten) {
  for (const std::string experiment : {"simulate", "spectrum", "replicate"}) {
    ExperimentConfig c = from_text("experiment = " + experiment +
                                   "\nfactors = 3\nsteps = 20\npaths = 6\nspectrum_stride = 5\nrefine = 2,1\n");
    c.out = scratch("manifest_" + experiment);
    const RunManifest m = run_experiment(c);
    std::set<std::string> listed;
    const auto j = nlohmann::json::parse(slurp(c.out / "manifest.json"));
    for (const auto& f : j["files"]) {
      listed.insert(f["name"].get<std::string>());
      EXPECT_EQ(lines(c.out / f["name"].get<std::string>()).size(), f["rows"].get<std::size_t>() + 1);
    }
    for (const auto& entry : fs::directory_iterator(c.out)) {
      const std::string name = entry.path().filename().string();
      if (name != "manifest.json") EXPECT_TRUE(listed.count(name)) << experiment << ": " << name;
    }
    EXPECT_EQ(j["experiment"], experiment);
    EXPECT_EQ(j["passed"].get<bool>(), m.passed());
    EXPECT_EQ(j["config"]["steps"], "20");
  }
}

TEST(Runner, BagchiCheckReportsFourChecks) {
  ExperimentConfig c =
      from_text("experiment = bagchi-check\nvolatility = sign-switching\nfactors = 8\nsteps = 20\npaths = 8\n");
  c.out = scratch("bagchi");
  const RunManifest m = run_experiment(c);
  std::set<std::string> names;
  for (const auto& chk : m.checks) names.insert(chk.name);
  EXPECT_EQ(names, (std::set<std::string>{"rates_nonnegative", "discounted_le_one", "loading_bound", "strategy_chain"}));
  EXPECT_EQ(lines(c.out / "admissibility.csv").size(), 5u);
}
