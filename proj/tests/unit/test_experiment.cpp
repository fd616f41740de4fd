#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "oscchain/error.hpp"
#include "oscchain/experiment.hpp"

using namespace oscchain;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(# small test config
[experiment]
name = small
replicas = 4
seed = 11
output = OUT

[potential.harmonic]
kind = harmonic

[potential.quartic]
kind = fput
c3 = 0.5
c4 = 1

[scaling]
n = 8
dt_micro = 0.02

[observation]
width = 0.25
horizon = 0.1

[estimators]
list = qv, bg2, spacetime, gibbs
ell = 1, 2
lags = -2:2
times = 0.02, 0.04
)";

fs::path scratch(const std::string& name) {
  fs::path p = fs::path(testing::TempDir()) / ("oscchain_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_config(const fs::path& out) {
  std::string text = kSmall;
  text.replace(text.find("OUT"), 3, out.string());
  return ExperimentConfig::parse(text);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

long error_line(const std::string& text) {
  try {
    ExperimentConfig::parse(text).validate();
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -2;
}

}  // namespace

TEST(Regime, DocumentedRegions) {
  EXPECT_EQ(classify_regime(2.0, 0.5), Regime::SbeProven);
  EXPECT_EQ(classify_regime(1.9, 0.4), Regime::SbeProven);
  EXPECT_EQ(classify_regime(1.75, 0.25), Regime::SbeConjectured);
  EXPECT_EQ(classify_regime(1.5, 0.0), Regime::SbeConjectured);
  EXPECT_EQ(classify_regime(2.0, 0.75), Regime::She);
  EXPECT_EQ(classify_regime(1.8, 0.4), Regime::She);
  EXPECT_EQ(classify_regime(1.2, 0.1), Regime::She);
  EXPECT_EQ(classify_regime(1.5, 0.75), Regime::She);
  EXPECT_EQ(classify_regime(1.4, 0.1), Regime::SheConjectured);
  EXPECT_EQ(classify_regime(2.5, 0.5), Regime::Undocumented);
  EXPECT_EQ(classify_regime(2.2, 0.75), Regime::Undocumented);
  EXPECT_EQ(classify_regime(0.5, 0.5), Regime::Undocumented);
  EXPECT_EQ(classify_regime(1.5, -0.1), Regime::Undocumented);
}

TEST(Config, ParsesSectionsAndVariants) {
  auto c = small_config("/tmp/x");
  EXPECT_EQ(c.name, "small");
  EXPECT_EQ(c.replicas, 4u);
  EXPECT_EQ(c.seed, 11u);
  ASSERT_EQ(c.potentials.size(), 2u);
  EXPECT_EQ(c.potentials[1].label, "quartic");
  EXPECT_DOUBLE_EQ(c.potentials[1].c3, 0.5);
  EXPECT_EQ(c.scaling.n, 8);
  EXPECT_TRUE(c.auto_lattice);
  EXPECT_EQ(c.estimators.lags, (std::vector<long>{-2, -1, 0, 1, 2}));
  EXPECT_EQ(c.estimators.ell, (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(c.validate().empty());
}

TEST(Config, InlineComments) {
  const auto c = ExperimentConfig::parse(
      "[experiment]\nname = demo   # label\nreplicas = 7 ; count\n\n"
      "  # indented comment\n[potential]  # main variant\nkind = toda\neta = 1.5\n"
      "[estimators]\nlist = qv, gibbs   # two\nlags = -2:2:2\n");
  EXPECT_EQ(c.name, "demo");
  EXPECT_EQ(c.replicas, 7u);
  EXPECT_EQ(c.potentials.at(0).kind, "toda");
  EXPECT_DOUBLE_EQ(c.potentials.at(0).eta, 1.5);
  EXPECT_EQ(c.estimators.list, (std::vector<std::string>{"qv", "gibbs"}));
  EXPECT_EQ(c.estimators.lags, (std::vector<long>{-2, 0, 2}));
}

TEST(Config, ReadmeExampleParses) {
  const auto c = ExperimentConfig::parse(R"([experiment]
name = demo            # label used in the manifest
replicas = 100         # >= 2
output = results/demo  # relative to the working directory

[potential]            # or several [potential.<label>] sections, one per variant
kind = fput            # harmonic | fput | toda | tabulated
c3 = 1                 # fput
c4 = 1                 # fput; c4 > 0 is required unless c3 = c4 = 0
# eta = 1              # toda: V(r) = exp(-eta r) + eta r - 1

[scaling]
lattice_len = auto     # or an explicit length

[estimators]
list = gibbs, qv           # estimators to run
lags = -8:8:2              # spacetime lags

[sbe]                      # presence enables the Burgers reference run
grid = 256
)");
  EXPECT_EQ(c.output, "results/demo");
  EXPECT_DOUBLE_EQ(c.potentials.at(0).c4, 1.0);
  EXPECT_TRUE(c.auto_lattice);
  EXPECT_TRUE(c.sbe.enabled);
  EXPECT_TRUE(c.validate().empty());
}

TEST(Config, RoundTripIsIdentity) {
  auto c = small_config("/tmp/x");
  c.scaling.alpha = 0.1 + 0.2;  // not exactly representable in short decimal
  c.sbe.enabled = true;
  const std::string once = c.serialize();
  const auto again = ExperimentConfig::parse(once);
  EXPECT_EQ(again.serialize(), once);
  EXPECT_EQ(again.scaling.alpha, c.scaling.alpha);
  EXPECT_EQ(again.estimators.lags, c.estimators.lags);
  EXPECT_EQ(again.potentials.size(), c.potentials.size());
  EXPECT_EQ(again.hash(), c.hash());
}

TEST(Config, ZeroReplicasIsValidationError) {
  std::string text = kSmall;
  text.replace(text.find("replicas = 4"), 12, "replicas = 0");
  auto c = ExperimentConfig::parse(text);
  try {
    c.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "experiment.replicas");
    EXPECT_EQ(e.line(), 4);
  }
}

TEST(Config, ErrorsCarryLineNumbers) {
  std::string bad_number = kSmall;
  bad_number.replace(bad_number.find("n = 8"), 5, "n = eight");
  EXPECT_EQ(error_line(bad_number), 17);

  std::string unknown = kSmall;
  unknown.replace(unknown.find("dt_micro = 0.02"), 15, "dt_micro = 0.02\nspeed = 3");
  EXPECT_EQ(error_line(unknown), 19);

  std::string syntax = kSmall;
  syntax.replace(syntax.find("[scaling]"), 9, "[scaling");
  EXPECT_EQ(error_line(syntax), 16);

  std::string estimator = kSmall;
  estimator.replace(estimator.find("list = qv"), 9, "list = qvv");
  EXPECT_EQ(error_line(estimator), 25);
}

TEST(Config, RejectsNonConfiningPotential) {
  std::string text = kSmall;
  text.replace(text.find("c4 = 1"), 6, "c4 = 0");
  EXPECT_EQ(error_line(text), 14);
}

TEST(Config, WarnsOutsideDocumentedRegimes) {
  auto c = small_config("/tmp/x");
  c.scaling.a_exp = 2.4;
  c.scaling.dt_micro = 0.002;
  const auto warnings = c.validate();
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("documented"), std::string::npos);
}

TEST(Config, TabulatedPathIsResolvedAgainstConfigDir) {
  const fs::path dir = scratch("tab");
  fs::create_directories(dir);
  {
    std::ofstream t(dir / "v.csv");
    t << "r,V\n";
    for (int i = -200; i <= 200; ++i) {
      const double r = i * 0.05;
      t << r << ',' << r * r / 2 << '\n';
    }
    std::ofstream cfg(dir / "c.ini");
    cfg << "[potential]\nkind = tabulated\ntable = v.csv\n";
  }
  auto c = ExperimentConfig::load(dir / "c.ini");
  ASSERT_EQ(c.potentials.size(), 1u);
  EXPECT_EQ(fs::path(c.potentials[0].table), (fs::absolute(dir) / "v.csv").lexically_normal());
  EXPECT_NEAR(c.potentials[0].build().coeffs().c2, 1.0, 1e-6);
}

TEST(Helpers, FittedMinimumAndFormatting) {
  std::vector<double> x = {1, 2, 4, 8, 16, 32}, y;
  for (double v : x) y.push_back(std::pow(std::log(v) - std::log(6.0), 2));
  EXPECT_NEAR(fitted_minimum_location(x, y), 6.0, 1e-9);
  EXPECT_EQ(fitted_minimum_location({1, 2, 4}, {3, 2, 1}), 4.0);
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125})
    EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
}

TEST(Run, DeterministicWithCompleteManifest) {
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  auto ca = small_config(a);
  auto cb = small_config(b);
  cb.workers = 3;
  const auto rep = run_experiment(ca);
  run_experiment(cb);
  for (const char* f : {"estimates.csv", "correlation.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }

  std::ifstream m(a / "manifest.jsonl");
  std::string line;
  std::map<std::string, int> seen;
  bool head = true;
  while (std::getline(m, line)) {
    auto j = nlohmann::json::parse(line);
    if (head) {
      EXPECT_EQ(j["kind"], "run");
      EXPECT_EQ(j["config_hash"], ca.hash());
      EXPECT_TRUE(j.contains("wall_seconds"));
      head = false;
      continue;
    }
    seen[j["path"]]++;
    EXPECT_EQ(j["bytes"].get<std::size_t>(), fs::file_size(a / j["path"].get<std::string>()));
  }
  for (const auto& entry : fs::directory_iterator(a))
    if (entry.path().extension() == ".csv") EXPECT_EQ(seen[entry.path().filename().string()], 1);
  EXPECT_GT(rep.wall_seconds, 0.0);
}

TEST(Run, ParsedRowsMatchReferences) {
  const fs::path a = scratch("run_rows");
  run_experiment(small_config(a));
  const std::string text = slurp(a / "estimates.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "estimator,potential,n,ell,sigma,t,value,stderr,replicas,seed,reference");
  EXPECT_NE(text.find("\nqv,harmonic,8,,1,0.1,"), std::string::npos);
  EXPECT_NE(text.find("\nbg2,quartic,8,2,-1,0.1,"), std::string::npos);
  EXPECT_NE(text.find("\ngibbs_mean_vprime,quartic,8,,0,0.1,"), std::string::npos);
}

TEST(Sweep, SingleValueMatchesRun) {
  const fs::path a = scratch("sweep_one"), b = scratch("sweep_direct");
  auto c = small_config(a);
  const auto rep = sweep(c, SweepAxis::N, {8});
  EXPECT_TRUE(rep.failures.empty());
  run_experiment(small_config(b));
  EXPECT_EQ(slurp(a / "n_8" / "estimates.csv"), slurp(b / "estimates.csv"));
  EXPECT_TRUE(fs::exists(a / "sweep.csv"));
}

TEST(Sweep, RecordsFailedCellsAndVerdicts) {
  const fs::path a = scratch("sweep_fail");
  auto c = small_config(a);
  c.auto_lattice = false;
  c.scaling.lattice_len = 256;
  const auto rep = sweep(c, SweepAxis::Ell, {1, 2, 1000});
  ASSERT_EQ(rep.failures.size(), 1u);
  EXPECT_NE(rep.failures[0].find("ell_1000"), std::string::npos);
  const std::string manifest = slurp(a / "sweep_manifest.jsonl");
  EXPECT_NE(manifest.find("\"failed\""), std::string::npos);
  const std::string agg = slurp(a / "sweep.csv");
  EXPECT_NE(agg.find("monotone_decay,fitted_min"), std::string::npos);
  EXPECT_NE(agg.find("\nell,2,bg2,"), std::string::npos);

  EXPECT_THROW(sweep(c, SweepAxis::N, {16, 8}), ConfigError);
  EXPECT_THROW(parse_sweep_axis("gamma"), ConfigError);
}

TEST(Plots, EmptyDirWarnsAndMissingColumnNamesFile) {
  const fs::path empty = scratch("plots_empty");
  fs::create_directories(empty);
  const auto rep = emit_plots(empty);
  EXPECT_TRUE(rep.files.empty());
  ASSERT_EQ(rep.warnings.size(), 1u);

  const fs::path bad = scratch("plots_bad");
  fs::create_directories(bad);
  std::ofstream(bad / "sbe.csv") << "potential,t,variance\nmain,0,1\n";
  try {
    emit_plots(bad);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("sbe.csv"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("stderr"), std::string::npos);
  }
}

TEST(Plots, WritesSvgForRunOutputs) {
  const fs::path a = scratch("plots_run");
  run_experiment(small_config(a));
  const auto rep = emit_plots(a);
  ASSERT_FALSE(rep.files.empty());
  bool heat = false;
  for (const auto& f : rep.files) {
    EXPECT_EQ(slurp(f).rfind("<svg", 0), 0u) << f;
    heat = heat || f.filename().string().rfind("correlation_", 0) == 0;
  }
  EXPECT_TRUE(heat);
  EXPECT_TRUE(fs::exists(a / "plots" / "qv.svg"));
}
