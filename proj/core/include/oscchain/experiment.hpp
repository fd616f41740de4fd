#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "oscchain/dynamics.hpp"
#include "oscchain/estimators.hpp"
#include "oscchain/potential.hpp"

namespace oscchain {

/// Regimes of the (b_exp, a_exp) plane, where the anharmonicity scales as n^{-b_exp} and
/// micro-time as n^{a_exp} times macro-time.
enum class Regime {
  SbeProven,       ///< a = b + 3/2 with 1/4 < b <= 1/2
  SbeConjectured,  ///< a = b + 3/2 with 0 <= b <= 1/4
  She,             ///< below the critical line (and a >= 1 + 3b when b < 1/4), or a = 2 with b > 1/2
  SheConjectured,  ///< 0 <= b < 1/4 between a = 1 + 3b and a = b + 3/2
  Undocumented,
};

Regime classify_regime(double a_exp, double b_exp);
const char* regime_name(Regime r);

/// One potential family as written in the config.
struct PotentialEntry {
  std::string label;
  std::string kind = "harmonic";  ///< harmonic | fput | toda | tabulated
  double c2 = 1.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double eta = 1.0;
  double eta_v = 1.0;
  std::string table;  ///< absolute path, tabulated only

  PotentialSpec build() const;
};

struct ObservationSettings {
  std::string test_function = "gaussian";  ///< gaussian | hermite
  double width = 0.25;                     ///< gaussian width or hermite scale
  int hermite_index = 0;
  double horizon = 0.1;
  double snapshot_micro = 0.1;
  bool drift_corrected = false;

  TestFunction profile() const;
};

struct EstimatorSettings {
  std::vector<std::string> list;
  std::vector<std::size_t> ell = {1, 2, 4, 8, 16, 32};
  std::vector<int> sigma = {1, -1};
  std::vector<long> lags = {-8, -6, -4, -2, 0, 2, 4, 6, 8};
  std::vector<double> times = {0.05, 0.1};
  std::size_t centers = 4;
  std::size_t qv_points = 4;
  std::size_t field_replicas = 2;
  std::size_t field_points = 50;

  bool wants(const std::string& name) const;
};

struct SbeSettings {
  bool enabled = false;
  std::size_t grid = 256;
  double dx = 0.1;
  double dt = 5e-4;
  double horizon = 5.0;
  double sample_every = 0.5;
  std::size_t replicas = 16;
  int sigma = 1;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::size_t replicas = 100;
  std::uint64_t seed = 1;
  unsigned workers = 1;  ///< 0 means one per hardware thread
  std::filesystem::path output = "results";
  std::vector<PotentialEntry> potentials;
  ScalingConfig scaling;
  bool auto_lattice = true;
  ObservationSettings observation;
  EstimatorSettings estimators;
  SbeSettings sbe;
  /// "section/key" to line number in the parsed text; used for error locations only.
  std::map<std::string, long> source_lines;

  /// Syntax errors and invalid values raise ConfigError with the line and field.
  /// Relative table paths are resolved against `base_dir`.
  static ExperimentConfig parse(const std::string& text, const std::filesystem::path& base_dir = ".");
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Canonical text form; parse(serialize()) reproduces the same configuration.
  std::string serialize() const;
  /// Hex SHA-256 of serialize().
  std::string hash() const;

  /// Throws ConfigError for invalid settings and returns warnings, such as an
  /// exponent pair outside the documented regimes.
  std::vector<std::string> validate() const;

  /// Lattice length used for a potential variant: the configured one, or the smallest
  /// box that keeps every moving window inside it when lattice_len = auto.
  std::size_t lattice_for_variant(const PotentialSpec& pot) const;
};

struct RunReport {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
};

/// Runs every configured estimator for each potential variant and writes
/// estimates.csv and the other tables, config.ini and manifest.jsonl into config.output.
RunReport run_experiment(const ExperimentConfig& config);

enum class SweepAxis { N, Ell, BExp, AExp };

SweepAxis parse_sweep_axis(const std::string& name);
const char* sweep_axis_name(SweepAxis axis);

struct SweepReport {
  std::filesystem::path aggregate;
  std::vector<double> values;
  std::vector<std::string> failures;  ///< one message per failed cell
  std::vector<std::string> warnings;
};

/// One run per value in <output>/<axis>_<value>, then sweep.csv with a monotone_decay
/// verdict per series and, for ell sweeps of bg2, the fitted minimum location.
/// Failed cells are listed in sweep_manifest.jsonl instead of aborting the sweep.
SweepReport sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<double>& values);

struct PlotReport {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
};

/// SVG plots for every result table found in `dir`.
PlotReport emit_plots(const std::filesystem::path& dir);

/// Location of the minimum of y over positive x from a parabola in log x through the
/// smallest point and its neighbours; an end point when the minimum sits on the boundary.
double fitted_minimum_location(const std::vector<double>& x, const std::vector<double>& y);

/// Seed for one (variant, group) pair, mixed from the base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t variant, std::uint64_t group);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double x);

}  // namespace oscchain
