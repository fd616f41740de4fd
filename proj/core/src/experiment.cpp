#include "oscchain/experiment.hpp"

#include <algorithm>
#include <boost/version.hpp>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <thread>

#include "experiment_internal.hpp"
#include "oscchain/error.hpp"
#include "oscchain/sbe_reference.hpp"

#ifndef OSCCHAIN_VERSION
#define OSCCHAIN_VERSION "unknown"
#endif

namespace oscchain {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string CsvTable::render() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::size_t CsvTable::column(const std::string& name, const fs::path& source) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError(source.string() + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(s);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty table");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) throw DataError(path.string() + ": ragged row");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::string write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot write " + path.string());
  out << text;
  if (!out) throw ResourceError("write failed for " + path.string());
  return text;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t variant, std::uint64_t group) {
  auto mix = [](std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  };
  return mix(mix(mix(base) ^ variant) ^ (group * 0xD1B54A32D192ED03ULL));
}

double fitted_minimum_location(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || x.size() != y.size()) throw DomainError("fit needs matching non-empty x and y");
  const std::size_t i = static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin());
  if (i == 0 || i + 1 == x.size()) return x[i];
  const double x0 = std::log(x[i - 1]), x1 = std::log(x[i]), x2 = std::log(x[i + 1]);
  const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
  const double num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
  const double den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
  if (den == 0.0) return x[i];
  return std::exp(x1 - 0.5 * num / den);
}

namespace {

enum class Stat { Mean, Second, Abs, TimeMean };

struct Slot {
  std::string estimator;
  int sigma = 0;
  long ell = -1;
  Stat stat = Stat::Mean;
  std::optional<double> reference_rate;  // reference per unit time
  bool checkpointed = false;
};

struct EstimateRow {
  std::string estimator;
  std::string potential;
  int n = 0;
  long ell = -1;
  int sigma = 0;
  double t = 0.0;
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t replicas = 0;
  std::uint64_t seed = 0;
  std::optional<double> reference;
};

std::vector<double> column_of(const std::vector<std::vector<double>>& rows, std::size_t k) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i][k];
  return out;
}

TimeIntegralEstimate reduce(const Slot& s, std::vector<double> samples, double horizon) {
  switch (s.stat) {
    case Stat::Second: return second_moment(s.estimator, samples, horizon);
    case Stat::Abs: return abs_moment(s.estimator, samples, horizon);
    case Stat::TimeMean:
      for (double& v : samples) v /= horizon;
      return summarize(s.estimator, samples, horizon);
    case Stat::Mean: break;
  }
  return summarize(s.estimator, samples, horizon);
}

class Runner {
 public:
  explicit Runner(const ExperimentConfig& c) : c_(c) {
    workers_ = c.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : c.workers;
  }

  void run_variant(std::size_t vi) {
    const PotentialEntry& entry = c_.potentials[vi];
    const PotentialSpec pot = entry.build();
    ScalingConfig cfg = c_.scaling;
    cfg.lattice_len = c_.lattice_for_variant(pot);
    EnsembleSpec spec;
    spec.potential = pot;
    spec.cfg = cfg;
    spec.replicas = c_.replicas;
    spec.workers = workers_;
    spec.horizon = c_.observation.horizon;
    spec.snapshot_micro = c_.observation.snapshot_micro;
    const TestFunction phi = c_.observation.profile().centered_at(box_center(cfg));
    label_ = entry.label;
    vi_ = vi;

    const auto& e = c_.estimators;
    if (e.wants("qv") || e.wants("equipartition") || e.wants("bg2") || e.wants("wrong_frame") || e.wants("bracket"))
      trajectory_batch(spec, phi);
    if (e.wants("gibbs")) gibbs(spec);
    if (e.wants("phonon_variance")) phonon_variance(spec, phi);
    if (e.wants("spacetime")) spacetime(spec);
    if (e.wants("smoothed")) smoothed(spec);
    if (e.wants("fields")) fields(spec, phi);
    if (c_.sbe.enabled) sbe(spec);
  }

  std::string estimates_csv() const {
    CsvTable t;
    t.header = {"estimator", "potential", "n", "ell", "sigma", "t", "value", "stderr", "replicas", "seed", "reference"};
    for (const auto& r : estimates_)
      t.rows.push_back({r.estimator, r.potential, std::to_string(r.n), r.ell < 0 ? "" : std::to_string(r.ell),
                        std::to_string(r.sigma), format_double(r.t), format_double(r.value),
                        format_double(r.stderr_), std::to_string(r.replicas), std::to_string(r.seed),
                        r.reference ? format_double(*r.reference) : ""});
    return t.render();
  }

  CsvTable correlation;
  CsvTable field_table;
  CsvTable sbe_table;

 private:
  void add(const TimeIntegralEstimate& est, const std::string& name, int sigma, long ell, double t,
           std::uint64_t seed, std::optional<double> reference = std::nullopt) {
    estimates_.push_back({name, label_, c_.scaling.n, ell, sigma, t, est.value, est.std_error(), est.replicas, seed,
                          reference});
  }

  void trajectory_batch(EnsembleSpec spec, const TestFunction& phi) {
    const auto& e = c_.estimators;
    const auto& cfg = spec.cfg;
    const ScaledPotential pot(spec.potential, cfg.epsilon());
    const GibbsMarginal marginal(pot, cfg.beta, cfg.tau);
    const EquilibriumData eq = equilibrium_data(marginal, cfg.p_mean);
    const auto& coeffs = spec.potential.coeffs();
    const double c2 = pot.c2();
    std::vector<Integrand> ints;
    std::vector<Slot> slots;
    auto push = [&](Integrand f, std::string name, int sigma, long ell, Stat stat,
                    std::optional<double> ref = std::nullopt, bool checkpointed = false) {
      ints.push_back(std::move(f));
      slots.push_back({std::move(name), sigma, ell, stat, ref, checkpointed});
    };
    for (int sigma : e.sigma) {
      const double v = Frame::phonon(sigma, cfg, coeffs, c_.observation.drift_corrected).velocity;
      const double wrong = Frame::phonon(-sigma, cfg, coeffs, c_.observation.drift_corrected).velocity;
      if (e.wants("qv"))
        push(qv_integrand(phi, v, cfg), "qv", sigma, -1, Stat::Mean, cfg.gamma / cfg.beta * phi.deriv_norm2(), true);
      if (e.wants("equipartition"))
        push(equipartition_integrand(phi, v, cfg, c2, eq), "equipartition", sigma, -1, Stat::Second);
      if (e.wants("bg2"))
        for (std::size_t ell : e.ell)
          push(bg2_integrand(phi, v, cfg, ell, eq), "bg2", sigma, static_cast<long>(ell), Stat::Second);
      if (e.wants("wrong_frame")) {
        push(linear_field_integrand(sigma, phi, wrong, cfg, eq), "wrong_frame_linear", sigma, -1, Stat::Abs);
        push(quadratic_field_integrand(sigma, phi, wrong, cfg, eq), "wrong_frame_quadratic", sigma, -1, Stat::Abs);
        push(linear_field_integrand(sigma, phi, v, cfg, eq), "control_linear", sigma, -1, Stat::Abs);
      }
    }
    if (e.wants("wrong_frame"))
      push(cross_field_integrand(phi, 0.0, cfg, eq), "wrong_frame_cross", 0, -1, Stat::Abs);
    if (e.wants("bracket")) {
      const double vp = Frame::phonon(1, cfg, coeffs, c_.observation.drift_corrected).velocity;
      const double vm = Frame::phonon(-1, cfg, coeffs, c_.observation.drift_corrected).velocity;
      push(bracket_integrand(1, phi, vp, -1, phi, vm, cfg, c2), "bracket_cross", 0, -1, Stat::TimeMean, 0.0);
      push(bracket_integrand(1, phi, vp, 1, phi, vp, cfg, c2), "bracket_plus", 1, -1, Stat::TimeMean);
      push(bracket_integrand(-1, phi, vm, -1, phi, vm, cfg, c2), "bracket_minus", -1, -1, Stat::TimeMean);
    }

    spec.seed = derive_seed(c_.seed, vi_, 0);
    if (e.wants("qv"))
      for (std::size_t k = 1; k < e.qv_points; ++k)
        spec.checkpoints.push_back(spec.horizon * static_cast<double>(k) / static_cast<double>(e.qv_points));
    const auto rows = ensemble_integrals(spec, ints);
    const std::size_t kk = ints.size();
    for (std::size_t i = 0; i < kk; ++i) {
      const Slot& s = slots[i];
      const std::size_t blocks = spec.checkpoints.size() + 1;
      for (std::size_t b = 0; b < blocks; ++b) {
        const bool last = b + 1 == blocks;
        if (!last && !s.checkpointed) continue;
        const double t = last ? spec.horizon : checkpoint_time(spec, spec.checkpoints[b]);
        const auto est = reduce(s, column_of(rows, b * kk + i), t);
        std::optional<double> ref;
        if (s.reference_rate) ref = s.stat == Stat::TimeMean ? *s.reference_rate : *s.reference_rate * t;
        add(est, s.estimator, s.sigma, s.ell, t, spec.seed, ref);
      }
    }
  }

  void gibbs(EnsembleSpec spec) {
    spec.seed = derive_seed(c_.seed, vi_, 1);
    const auto check = gibbs_stationarity(spec);
    for (std::size_t k = 0; k < check.measured.size(); ++k)
      add(check.measured[k], "gibbs_" + check.measured[k].label, 0, -1, spec.horizon, spec.seed, check.expected[k]);
  }

  void phonon_variance(EnsembleSpec spec, const TestFunction& phi) {
    spec.seed = derive_seed(c_.seed, vi_, 2);
    const auto check = static_field_variances(spec, phi);
    const double b = spec.cfg.beta;
    add(check.var_plus, "phonon_var", 1, -1, 0.0, spec.seed, 2.0 / b);
    add(check.var_minus, "phonon_var", -1, -1, 0.0, spec.seed, 2.0 / b);
    add(check.energy_pairing, "energy_pairing", 0, -1, 0.0, spec.seed, 3.0 / (b * b) * phi.norm2());
  }

  void spacetime(EnsembleSpec spec) {
    spec.seed = derive_seed(c_.seed, vi_, 3);
    if (correlation.header.empty())
      correlation.header = {"potential", "n", "sigma", "t", "lag", "offset", "mean", "stderr", "bootstrap_stderr",
                            "replicas", "seed"};
    for (int sigma : c_.estimators.sigma) {
      const auto series = spacetime_correlation(spec, sigma, c_.estimators.lags, c_.estimators.times);
      for (std::size_t g = 0; g < series.grid.size(); ++g) {
        const auto& pnt = series.grid[g];
        correlation.rows.push_back({label_, std::to_string(spec.cfg.n), std::to_string(sigma), format_double(pnt.t),
                                    std::to_string(pnt.lag), std::to_string(pnt.offset), format_double(series.mean[g]),
                                    format_double(series.std_error[g]), format_double(series.bootstrap_error[g]),
                                    std::to_string(series.replicas), std::to_string(spec.seed)});
      }
    }
  }

  void smoothed(EnsembleSpec spec) {
    spec.seed = derive_seed(c_.seed, vi_, 4);
    const TestFunction phi = c_.observation.profile();
    const auto centers = spread_centers(spec.cfg, phi, c_.estimators.centers);
    for (int sigma : c_.estimators.sigma) {
      const auto series = smoothed_correlation(spec, sigma, phi, c_.estimators.times, centers);
      for (std::size_t g = 0; g < series.grid.size(); ++g) {
        TimeIntegralEstimate est;
        est.value = series.mean[g];
        est.variance = series.std_error[g] * series.std_error[g];
        est.replicas = series.replicas;
        const double t = series.grid[g].t;
        add(est, "smoothed_corr", sigma, -1, t, spec.seed, ou_pairing(phi, phi, t, spec.cfg.gamma, spec.cfg.beta));
      }
    }
  }

  void fields(const EnsembleSpec& spec, const TestFunction& phi) {
    if (field_table.header.empty()) field_table.header = {"potential", "replica", "t_macro", "sigma", "corrected", "value"};
    const ScaledPotential pot(spec.potential, spec.cfg.epsilon());
    const GibbsMarginal marginal(pot, spec.cfg.beta, spec.cfg.tau);
    const ModeMeans means = equilibrium_means(marginal, spec.cfg.p_mean);
    const std::uint64_t seed = derive_seed(c_.seed, vi_, 0);
    const auto& e = c_.estimators;
    std::vector<Frame> frames;
    for (int sigma : e.sigma)
      frames.push_back(Frame::phonon(sigma, spec.cfg, spec.potential.coeffs(), c_.observation.drift_corrected));
    // one row per (time, sigma, corrected), in that order
    const auto rows = parallel_replicas(e.field_replicas, workers_, [&](std::size_t r) {
      RandomStream rng(seed, r);
      ChainState state = sample_gibbs_state(spec.cfg.lattice_len, marginal, spec.cfg.p_mean, rng);
      std::vector<double> out;
      std::vector<Hook> hooks;
      for (std::size_t k = 0; k < e.field_points; ++k) {
        const double t = spec.horizon * static_cast<double>(k) / static_cast<double>(e.field_points - 1);
        hooks.push_back({t, [&](double now, const ChainState& s) {
                           const ModeArrays modes = compute_modes(s, pot, spec.cfg, means);
                           out.push_back(now);
                           for (const auto& f : frames)
                             for (bool corrected : {false, true})
                               out.push_back(fluctuation_field(modes, f.sigma, phi, f, now, spec.cfg.n, corrected));
                         }});
      }
      evolve_macro(state, spec.horizon, spec.cfg, pot, rng, hooks);
      return out;
    });
    const std::size_t stride = 1 + 2 * frames.size();
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t k = 0; k + stride <= rows[r].size(); k += stride)
        for (std::size_t f = 0; f < frames.size(); ++f)
          for (int corrected = 0; corrected < 2; ++corrected)
            field_table.rows.push_back({label_, std::to_string(r), format_double(rows[r][k]),
                                        std::to_string(frames[f].sigma), corrected ? "1" : "0",
                                        format_double(rows[r][k + 1 + 2 * f + corrected])});
  }

  void sbe(const EnsembleSpec& spec) {
    const auto& s = c_.sbe;
    const auto& cfg = spec.cfg;
    const SbeParams params =
        SbeParams::for_chain(s.sigma, cfg.alpha, cfg.gamma, cfg.beta, spec.potential.coeffs(), s.grid, s.dx, s.dt);
    const std::uint64_t seed = derive_seed(c_.seed, vi_, 5);
    const auto per_sample = static_cast<std::size_t>(std::max(1L, std::lround(s.sample_every / s.dt)));
    const auto samples = static_cast<std::size_t>(std::floor(s.horizon / s.sample_every + 1e-9)) + 1;
    const auto rows = parallel_replicas(s.replicas, workers_, [&](std::size_t r) {
      RandomStream rng(seed, r);
      SbeField field = sbe_init_stationary(params, cfg.beta, rng);
      std::vector<double> out;
      for (std::size_t k = 0; k < samples; ++k) {
        if (k > 0)
          for (std::size_t i = 0; i < per_sample; ++i) sbe_step(field, params, rng);
        double acc = 0.0;
        for (double u : field.u) acc += u * u;
        out.push_back(acc / static_cast<double>(field.u.size()));
      }
      return out;
    });
    if (sbe_table.header.empty())
      sbe_table.header = {"potential", "sigma", "t", "variance", "stderr", "reference", "replicas", "seed"};
    const double target = 2.0 / (cfg.beta * s.dx);
    double worst = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
      const auto est = summarize("sbe_variance", column_of(rows, k), 0.0);
      worst = std::max(worst, std::abs(est.value / target - 1.0));
      const double t = static_cast<double>(k * per_sample) * s.dt;
      sbe_table.rows.push_back({label_, std::to_string(s.sigma), format_double(t), format_double(est.value),
                                format_double(est.std_error()), format_double(target), std::to_string(s.replicas),
                                std::to_string(seed)});
    }
    TimeIntegralEstimate dev;
    dev.value = worst;
    dev.replicas = s.replicas;
    add(dev, "sbe_max_rel_dev", s.sigma, -1, s.horizon, seed, 0.0);
  }

  const ExperimentConfig& c_;
  unsigned workers_ = 1;
  std::string label_;
  std::size_t vi_ = 0;
  std::vector<EstimateRow> estimates_;
};

std::string file_entry(const std::string& name, const std::string& contents) {
  json j = {{"kind", "file"}, {"path", name}, {"sha256", sha256_hex(contents)}, {"bytes", contents.size()}};
  return j.dump();
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.warnings = config.validate();
  report.directory = config.output;
  std::error_code ec;
  fs::create_directories(config.output, ec);
  if (ec) throw ResourceError("cannot create " + config.output.string() + ": " + ec.message());

  Runner runner(config);
  for (std::size_t vi = 0; vi < config.potentials.size(); ++vi) runner.run_variant(vi);

  std::vector<std::pair<std::string, std::string>> outputs;
  outputs.emplace_back("config.ini", config.serialize());
  outputs.emplace_back("estimates.csv", runner.estimates_csv());
  if (!runner.correlation.rows.empty()) outputs.emplace_back("correlation.csv", runner.correlation.render());
  if (!runner.field_table.rows.empty()) outputs.emplace_back("fields.csv", runner.field_table.render());
  if (!runner.sbe_table.rows.empty()) outputs.emplace_back("sbe.csv", runner.sbe_table.render());

  std::vector<std::string> manifest;
  for (const auto& [name, text] : outputs) {
    write_text(config.output / name, text);
    report.files.push_back(config.output / name);
    manifest.push_back(file_entry(name, text));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json head = {{"kind", "run"},
               {"name", config.name},
               {"config_hash", config.hash()},
               {"version", OSCCHAIN_VERSION},
               {"boost", BOOST_LIB_VERSION},
               {"compiler", __VERSION__},
               {"regime", regime_name(classify_regime(config.scaling.a_exp, config.scaling.b_exp))},
               {"warnings", report.warnings},
               {"wall_seconds", report.wall_seconds}};
  std::string text = head.dump() + "\n";
  for (const auto& m : manifest) text += m + "\n";
  write_text(config.output / "manifest.jsonl", text);
  report.files.push_back(config.output / "manifest.jsonl");
  return report;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "n") return SweepAxis::N;
  if (name == "ell") return SweepAxis::Ell;
  if (name == "b_exp") return SweepAxis::BExp;
  if (name == "a_exp") return SweepAxis::AExp;
  throw ConfigError("unknown sweep axis '" + name + "' (expected n, ell, b_exp or a_exp)", "axis");
}

const char* sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::N: return "n";
    case SweepAxis::Ell: return "ell";
    case SweepAxis::BExp: return "b_exp";
    case SweepAxis::AExp: return "a_exp";
  }
  return "n";
}

SweepReport sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value", "values");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1])) throw ConfigError("sweep values must be sorted and distinct", "values");
  const bool integral = axis == SweepAxis::N || axis == SweepAxis::Ell;
  for (double v : values)
    if (integral && (v != std::floor(v) || v < 1.0))
      throw ConfigError("axis " + std::string(sweep_axis_name(axis)) + " takes positive integers", "values");

  SweepReport report;
  report.values = values;
  std::error_code ec;
  fs::create_directories(config.output, ec);
  if (ec) throw ResourceError("cannot create " + config.output.string() + ": " + ec.message());

  const std::string axis_name = sweep_axis_name(axis);
  std::vector<std::string> manifest;
  manifest.push_back(json({{"kind", "sweep"},
                           {"axis", axis_name},
                           {"values", values},
                           {"config_hash", config.hash()},
                           {"version", OSCCHAIN_VERSION}})
                         .dump());
  struct Cell {
    double value;
    CsvTable table;
  };
  std::vector<Cell> cells;
  for (double v : values) {
    ExperimentConfig cell = config;
    const std::string dir = axis_name + "_" + format_double(v);
    cell.output = config.output / dir;
    switch (axis) {
      case SweepAxis::N: cell.scaling.n = static_cast<int>(v); break;
      case SweepAxis::Ell: cell.estimators.ell = {static_cast<std::size_t>(v)}; break;
      case SweepAxis::BExp: cell.scaling.b_exp = v; break;
      case SweepAxis::AExp: cell.scaling.a_exp = v; break;
    }
    json entry = {{"kind", "cell"}, {"value", v}, {"dir", dir}};
    try {
      const RunReport r = run_experiment(cell);
      for (const auto& w : r.warnings) report.warnings.push_back(dir + ": " + w);
      cells.push_back({v, read_csv(cell.output / "estimates.csv")});
      entry["status"] = "ok";
      entry["wall_seconds"] = r.wall_seconds;
    } catch (const Error& e) {
      entry["status"] = "failed";
      entry["error"] = e.what();
      report.failures.push_back(dir + ": " + e.what());
    }
    manifest.push_back(entry.dump());
  }

  CsvTable out;
  out.header = {"axis",   "axis_value", "estimator", "potential", "n",         "ell",           "sigma", "t",
                "value",  "stderr",     "replicas",  "seed",      "reference", "monotone_decay", "fitted_min"};
  struct Series {
    std::vector<double> x;
    std::vector<TimeIntegralEstimate> points;
  };
  std::map<std::string, Series> series;
  std::vector<std::pair<std::string, const std::vector<std::string>*>> keyed;
  std::vector<double> axis_of_row;
  for (const auto& cell : cells) {
    const auto& t = cell.table;
    const fs::path src = "estimates.csv";
    const std::size_t ce = t.column("estimator", src), cp = t.column("potential", src), cs = t.column("sigma", src),
                      cl = t.column("ell", src), ct = t.column("t", src), cv = t.column("value", src),
                      cse = t.column("stderr", src);
    for (const auto& row : t.rows) {
      std::ostringstream key;
      key << row[ce] << '|' << row[cp] << '|' << row[cs];
      if (axis != SweepAxis::Ell) key << '|' << row[cl];
      // checkpoint times snap to the substep grid, which moves slightly with n and a_exp
      char tkey[32];
      std::snprintf(tkey, sizeof tkey, "%.6g", std::stod(row[ct]));
      key << '|' << tkey;
      auto& s = series[key.str()];
      s.x.push_back(axis == SweepAxis::Ell ? std::stod(row[cl].empty() ? "1" : row[cl]) : cell.value);
      TimeIntegralEstimate est;
      est.value = std::stod(row[cv]);
      const double se = std::stod(row[cse]);
      est.variance = se * se;
      s.points.push_back(est);
      keyed.emplace_back(key.str(), &row);
      axis_of_row.push_back(cell.value);
    }
  }
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    const auto& [key, row] = keyed[i];
    const auto& s = series[key];
    const std::string verdict = s.points.size() < 2 ? "" : (strictly_decreasing_trend(s.points) ? "true" : "false");
    std::string fitted;
    if (axis == SweepAxis::Ell && (*row)[0] == "bg2" && s.points.size() >= 2) {
      std::vector<double> y;
      for (const auto& p : s.points) y.push_back(p.value);
      fitted = format_double(fitted_minimum_location(s.x, y));
    }
    std::vector<std::string> cells_out = {axis_name, format_double(axis_of_row[i])};
    cells_out.insert(cells_out.end(), row->begin(), row->end());
    cells_out.push_back(verdict);
    cells_out.push_back(fitted);
    out.rows.push_back(std::move(cells_out));
  }
  const std::string text = out.render();
  write_text(config.output / "sweep.csv", text);
  manifest.push_back(file_entry("sweep.csv", text));
  std::string mtext;
  for (const auto& m : manifest) mtext += m + "\n";
  write_text(config.output / "sweep_manifest.jsonl", mtext);
  report.aggregate = config.output / "sweep.csv";
  return report;
}

}  // namespace oscchain
