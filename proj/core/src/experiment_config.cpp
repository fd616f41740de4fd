#include <openssl/evp.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "experiment_internal.hpp"
#include "oscchain/error.hpp"
#include "oscchain/experiment.hpp"
#include "oscchain/sbe_reference.hpp"

namespace oscchain {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

constexpr double kLineTol = 1e-9;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

bool safe_label(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
  });
}

// Line numbers of sections and keys, keyed "section" and "section/key".
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    long no = 0;
    while (std::getline(in, line)) {
      ++no;
      const std::string t = trim(line);
      if (t.empty() || t[0] == ';') continue;
      if (t.front() == '[' && t.back() == ']') {
        section = trim(t.substr(1, t.size() - 2));
        lines_.emplace(section, no);
        continue;
      }
      const auto eq = t.find('=');
      if (eq != std::string::npos) lines_.emplace(section + "/" + trim(t.substr(0, eq)), no);
    }
  }

  explicit LineIndex(std::map<std::string, long> lines) : lines_(std::move(lines)) {}

  const std::map<std::string, long>& lines() const { return lines_; }

  long of(const std::string& section, const std::string& key = {}) const {
    auto it = lines_.find(key.empty() ? section : section + "/" + key);
    if (it != lines_.end()) return it->second;
    it = lines_.find(section);
    return it == lines_.end() ? -1 : it->second;
  }

 private:
  std::map<std::string, long> lines_;
};

class Section {
 public:
  Section(const pt::ptree& body, std::string name, const LineIndex& idx, const std::set<std::string>& allowed)
      : body_(body), name_(std::move(name)), idx_(idx) {
    for (const auto& [key, value] : body_) {
      if (!value.empty()) throw error(key, "nested keys are not supported");
      if (!allowed.count(key)) throw error(key, "unknown key");
    }
  }

  ConfigError error(const std::string& key, const std::string& what) const {
    return ConfigError(what, name_ + "." + key, idx_.of(name_, key));
  }

  std::optional<std::string> raw(const std::string& key) const {
    auto it = body_.find(key);
    if (it == body_.not_found()) return std::nullopt;
    return trim(it->second.data());
  }

  std::string text(const std::string& key, const std::string& def) const { return raw(key).value_or(def); }

  double real(const std::string& key, double def) const {
    auto v = raw(key);
    return v ? to_real(key, *v) : def;
  }

  long integer(const std::string& key, long def) const {
    auto v = raw(key);
    return v ? to_integer(key, *v) : def;
  }

  std::size_t count(const std::string& key, std::size_t def) const {
    const long v = integer(key, static_cast<long>(def));
    if (v < 0) throw error(key, "must be non-negative");
    return static_cast<std::size_t>(v);
  }

  std::uint64_t unsigned64(const std::string& key, std::uint64_t def) const {
    auto v = raw(key);
    if (!v) return def;
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size()) throw error(key, "expected an unsigned integer, got '" + *v + "'");
    return out;
  }

  bool flag(const std::string& key, bool def) const {
    auto v = raw(key);
    if (!v) return def;
    if (*v == "true" || *v == "yes" || *v == "1") return true;
    if (*v == "false" || *v == "no" || *v == "0") return false;
    throw error(key, "expected true or false, got '" + *v + "'");
  }

  std::vector<double> reals(const std::string& key, std::vector<double> def) const {
    auto v = raw(key);
    if (!v) return def;
    std::vector<double> out;
    for (const auto& item : split_list(*v)) out.push_back(to_real(key, item));
    return out;
  }

  // Integers, with "lo:hi" and "lo:hi:step" ranges allowed as items.
  std::vector<long> integers(const std::string& key, std::vector<long> def) const {
    auto v = raw(key);
    if (!v) return def;
    std::vector<long> out;
    for (const auto& item : split_list(*v)) {
      std::vector<long> parts;
      std::istringstream in(item);
      std::string piece;
      while (std::getline(in, piece, ':')) parts.push_back(to_integer(key, trim(piece)));
      if (parts.size() == 1) {
        out.push_back(parts[0]);
      } else if (parts.size() <= 3) {
        const long step = parts.size() == 3 ? parts[2] : 1;
        if (step <= 0 || parts[1] < parts[0]) throw error(key, "bad range '" + item + "'");
        for (long x = parts[0]; x <= parts[1]; x += step) out.push_back(x);
      } else {
        throw error(key, "bad range '" + item + "'");
      }
    }
    return out;
  }

  std::vector<std::string> words(const std::string& key, std::vector<std::string> def) const {
    auto v = raw(key);
    return v ? split_list(*v) : def;
  }

 private:
  double to_real(const std::string& key, const std::string& s) const {
    double out = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(out))
      throw error(key, "expected a number, got '" + s + "'");
    return out;
  }

  long to_integer(const std::string& key, const std::string& s) const {
    long out = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size()) throw error(key, "expected an integer, got '" + s + "'");
    return out;
  }

  const pt::ptree& body_;
  std::string name_;
  const LineIndex& idx_;
};

// Boost's ini reader only knows whole-line ';' comments. A '#' or ';' that starts a line or
// follows whitespace begins a comment here.
std::string normalize_comments(const std::string& raw) {
  std::istringstream in(raw);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.erase(i);
        break;
      }
    }
    out << line << '\n';
  }
  return out.str();
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, double>)
      out += format_double(v[i]);
    else if constexpr (std::is_same_v<T, std::string>)
      out += v[i];
    else
      out += std::to_string(v[i]);
  }
  return out;
}

const std::set<std::string> kEstimators = {"gibbs", "phonon_variance", "qv",       "equipartition", "bg2",
                                           "wrong_frame", "bracket",   "spacetime", "smoothed",   "fields"};

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

Regime classify_regime(double a, double b) {
  if (b < -kLineTol || a < 1.0 - kLineTol) return Regime::Undocumented;
  const double critical = b + 1.5;
  if (b <= 0.5 + kLineTol && std::abs(a - critical) <= kLineTol)
    return b > 0.25 + kLineTol ? Regime::SbeProven : Regime::SbeConjectured;
  if (b > 0.5 + kLineTol) return a <= 2.0 + kLineTol ? Regime::She : Regime::Undocumented;
  if (a > critical) return Regime::Undocumented;
  if (b >= 0.25 - kLineTol) return Regime::She;
  return a < 1.0 + 3.0 * b - kLineTol ? Regime::She : Regime::SheConjectured;
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::SbeProven: return "SBE";
    case Regime::SbeConjectured: return "SBE (conjectured)";
    case Regime::She: return "SHE";
    case Regime::SheConjectured: return "SHE (conjectured)";
    case Regime::Undocumented: return "undocumented";
  }
  return "undocumented";
}

PotentialSpec PotentialEntry::build() const {
  if (kind == "harmonic") return PotentialSpec::harmonic(c2);
  if (kind == "fput") return PotentialSpec::fput(c3, c4, c2);
  if (kind == "toda") return PotentialSpec::toda(eta);
  if (kind == "tabulated") return PotentialSpec::tabulated_csv(table, eta_v);
  throw ConfigError("unknown potential kind '" + kind + "'", "potential." + label + ".kind");
}

TestFunction ObservationSettings::profile() const {
  if (test_function == "gaussian") return TestFunction::gaussian(0.0, width);
  if (test_function == "hermite") return TestFunction::hermite(hermite_index, width);
  throw ConfigError("unknown test function '" + test_function + "'", "observation.test_function");
}

bool EstimatorSettings::wants(const std::string& name) const {
  return std::find(list.begin(), list.end(), name) != list.end();
}

ExperimentConfig ExperimentConfig::parse(const std::string& raw, const fs::path& base_dir) {
  const std::string text = normalize_comments(raw);
  const LineIndex idx(text);
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.message(), "", static_cast<long>(e.line()));
  }

  ExperimentConfig c;
  c.source_lines = idx.lines();
  for (const auto& [name, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key outside any section", name, idx.of("", name));
    if (name == "experiment") {
      Section s(body, name, idx, {"name", "replicas", "seed", "workers", "output"});
      c.name = s.text("name", c.name);
      c.replicas = s.count("replicas", c.replicas);
      c.seed = s.unsigned64("seed", c.seed);
      c.workers = static_cast<unsigned>(s.count("workers", c.workers));
      c.output = s.text("output", c.output.string());
    } else if (name == "potential" || name.rfind("potential.", 0) == 0) {
      Section s(body, name, idx, {"kind", "c2", "c3", "c4", "eta", "eta_v", "table"});
      PotentialEntry e;
      e.label = name == "potential" ? "main" : name.substr(10);
      if (!safe_label(e.label)) throw ConfigError("variant label must be alphanumeric", name, idx.of(name));
      e.kind = s.text("kind", e.kind);
      const std::map<std::string, std::set<std::string>> used = {{"harmonic", {"kind", "c2"}},
                                                                  {"fput", {"kind", "c2", "c3", "c4"}},
                                                                  {"toda", {"kind", "eta"}},
                                                                  {"tabulated", {"kind", "table", "eta_v"}}};
      auto it = used.find(e.kind);
      if (it == used.end()) throw s.error("kind", "unknown potential kind '" + e.kind + "'");
      for (const auto& [key, value] : body)
        if (!it->second.count(key)) throw s.error(key, "not used by kind " + e.kind);
      e.c2 = s.real("c2", e.c2);
      e.c3 = s.real("c3", e.c3);
      e.c4 = s.real("c4", e.c4);
      e.eta = s.real("eta", e.eta);
      e.eta_v = s.real("eta_v", e.eta_v);
      if (e.kind == "tabulated") {
        auto t = s.raw("table");
        if (!t || t->empty()) throw s.error("table", "tabulated potential needs a table file");
        fs::path p(*t);
        e.table = (p.is_absolute() ? p : fs::absolute(base_dir / p)).lexically_normal().string();
      }
      for (const auto& other : c.potentials)
        if (other.label == e.label) throw ConfigError("duplicate potential variant", name, idx.of(name));
      c.potentials.push_back(e);
    } else if (name == "scaling") {
      Section s(body, name, idx,
                {"n", "a_exp", "b_exp", "alpha", "gamma", "beta", "tau", "p_mean", "lattice_len", "dt_micro"});
      auto& g = c.scaling;
      g.n = static_cast<int>(s.integer("n", g.n));
      g.a_exp = s.real("a_exp", g.a_exp);
      g.b_exp = s.real("b_exp", g.b_exp);
      g.alpha = s.real("alpha", g.alpha);
      g.gamma = s.real("gamma", g.gamma);
      g.beta = s.real("beta", g.beta);
      g.tau = s.real("tau", g.tau);
      g.p_mean = s.real("p_mean", g.p_mean);
      g.dt_micro = s.real("dt_micro", g.dt_micro);
      const std::string len = s.text("lattice_len", "auto");
      c.auto_lattice = len == "auto";
      if (!c.auto_lattice) g.lattice_len = s.count("lattice_len", 0);
    } else if (name == "observation") {
      Section s(body, name, idx,
                {"test_function", "width", "hermite_index", "horizon", "snapshot_micro", "drift_corrected"});
      auto& o = c.observation;
      o.test_function = s.text("test_function", o.test_function);
      o.width = s.real("width", o.width);
      o.hermite_index = static_cast<int>(s.integer("hermite_index", o.hermite_index));
      o.horizon = s.real("horizon", o.horizon);
      o.snapshot_micro = s.real("snapshot_micro", o.snapshot_micro);
      o.drift_corrected = s.flag("drift_corrected", o.drift_corrected);
    } else if (name == "estimators") {
      Section s(body, name, idx,
                {"list", "ell", "sigma", "lags", "times", "centers", "qv_points", "field_replicas", "field_points"});
      auto& e = c.estimators;
      e.list = s.words("list", e.list);
      for (const auto& w : e.list)
        if (!kEstimators.count(w)) throw s.error("list", "unknown estimator '" + w + "'");
      std::vector<long> ells;
      for (std::size_t l : e.ell) ells.push_back(static_cast<long>(l));
      ells = s.integers("ell", ells);
      e.ell.clear();
      for (long l : ells) {
        if (l < 1) throw s.error("ell", "block sizes must be positive");
        e.ell.push_back(static_cast<std::size_t>(l));
      }
      std::vector<long> sig(e.sigma.begin(), e.sigma.end());
      sig = s.integers("sigma", sig);
      e.sigma.assign(sig.begin(), sig.end());
      e.lags = s.integers("lags", e.lags);
      e.times = s.reals("times", e.times);
      e.centers = s.count("centers", e.centers);
      e.qv_points = s.count("qv_points", e.qv_points);
      e.field_replicas = s.count("field_replicas", e.field_replicas);
      e.field_points = s.count("field_points", e.field_points);
    } else if (name == "sbe") {
      Section s(body, name, idx, {"enabled", "grid", "dx", "dt", "horizon", "sample_every", "replicas", "sigma"});
      auto& b = c.sbe;
      b.enabled = s.flag("enabled", true);
      b.grid = s.count("grid", b.grid);
      b.dx = s.real("dx", b.dx);
      b.dt = s.real("dt", b.dt);
      b.horizon = s.real("horizon", b.horizon);
      b.sample_every = s.real("sample_every", b.sample_every);
      b.replicas = s.count("replicas", b.replicas);
      b.sigma = static_cast<int>(s.integer("sigma", b.sigma));
    } else {
      throw ConfigError("unknown section", name, idx.of(name));
    }
  }
  if (c.potentials.empty()) throw ConfigError("at least one [potential] section is required", "potential");
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ResourceError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream o;
  o << "[experiment]\n"
    << "name = " << name << '\n'
    << "replicas = " << replicas << '\n'
    << "seed = " << seed << '\n'
    << "workers = " << workers << '\n'
    << "output = " << output.string() << "\n\n";
  for (const auto& e : potentials) {
    o << "[potential." << e.label << "]\n"
      << "kind = " << e.kind << '\n';
    if (e.kind == "harmonic") o << "c2 = " << format_double(e.c2) << '\n';
    if (e.kind == "fput")
      o << "c2 = " << format_double(e.c2) << "\nc3 = " << format_double(e.c3) << "\nc4 = " << format_double(e.c4)
        << '\n';
    if (e.kind == "toda") o << "eta = " << format_double(e.eta) << '\n';
    if (e.kind == "tabulated") o << "table = " << e.table << "\neta_v = " << format_double(e.eta_v) << '\n';
    o << '\n';
  }
  const auto& g = scaling;
  o << "[scaling]\n"
    << "n = " << g.n << '\n'
    << "a_exp = " << format_double(g.a_exp) << '\n'
    << "b_exp = " << format_double(g.b_exp) << '\n'
    << "alpha = " << format_double(g.alpha) << '\n'
    << "gamma = " << format_double(g.gamma) << '\n'
    << "beta = " << format_double(g.beta) << '\n'
    << "tau = " << format_double(g.tau) << '\n'
    << "p_mean = " << format_double(g.p_mean) << '\n'
    << "lattice_len = " << (auto_lattice ? std::string("auto") : std::to_string(g.lattice_len)) << '\n'
    << "dt_micro = " << format_double(g.dt_micro) << "\n\n";
  const auto& ob = observation;
  o << "[observation]\n"
    << "test_function = " << ob.test_function << '\n'
    << "width = " << format_double(ob.width) << '\n'
    << "hermite_index = " << ob.hermite_index << '\n'
    << "horizon = " << format_double(ob.horizon) << '\n'
    << "snapshot_micro = " << format_double(ob.snapshot_micro) << '\n'
    << "drift_corrected = " << (ob.drift_corrected ? "true" : "false") << "\n\n";
  const auto& es = estimators;
  o << "[estimators]\n"
    << "list = " << join(es.list) << '\n'
    << "ell = " << join(es.ell) << '\n'
    << "sigma = " << join(es.sigma) << '\n'
    << "lags = " << join(es.lags) << '\n'
    << "times = " << join(es.times) << '\n'
    << "centers = " << es.centers << '\n'
    << "qv_points = " << es.qv_points << '\n'
    << "field_replicas = " << es.field_replicas << '\n'
    << "field_points = " << es.field_points << '\n';
  if (sbe.enabled) {
    o << "\n[sbe]\n"
      << "enabled = true\n"
      << "grid = " << sbe.grid << '\n'
      << "dx = " << format_double(sbe.dx) << '\n'
      << "dt = " << format_double(sbe.dt) << '\n'
      << "horizon = " << format_double(sbe.horizon) << '\n'
      << "sample_every = " << format_double(sbe.sample_every) << '\n'
      << "replicas = " << sbe.replicas << '\n'
      << "sigma = " << sbe.sigma << '\n';
  }
  return o.str();
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw ResourceError("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string ExperimentConfig::hash() const { return sha256_hex(serialize()); }

std::size_t ExperimentConfig::lattice_for_variant(const PotentialSpec& pot) const {
  if (!auto_lattice) return scaling.lattice_len;
  const int n = scaling.n;
  const auto& c = pot.coeffs();
  const TestFunction phi = observation.profile();
  std::size_t max_ell = 1;
  for (std::size_t l : estimators.ell) max_ell = std::max(max_ell, l);
  const double margin = (estimators.wants("bg2") ? static_cast<double>(max_ell) + 2.0 : 2.0) / n;
  double v = std::abs(scaling.sound_velocity(c.c2));
  if (observation.drift_corrected) v *= 1.0 + std::abs(dv_constant(c.c2, c.c3, c.c4)) / n;
  std::size_t len = lattice_for(n, phi.support_radius() + margin, v, observation.horizon);
  if (estimators.wants("smoothed") && !estimators.times.empty()) {
    const double spread = static_cast<double>(std::max<std::size_t>(estimators.centers, 1)) * phi.support_radius();
    len = std::max(len, lattice_for(n, spread + 2.0 / n, v, estimators.times.back()));
  }
  if (estimators.wants("spacetime")) {
    long max_lag = 0;
    for (long l : estimators.lags) max_lag = std::max(max_lag, std::labs(l));
    const auto need = static_cast<std::size_t>(2 * max_lag + 2);
    len = std::max(len, (need + n - 1) / n * n);
  }
  // phonon and Gibbs checks need no moving window; block averages still need L >= 4 ell
  return std::max(len, ((4 * max_ell + n - 1) / n) * static_cast<std::size_t>(n));
}

std::vector<std::string> ExperimentConfig::validate() const {
  std::vector<std::string> warnings;
  const LineIndex idx = source_lines.empty() ? LineIndex(serialize()) : LineIndex(source_lines);
  auto fail = [&](const std::string& section, const std::string& key, const std::string& what) {
    return ConfigError(what, section + "." + key, idx.of(section, key));
  };
  if (!safe_label(name)) throw fail("experiment", "name", "name must be alphanumeric with _ - .");
  if (replicas < 2) throw fail("experiment", "replicas", "at least two replicas are required");
  if (potentials.empty()) throw ConfigError("at least one potential variant is required", "potential");

  const auto& o = observation;
  if (o.test_function != "gaussian" && o.test_function != "hermite")
    throw fail("observation", "test_function", "expected gaussian or hermite");
  if (!(o.width > 0.0)) throw fail("observation", "width", "must be positive");
  if (o.hermite_index < 0 || o.hermite_index > 40) throw fail("observation", "hermite_index", "must be in [0, 40]");
  if (!(o.horizon > 0.0)) throw fail("observation", "horizon", "must be positive");
  if (!(o.snapshot_micro > 0.0)) throw fail("observation", "snapshot_micro", "must be positive");

  const auto& e = estimators;
  if (e.list.empty()) throw fail("estimators", "list", "no estimators selected");
  for (const auto& w : e.list)
    if (!kEstimators.count(w)) throw fail("estimators", "list", "unknown estimator '" + w + "'");
  if (e.sigma.empty()) throw fail("estimators", "sigma", "need at least one mode");
  for (int s : e.sigma)
    if (s != 1 && s != -1) throw fail("estimators", "sigma", "modes are +1 or -1");
  if (e.ell.empty() && e.wants("bg2")) throw fail("estimators", "ell", "bg2 needs block sizes");
  if (e.wants("spacetime") || e.wants("smoothed")) {
    if (e.times.empty()) throw fail("estimators", "times", "need at least one time");
    for (std::size_t i = 0; i < e.times.size(); ++i)
      if (!(e.times[i] > 0.0) || (i > 0 && e.times[i] <= e.times[i - 1]))
        throw fail("estimators", "times", "times must be positive and increasing");
  }
  if (e.wants("spacetime") && e.lags.empty()) throw fail("estimators", "lags", "need at least one lag");
  if (e.centers < 1) throw fail("estimators", "centers", "need at least one center");
  if (e.qv_points < 1) throw fail("estimators", "qv_points", "need at least one point");
  if (e.field_points < 2) throw fail("estimators", "field_points", "need at least two points");
  if (e.wants("fields") && (e.field_replicas < 1 || e.field_replicas > replicas))
    throw fail("estimators", "field_replicas", "must be between 1 and the replica count");

  for (const auto& p : potentials) {
    const std::string sec = p.label == "main" && idx.of("potential") >= 0 ? "potential" : "potential." + p.label;
    PotentialSpec spec = PotentialSpec::harmonic();
    try {
      spec = p.build();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& err) {
      throw fail(sec, "kind", err.what());
    }
    if (p.kind == "fput" && !(p.c4 > 0.0 || (p.c4 == 0.0 && p.c3 == 0.0)))
      throw fail(sec, "c4", "potential is not confining; need c4 > 0, or c3 = c4 = 0");
    ScalingConfig g = scaling;
    g.lattice_len = lattice_for_variant(spec);
    try {
      g.validate(spec.coeffs().c2);
    } catch (const ConfigError& err) {
      throw ConfigError(err.what(), "scaling." + err.field(), idx.of("scaling", err.field()));
    }
    EnsembleSpec es;
    es.cfg = g;
    es.horizon = o.horizon;
    es.snapshot_micro = o.snapshot_micro;
    const std::uint64_t steps = substep_count(g, o.horizon);
    const double snaps = std::ceil(static_cast<double>(steps) / static_cast<double>(es.snapshot_stride()));
    if (snaps < 10.0 * o.horizon || snaps < 2.0)
      throw fail("observation", "snapshot_micro", "fewer than 10 snapshots per unit macro time");
    for (std::size_t l : e.ell)
      if (e.wants("bg2") && 4 * l > g.lattice_len)
        throw fail("estimators", "ell", "block size " + std::to_string(l) + " exceeds L/4");
    for (long lag : e.lags)
      if (e.wants("spacetime") && static_cast<std::size_t>(std::labs(lag)) > g.lattice_len / 2)
        throw fail("estimators", "lags", "lag beyond L/2");
    if (sbe.enabled) {
      try {
        SbeParams::for_chain(sbe.sigma, g.alpha, g.gamma, g.beta, spec.coeffs(), sbe.grid, sbe.dx, sbe.dt).validate();
      } catch (const Error& err) {
        throw fail("sbe", "dt", err.what());
      }
    }
  }
  if (sbe.enabled) {
    if (!(sbe.horizon > 0.0)) throw fail("sbe", "horizon", "must be positive");
    if (!(sbe.sample_every > 0.0)) throw fail("sbe", "sample_every", "must be positive");
    if (sbe.replicas < 2) throw fail("sbe", "replicas", "at least two replicas are required");
  }

  const Regime r = classify_regime(scaling.a_exp, scaling.b_exp);
  if (r == Regime::Undocumented)
    warnings.push_back("exponents (a_exp, b_exp) = (" + format_double(scaling.a_exp) + ", " +
                       format_double(scaling.b_exp) + ") lie outside the documented fluctuation regimes");
  return warnings;
}

}  // namespace oscchain
