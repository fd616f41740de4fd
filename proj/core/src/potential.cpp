#include "oscchain/potential.hpp"

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <charconv>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "oscchain/error.hpp"

namespace oscchain {

namespace {

std::string fmt_num(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Central difference of order k with step h; truncation error is a series in h^2.
double central_difference(const std::function<double(double)>& f, int k, double x, double h) {
  switch (k) {
    case 1:
      return (f(x + h) - f(x - h)) / (2.0 * h);
    case 2:
      return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    case 3:
      return (f(x + 2 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2 * h)) / (2.0 * h * h * h);
    case 4:
      return (f(x + 2 * h) - 4.0 * f(x + h) + 6.0 * f(x) - 4.0 * f(x - h) + f(x - 2 * h)) /
             (h * h * h * h);
    case 5:
      return (f(x + 3 * h) - 4.0 * f(x + 2 * h) + 5.0 * f(x + h) - 5.0 * f(x - h) +
              4.0 * f(x - 2 * h) - f(x - 3 * h)) /
             (2.0 * h * h * h * h * h);
    default:
      throw DomainError("finite-difference order must be in 1..5");
  }
}

constexpr double kValidationRadius = 10.0;
constexpr int kValidationPoints = 201;

}  // namespace

double numeric_derivative(const std::function<double(double)>& f, int order, double x,
                          double* error_estimate) {
  if (order == 0) {
    if (error_estimate) *error_estimate = 0.0;
    return f(x);
  }
  constexpr int kLevels = 10;
  constexpr double kShrink = 1.4;
  constexpr double kShrink2 = kShrink * kShrink;
  const double scale = std::max(1.0, std::abs(x));
  double h = (order <= 2 ? 0.1 : 0.4) * scale;

  double table[kLevels][kLevels];
  double best = central_difference(f, order, x, h);
  double err = std::numeric_limits<double>::infinity();
  table[0][0] = best;
  for (int i = 1; i < kLevels; ++i) {
    h /= kShrink;
    table[0][i] = central_difference(f, order, x, h);
    double factor = kShrink2;
    for (int j = 1; j <= i; ++j) {
      table[j][i] = (table[j - 1][i] * factor - table[j - 1][i - 1]) / (factor - 1.0);
      factor *= kShrink2;
      const double e = std::max(std::abs(table[j][i] - table[j - 1][i]),
                                std::abs(table[j][i] - table[j - 1][i - 1]));
      if (e <= err) {
        err = e;
        best = table[j][i];
      }
    }
    if (std::abs(table[i][i] - table[i - 1][i - 1]) >= 2.0 * err) break;
  }
  if (error_estimate) *error_estimate = err;
  return best;
}

struct PotentialSpec::Table {
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline;
  double lo, hi;
  double step;
  std::string source;

  double eval(int k, double r) const {
    if (r < lo || r > hi) {
      // quadratic continuation from the nearest endpoint
      const double x0 = r < lo ? lo : hi;
      const double d = r - x0;
      const double v0 = spline(x0), v1 = spline.prime(x0), v2 = spline.double_prime(x0);
      switch (k) {
        case 0: return v0 + d * (v1 + 0.5 * d * v2);
        case 1: return v1 + d * v2;
        case 2: return v2;
        default: return 0.0;
      }
    }
    switch (k) {
      case 0: return spline(r);
      case 1: return spline.prime(r);
      case 2: return spline.double_prime(r);
      default: {
        auto d2 = [this](double x) { return spline.double_prime(std::clamp(x, lo, hi)); };
        return central_difference(d2, k - 2, r, step);
      }
    }
  }
};

PotentialSpec PotentialSpec::harmonic(double c2) {
  PotentialSpec s;
  s.kind_ = PotentialKind::Harmonic;
  s.name_ = "harmonic";
  s.params_ = {c2, 0.0, 0.0};
  s.finalize();
  return s;
}

PotentialSpec PotentialSpec::fput(double c3, double c4, double c2) {
  PotentialSpec s;
  s.kind_ = PotentialKind::Fput;
  s.name_ = "fput";
  s.params_ = {c2, c3, c4};
  s.finalize();
  return s;
}

PotentialSpec PotentialSpec::toda(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidPotential("toda: eta must be positive");
  PotentialSpec s;
  s.kind_ = PotentialKind::Toda;
  s.name_ = "toda";
  s.params_ = {eta};
  s.eta_v_ = eta;
  s.finalize();
  return s;
}

PotentialSpec PotentialSpec::tabulated(std::vector<double> r, std::vector<double> v, double eta_v) {
  if (r.size() != v.size() || r.size() < 5)
    throw InvalidPotential("tabulated potential needs at least 5 (r, V) pairs of equal length");
  const double step = (r.back() - r.front()) / static_cast<double>(r.size() - 1);
  if (!(step > 0.0)) throw InvalidPotential("tabulated grid must be increasing");
  for (std::size_t i = 1; i < r.size(); ++i) {
    const double expected = r.front() + step * static_cast<double>(i);
    if (std::abs(r[i] - expected) > 1e-6 * step)
      throw InvalidPotential("tabulated grid must be uniformly spaced");
  }
  if (!(r.front() < 0.0 && r.back() > 0.0))
    throw InvalidPotential("tabulated grid must contain the origin in its interior");
  PotentialSpec s;
  s.kind_ = PotentialKind::Tabulated;
  s.name_ = "tabulated";
  s.eta_v_ = eta_v;
  s.table_ = std::make_shared<const Table>(
      Table{boost::math::interpolators::cardinal_cubic_b_spline<double>(v.begin(), v.end(), r.front(), step),
            r.front(), r.back(), step, {}});
  s.finalize();
  return s;
}

PotentialSpec PotentialSpec::tabulated_csv(const std::filesystem::path& path, double eta_v) {
  std::ifstream in(path);
  if (!in) throw InvalidPotential("cannot open potential table " + path.string());
  std::vector<double> r, v;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double a, b;
    if (!(ls >> a >> b)) {
      if (r.empty()) continue;  // header
      throw InvalidPotential(path.string() + ":" + std::to_string(lineno) + ": expected two numbers");
    }
    r.push_back(a);
    v.push_back(b);
  }
  PotentialSpec s = tabulated(std::move(r), std::move(v), eta_v);
  auto table = std::make_shared<Table>(*s.table_);
  table->source = path.string();
  s.table_ = std::move(table);
  return s;
}

PotentialSpec PotentialSpec::custom(std::string name, Fn value, std::vector<Fn> derivatives,
                                    double eta_v) {
  if (!value) throw InvalidPotential("custom potential needs a value function");
  if (derivatives.size() > 5) throw InvalidPotential("at most five derivative functions");
  PotentialSpec s;
  s.kind_ = PotentialKind::Custom;
  s.name_ = std::move(name);
  s.value_fn_ = std::move(value);
  s.derivative_fns_ = std::move(derivatives);
  s.eta_v_ = eta_v;
  s.finalize();
  return s;
}

double PotentialSpec::value(double r) const { return derivative(0, r); }

double PotentialSpec::derivative(int order, double r) const {
  if (order < 0 || order > 5) throw DomainError("derivative order must be in 0..5");
  switch (kind_) {
    case PotentialKind::Harmonic:
    case PotentialKind::Fput: {
      const double c2 = params_[0], c3 = params_[1], c4 = params_[2];
      switch (order) {
        case 0: return r * r * (c2 / 2.0 + r * (c3 / 6.0 + r * c4 / 24.0));
        case 1: return r * (c2 + r * (c3 / 2.0 + r * c4 / 6.0));
        case 2: return c2 + r * (c3 + r * c4 / 2.0);
        case 3: return c3 + r * c4;
        case 4: return c4;
        default: return 0.0;
      }
    }
    case PotentialKind::Toda: {
      const double eta = params_[0];
      if (order == 0) return exp_neg_minus_one_plus(eta * r);
      if (order == 1) return -eta * std::expm1(-eta * r);
      return std::pow(-eta, order) * std::exp(-eta * r);
    }
    case PotentialKind::Tabulated:
      return table_->eval(order, r);
    case PotentialKind::Custom: {
      if (order == 0) return value_fn_(r);
      if (static_cast<std::size_t>(order) <= derivative_fns_.size() && derivative_fns_[order - 1])
        return derivative_fns_[order - 1](r);
      if (order == 1) {
        const double h = 1e-3 * std::max(1.0, std::abs(r));
        const auto& f = value_fn_;
        return (f(r - 2 * h) - 8.0 * f(r - h) + 8.0 * f(r + h) - f(r + 2 * h)) / (12.0 * h);
      }
      return numeric_derivative(value_fn_, order, r);
    }
  }
  return 0.0;
}

std::string PotentialSpec::describe() const {
  switch (kind_) {
    case PotentialKind::Harmonic:
      return params_[0] == 1.0 ? "harmonic" : "harmonic(" + fmt_num(params_[0]) + ")";
    case PotentialKind::Fput: {
      std::string s = "fput(" + fmt_num(params_[1]) + "," + fmt_num(params_[2]);
      if (params_[0] != 1.0) s += "," + fmt_num(params_[0]);
      return s + ")";
    }
    case PotentialKind::Toda:
      return "toda(" + fmt_num(params_[0]) + ")";
    case PotentialKind::Tabulated:
      return "tabulated(" + table_->source + ")";
    case PotentialKind::Custom:
      return "custom(" + name_ + ")";
  }
  return name_;
}

bool PotentialSpec::growth_bound_holds() const {
  double lo = -kValidationRadius, hi = kValidationRadius;
  if (table_) {
    lo = std::max(lo, table_->lo);
    hi = std::min(hi, table_->hi);
  }
  for (int i = 0; i < kValidationPoints; ++i) {
    const double r = lo + (hi - lo) * i / (kValidationPoints - 1);
    const double weight = std::exp(-eta_v_ * std::abs(r));
    for (int k = 0; k <= 5; ++k) {
      if (!std::isfinite(weight * derivative(k, r))) return false;
    }
  }
  return true;
}

void PotentialSpec::finalize() {
  if (kind_ == PotentialKind::Harmonic || kind_ == PotentialKind::Fput) {
    for (double p : params_)
      if (!std::isfinite(p)) throw InvalidPotential(name_ + ": non-finite coefficient");
  }
  if (!(eta_v_ >= 0.0)) throw InvalidPotential(name_ + ": eta_V must be non-negative");
  // spline tables reproduce the origin only to interpolation accuracy
  const double origin_tol = kind_ == PotentialKind::Tabulated ? 1e-6 : 1e-12;
  const double v0 = value(0.0);
  if (!(std::abs(v0) <= origin_tol)) throw InvalidPotential(name_ + ": V(0) must vanish, got " + fmt_num(v0));
  const double d0 = derivative(1, 0.0);
  if (!(std::abs(d0) <= std::max(origin_tol, 1e-8))) throw InvalidPotential(name_ + ": V'(0) must vanish, got " + fmt_num(d0));
  coeffs_ = taylor_coeffs(*this);
  if (!(coeffs_.c2 > 0.0)) throw InvalidPotential(name_ + ": c2 = V''(0) must be positive");
  if (!growth_bound_holds())
    throw InvalidPotential(name_ + ": derivatives exceed the exponential growth bound on [-10, 10]");
}

TaylorCoefficients taylor_coeffs(const PotentialSpec& spec) {
  std::array<double, 4> c{};
  for (int k = 2; k <= 5; ++k) {
    const double v = spec.derivative(k, 0.0);
    if (!std::isfinite(v))
      throw InvalidPotential(spec.name() + ": derivative of order " + std::to_string(k) + " is not finite at 0");
    c[k - 2] = v;
  }
  return {c[0], c[1], c[2], c[3]};
}

double dv_constant(double c2, double c3, double c4) {
  if (!(c2 > 0.0)) throw InvalidCoefficients("dv_constant requires c2 > 0");
  return (2.0 * c2 * c4 - c3 * c3) / (24.0 * c2 * c2 * c2);
}

ScaledPotential::ScaledPotential(PotentialSpec base, double epsilon)
    : base_(std::move(base)), eps_(epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must lie in (0, 1]");
  inv_eps2_ = 1.0 / (eps_ * eps_);
  const auto& c = base_.coeffs();
  c2_ = c.c2;
  c3_eps_ = c.c3 * eps_;
  c4_eps2_ = c.c4 * eps_ * eps_;
  if (base_.kind() == PotentialKind::Toda) toda_eta_ = base_.params()[0];
}

double ScaledPotential::derivative(int order, double r) const {
  switch (order) {
    case 0: return value(r);
    case 1: return force(r);
    default: return std::pow(eps_, order - 2) * base_.derivative(order, eps_ * r);
  }
}

double ScaledPotential::taylor_remainder(double r) const {
  const double r2 = r * r;
  return value(r) - r2 * (c2_ / 2.0 + r * (c3_eps_ / 6.0 + r * c4_eps2_ / 24.0));
}

// ---------------------------------------------------------------------------

GibbsMarginal::GibbsMarginal(ScaledPotential potential, double beta, double tau)
    : pot_(std::move(potential)), beta_(beta), tau_(tau) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be positive");
  if (!std::isfinite(tau)) throw DomainError("tau must be finite");
  const double c2 = pot_.c2();
  const double sd0 = 1.0 / std::sqrt(c2 * beta_);

  // Linear lower bound W-(r) = a|r| - b.
  const double vl = pot_.value(-kValidationRadius), vr = pot_.value(kValidationRadius);
  const double a = 0.5 * std::min(vl, vr) / kValidationRadius;
  if (!(a > std::abs(tau_)))
    throw EnvelopeFailure("Gibbs marginal is not integrable: linear growth " + fmt_num(a) +
                          " does not exceed |tau| = " + fmt_num(std::abs(tau_)));
  double b = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const double r = -kValidationRadius + 2.0 * kValidationRadius * i / 2000.0;
    b = std::max(b, a * std::abs(r) - pot_.value(r));
  }
  const double eta = pot_.epsilon() * pot_.base().eta_v();
  const double denom = beta_ * (a - std::abs(tau_)) - eta;
  if (!(denom > 0.0)) throw EnvelopeFailure("truncation radius undefined: growth bound too weak");
  bounds_.slope = a;
  bounds_.offset = b;
  bounds_.r_star = std::max((40.0 + beta_ * b) / denom, 12.0 * sd0);
  const double rs = bounds_.r_star;

  // Upper bound W+ fitted on the truncated range.
  double upper = 0.0;
  if (eta > 0.0) {
    for (int i = 0; i <= 4000; ++i) {
      const double r = -rs + 2.0 * rs * i / 4000.0;
      const double shape = (std::cosh(eta * r) - 1.0) / (pot_.epsilon() * pot_.epsilon());
      if (shape > 1e-12) upper = std::max(upper, pot_.value(r) / shape);
    }
  }
  bounds_.upper_scale = upper;

  // Locate the mode on a grid, then refine by golden section.
  auto raw = [this](double r) { return -beta_ * (pot_.value(r) - tau_ * r); };
  constexpr int kGrid = 20001;
  auto grid_argmax = [&](auto&& fn) {
    double best_r = -rs, best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGrid; ++i) {
      const double r = -rs + 2.0 * rs * i / (kGrid - 1);
      const double v = fn(r);
      if (v > best) {
        best = v;
        best_r = r;
      }
    }
    const double cell = 2.0 * rs / (kGrid - 1);
    double lo = std::max(-rs, best_r - cell), hi = std::min(rs, best_r + cell);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 80; ++it) {
      const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
      if (fn(m1) < fn(m2)) lo = m1; else hi = m2;
    }
    const double r = 0.5 * (lo + hi);
    return std::pair{r, std::max(best, fn(r))};
  };
  auto [mode, peak] = grid_argmax(raw);
  mode_ = mode;
  log_shift_ = peak;

  // Quadrature moments.
  mass_ = integrate([](double) { return 1.0; }, -rs, rs);
  if (!(mass_ > 0.0) || !std::isfinite(mass_)) throw NumericError("Gibbs partition function is not finite");
  moments_.z = mass_ * std::exp(log_shift_);
  moments_.mean_r = integrate([](double r) { return r; }, -rs, rs) / mass_;
  moments_.mean_r2 = integrate([](double r) { return r * r; }, -rs, rs) / mass_;
  moments_.mean_vprime = integrate([this](double r) { return pot_.force(r); }, -rs, rs) / mass_;
  moments_.mean_v = integrate([this](double r) { return pot_.value(r); }, -rs, rs) / mass_;
  moments_.mean_v2 = integrate([this](double r) { const double v = pot_.value(r); return v * v; }, -rs, rs) / mass_;

  // Rejection envelope: Gaussian core mixed with a Laplace tail.
  core_mean_ = moments_.mean_r;
  core_sd_ = std::sqrt(1.5) * sd0;
  tail_rate_ = std::min(0.5 * beta_ * (a - std::abs(tau_)), 1.0 / core_sd_);
  auto ratio = [this](double r) { return log_target(r) - log_proposal(r); };
  log_envelope_ = grid_argmax(ratio).second + std::log(1.01);
  expected_acceptance_ = mass_ / std::exp(log_envelope_);
  if (!(expected_acceptance_ >= 1e-4))
    throw EnvelopeFailure("rejection envelope acceptance " + fmt_num(expected_acceptance_) + " below 1e-4");
}

double GibbsMarginal::log_target(double r) const noexcept {
  return -beta_ * (pot_.value(r) - tau_ * r) - log_shift_;
}

double GibbsMarginal::log_proposal(double r) const noexcept {
  const double z = (r - core_mean_) / core_sd_;
  const double lg = std::log(core_weight_) - 0.5 * z * z - std::log(core_sd_ * std::sqrt(2.0 * std::numbers::pi));
  const double ll = std::log1p(-core_weight_) + std::log(0.5 * tail_rate_) - tail_rate_ * std::abs(r - core_mean_);
  const double hi = std::max(lg, ll);
  return hi + std::log(std::exp(lg - hi) + std::exp(ll - hi));
}

double GibbsMarginal::integrate(const std::function<double(double)>& g, double a, double b) const {
  if (!(b > a)) return 0.0;
  auto integrand = [&](double r) { return g(r) * std::exp(log_target(r)); };
  // Split around the bulk so the adaptive rule resolves the peak.
  const double w = 8.0 / std::sqrt(pot_.c2() * beta_);
  std::array<double, 5> cuts{a, std::clamp(mode_ - w, a, b), std::clamp(mode_, a, b), std::clamp(mode_ + w, a, b), b};
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    double err = 0.0;
    const double part = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, cuts[i], cuts[i + 1], 20, 1e-12, &err);
    if (!std::isfinite(part)) throw NumericError("quadrature produced a non-finite value");
    total += part;
  }
  return total;
}

double GibbsMarginal::cdf(double x) const {
  const double rs = bounds_.r_star;
  if (x <= -rs) return 0.0;
  if (x >= rs) return 1.0;
  return std::clamp(integrate([](double) { return 1.0; }, -rs, x) / mass_, 0.0, 1.0);
}

double GibbsMarginal::expectation(const std::function<double(double)>& g) const {
  return integrate(g, -bounds_.r_star, bounds_.r_star) / mass_;
}

double GibbsMarginal::sample(RandomStream& rng, SamplerStats* stats) const {
  constexpr std::uint64_t kMaxProposals = 1'000'000;
  const double rs = bounds_.r_star;
  for (std::uint64_t i = 0; i < kMaxProposals; ++i) {
    double r;
    if (rng.uniform() < core_weight_) {
      r = core_mean_ + core_sd_ * rng.normal();
    } else {
      const double e = -std::log(rng.uniform_pos()) / tail_rate_;
      r = rng.uniform() < 0.5 ? core_mean_ - e : core_mean_ + e;
    }
    if (stats) ++stats->proposals;
    if (std::abs(r) > rs) continue;
    if (std::log(rng.uniform_pos()) <= log_target(r) - log_proposal(r) - log_envelope_) {
      if (stats) ++stats->accepted;
      return r;
    }
  }
  throw EnvelopeFailure("no sample accepted in 1e6 proposals");
}

GibbsMoments gibbs_moments(double beta, double tau, const ScaledPotential& pot) {
  return GibbsMarginal(pot, beta, tau).moments();
}

double sample_gibbs_r(double beta, double tau, const ScaledPotential& pot, RandomStream& rng) {
  return GibbsMarginal(pot, beta, tau).sample(rng);
}

}  // namespace oscchain
