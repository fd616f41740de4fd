#include "oscchain/observables.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <numbers>
#include <sstream>

namespace oscchain {

namespace {

constexpr double kSupportTolerance = 1e-14;

// psi_0 .. psi_{count-1} at z by the three-term recurrence.
void hermite_functions(double z, int count, double* out) {
  out[0] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * z * z);
  if (count > 1) out[1] = std::sqrt(2.0) * z * out[0];
  for (int m = 1; m + 1 < count; ++m)
    out[m + 1] = std::sqrt(2.0 / (m + 1)) * z * out[m] - std::sqrt(static_cast<double>(m) / (m + 1)) * out[m - 1];
}

double hermite_derivative(int k, int order, double z) {
  // coefficients over psi_m after applying d/dz `order` times
  constexpr int kMaxOrder = 3;
  std::vector<double> coef(k + kMaxOrder + 2, 0.0), next(coef.size(), 0.0);
  coef[k] = 1.0;
  for (int d = 0; d < order; ++d) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t m = 0; m + 1 < coef.size(); ++m) {
      if (coef[m] == 0.0) continue;
      if (m > 0) next[m - 1] += coef[m] * std::sqrt(m / 2.0);
      next[m + 1] -= coef[m] * std::sqrt((m + 1) / 2.0);
    }
    std::swap(coef, next);
  }
  std::array<double, 64> psi{};
  const int count = static_cast<int>(coef.size());
  if (count > static_cast<int>(psi.size())) throw DomainError("hermite index too large");
  hermite_functions(z, count, psi.data());
  double acc = 0.0;
  for (int m = 0; m < count; ++m) acc += coef[m] * psi[m];
  return acc;
}

double find_radius(const TestFunction& phi, double start, double step) {
  // walk outward until phi and phi' are negligible on both sides, then confirm a stretch beyond
  const double c = phi.center();
  auto small = [&](double d) {
    for (double x : {c - d, c + d})
      for (int k = 0; k <= 1; ++k)
        if (std::abs(phi.derivative(k, x)) >= kSupportTolerance) return false;
    return true;
  };
  double d = start;
  for (;;) {
    while (!small(d)) d += step;
    bool confirmed = true;
    for (int i = 1; i <= 200 && confirmed; ++i) confirmed = small(d + i * step);
    if (confirmed) return d;
    d += step;
  }
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

TestFunction TestFunction::gaussian(double center, double width) {
  if (!(width > 0.0)) throw DomainError("gaussian width must be positive");
  TestFunction f;
  f.kind_ = Kind::Gaussian;
  f.center_ = center;
  f.scale_ = width;
  f.radius_ = find_radius(f, 7.0 * width, 0.01 * width);
  return f;
}

TestFunction TestFunction::hermite(int index, double scale, double center) {
  if (index < 0 || index > 40) throw DomainError("hermite index must be in 0..40");
  if (!(scale > 0.0)) throw DomainError("hermite scale must be positive");
  TestFunction f;
  f.kind_ = Kind::Hermite;
  f.index_ = index;
  f.center_ = center;
  f.scale_ = scale;
  f.radius_ = find_radius(f, std::sqrt(2.0 * index + 1.0) * scale, 0.01 * scale);
  return f;
}

TestFunction TestFunction::linear_combination(std::vector<std::pair<double, TestFunction>> terms) {
  if (terms.empty()) throw DomainError("empty linear combination");
  TestFunction f;
  f.kind_ = Kind::Combination;
  double lo = terms.front().second.center_ - terms.front().second.radius_;
  double hi = terms.front().second.center_ + terms.front().second.radius_;
  for (const auto& [a, g] : terms) {
    lo = std::min(lo, g.center_ - g.radius_);
    hi = std::max(hi, g.center_ + g.radius_);
  }
  f.center_ = 0.5 * (lo + hi);
  f.radius_ = 0.5 * (hi - lo);
  f.terms_ = std::move(terms);
  return f;
}

double TestFunction::derivative(int order, double x) const {
  if (order < 0 || order > 3) throw DomainError("test-function derivative order must be in 0..3");
  switch (kind_) {
    case Kind::Gaussian: {
      const double z = (x - center_) / scale_;
      const double g = std::exp(-0.5 * z * z);
      switch (order) {
        case 0: return g;
        case 1: return -z / scale_ * g;
        case 2: return (z * z - 1.0) / (scale_ * scale_) * g;
        default: return -(z * z * z - 3.0 * z) / (scale_ * scale_ * scale_) * g;
      }
    }
    case Kind::Hermite:
      return hermite_derivative(index_, order, (x - center_) / scale_) / std::pow(scale_, order);
    case Kind::Combination: {
      double acc = 0.0;
      for (const auto& [a, g] : terms_) acc += a * g.derivative(order, x);
      return acc;
    }
  }
  return 0.0;
}

double TestFunction::norm2() const {
  switch (kind_) {
    case Kind::Gaussian: return std::sqrt(std::numbers::pi) * scale_;
    case Kind::Hermite: return scale_;
    default: break;
  }
  auto sq = [this](double x) { const double v = derivative(0, x); return v * v; };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(sq, center_ - radius_, center_ + radius_, 15, 1e-12);
}

double TestFunction::deriv_norm2() const {
  switch (kind_) {
    case Kind::Gaussian: return std::sqrt(std::numbers::pi) / (2.0 * scale_);
    case Kind::Hermite: return (index_ + 0.5) / scale_;
    default: break;
  }
  auto sq = [this](double x) { const double v = derivative(1, x); return v * v; };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(sq, center_ - radius_, center_ + radius_, 15, 1e-12);
}

TestFunction TestFunction::shifted(double shift) const { return centered_at(center_ - shift); }

TestFunction TestFunction::centered_at(double center) const {
  TestFunction f = *this;
  const double delta = center - center_;
  f.center_ = center;
  for (auto& [a, g] : f.terms_) g = g.centered_at(g.center_ + delta);
  return f;
}

std::string TestFunction::describe() const {
  switch (kind_) {
    case Kind::Gaussian: return "gaussian(" + fmt(center_) + "," + fmt(scale_) + ")";
    case Kind::Hermite: return "hermite(" + std::to_string(index_) + "," + fmt(scale_) + "," + fmt(center_) + ")";
    case Kind::Combination: {
      std::string s = "combination(";
      for (std::size_t i = 0; i < terms_.size(); ++i)
        s += (i ? "," : "") + fmt(terms_[i].first) + "*" + terms_[i].second.describe();
      return s + ")";
    }
  }
  return {};
}

double corrector_coupling(const TaylorCoefficients& c) { return c.c3 / (2.0 * std::pow(c.c2, 1.5)); }

ModeMeans equilibrium_means(const GibbsMarginal& marginal, double p_mean) {
  const auto& m = marginal.moments();
  const auto& pot = marginal.potential();
  const double sq = std::sqrt(pot.c2());
  const double u = corrector_coupling(pot.base().coeffs());
  ModeMeans out;
  out.r = m.mean_r;
  out.p = p_mean;
  out.xi_plus = sq * m.mean_r + p_mean;
  out.xi_minus = sq * m.mean_r - p_mean;
  out.energy = 0.5 * (1.0 / marginal.beta() + p_mean * p_mean) + m.mean_v;
  out.xi_tilde_plus = out.xi_plus + pot.epsilon() * u * out.energy;
  out.xi_tilde_minus = out.xi_minus + pot.epsilon() * u * out.energy;
  return out;
}

const std::vector<double>& ModeArrays::mode(int sigma, bool corrected) const {
  if (sigma > 0) return corrected ? xi_tilde_plus : xi_plus;
  if (sigma < 0) return corrected ? xi_tilde_minus : xi_minus;
  return xi_zero;
}

double ModeArrays::mean(int sigma, bool corrected) const {
  if (sigma > 0) return corrected ? means.xi_tilde_plus : means.xi_plus;
  if (sigma < 0) return corrected ? means.xi_tilde_minus : means.xi_minus;
  return means.energy;
}

ModeArrays compute_modes(const ChainState& state, const ScaledPotential& pot, const ScalingConfig&,
                         const ModeMeans& means) {
  const std::size_t len = state.size();
  const double sq = std::sqrt(pot.c2());
  const double shift = pot.epsilon() * corrector_coupling(pot.base().coeffs());
  ModeArrays m;
  m.means = means;
  m.xi_plus.resize(len);
  m.xi_minus.resize(len);
  m.xi_zero.resize(len);
  m.xi_tilde_plus.resize(len);
  m.xi_tilde_minus.resize(len);
  for (std::size_t j = 0; j < len; ++j) {
    const double rn = state.r[j + 1 == len ? 0 : j + 1];
    const double p = state.p[j];
    m.xi_plus[j] = sq * rn + p;
    m.xi_minus[j] = sq * rn - p;
    m.xi_zero[j] = 0.5 * p * p + pot.value(state.r[j]);
    m.xi_tilde_plus[j] = m.xi_plus[j] + shift * m.xi_zero[j];
    m.xi_tilde_minus[j] = m.xi_minus[j] + shift * m.xi_zero[j];
  }
  return m;
}

ModeArrays compute_modes(const ChainState& state, const ScaledPotential& pot, const ScalingConfig& cfg) {
  GibbsMarginal marginal(pot, cfg.beta, cfg.tau);
  return compute_modes(state, pot, cfg, equilibrium_means(marginal, cfg.p_mean));
}

Frame Frame::phonon(int sigma, const ScalingConfig& cfg, const TaylorCoefficients& c, bool drift_corrected) {
  if (sigma != 1 && sigma != -1) throw DomainError("phonon frames need sigma = +1 or -1");
  double v = sigma * cfg.sound_velocity(c.c2);
  if (drift_corrected) v *= 1.0 + dv_constant(c.c2, c.c3, c.c4) / cfg.n;
  return {sigma, v};
}

std::pair<std::size_t, std::size_t> support_window(const TestFunction& phi, double shift, int n, std::size_t len,
                                                   std::size_t margin) {
  const double lo = n * (phi.center() - phi.support_radius() - shift);
  const double hi = n * (phi.center() + phi.support_radius() - shift);
  const double first = std::ceil(lo), last = std::floor(hi);
  if (first < 0.0 || last > static_cast<double>(len) - 1.0 - static_cast<double>(margin))
    throw FrameWrap("test-function window [" + fmt(first) + ", " + fmt(last) + "] leaves the lattice of length " +
                    std::to_string(len));
  return {static_cast<std::size_t>(first), static_cast<std::size_t>(std::max(first, last))};
}

double fluctuation_field(const ModeArrays& modes, int sigma, const TestFunction& phi, const Frame& frame,
                         double t_macro, int n, bool corrected) {
  const auto& xi = modes.mode(sigma, corrected);
  const double mean = modes.mean(sigma, corrected);
  const double sum = pair_with(phi, 0, frame.velocity * t_macro, n, xi.size(), 0,
                               [&](std::size_t j) { return xi[j] - mean; });
  return sum / std::sqrt(static_cast<double>(n));
}

std::vector<double> block_average(const std::vector<double>& g, std::size_t ell, double mean) {
  const std::size_t len = g.size();
  if (ell < 1 || 4 * ell > len) throw DomainError("block length must satisfy 1 <= ell <= L/4");
  std::vector<double> out(len);
  double window = 0.0;
  for (std::size_t i = 0; i < ell; ++i) window += g[i] - mean;
  for (std::size_t j = 0; j < len; ++j) {
    out[j] = window / static_cast<double>(ell);
    window += (g[(j + ell) % len] - mean) - (g[j] - mean);
  }
  if (ell == 1)
    for (std::size_t j = 0; j < len; ++j) out[j] = g[j] - mean;
  return out;
}

double quadratic_field(const ModeArrays& modes, int sigma, const TestFunction& phi, const Frame& frame,
                       double t_macro, int n) {
  const auto& xi = modes.mode(sigma);
  const double mean = modes.mean(sigma);
  return pair_with(phi, 1, frame.velocity * t_macro, n, xi.size(), 1,
                   [&](std::size_t j) { return (xi[j] - mean) * (xi[j + 1] - mean); });
}

double cross_mode_field(const ModeArrays& modes, const TestFunction& phi, const Frame& frame, double t_macro, int n) {
  const auto& xm = modes.xi_minus;
  const auto& xp = modes.xi_plus;
  const double mm = modes.means.xi_minus, mp = modes.means.xi_plus;
  return pair_with(phi, 0, frame.velocity * t_macro, n, xm.size(), 1,
                   [&](std::size_t j) { return (xm[j] - mm) * (xp[j + 1] - mp); });
}

}  // namespace oscchain
