#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "oscchain/random.hpp"

namespace oscchain {

enum class PotentialKind { Harmonic, Fput, Toda, Tabulated, Custom };

/// Derivatives of V at the origin: c_k = V^(k)(0).
struct TaylorCoefficients {
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;
};

/// Interaction potential V with derivatives up to order five.
///
/// Built-in families evaluate V^(k) in closed form. Custom potentials may
/// supply only the value; missing derivatives then fall back to extrapolated
/// central differences, and tabulated potentials use a cubic B-spline whose
/// orders three to five are themselves finite differences (lower accuracy).
class PotentialSpec {
 public:
  using Fn = std::function<double(double)>;

  static PotentialSpec harmonic(double c2 = 1.0);
  /// V(r) = c2 r^2/2 + c3 r^3/6 + c4 r^4/24.
  static PotentialSpec fput(double c3, double c4, double c2 = 1.0);
  /// Toda interaction V(r) = exp(-eta r) + eta r - 1.
  static PotentialSpec toda(double eta = 1.0);
  /// Uniformly spaced samples (r_i, V_i); the grid must contain the origin in its interior.
  static PotentialSpec tabulated(std::vector<double> r, std::vector<double> v, double eta_v = 1.0);
  /// Two-column CSV file "r,V" (a header line is skipped when present).
  static PotentialSpec tabulated_csv(const std::filesystem::path& path, double eta_v = 1.0);
  /// `derivatives[k-1]` is V^(k); any trailing orders may be omitted.
  static PotentialSpec custom(std::string name, Fn value, std::vector<Fn> derivatives = {},
                              double eta_v = 1.0);

  double value(double r) const;
  /// V^(k)(r) for k in 0..5.
  double derivative(int order, double r) const;

  PotentialKind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  double eta_v() const noexcept { return eta_v_; }
  const TaylorCoefficients& coeffs() const noexcept { return coeffs_; }
  /// Family parameters: {c2, c3, c4} for fput/harmonic, {eta} for toda.
  const std::vector<double>& params() const noexcept { return params_; }
  /// Compact textual form, e.g. "toda(1)", used in config serialization.
  std::string describe() const;

  /// Checks the exponential growth bound |e^{-eta_V |r|} V^(k)(r)| < inf on a grid of [-10, 10].
  bool growth_bound_holds() const;

 private:
  struct Table;

  PotentialSpec() = default;
  void finalize();

  PotentialKind kind_ = PotentialKind::Harmonic;
  std::string name_;
  std::vector<double> params_;
  double eta_v_ = 1.0;
  Fn value_fn_;
  std::vector<Fn> derivative_fns_;
  std::shared_ptr<const Table> table_;
  TaylorCoefficients coeffs_;
};

/// Returns (c2, c3, c4, c5). Analytic derivatives are used when available;
/// otherwise Richardson-extrapolated central differences of V.
TaylorCoefficients taylor_coeffs(const PotentialSpec& spec);

/// Drift constant (2 c2 c4 - c3^2) / (24 c2^3).
double dv_constant(double c2, double c3, double c4);

/// k-th derivative of f at x by extrapolated central differences.
double numeric_derivative(const std::function<double(double)>& f, int order, double x,
                          double* error_estimate = nullptr);

/// e^{-x} - 1 + x without cancellation near zero.
inline double exp_neg_minus_one_plus(double x) noexcept {
  if (std::abs(x) < 0.1) {
    // alternating series x^2/2 - x^3/6 + ...
    double term = x * x / 2.0;
    double sum = term;
    for (int k = 3; k <= 14; ++k) {
      term *= -x / k;
      sum += term;
    }
    return sum;
  }
  return std::expm1(-x) + x;
}

/// V_n(r) = eps^{-2} V(eps r) together with its derivatives.
class ScaledPotential {
 public:
  ScaledPotential(PotentialSpec base, double epsilon);

  double value(double r) const noexcept {
    switch (base_.kind()) {
      case PotentialKind::Harmonic:
      case PotentialKind::Fput: {
        const double r2 = r * r;
        return r2 * (c2_ / 2.0 + r * (c3_eps_ / 6.0 + r * c4_eps2_ / 24.0));
      }
      case PotentialKind::Toda:
        return exp_neg_minus_one_plus(toda_eta_ * eps_ * r) * inv_eps2_;
      default:
        return base_.value(eps_ * r) * inv_eps2_;
    }
  }

  /// V_n'(r) = eps^{-1} V'(eps r).
  double force(double r) const noexcept {
    switch (base_.kind()) {
      case PotentialKind::Harmonic:
      case PotentialKind::Fput:
        return r * (c2_ + r * (c3_eps_ / 2.0 + r * c4_eps2_ / 6.0));
      case PotentialKind::Toda:
        return -toda_eta_ * std::expm1(-toda_eta_ * eps_ * r) / eps_;
      default:
        return base_.derivative(1, eps_ * r) / eps_;
    }
  }

  /// V_n^(k)(r) = eps^{k-2} V^(k)(eps r).
  double derivative(int order, double r) const;

  /// V_n(r) minus its quartic Taylor truncation; O(eps^3) on compact sets.
  double taylor_remainder(double r) const;

  const PotentialSpec& base() const noexcept { return base_; }
  double epsilon() const noexcept { return eps_; }
  double c2() const noexcept { return c2_; }

 private:
  PotentialSpec base_;
  double eps_;
  double inv_eps2_;
  double c2_, c3_eps_, c4_eps2_;
  double toda_eta_ = 0.0;
};

/// Exact moments of the single-site stretch marginal of the Gibbs measure.
struct GibbsMoments {
  double z = 0.0;            ///< partition function
  double mean_r = 0.0;
  double mean_r2 = 0.0;
  double mean_vprime = 0.0;  ///< E[V_n'(r)], equals tau
  double mean_v = 0.0;       ///< E[V_n(r)]
  double mean_v2 = 0.0;      ///< E[V_n(r)^2]
};

/// Lower linear bound W-(r) = a|r| - b, upper bound W+(r) = A eps^{-2}(cosh(eta_V eps r) - 1),
/// and the truncation radius r* used for quadrature and sampling.
struct SandwichBounds {
  double slope = 0.0;        ///< a
  double offset = 0.0;       ///< b
  double upper_scale = 0.0;  ///< A
  double r_star = 0.0;
};

struct SamplerStats {
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  double acceptance_rate() const noexcept {
    return proposals == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
  }
};

/// Single-site stretch marginal with density proportional to exp(-beta (V_n(r) - tau r)).
///
/// Construction fits the sandwich bounds, evaluates all moments by adaptive
/// Gauss-Kronrod quadrature on |r| <= r*, and builds a rejection envelope: a
/// Gaussian core N(m, 1.5/(c2 beta)) mixed with a Laplace component whose
/// tail is lighter-decaying than the target's linear lower bound.
class GibbsMarginal {
 public:
  GibbsMarginal(ScaledPotential potential, double beta, double tau = 0.0);

  double sample(RandomStream& rng, SamplerStats* stats = nullptr) const;

  /// P(r <= x) by quadrature.
  double cdf(double x) const;
  /// E[g(r)] by quadrature.
  double expectation(const std::function<double(double)>& g) const;

  const GibbsMoments& moments() const noexcept { return moments_; }
  const SandwichBounds& sandwich() const noexcept { return bounds_; }
  const ScaledPotential& potential() const noexcept { return pot_; }
  double beta() const noexcept { return beta_; }
  double tau() const noexcept { return tau_; }
  double mode() const noexcept { return mode_; }
  /// Probability that one proposal is accepted, from the envelope constant.
  double expected_acceptance() const noexcept { return expected_acceptance_; }

 private:
  double log_target(double r) const noexcept;
  double log_proposal(double r) const noexcept;
  double integrate(const std::function<double(double)>& g, double a, double b) const;

  ScaledPotential pot_;
  double beta_;
  double tau_;
  double mode_ = 0.0;
  double log_shift_ = 0.0;
  SandwichBounds bounds_;
  GibbsMoments moments_;
  double mass_ = 0.0;  // integral of exp(log_target) over |r| <= r*
  double core_mean_ = 0.0, core_sd_ = 1.0, tail_rate_ = 1.0, core_weight_ = 0.8;
  double log_envelope_ = 0.0;
  double expected_acceptance_ = 0.0;
};

GibbsMoments gibbs_moments(double beta, double tau, const ScaledPotential& pot);

/// One draw from the stretch marginal. Builds the envelope on every call;
/// use GibbsMarginal directly when drawing repeatedly.
double sample_gibbs_r(double beta, double tau, const ScaledPotential& pot, RandomStream& rng);

}  // namespace oscchain
