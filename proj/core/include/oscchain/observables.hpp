#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "oscchain/dynamics.hpp"
#include "oscchain/error.hpp"
#include "oscchain/potential.hpp"

namespace oscchain {

/// Smooth, rapidly decaying profile with analytic derivatives up to order three.
class TestFunction {
 public:
  enum class Kind { Gaussian, Hermite, Combination };

  /// exp(-(x - center)^2 / (2 width^2)).
  static TestFunction gaussian(double center, double width);
  /// Normalized Hermite function psi_k((x - center) / scale).
  static TestFunction hermite(int index, double scale, double center = 0.0);
  static TestFunction linear_combination(std::vector<std::pair<double, TestFunction>> terms);

  double operator()(double x) const { return derivative(0, x); }
  /// phi^(order)(x), order in 0..3.
  double derivative(int order, double x) const;

  double norm2() const;        ///< ||phi||^2 in L2
  double deriv_norm2() const;  ///< ||phi'||^2 in L2
  /// |phi^(k)(x)| < 1e-14 for |x - center| > support_radius and k <= 1.
  double support_radius() const noexcept { return radius_; }
  double center() const noexcept { return center_; }
  /// phi(. + shift), i.e. the profile moved by -shift.
  TestFunction shifted(double shift) const;
  /// Same profile with a new center.
  TestFunction centered_at(double center) const;

  Kind kind() const noexcept { return kind_; }
  int index() const noexcept { return index_; }
  double scale() const noexcept { return scale_; }
  std::string describe() const;

 private:
  TestFunction() = default;

  Kind kind_ = Kind::Gaussian;
  double center_ = 0.0;
  double scale_ = 1.0;  // width for gaussians
  int index_ = 0;
  double radius_ = 0.0;
  std::vector<std::pair<double, TestFunction>> terms_;
};

/// Equilibrium means used for centering; from quadrature, not from samples.
struct ModeMeans {
  double r = 0.0;
  double p = 0.0;
  double xi_plus = 0.0;
  double xi_minus = 0.0;
  double energy = 0.0;
  double xi_tilde_plus = 0.0;
  double xi_tilde_minus = 0.0;
};

/// Coupling u = c3 / (2 c2^{3/2}) of the corrected modes.
double corrector_coupling(const TaylorCoefficients& c);

ModeMeans equilibrium_means(const GibbsMarginal& marginal, double p_mean);

struct ModeArrays {
  std::vector<double> xi_plus, xi_minus, xi_zero;
  std::vector<double> xi_tilde_plus, xi_tilde_minus;
  ModeMeans means;

  const std::vector<double>& mode(int sigma, bool corrected = false) const;
  double mean(int sigma, bool corrected = false) const;
};

ModeArrays compute_modes(const ChainState& state, const ScaledPotential& pot, const ScalingConfig& cfg,
                         const ModeMeans& means);
/// Convenience overload that evaluates the equilibrium means by quadrature on every call.
ModeArrays compute_modes(const ChainState& state, const ScaledPotential& pot, const ScalingConfig& cfg);

/// Observation frame; positions j/n are paired with phi(j/n + velocity t).
struct Frame {
  int sigma = 0;
  double velocity = 0.0;

  /// v = sigma sqrt(c2) alpha n^(a-1), optionally times (1 + D_V / n).
  static Frame phonon(int sigma, const ScalingConfig& cfg, const TaylorCoefficients& c, bool drift_corrected = false);
  static Frame energy() { return {0, 0.0}; }
  static Frame with_velocity(int sigma, double velocity) { return {sigma, velocity}; }
};

/// Lattice window [first, last] where phi(j/n + shift) can be non-zero; throws FrameWrap
/// if it is not contained in [0, len - 1 - margin].
std::pair<std::size_t, std::size_t> support_window(const TestFunction& phi, double shift, int n, std::size_t len,
                                                   std::size_t margin = 0);

/// Sum over the support window of g(j) * phi^(order)(j/n + shift).
template <typename G>
double pair_with(const TestFunction& phi, int order, double shift, int n, std::size_t len, std::size_t margin,
                 G&& g) {
  const auto [first, last] = support_window(phi, shift, n, len, margin);
  const double inv_n = 1.0 / n;
  double acc = 0.0;
  for (std::size_t j = first; j <= last; ++j)
    acc += g(j) * phi.derivative(order, static_cast<double>(j) * inv_n + shift);
  return acc;
}

/// n^{-1/2} sum_j centered xi^sigma_j phi(j/n + v t).
double fluctuation_field(const ModeArrays& modes, int sigma, const TestFunction& phi, const Frame& frame,
                         double t_macro, int n, bool corrected = false);

/// Forward block average (1/ell) sum_{i<ell} (g_{j+i} - mean), periodic.
std::vector<double> block_average(const std::vector<double>& g, std::size_t ell, double mean);

/// sum_j centered xi^sigma_j xi^sigma_{j+1} phi'(j/n + v t), no prefactor.
double quadratic_field(const ModeArrays& modes, int sigma, const TestFunction& phi, const Frame& frame,
                       double t_macro, int n);

/// sum_j centered xi^-_j xi^+_{j+1} phi(j/n + v t), no prefactor.
double cross_mode_field(const ModeArrays& modes, const TestFunction& phi, const Frame& frame, double t_macro, int n);

}  // namespace oscchain
