#pragma once

#include <cstddef>
#include <vector>

#include "oscchain/observables.hpp"
#include "oscchain/potential.hpp"
#include "oscchain/random.hpp"

namespace oscchain {

/// Periodic finite-difference discretization of
///   du = [D u'' + Lambda (u^2)' + drift u'] dt + noise_amp d(dW)/dx.
struct SbeParams {
  double viscosity = 0.25;    ///< D
  double nonlinearity = 0.0;  ///< Lambda
  double drift = 0.0;
  double noise_amp = 1.0;
  std::size_t grid = 256;     ///< M cells
  double dx = 0.1;
  double dt = 5e-4;

  double length() const { return static_cast<double>(grid) * dx; }

  /// D = gamma/4, Lambda = sigma alpha c3/(8 c2^2), drift = sigma alpha D_V, noise = sqrt(gamma/beta).
  static SbeParams for_chain(int sigma, double alpha, double gamma, double beta, const TaylorCoefficients& c,
                             std::size_t grid = 256, double dx = 0.1, double dt = 5e-4);

  /// Throws DomainError unless grid >= 16, dx > 0, dt > 0 and dt <= 0.25 dx^2 / D.
  void validate() const;
};

struct SbeField {
  std::vector<double> u;
  double t = 0.0;
};

/// Discrete white noise: u_j iid N(0, 2 / (beta dx)).
SbeField sbe_init_stationary(const SbeParams& params, double beta, RandomStream& rng);

/// One Euler-Maruyama step in flux form, so sum(u) changes only by round-off.
/// The nonlinear flux (u_{j+1}^2 + u_{j+1} u_j + u_j^2)/3 keeps discrete white noise
/// invariant for the deterministic part. Throws BlowUp on a non-finite cell.
void sbe_step(SbeField& field, const SbeParams& params, RandomStream& rng);

/// sum_j u_j phi(x_j) dx with x_j = j dx.
double sbe_pairing(const SbeField& field, const SbeParams& params, const TestFunction& phi);

/// (2/beta) times the heat kernel of variance gamma t / 2 at x. Throws DomainError for
/// t < 0 and for t == 0, where only the smoothed pairing is meaningful.
double ou_covariance(double x, double t, double gamma, double beta);

/// (2/beta) <phi, G_{gamma t/2} * psi>; closed form for two Gaussians, quadrature otherwise.
double ou_pairing(const TestFunction& phi, const TestFunction& psi, double t, double gamma, double beta);

}  // namespace oscchain
