#include "oscchain/sbe_reference.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "oscchain/error.hpp"

namespace oscchain {

SbeParams SbeParams::for_chain(int sigma, double alpha, double gamma, double beta, const TaylorCoefficients& c,
                               std::size_t grid, double dx, double dt) {
  if (sigma != 1 && sigma != -1) throw DomainError("sigma must be +1 or -1");
  SbeParams p;
  p.viscosity = gamma / 4.0;
  p.nonlinearity = sigma * alpha * c.c3 / (8.0 * c.c2 * c.c2);
  p.drift = sigma * alpha * dv_constant(c.c2, c.c3, c.c4);
  p.noise_amp = std::sqrt(gamma / beta);
  p.grid = grid;
  p.dx = dx;
  p.dt = dt;
  return p;
}

void SbeParams::validate() const {
  if (grid < 16) throw DomainError("SBE grid needs at least 16 cells");
  if (!(dx > 0.0) || !(dt > 0.0)) throw DomainError("SBE dx and dt must be positive");
  if (viscosity < 0.0) throw DomainError("SBE viscosity must be non-negative");
  if (viscosity > 0.0 && dt > 0.25 * dx * dx / viscosity)
    throw DomainError("SBE step violates dt <= 0.25 dx^2 / D; reduce dt");
}

SbeField sbe_init_stationary(const SbeParams& params, double beta, RandomStream& rng) {
  params.validate();
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  SbeField f;
  f.u.resize(params.grid);
  const double sd = std::sqrt(2.0 / (beta * params.dx));
  for (auto& v : f.u) v = sd * rng.normal();
  return f;
}

void sbe_step(SbeField& field, const SbeParams& params, RandomStream& rng) {
  const std::size_t m = params.grid;
  if (field.u.size() != m) throw DomainError("SBE field size does not match the grid");
  const double dx = params.dx, dt = params.dt;
  const double diff = params.viscosity / dx;
  const double noise = params.noise_amp / std::sqrt(dt * dx);
  // G at face j+1/2, between cells j and j+1
  std::vector<double> g(m);
  const auto& u = field.u;
  for (std::size_t j = 0; j < m; ++j) {
    const double a = u[j], b = u[j + 1 == m ? 0 : j + 1];
    g[j] = diff * (b - a) + params.nonlinearity * (b * b + a * b + a * a) / 3.0 + params.drift * 0.5 * (a + b) +
           noise * rng.normal();
  }
  const double k = dt / dx;
  for (std::size_t j = 0; j < m; ++j) {
    field.u[j] += k * (g[j] - g[j == 0 ? m - 1 : j - 1]);
    if (!std::isfinite(field.u[j])) throw BlowUp("SBE field became non-finite; reduce dt", j);
  }
  field.t += dt;
}

double sbe_pairing(const SbeField& field, const SbeParams& params, const TestFunction& phi) {
  double acc = 0.0;
  for (std::size_t j = 0; j < field.u.size(); ++j) acc += field.u[j] * phi(static_cast<double>(j) * params.dx);
  return acc * params.dx;
}

double ou_covariance(double x, double t, double gamma, double beta) {
  if (t < 0.0) throw DomainError("OU covariance needs t >= 0");
  if (t == 0.0) throw DomainError("OU covariance is a delta at t = 0; use ou_pairing");
  const double var = gamma * t / 2.0;
  return (2.0 / beta) * std::exp(-x * x / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

double ou_pairing(const TestFunction& phi, const TestFunction& psi, double t, double gamma, double beta) {
  if (t < 0.0) throw DomainError("OU covariance needs t >= 0");
  const double var = gamma * t / 2.0;
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  if (phi.kind() == TestFunction::Kind::Gaussian && psi.kind() == TestFunction::Kind::Gaussian) {
    const double w1 = phi.scale(), w2 = psi.scale(), d = phi.center() - psi.center();
    const double s = w1 * w1 + w2 * w2 + var;
    return (2.0 / beta) * 2.0 * std::numbers::pi * w1 * w2 * std::exp(-d * d / (2.0 * s)) /
           std::sqrt(2.0 * std::numbers::pi * s);
  }
  const double lo = phi.center() - phi.support_radius(), hi = phi.center() + phi.support_radius();
  if (var == 0.0) return (2.0 / beta) * GK::integrate([&](double x) { return phi(x) * psi(x); }, lo, hi, 15, 1e-12);
  const double sd = std::sqrt(var);
  auto smoothed = [&](double x) {
    const double a = std::max(psi.center() - psi.support_radius(), x - 9.0 * sd);
    const double b = std::min(psi.center() + psi.support_radius(), x + 9.0 * sd);
    if (a >= b) return 0.0;
    return GK::integrate(
        [&](double y) {
          const double z = (x - y) / sd;
          return psi(y) * std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
        },
        a, b, 10, 1e-11);
  };
  return (2.0 / beta) * GK::integrate([&](double x) { return phi(x) * smoothed(x); }, lo, hi, 10, 1e-10);
}

}  // namespace oscchain
