#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "oscchain/dynamics.hpp"
#include "oscchain/observables.hpp"
#include "oscchain/potential.hpp"

namespace oscchain {

struct TimeIntegralEstimate {
  std::string label;
  double value = 0.0;
  double variance = 0.0;  ///< variance of `value` as an estimator (stderr squared)
  double horizon = 0.0;
  std::size_t replicas = 0;

  double std_error() const { return std::sqrt(variance); }
};

struct CorrelationPoint {
  double t = 0.0;
  long lag = 0;
  long offset = 0;  ///< frame shift applied at t, in sites
};

struct CorrelationSeries {
  std::vector<CorrelationPoint> grid;
  std::vector<double> mean;
  std::vector<double> std_error;        ///< sample std / sqrt(replicas)
  std::vector<double> bootstrap_error;  ///< replica bootstrap of the mean
  std::size_t replicas = 0;
};

/// Sample mean of per-replica values with its squared standard error.
TimeIntegralEstimate summarize(std::string label, const std::vector<double>& samples, double horizon);
/// Same for the squares (second moment) or absolute values (first absolute moment).
TimeIntegralEstimate second_moment(std::string label, const std::vector<double>& samples, double horizon);
TimeIntegralEstimate abs_moment(std::string label, const std::vector<double>& samples, double horizon);

/// Runs fn(0..count-1) on `workers` threads. Results are stored by index so the
/// reduction order never depends on scheduling. A numeric failure is rethrown as
/// ReplicaError for the lowest failing index; other errors propagate unchanged.
std::vector<std::vector<double>> parallel_replicas(std::size_t count, unsigned workers,
                                                   const std::function<std::vector<double>(std::size_t)>& fn);

/// Quadrature means needed to center every estimator.
struct EquilibriumData {
  ModeMeans means;
  double mean_r2 = 0.0;
  double mean_p2 = 0.0;
  double sqrt_c2 = 1.0;
};

EquilibriumData equilibrium_data(const GibbsMarginal& marginal, double p_mean);

/// Function of the current state and macro time, integrated along trajectories.
using Integrand = std::function<double(const ChainState&, double)>;

struct EnsembleSpec {
  PotentialSpec potential = PotentialSpec::harmonic();
  ScalingConfig cfg;
  std::size_t replicas = 100;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double horizon = 0.1;          ///< macro time T
  double snapshot_micro = 0.1;   ///< snapshot spacing in micro time
  /// Optional sorted macro times in (0, T) at which partial integrals are also reported.
  std::vector<double> checkpoints;

  /// Substeps between snapshots.
  std::uint64_t snapshot_stride() const;
};

/// Trapezoid integrals over [0, T] of each integrand along one trajectory. With checkpoints
/// the result holds K values per checkpoint followed by the K values at T; checkpoint
/// integrals end at the substep nearest to the checkpoint.
/// Throws ResolutionError if fewer than 10 snapshots per unit macro time would be taken.
std::vector<double> integrate_trajectory(ChainState& state, const EnsembleSpec& spec, const ScaledPotential& pot,
                                         RandomStream& rng, const std::vector<Integrand>& integrands);

/// Replica r starts from a Gibbs state drawn with stream (seed, r) and evolves with the same
/// stream. Returns one row of integrals per replica, laid out as in integrate_trajectory.
std::vector<std::vector<double>> ensemble_integrals(const EnsembleSpec& spec, const std::vector<Integrand>& integrands);

/// Lattice length n (2 R + 2 |v| T) + 4, rounded up to a multiple of n, so that a window of
/// radius R centered in the box can move by |v| T in either direction.
std::size_t lattice_for(int n, double radius, double velocity, double horizon);
/// Macro time of the substep a checkpoint is snapped to.
double checkpoint_time(const EnsembleSpec& spec, double t);
/// Center of the box in macro units.
double box_center(const ScalingConfig& cfg);

// Integrands. `velocity` is the frame velocity v in phi(j/n + v s).

/// (1/2n) sum_j gamma (p_j - p_{j+1})^2 phi'(j/n + v s)^2.
Integrand qv_integrand(const TestFunction& phi, double velocity, const ScalingConfig& cfg);
/// sum_j (c2 (r_j^2 - E r^2) - (p_j^2 - E p^2)) phi'(j/n + v s).
Integrand equipartition_integrand(const TestFunction& phi, double velocity, const ScalingConfig& cfg, double c2,
                                  const EquilibriumData& eq);
/// sum_j (p_j rbar_{j+1} - pvec^ell_j rvec^ell_j) phi(j/n + v s).
Integrand bg2_integrand(const TestFunction& phi, double velocity, const ScalingConfig& cfg, std::size_t ell,
                        const EquilibriumData& eq);
/// n^{-1/2} sum_j xibar^sigma_j phi(j/n + v s).
Integrand linear_field_integrand(int sigma, const TestFunction& phi, double velocity, const ScalingConfig& cfg,
                                 const EquilibriumData& eq);
/// sum_j xibar^sigma_j xibar^sigma_{j+1} phi(j/n + v s).
Integrand quadratic_field_integrand(int sigma, const TestFunction& phi, double velocity, const ScalingConfig& cfg,
                                    const EquilibriumData& eq);
/// sum_j xibar^-_j xibar^+_{j+1} phi(j/n + v s).
Integrand cross_field_integrand(const TestFunction& phi, double velocity, const ScalingConfig& cfg,
                                const EquilibriumData& eq);
/// (1/n) sum_j (xi^a_j - xi^a_{j+1})(xi^b_j - xi^b_{j+1}) grad phi_a(j) grad phi_b(j), with
/// grad phi(j) = n (phi((j+1)/n + v s) - phi(j/n + v s)); a, b in {+1, -1}.
Integrand bracket_integrand(int sigma_a, const TestFunction& phi_a, double velocity_a, int sigma_b,
                            const TestFunction& phi_b, double velocity_b, const ScalingConfig& cfg, double c2);

// Ensemble estimators. Each runs its own ensemble; the experiment runner batches
// integrands through ensemble_integrals instead.

/// Mean of the integrated bracket density; compare value / T with gamma/beta ||phi'||^2.
TimeIntegralEstimate qv_estimate(const EnsembleSpec& spec, const TestFunction& phi, const Frame& frame);
/// Second moment of the time-integrated equipartition field.
TimeIntegralEstimate equipartition_stat(const EnsembleSpec& spec, const TestFunction& phi, const Frame& frame);
/// Second moment of the time-integrated block-replacement discrepancy, one entry per ell.
std::vector<TimeIntegralEstimate> bg2_discrepancy(const EnsembleSpec& spec, const std::vector<std::size_t>& ells,
                                                  const TestFunction& phi, const Frame& frame);

enum class WrongFrameKind { Linear, Quadratic, Cross };

/// First absolute moment of the time integral of the chosen field observed at `wrong_velocity`.
TimeIntegralEstimate wrong_frame_integral(const EnsembleSpec& spec, WrongFrameKind kind, int sigma,
                                          double wrong_velocity, const TestFunction& phi);

struct BracketEstimate {
  TimeIntegralEstimate off_diagonal;
  TimeIntegralEstimate diagonal_plus;
  TimeIntegralEstimate diagonal_minus;
};

/// Time averages (1/T) integral of the bracket densities with phi_plus in the + frame and
/// phi_minus in the - frame.
BracketEstimate martingale_cross_covariance(const EnsembleSpec& spec, const TestFunction& phi_plus,
                                            const TestFunction& phi_minus);

/// S(j, t) = E[xibar^sigma_{i + j + o(t)}(t) xibar^sigma_i(0)] averaged over reference sites i,
/// with o(t) = -sigma round(sqrt(c2) alpha n^a t) the nearest-integer frame shift.
/// Throws DomainError if a lag exceeds L/2.
CorrelationSeries spacetime_correlation(const EnsembleSpec& spec, int sigma, const std::vector<long>& lags,
                                        const std::vector<double>& times);

/// `count` centers spaced two support radii apart around the box center.
std::vector<double> spread_centers(const ScalingConfig& cfg, const TestFunction& phi, std::size_t count);

/// E[X_t(phi) X_0(phi)] for the sigma field in its sound frame, averaged over `centers`
/// test-function positions per replica.
CorrelationSeries smoothed_correlation(const EnsembleSpec& spec, int sigma, const TestFunction& phi,
                                       const std::vector<double>& times, const std::vector<double>& centers);

/// Site averages of p, p^2, r, r^2 and V_n'(r) after evolving Gibbs states over T, with the
/// quadrature values they should match. Labels: mean_p, mean_p2, mean_r, mean_r2, mean_vprime.
struct StationarityCheck {
  std::vector<TimeIntegralEstimate> measured;
  std::vector<double> expected;
};

StationarityCheck gibbs_stationarity(const EnsembleSpec& spec);

/// Static Gibbs checks on fresh samples: per-site variances of xibar^+ and xibar^-, and the
/// second moment of n^{-1/2} sum_j ebar_j phi(j/n).
struct StaticFieldCheck {
  TimeIntegralEstimate var_plus;
  TimeIntegralEstimate var_minus;
  TimeIntegralEstimate energy_pairing;
};

StaticFieldCheck static_field_variances(const EnsembleSpec& spec, const TestFunction& phi);

/// Trend verdict across increasing n: point estimates strictly decreasing and the 1 sigma
/// bands of the first and last entries disjoint.
bool strictly_decreasing_trend(const std::vector<TimeIntegralEstimate>& by_n);

}  // namespace oscchain
