#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "oscchain/potential.hpp"
#include "oscchain/random.hpp"

namespace oscchain {

/// All scalars of one experiment. Micro-time is n^a times macro-time.
struct ScalingConfig {
  int n = 32;
  double a_exp = 2.0;
  double b_exp = 0.5;
  double alpha = 1.0;
  double gamma = 1.0;
  double beta = 1.0;
  double tau = 0.0;
  double p_mean = 0.0;
  std::size_t lattice_len = 256;
  double dt_micro = 0.01;

  double epsilon() const;
  /// n^a, the micro-time elapsed per unit macro-time.
  double time_scale() const;
  /// Sound-mode frame speed in macro units, sqrt(c2) alpha n^(a-1).
  double sound_velocity(double c2) const;
  /// Throws ConfigError naming the offending field.
  void validate(double c2) const;
};

struct ChainState {
  std::vector<double> r;
  std::vector<double> p;
  double t_micro = 0.0;
  std::uint64_t exchange_count = 0;

  ChainState() = default;
  explicit ChainState(std::size_t len) : r(len, 0.0), p(len, 0.0) {}
  std::size_t size() const noexcept { return r.size(); }
};

struct ConservedTotals {
  double sum_r = 0.0;
  double sum_p = 0.0;
  double sum_e = 0.0;
};

/// Lattice sums, each correctly rounded so that they do not depend on summation order.
ConservedTotals conserved_totals(const ChainState& state, const ScaledPotential& pot);

/// Correctly rounded floating-point sum; equal for any permutation of `values`.
double exact_sum(std::span<const double> values);

/// Correctly rounded sum of p_j^2 / 2.
double kinetic_energy(const ChainState& state);

/// Velocity-Verlet (kick-drift-kick) integrator that keeps the forces V_n'(r_j)
/// of the current configuration between steps, so each step costs one force pass.
/// The cache is tied to the last state stepped; call `reset` after editing r by hand.
class HamiltonianIntegrator {
 public:
  HamiltonianIntegrator(const ScaledPotential& pot, double alpha) : pot_(&pot), alpha_(alpha) {}

  void step(ChainState& state, double dt);
  void reset() noexcept { valid_ = false; }

 private:
  void compute_forces(const std::vector<double>& r);

  const ScaledPotential* pot_;
  double alpha_;
  std::vector<double> force_;
  const ChainState* owner_ = nullptr;
  bool valid_ = false;
};

/// One velocity-Verlet step of r'_j = alpha (p_j - p_{j-1}), p'_j = alpha (V_n'(r_{j+1}) - V_n'(r_j))
/// on the periodic lattice. Throws BlowUp when the state becomes non-finite.
void hamiltonian_step(ChainState& state, double dt, const ScaledPotential& pot, double alpha);

enum class SweepOrder { Forward, Reverse };

/// Exchange noise over micro-time dt, bond by bond in the given order.
///
/// Bond (j, j+1) fires with probability 1 - exp(-gamma dt / 2). A firing bond
/// carries a zero-truncated Poisson number N of clock rings (added to
/// exchange_count) and its momenta are swapped when N is odd, which is the exact
/// law of the single-bond flow over dt. Firing bonds are located by geometric
/// skipping, so the cost is proportional to the number of firings.
void exchange_sweep(ChainState& state, double dt, double gamma, RandomStream& rng,
                    SweepOrder order = SweepOrder::Forward);

struct Hook {
  double t_macro;  ///< measured from the start of the evolve call
  std::function<void(double, const ChainState&)> callback;
};

/// Number of equal substeps (each at most dt_micro) used to cover t_macro.
std::uint64_t substep_count(const ScalingConfig& cfg, double t_macro);

/// Hooks at every `every`-th substep of an evolve_macro call over t_macro, endpoints included.
std::vector<Hook> substep_hooks(const ScalingConfig& cfg, double t_macro, std::uint64_t every,
                                std::function<void(double, const ChainState&)> callback);

/// Advances micro-time by n^a t_macro with palindromic Strang steps:
/// forward half exchange sweep, Verlet step, reverse half exchange sweep.
/// Each hook fires once at the substep nearest to its time.
void evolve_macro(ChainState& state, double t_macro, const ScalingConfig& cfg, const ScaledPotential& pot,
                  RandomStream& rng, const std::vector<Hook>& hooks = {});

/// Product-measure draw: r_j from the stretch marginal, p_j ~ N(p_mean, 1/beta).
ChainState sample_gibbs_state(std::size_t len, const GibbsMarginal& marginal, double p_mean, RandomStream& rng);

/// Checkpoint layout (all little-endian):
///   bytes 0-7   magic "OSCCHK01"
///   bytes 8-15  u64 lattice length L
///   bytes 16-23 u64 config hash
///   bytes 24-31 f64 t_micro
///   bytes 32-39 u64 exchange_count
///   then L f64 values of r followed by L f64 values of p.
void write_checkpoint(const std::filesystem::path& path, const ChainState& state, std::uint64_t config_hash);
ChainState read_checkpoint(const std::filesystem::path& path, std::uint64_t* config_hash = nullptr);

}  // namespace oscchain
