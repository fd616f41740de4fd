#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <vector>

#include "oscchain/dynamics.hpp"
#include "oscchain/error.hpp"

using namespace oscchain;

namespace {

ScalingConfig unit_time_config(double dt, double gamma, std::size_t len) {
  ScalingConfig cfg;
  cfg.n = 1;
  cfg.a_exp = 2.0;
  cfg.b_exp = 0.0;
  cfg.gamma = gamma;
  cfg.lattice_len = len;
  cfg.dt_micro = dt;
  return cfg;
}

ChainState gibbs_state(std::size_t len, const ScaledPotential& pot, std::uint64_t stream) {
  GibbsMarginal g(pot, 1.0);
  RandomStream rng(2024, stream);
  return sample_gibbs_state(len, g, 0.0, rng);
}

}  // namespace

TEST(Hamiltonian, ZeroStateIsFixedPoint) {
  ScaledPotential pot(PotentialSpec::toda(1.0), 0.1);
  ChainState s(32);
  for (int i = 0; i < 10; ++i) hamiltonian_step(s, 0.01, pot, 1.0);
  for (std::size_t j = 0; j < s.size(); ++j) {
    EXPECT_EQ(s.r[j], 0.0);
    EXPECT_EQ(s.p[j], 0.0);
  }
}

TEST(Hamiltonian, HarmonicSingleModeEnergy) {
  ScaledPotential pot(PotentialSpec::harmonic(), 1.0);
  const std::size_t len = 64;
  for (int k : {1, 2}) {
    ChainState s(len);
    for (std::size_t j = 0; j < len; ++j) s.r[j] = std::cos(2.0 * std::numbers::pi * k * j / len);
    const double e0 = conserved_totals(s, pot).sum_e;
    HamiltonianIntegrator integ(pot, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      integ.step(s, 0.01);
      worst = std::max(worst, std::abs(conserved_totals(s, pot).sum_e - e0) / e0);
    }
    EXPECT_LT(worst, 1e-6) << "mode " << k;
  }
}

TEST(Hamiltonian, TimeReversible) {
  ScaledPotential pot(PotentialSpec::toda(1.0), 1.0 / std::sqrt(8.0));
  ChainState s = gibbs_state(64, pot, 1);
  const ChainState start = s;
  for (int i = 0; i < 100; ++i) hamiltonian_step(s, 0.01, pot, 1.0);
  for (auto& p : s.p) p = -p;
  for (int i = 0; i < 100; ++i) hamiltonian_step(s, 0.01, pot, 1.0);
  for (auto& p : s.p) p = -p;
  double dr = 0, dp = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    dr = std::max(dr, std::abs(s.r[j] - start.r[j]));
    dp = std::max(dp, std::abs(s.p[j] - start.p[j]));
  }
  EXPECT_LT(dr, 1e-10);
  EXPECT_LT(dp, 1e-10);
}

TEST(Hamiltonian, CachedIntegratorMatchesFreeFunction) {
  ScaledPotential pot(PotentialSpec::fput(1.0, 0.5), 0.2);
  ChainState a = gibbs_state(48, pot, 2), b = a;
  HamiltonianIntegrator integ(pot, 1.3);
  for (int i = 0; i < 50; ++i) {
    integ.step(a, 0.02);
    hamiltonian_step(b, 0.02, pot, 1.3);
  }
  EXPECT_EQ(a.r, b.r);
  EXPECT_EQ(a.p, b.p);
  EXPECT_DOUBLE_EQ(a.t_micro, 1.0);
}

TEST(Hamiltonian, ConservedSumsPerStepSmoothData) {
  ScaledPotential pot(PotentialSpec::toda(1.0), 1.0 / std::sqrt(32.0));
  const std::size_t len = 256;
  ChainState s(len);
  for (std::size_t j = 0; j < len; ++j) {
    const double x = 2.0 * std::numbers::pi * j / len;
    s.r[j] = 0.8 * std::sin(x) + 0.3 * std::cos(3 * x);
    s.p[j] = 0.5 * std::cos(2 * x);
  }
  for (int i = 0; i < 20; ++i) {
    const auto before = conserved_totals(s, pot);
    hamiltonian_step(s, 0.01, pot, 1.0);
    const auto after = conserved_totals(s, pot);
    EXPECT_LT(std::abs(after.sum_r - before.sum_r), 1e-12 * len);
    EXPECT_LT(std::abs(after.sum_p - before.sum_p), 1e-12 * len);
    EXPECT_LT(std::abs(after.sum_e - before.sum_e), 1e-8 * len);
  }
}

// On rough equilibrium data the one-step energy change is O(dt^3) per site with random signs.
TEST(Hamiltonian, ConservedSumsPerStepGibbsData) {
  ScaledPotential pot(PotentialSpec::toda(1.0), 1.0 / std::sqrt(32.0));
  const std::size_t len = 256;
  ChainState s = gibbs_state(len, pot, 3);
  const double dt = 0.01;
  for (int i = 0; i < 20; ++i) {
    const auto before = conserved_totals(s, pot);
    hamiltonian_step(s, dt, pot, 1.0);
    const auto after = conserved_totals(s, pot);
    EXPECT_LT(std::abs(after.sum_r - before.sum_r), 1e-12 * len);
    EXPECT_LT(std::abs(after.sum_p - before.sum_p), 1e-12 * len);
    EXPECT_LT(std::abs(after.sum_e - before.sum_e), 10.0 * dt * dt * dt * std::sqrt(double(len)));
  }
}

TEST(Hamiltonian, BlowUpReportsIndex) {
  ScaledPotential pot(PotentialSpec::toda(1.0), 1.0);
  ChainState s(16);
  s.r[5] = -800.0;
  try {
    hamiltonian_step(s, 0.01, pot, 1.0);
    FAIL() << "expected blow-up";
  } catch (const BlowUp& e) {
    EXPECT_GE(e.index(), 2u);
    EXPECT_LE(e.index(), 8u);
  }
}

// Fourier oracle: with theta = 2 pi k / L the pair (r_k, p_k) rotates with
// omega = 2 alpha sqrt(c2) sin(theta / 2).
TEST(Hamiltonian, HarmonicNormalModesRotate) {
  const std::size_t len = 16;
  const double alpha = 1.0, t = 3.0;
  ScaledPotential pot(PotentialSpec::harmonic(), 1.0);
  ChainState s = gibbs_state(len, pot, 4);
  auto dft = [&](const std::vector<double>& x, int k) {
    std::complex<double> acc = 0;
    for (std::size_t j = 0; j < len; ++j) acc += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * k * j / len);
    return acc;
  };
  std::vector<std::complex<double>> r0(len), p0(len);
  for (std::size_t k = 0; k < len; ++k) {
    r0[k] = dft(s.r, k);
    p0[k] = dft(s.p, k);
  }
  auto cfg = unit_time_config(1e-3, 0.0, len);
  RandomStream rng(1, 1);
  evolve_macro(s, t, cfg, pot, rng);
  for (std::size_t k = 1; k < len; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / len;
    const double omega = 2.0 * alpha * std::sin(theta / 2.0);
    const std::complex<double> a = alpha * (1.0 - std::polar(1.0, -theta));
    const std::complex<double> b = alpha * (std::polar(1.0, theta) - 1.0);
    const auto r_exact = std::cos(omega * t) * r0[k] + std::sin(omega * t) / omega * a * p0[k];
    const auto p_exact = std::cos(omega * t) * p0[k] + std::sin(omega * t) / omega * b * r0[k];
    EXPECT_LT(std::abs(dft(s.r, k) - r_exact), 1e-4 * (std::abs(r0[k]) + std::abs(p0[k])) + 1e-12) << k;
    EXPECT_LT(std::abs(dft(s.p, k) - p_exact), 1e-4 * (std::abs(r0[k]) + std::abs(p0[k])) + 1e-12) << k;
  }
}

TEST(Exchange, ZeroRateLeavesStateUnchanged) {
  ChainState s(64);
  RandomStream rng(1, 0);
  for (std::size_t j = 0; j < 64; ++j) s.p[j] = 0.1 * j;
  const auto p = s.p;
  exchange_sweep(s, 1.0, 0.0, rng);
  EXPECT_EQ(s.p, p);
  EXPECT_EQ(s.exchange_count, 0u);
}

TEST(Exchange, PermutationAndExactTotals) {
  ScaledPotential pot(PotentialSpec::harmonic(), 1.0);
  ChainState s = gibbs_state(257, pot, 5);
  RandomStream rng(6, 0);
  auto sorted = s.p;
  std::sort(sorted.begin(), sorted.end());
  const double sp = exact_sum(s.p);
  const double ke = kinetic_energy(s);
  const double se = conserved_totals(s, pot).sum_e;
  for (int i = 0; i < 200; ++i) {
    exchange_sweep(s, 0.5, 2.0, rng, i % 2 ? SweepOrder::Reverse : SweepOrder::Forward);
    EXPECT_EQ(exact_sum(s.p), sp);
    EXPECT_EQ(kinetic_energy(s), ke);
    EXPECT_EQ(conserved_totals(s, pot).sum_e, se);
  }
  auto after = s.p;
  std::sort(after.begin(), after.end());
  EXPECT_EQ(after, sorted);
  EXPECT_GT(s.exchange_count, 0u);
}

TEST(Exchange, ExactSumIsOrderIndependent) {
  std::vector<double> v{1e16, 1.0, -1e16, 3.0, 1e-8, -2.5};
  const double ref = exact_sum(v);
  std::sort(v.begin(), v.end());
  do {
    ASSERT_EQ(exact_sum(v), ref);
  } while (std::next_permutation(v.begin(), v.end()));
  EXPECT_EQ(ref, 1.50000001);
}

TEST(Exchange, RingCountIsPoisson) {
  const std::size_t len = 256;
  const double gamma = 1.0, horizon = 100.0, dt = 0.01;
  ChainState s(len);
  RandomStream rng(7, 0);
  const int sweeps = static_cast<int>(std::lround(horizon / dt));
  for (int i = 0; i < sweeps; ++i) exchange_sweep(s, dt, gamma, rng);
  const double expected = len * gamma * horizon / 2.0;
  EXPECT_NEAR(static_cast<double>(s.exchange_count), expected, 4.0 * std::sqrt(expected));
}

TEST(Exchange, SubdividesLargeSteps) {
  ChainState s(256);
  RandomStream rng(8, 0);
  double total = 0;
  const int reps = 200;
  for (int i = 0; i < reps; ++i) {
    s.exchange_count = 0;
    exchange_sweep(s, 3.0, 1.0, rng);
    total += static_cast<double>(s.exchange_count);
  }
  const double expected = reps * 256 * 1.5;
  EXPECT_NEAR(total, expected, 4.0 * std::sqrt(expected));
}

TEST(Evolve, ZeroTimeIsIdentity) {
  ScaledPotential pot(PotentialSpec::toda(1.0), 0.2);
  ChainState s = gibbs_state(64, pot, 9);
  const ChainState start = s;
  ScalingConfig cfg;
  cfg.n = 8;
  cfg.lattice_len = 64;
  RandomStream rng(1, 0);
  int calls = 0;
  evolve_macro(s, 0.0, cfg, pot, rng, {{0.0, [&](double t, const ChainState&) { ++calls; EXPECT_EQ(t, 0.0); }}});
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(s.r, start.r);
  EXPECT_EQ(s.p, start.p);
}

TEST(Evolve, DeterministicForSameSeed) {
  ScaledPotential pot(PotentialSpec::toda(1.0), 1.0 / std::sqrt(8.0));
  ScalingConfig cfg;
  cfg.n = 8;
  cfg.lattice_len = 64;
  ChainState a = gibbs_state(64, pot, 10), b = a;
  RandomStream ra(77, 3), rb(77, 3);
  evolve_macro(a, 0.2, cfg, pot, ra);
  evolve_macro(b, 0.2, cfg, pot, rb);
  EXPECT_EQ(a.r, b.r);
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.exchange_count, b.exchange_count);
  EXPECT_NEAR(a.t_micro, 0.2 * 64, 1e-9);
}

TEST(Evolve, HooksFireAtRequestedTimes) {
  ScaledPotential pot(PotentialSpec::harmonic(), 1.0);
  ScalingConfig cfg;
  cfg.n = 4;
  cfg.lattice_len = 16;
  cfg.dt_micro = 0.05;
  ChainState s(16);
  RandomStream rng(1, 0);
  std::vector<double> seen;
  auto record = [&](double t, const ChainState& st) {
    seen.push_back(t);
    EXPECT_NEAR(st.t_micro, t * cfg.time_scale(), 1e-9);
  };
  evolve_macro(s, 1.0, cfg, pot, rng, {{0.0, record}, {0.251, record}, {0.5, record}, {1.0, record}});
  ASSERT_EQ(seen.size(), 4u);
  EXPECT_NEAR(seen[1], 0.251, 0.5 * cfg.dt_micro / cfg.time_scale() + 1e-12);
  EXPECT_DOUBLE_EQ(seen[3], 1.0);
  EXPECT_THROW(evolve_macro(s, 1.0, cfg, pot, rng, {{0.5, record}, {0.1, record}}), DomainError);
  EXPECT_THROW(evolve_macro(s, 1.0, cfg, pot, rng, {{1.5, record}}), DomainError);
}

TEST(Evolve, SubstepHooksCoverEveryStep) {
  ScalingConfig cfg;
  cfg.n = 4;
  cfg.dt_micro = 0.05;
  const auto steps = substep_count(cfg, 0.5);
  EXPECT_EQ(steps, 160u);
  int calls = 0;
  auto hooks = substep_hooks(cfg, 0.5, 3, [&](double, const ChainState&) { ++calls; });
  EXPECT_EQ(hooks.size(), 160u / 3 + 2);
  ScaledPotential pot(PotentialSpec::harmonic(), 1.0);
  ChainState s(16);
  RandomStream rng(1, 0);
  evolve_macro(s, 0.5, cfg, pot, rng, hooks);
  EXPECT_EQ(calls, static_cast<int>(hooks.size()));
}

TEST(Evolve, StationaryMarginalMoments) {
  ScaledPotential pot(PotentialSpec::toda(1.0), 1.0 / std::sqrt(8.0));
  GibbsMarginal g(pot, 1.0);
  ScalingConfig cfg;
  cfg.n = 8;
  cfg.b_exp = 0.5;
  cfg.lattice_len = 64;
  const int reps = 300;
  double sp2 = 0, sp2sq = 0, sr = 0, srsq = 0;
  for (int rep = 0; rep < reps; ++rep) {
    RandomStream rng(55, rep);
    ChainState s = sample_gibbs_state(64, g, 0.0, rng);
    evolve_macro(s, 0.1, cfg, pot, rng);
    double p2 = 0, r1 = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      p2 += s.p[j] * s.p[j];
      r1 += s.r[j];
    }
    p2 /= 64;
    r1 /= 64;
    sp2 += p2;
    sp2sq += p2 * p2;
    sr += r1;
    srsq += r1 * r1;
  }
  const double mp2 = sp2 / reps, se_p2 = std::sqrt((sp2sq / reps - mp2 * mp2) / reps);
  const double mr = sr / reps, se_r = std::sqrt((srsq / reps - mr * mr) / reps);
  EXPECT_NEAR(mp2, 1.0, 4.0 * se_p2);
  EXPECT_NEAR(mr, g.moments().mean_r, 4.0 * se_r);
}

TEST(Checkpoint, RoundTrip) {
  ScaledPotential pot(PotentialSpec::toda(1.0), 0.2);
  ChainState s = gibbs_state(33, pot, 11);
  s.t_micro = 12.5;
  s.exchange_count = 987654321;
  const auto path = std::filesystem::temp_directory_path() / "oscchain_ckpt_test.bin";
  write_checkpoint(path, s, 0xdeadbeefcafef00dULL);
  EXPECT_EQ(std::filesystem::file_size(path), 40u + 2u * 33u * 8u);
  std::uint64_t hash = 0;
  ChainState back = read_checkpoint(path, &hash);
  EXPECT_EQ(hash, 0xdeadbeefcafef00dULL);
  EXPECT_EQ(back.r, s.r);
  EXPECT_EQ(back.p, s.p);
  EXPECT_EQ(back.t_micro, s.t_micro);
  EXPECT_EQ(back.exchange_count, s.exchange_count);
  std::filesystem::resize_file(path, 100);
  EXPECT_THROW(read_checkpoint(path), DomainError);
  std::filesystem::remove(path);
}

TEST(ScalingConfig, Validation) {
  ScalingConfig cfg;
  EXPECT_NO_THROW(cfg.validate(1.0));
  EXPECT_DOUBLE_EQ(cfg.epsilon(), 1.0 / std::sqrt(32.0));
  EXPECT_DOUBLE_EQ(cfg.time_scale(), 1024.0);
  EXPECT_DOUBLE_EQ(cfg.sound_velocity(4.0), 64.0);
  auto bad = cfg;
  bad.lattice_len = 100;
  EXPECT_THROW(bad.validate(1.0), ConfigError);
  bad = cfg;
  bad.dt_micro = 0.06;
  EXPECT_THROW(bad.validate(1.0), ConfigError);
  bad = cfg;
  bad.dt_micro = 0.03;
  EXPECT_THROW(bad.validate(4.0), ConfigError);
  bad = cfg;
  bad.beta = 0;
  try {
    bad.validate(1.0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "beta");
  }
}

// ---------------------------------------------------------------------------
// Weak order of the Strang scheme for the harmonic chain, via an exact
// covariance-propagation mirror of the scheme compared with the generator ODE.

namespace {

using Mat = Eigen::MatrixXd;

struct LinearChain {
  int len;
  double alpha, gamma;
  Mat drift_field;              // x' = A x for x = (r, p)
  std::vector<Mat> swaps;       // permutations exchanging p_b, p_{b+1}

  LinearChain(int l, double a, double g) : len(l), alpha(a), gamma(g), drift_field(Mat::Zero(2 * l, 2 * l)) {
    for (int j = 0; j < len; ++j) {
      const int jm = (j + len - 1) % len, jp = (j + 1) % len;
      drift_field(j, len + j) += alpha;
      drift_field(j, len + jm) -= alpha;
      drift_field(len + j, jp) += alpha;
      drift_field(len + j, j) -= alpha;
    }
    for (int b = 0; b < len; ++b) {
      Mat perm = Mat::Identity(2 * len, 2 * len);
      const int u = len + b, v = len + (b + 1) % len;
      perm(u, u) = perm(v, v) = 0.0;
      perm(u, v) = perm(v, u) = 1.0;
      swaps.push_back(perm);
    }
  }

  Mat generator(const Mat& c) const {
    Mat out = drift_field * c + c * drift_field.transpose();
    for (const auto& s : swaps) out += 0.5 * gamma * (s * c * s - c);
    return out;
  }

  Mat exact(Mat c, double t, int steps) const {
    const double h = t / steps;
    for (int i = 0; i < steps; ++i) {
      const Mat k1 = generator(c);
      const Mat k2 = generator(c + 0.5 * h * k1);
      const Mat k3 = generator(c + 0.5 * h * k2);
      const Mat k4 = generator(c + h * k3);
      c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return c;
  }

  Mat verlet(double dt) const {
    Mat kick = Mat::Identity(2 * len, 2 * len), drift = Mat::Identity(2 * len, 2 * len);
    for (int j = 0; j < len; ++j) {
      const int jm = (j + len - 1) % len, jp = (j + 1) % len;
      kick(len + j, jp) += 0.5 * dt * alpha;
      kick(len + j, j) -= 0.5 * dt * alpha;
      drift(j, len + j) += dt * alpha;
      drift(j, len + jm) -= dt * alpha;
    }
    return kick * drift * kick;
  }

  Mat scheme(Mat c, double t, double dt) const {
    const int steps = static_cast<int>(std::lround(t / dt));
    const double swap_prob = 0.5 * (1.0 - std::exp(-gamma * dt / 2.0));
    const Mat m = verlet(dt);
    auto bond = [&](int b) { c = (1.0 - swap_prob) * c + swap_prob * swaps[b] * c * swaps[b]; };
    for (int i = 0; i < steps; ++i) {
      for (int b = 0; b < len; ++b) bond(b);
      c = m * c * m.transpose();
      for (int b = len - 1; b >= 0; --b) bond(b);
    }
    return c;
  }
};

Mat initial_covariance(int len) {
  Mat c = Mat::Zero(2 * len, 2 * len);
  for (int j = 0; j < len; ++j) {
    c(j, j) = 0.5 + 0.1 * j;
    c(len + j, len + j) = j == 0 ? 2.0 : 0.3;
  }
  return c;
}

}  // namespace

TEST(Strang, SecondOrderWeakErrorMirror) {
  const int len = 8;
  const double t = 2.0;
  LinearChain chain(len, 1.0, 1.0);
  const Mat c0 = initial_covariance(len);
  const double exact = chain.exact(c0, t, 4000)(len, len);
  std::vector<double> err;
  for (double dt : {0.2, 0.1, 0.05}) err.push_back(std::abs(chain.scheme(c0, t, dt)(len, len) - exact));
  const double r1 = err[0] / err[1], r2 = err[1] / err[2];
  EXPECT_GT(r1, 3.0);
  EXPECT_LT(r1, 5.0);
  EXPECT_GT(r2, 3.0);
  EXPECT_LT(r2, 5.0);
}

TEST(Strang, ImplementationMatchesMirror) {
  const int len = 8;
  const double t = 2.0, dt = 0.25;
  LinearChain chain(len, 1.0, 1.0);
  const Mat c0 = initial_covariance(len);
  const double mirror = chain.scheme(c0, t, dt)(len, len);
  const double exact = chain.exact(c0, t, 4000)(len, len);

  ScaledPotential pot(PotentialSpec::harmonic(), 1.0);
  auto cfg = unit_time_config(dt, 1.0, len);
  const int reps = 200000;
  double sum = 0, sumsq = 0;
  for (int rep = 0; rep < reps; ++rep) {
    RandomStream rng(31337, rep);
    ChainState s(len);
    for (int j = 0; j < len; ++j) {
      s.r[j] = std::sqrt(c0(j, j)) * rng.normal();
      s.p[j] = std::sqrt(c0(len + j, len + j)) * rng.normal();
    }
    evolve_macro(s, t, cfg, pot, rng);
    const double x = s.p[0] * s.p[0];
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / reps, se = std::sqrt((sumsq / reps - mean * mean) / reps);
  EXPECT_NEAR(mean, mirror, 4.0 * se) << "exact " << exact;
}
