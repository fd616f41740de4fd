#include "oscchain/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "oscchain/error.hpp"

namespace oscchain {

namespace {

constexpr double kThinningLimit = 0.1;

// Correctly rounded sum (Shewchuk partials), hence independent of summation order.
class ExactSum {
 public:
  void add(double x) {
    std::size_t i = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
  }

  double value() const {
    if (partials_.empty()) return 0.0;
    auto n = partials_.size();
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    // half-way correction for round-half-even on the remaining partials
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
};

void check_finite(const ChainState& state) {
  double acc = 0.0;
  for (std::size_t j = 0; j < state.size(); ++j) acc += state.r[j] * 0.0 + state.p[j] * 0.0;
  if (std::isfinite(acc)) return;
  for (std::size_t j = 0; j < state.size(); ++j) {
    if (!std::isfinite(state.r[j]) || !std::isfinite(state.p[j]))
      throw BlowUp("non-finite chain state; reduce dt_micro", j);
  }
}

void sweep_once(ChainState& state, double h, double gamma, RandomStream& rng, SweepOrder order) {
  const std::size_t len = state.size();
  const double mu = 0.5 * gamma * h;
  auto& p = state.p;
  // number of quiet bonds before the next firing one is geometric with P(quiet) = e^{-mu}
  auto gap = [&] { return std::floor(-std::log(rng.uniform_pos()) / mu); };
  double pos = gap();
  while (pos < static_cast<double>(len)) {
    const auto k = static_cast<std::size_t>(pos);
    const std::size_t bond = order == SweepOrder::Forward ? k : len - 1 - k;
    const unsigned rings = rng.poisson_at_least_one(mu);
    state.exchange_count += rings;
    if (rings & 1u) std::swap(p[bond], p[bond + 1 == len ? 0 : bond + 1]);
    pos += 1.0 + gap();
  }
}

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  out.write(reinterpret_cast<const char*>(&bits), 8);
}

template <typename T>
T get(std::istream& in) {
  std::uint64_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), 8);
  if (!in) throw DomainError("truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}

constexpr char kMagic[8] = {'O', 'S', 'C', 'C', 'H', 'K', '0', '1'};

}  // namespace

double ScalingConfig::epsilon() const { return std::pow(static_cast<double>(n), -b_exp); }

double ScalingConfig::time_scale() const { return std::pow(static_cast<double>(n), a_exp); }

double ScalingConfig::sound_velocity(double c2) const {
  return std::sqrt(c2) * alpha * std::pow(static_cast<double>(n), a_exp - 1.0);
}

void ScalingConfig::validate(double c2) const {
  if (n < 1) throw ConfigError("n must be a positive integer", "n");
  if (!std::isfinite(a_exp) || a_exp < 0.0) throw ConfigError("a_exp must be finite and non-negative", "a_exp");
  if (!std::isfinite(b_exp) || b_exp < 0.0) throw ConfigError("b_exp must be non-negative so that epsilon lies in (0, 1]", "b_exp");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be non-negative", "alpha");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be non-negative", "gamma");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive", "beta");
  if (!std::isfinite(tau)) throw ConfigError("tau must be finite", "tau");
  if (!std::isfinite(p_mean)) throw ConfigError("p_mean must be finite", "p_mean");
  if (lattice_len == 0 || lattice_len % static_cast<std::size_t>(n) != 0)
    throw ConfigError("lattice_len must be a positive multiple of n", "lattice_len");
  if (!(dt_micro > 0.0)) throw ConfigError("dt_micro must be positive", "dt_micro");
  if (alpha * std::sqrt(c2) * dt_micro > 0.05 + 1e-12)
    throw ConfigError("dt_micro exceeds the stability margin 0.05 / (alpha sqrt(c2))", "dt_micro");
}

ConservedTotals conserved_totals(const ChainState& state, const ScaledPotential& pot) {
  ExactSum r, p, e;
  for (std::size_t j = 0; j < state.size(); ++j) {
    r.add(state.r[j]);
    p.add(state.p[j]);
    e.add(0.5 * state.p[j] * state.p[j] + pot.value(state.r[j]));
  }
  return {r.value(), p.value(), e.value()};
}

double exact_sum(std::span<const double> values) {
  ExactSum s;
  for (double x : values) s.add(x);
  return s.value();
}

double kinetic_energy(const ChainState& state) {
  ExactSum s;
  for (double p : state.p) s.add(0.5 * p * p);
  return s.value();
}

void HamiltonianIntegrator::compute_forces(const std::vector<double>& r) {
  force_.resize(r.size());
  const ScaledPotential& pot = *pot_;
  for (std::size_t j = 0; j < r.size(); ++j) force_[j] = pot.force(r[j]);
}

void HamiltonianIntegrator::step(ChainState& state, double dt) {
  const std::size_t len = state.size();
  if (len == 0) return;
  if (!valid_ || owner_ != &state || force_.size() != len) compute_forces(state.r);
  owner_ = &state;
  valid_ = true;

  double* r = state.r.data();
  double* p = state.p.data();
  const double* f = force_.data();
  const double kick = 0.5 * dt * alpha_;
  const double drift = dt * alpha_;

  for (std::size_t j = 0; j + 1 < len; ++j) p[j] += kick * (f[j + 1] - f[j]);
  p[len - 1] += kick * (f[0] - f[len - 1]);

  r[0] += drift * (p[0] - p[len - 1]);
  for (std::size_t j = 1; j < len; ++j) r[j] += drift * (p[j] - p[j - 1]);

  compute_forces(state.r);
  f = force_.data();
  for (std::size_t j = 0; j + 1 < len; ++j) p[j] += kick * (f[j + 1] - f[j]);
  p[len - 1] += kick * (f[0] - f[len - 1]);

  state.t_micro += dt;
  try {
    check_finite(state);
  } catch (...) {
    valid_ = false;
    throw;
  }
}

void hamiltonian_step(ChainState& state, double dt, const ScaledPotential& pot, double alpha) {
  HamiltonianIntegrator integrator(pot, alpha);
  integrator.step(state, dt);
}

void exchange_sweep(ChainState& state, double dt, double gamma, RandomStream& rng, SweepOrder order) {
  if (!(gamma > 0.0) || !(dt > 0.0) || state.size() < 2) return;
  const double load = 0.5 * gamma * dt;
  const auto pieces = load < kThinningLimit ? 1 : static_cast<int>(std::ceil(load / kThinningLimit * (1.0 + 1e-12)));
  const double h = dt / pieces;
  for (int i = 0; i < pieces; ++i) sweep_once(state, h, gamma, rng, order);
}

std::uint64_t substep_count(const ScalingConfig& cfg, double t_macro) {
  if (!(t_macro >= 0.0)) throw DomainError("t_macro must be non-negative");
  const double micro = cfg.time_scale() * t_macro;
  return static_cast<std::uint64_t>(std::ceil(micro / cfg.dt_micro - 1e-9));
}

std::vector<Hook> substep_hooks(const ScalingConfig& cfg, double t_macro, std::uint64_t every,
                                std::function<void(double, const ChainState&)> callback) {
  if (every == 0) throw DomainError("hook spacing must be at least one substep");
  const std::uint64_t steps = substep_count(cfg, t_macro);
  std::vector<Hook> hooks;
  for (std::uint64_t k = 0; k <= steps; k += every)
    hooks.push_back({steps == 0 ? 0.0 : t_macro * static_cast<double>(k) / static_cast<double>(steps), callback});
  if (steps % every != 0) hooks.push_back({t_macro, callback});
  return hooks;
}

void evolve_macro(ChainState& state, double t_macro, const ScalingConfig& cfg, const ScaledPotential& pot,
                  RandomStream& rng, const std::vector<Hook>& hooks) {
  const std::uint64_t steps = substep_count(cfg, t_macro);
  for (std::size_t i = 0; i < hooks.size(); ++i) {
    if (i > 0 && hooks[i].t_macro < hooks[i - 1].t_macro) throw DomainError("hooks must be sorted by time");
    if (hooks[i].t_macro < 0.0 || hooks[i].t_macro > t_macro * (1.0 + 1e-12) + 1e-15)
      throw DomainError("hook time outside the evolution window");
  }
  auto hook_step = [&](const Hook& h) -> std::uint64_t {
    if (steps == 0) return 0;
    return static_cast<std::uint64_t>(std::llround(h.t_macro / t_macro * static_cast<double>(steps)));
  };
  std::size_t next = 0;
  auto fire = [&](std::uint64_t k) {
    const double now = steps == 0 ? 0.0 : t_macro * static_cast<double>(k) / static_cast<double>(steps);
    while (next < hooks.size() && hook_step(hooks[next]) <= k) hooks[next++].callback(now, state);
  };

  fire(0);
  if (steps == 0) return;
  const double dt = cfg.time_scale() * t_macro / static_cast<double>(steps);
  HamiltonianIntegrator integrator(pot, cfg.alpha);
  for (std::uint64_t k = 1; k <= steps; ++k) {
    exchange_sweep(state, 0.5 * dt, cfg.gamma, rng, SweepOrder::Forward);
    integrator.step(state, dt);
    exchange_sweep(state, 0.5 * dt, cfg.gamma, rng, SweepOrder::Reverse);
    fire(k);
  }
}

ChainState sample_gibbs_state(std::size_t len, const GibbsMarginal& marginal, double p_mean, RandomStream& rng) {
  ChainState state(len);
  const double sd = 1.0 / std::sqrt(marginal.beta());
  for (auto& r : state.r) r = marginal.sample(rng);
  for (auto& p : state.p) p = p_mean + sd * rng.normal();
  return state;
}

void write_checkpoint(const std::filesystem::path& path, const ChainState& state, std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DomainError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, 8);
  put<std::uint64_t>(out, state.size());
  put<std::uint64_t>(out, config_hash);
  put<double>(out, state.t_micro);
  put<std::uint64_t>(out, state.exchange_count);
  for (double x : state.r) put<double>(out, x);
  for (double x : state.p) put<double>(out, x);
  if (!out) throw DomainError("failed writing checkpoint " + path.string());
}

ChainState read_checkpoint(const std::filesystem::path& path, std::uint64_t* config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw DomainError("not a chain checkpoint: " + path.string());
  const auto len = get<std::uint64_t>(in);
  const auto hash = get<std::uint64_t>(in);
  ChainState state(len);
  state.t_micro = get<double>(in);
  state.exchange_count = get<std::uint64_t>(in);
  for (auto& x : state.r) x = get<double>(in);
  for (auto& x : state.p) x = get<double>(in);
  if (config_hash) *config_hash = hash;
  return state;
}

}  // namespace oscchain
