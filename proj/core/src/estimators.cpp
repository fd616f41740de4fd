#include "oscchain/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace oscchain {

namespace {

double sample_variance(const std::vector<double>& x, double mean) {
  if (x.size() < 2) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(x.size() - 1);
}

double mean_of(const std::vector<double>& x) {
  return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

std::size_t wrap(long i, std::size_t len) {
  const long l = static_cast<long>(len);
  return static_cast<std::size_t>(((i % l) + l) % l);
}

// xi^sigma_j from the raw state; valid for j + 1 < L.
inline double xi_at(const ChainState& s, int sigma, std::size_t j, double sqrt_c2) {
  return sqrt_c2 * s.r[j + 1] + sigma * s.p[j];
}

inline double xi_mean(const EquilibriumData& eq, int sigma) {
  return sigma > 0 ? eq.means.xi_plus : eq.means.xi_minus;
}

constexpr std::uint64_t kBootstrapStream = 0xB007'0000'0000'0000ULL;

}  // namespace

TimeIntegralEstimate summarize(std::string label, const std::vector<double>& samples, double horizon) {
  TimeIntegralEstimate e;
  e.label = std::move(label);
  e.horizon = horizon;
  e.replicas = samples.size();
  e.value = mean_of(samples);
  e.variance = samples.empty() ? 0.0 : sample_variance(samples, e.value) / static_cast<double>(samples.size());
  return e;
}

TimeIntegralEstimate second_moment(std::string label, const std::vector<double>& samples, double horizon) {
  std::vector<double> sq(samples.size());
  std::transform(samples.begin(), samples.end(), sq.begin(), [](double x) { return x * x; });
  return summarize(std::move(label), sq, horizon);
}

TimeIntegralEstimate abs_moment(std::string label, const std::vector<double>& samples, double horizon) {
  std::vector<double> a(samples.size());
  std::transform(samples.begin(), samples.end(), a.begin(), [](double x) { return std::abs(x); });
  return summarize(std::move(label), a, horizon);
}

std::vector<std::vector<double>> parallel_replicas(std::size_t count, unsigned workers,
                                                   const std::function<std::vector<double>(std::size_t)>& fn) {
  std::vector<std::vector<double>> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const ReplicaError&) {
      throw;
    } catch (const NumericError& e) {
      throw ReplicaError(e.what(), i);
    }
  }
  return out;
}

EquilibriumData equilibrium_data(const GibbsMarginal& marginal, double p_mean) {
  EquilibriumData eq;
  eq.means = equilibrium_means(marginal, p_mean);
  eq.mean_r2 = marginal.moments().mean_r2;
  eq.mean_p2 = 1.0 / marginal.beta() + p_mean * p_mean;
  eq.sqrt_c2 = std::sqrt(marginal.potential().c2());
  return eq;
}

std::uint64_t EnsembleSpec::snapshot_stride() const {
  const std::uint64_t steps = substep_count(cfg, horizon);
  if (steps == 0) return 1;
  const double dt = cfg.time_scale() * horizon / static_cast<double>(steps);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(snapshot_micro / dt)));
}

double checkpoint_time(const EnsembleSpec& spec, double t) {
  const std::uint64_t steps = substep_count(spec.cfg, spec.horizon);
  if (steps == 0) return 0.0;
  const double k = std::round(t / spec.horizon * static_cast<double>(steps));
  return spec.horizon * k / static_cast<double>(steps);
}

std::vector<double> integrate_trajectory(ChainState& state, const EnsembleSpec& spec, const ScaledPotential& pot,
                                         RandomStream& rng, const std::vector<Integrand>& integrands) {
  const std::size_t k = integrands.size();
  for (std::size_t i = 0; i < spec.checkpoints.size(); ++i) {
    const double c = spec.checkpoints[i];
    if (!(c > 0.0) || !(c < spec.horizon) || (i > 0 && c <= spec.checkpoints[i - 1]))
      throw DomainError("checkpoints must be sorted and inside (0, T)");
  }
  std::vector<double> acc(k, 0.0), prev(k, 0.0), out;
  out.reserve(k * (spec.checkpoints.size() + 1));
  if (spec.horizon <= 0.0) {
    out.assign(k * (spec.checkpoints.size() + 1), 0.0);
    return out;
  }
  const std::uint64_t stride = spec.snapshot_stride();
  const std::uint64_t steps = substep_count(spec.cfg, spec.horizon);
  const double snapshots = std::ceil(static_cast<double>(steps) / static_cast<double>(stride));
  if (snapshots < 10.0 * spec.horizon || snapshots < 2.0)
    throw ResolutionError("only " + std::to_string(static_cast<long>(snapshots)) + " snapshots over T = " +
                          std::to_string(spec.horizon) + "; need at least 10 per unit time");
  double t_prev = 0.0;
  bool first = true;
  auto snapshot = [&](double s, const ChainState& st) {
    if (!first && s == t_prev) return;  // a checkpoint that coincides with a regular snapshot
    for (std::size_t i = 0; i < k; ++i) {
      const double f = integrands[i](st, s);
      if (!first) acc[i] += 0.5 * (prev[i] + f) * (s - t_prev);
      prev[i] = f;
    }
    t_prev = s;
    first = false;
  };
  auto hooks = substep_hooks(spec.cfg, spec.horizon, stride, snapshot);
  if (!spec.checkpoints.empty()) {
    std::vector<Hook> merged;
    std::size_t c = 0;
    auto emit_checkpoint = [&](double) {
      return Hook{checkpoint_time(spec, spec.checkpoints[c]), [&](double s, const ChainState& st) {
                    snapshot(s, st);
                    out.insert(out.end(), acc.begin(), acc.end());
                  }};
    };
    for (const auto& h : hooks) {
      while (c < spec.checkpoints.size() && checkpoint_time(spec, spec.checkpoints[c]) <= h.t_macro) {
        merged.push_back(emit_checkpoint(spec.checkpoints[c]));
        ++c;
      }
      merged.push_back(h);
    }
    hooks = std::move(merged);
  }
  evolve_macro(state, spec.horizon, spec.cfg, pot, rng, hooks);
  out.insert(out.end(), acc.begin(), acc.end());
  return out;
}

std::vector<std::vector<double>> ensemble_integrals(const EnsembleSpec& spec, const std::vector<Integrand>& integrands) {
  if (spec.replicas < 2) throw ConfigError("need at least two replicas", "replicas");
  const ScaledPotential pot(spec.potential, spec.cfg.epsilon());
  spec.cfg.validate(pot.c2());
  const GibbsMarginal marginal(pot, spec.cfg.beta, spec.cfg.tau);
  return parallel_replicas(spec.replicas, spec.workers, [&](std::size_t r) {
    RandomStream rng(spec.seed, r);
    ChainState state = sample_gibbs_state(spec.cfg.lattice_len, marginal, spec.cfg.p_mean, rng);
    return integrate_trajectory(state, spec, pot, rng, integrands);
  });
}

std::size_t lattice_for(int n, double radius, double velocity, double horizon) {
  const double sites = n * (2.0 * radius + 2.0 * std::abs(velocity) * horizon) + 4.0;
  const auto blocks = static_cast<std::size_t>(std::ceil(sites / n));
  return blocks * static_cast<std::size_t>(n);
}

double box_center(const ScalingConfig& cfg) { return static_cast<double>(cfg.lattice_len) / (2.0 * cfg.n); }

Integrand qv_integrand(const TestFunction& phi, double velocity, const ScalingConfig& cfg) {
  const int n = cfg.n;
  const double pref = cfg.gamma / (2.0 * n);
  return [phi, velocity, n, pref](const ChainState& s, double t) {
    const auto [first, last] = support_window(phi, velocity * t, n, s.size(), 1);
    double acc = 0.0;
    for (std::size_t j = first; j <= last; ++j) {
      const double d = s.p[j] - s.p[j + 1];
      const double w = phi.derivative(1, static_cast<double>(j) / n + velocity * t);
      acc += d * d * w * w;
    }
    return pref * acc;
  };
}

Integrand equipartition_integrand(const TestFunction& phi, double velocity, const ScalingConfig& cfg, double c2,
                                  const EquilibriumData& eq) {
  const int n = cfg.n;
  const double r2 = eq.mean_r2, p2 = eq.mean_p2;
  return [phi, velocity, n, c2, r2, p2](const ChainState& s, double t) {
    return pair_with(phi, 1, velocity * t, n, s.size(), 0, [&](std::size_t j) {
      return c2 * (s.r[j] * s.r[j] - r2) - (s.p[j] * s.p[j] - p2);
    });
  };
}

Integrand bg2_integrand(const TestFunction& phi, double velocity, const ScalingConfig& cfg, std::size_t ell,
                        const EquilibriumData& eq) {
  if (ell < 1 || 4 * ell > cfg.lattice_len) throw DomainError("block length must satisfy 1 <= ell <= L/4");
  const int n = cfg.n;
  const double mr = eq.means.r, mp = eq.means.p;
  return [phi, velocity, n, ell, mr, mp](const ChainState& s, double t) {
    const double shift = velocity * t;
    const auto [first, last] = support_window(phi, shift, n, s.size(), std::max<std::size_t>(ell - 1, 1));
    double br = 0.0, bp = 0.0;
    for (std::size_t i = 0; i < ell; ++i) {
      br += s.r[first + i] - mr;
      bp += s.p[first + i] - mp;
    }
    const double inv = 1.0 / static_cast<double>(ell);
    double acc = 0.0;
    for (std::size_t j = first; j <= last; ++j) {
      const double term = s.p[j] * (s.r[j + 1] - mr) - (bp * inv) * (br * inv);
      acc += term * phi(static_cast<double>(j) / n + shift);
      br += s.r[j + ell] - s.r[j];
      bp += s.p[j + ell] - s.p[j];
    }
    return acc;
  };
}

Integrand linear_field_integrand(int sigma, const TestFunction& phi, double velocity, const ScalingConfig& cfg,
                                 const EquilibriumData& eq) {
  const int n = cfg.n;
  const double sq = eq.sqrt_c2, m = xi_mean(eq, sigma), norm = 1.0 / std::sqrt(static_cast<double>(n));
  return [phi, velocity, n, sigma, sq, m, norm](const ChainState& s, double t) {
    return norm * pair_with(phi, 0, velocity * t, n, s.size(), 1,
                            [&](std::size_t j) { return xi_at(s, sigma, j, sq) - m; });
  };
}

Integrand quadratic_field_integrand(int sigma, const TestFunction& phi, double velocity, const ScalingConfig& cfg,
                                    const EquilibriumData& eq) {
  const int n = cfg.n;
  const double sq = eq.sqrt_c2, m = xi_mean(eq, sigma);
  return [phi, velocity, n, sigma, sq, m](const ChainState& s, double t) {
    return pair_with(phi, 0, velocity * t, n, s.size(), 2, [&](std::size_t j) {
      return (xi_at(s, sigma, j, sq) - m) * (xi_at(s, sigma, j + 1, sq) - m);
    });
  };
}

Integrand cross_field_integrand(const TestFunction& phi, double velocity, const ScalingConfig& cfg,
                                const EquilibriumData& eq) {
  const int n = cfg.n;
  const double sq = eq.sqrt_c2, mm = eq.means.xi_minus, mp = eq.means.xi_plus;
  return [phi, velocity, n, sq, mm, mp](const ChainState& s, double t) {
    return pair_with(phi, 0, velocity * t, n, s.size(), 2, [&](std::size_t j) {
      return (xi_at(s, -1, j, sq) - mm) * (xi_at(s, 1, j + 1, sq) - mp);
    });
  };
}

Integrand bracket_integrand(int sigma_a, const TestFunction& phi_a, double velocity_a, int sigma_b,
                            const TestFunction& phi_b, double velocity_b, const ScalingConfig& cfg, double c2) {
  const int n = cfg.n;
  const double sq = std::sqrt(c2);
  return [=](const ChainState& s, double t) {
    const double sa = velocity_a * t, sb = velocity_b * t;
    const auto wa = support_window(phi_a, sa, n, s.size(), 2);
    const auto wb = support_window(phi_b, sb, n, s.size(), 2);
    const std::size_t first = std::max(wa.first, wb.first) - (std::max(wa.first, wb.first) > 0 ? 1 : 0);
    const std::size_t last = std::min(wa.second, wb.second);
    double acc = 0.0;
    for (std::size_t j = first; j <= last && first <= last; ++j) {
      const double x = static_cast<double>(j) / n, dx = 1.0 / n;
      const double ga = n * (phi_a(x + dx + sa) - phi_a(x + sa));
      const double gb = n * (phi_b(x + dx + sb) - phi_b(x + sb));
      const double da = xi_at(s, sigma_a, j, sq) - xi_at(s, sigma_a, j + 1, sq);
      const double db = xi_at(s, sigma_b, j, sq) - xi_at(s, sigma_b, j + 1, sq);
      acc += da * db * ga * gb;
    }
    return acc / n;
  };
}

namespace {

struct Prepared {
  ScaledPotential pot;
  GibbsMarginal marginal;
  EquilibriumData eq;

  explicit Prepared(const EnsembleSpec& spec)
      : pot(spec.potential, spec.cfg.epsilon()),
        marginal(pot, spec.cfg.beta, spec.cfg.tau),
        eq(equilibrium_data(marginal, spec.cfg.p_mean)) {}
};

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t k) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i][k];
  return out;
}

}  // namespace

TimeIntegralEstimate qv_estimate(const EnsembleSpec& spec, const TestFunction& phi, const Frame& frame) {
  if (frame.sigma == 0) throw DomainError("quadratic variation needs a phonon frame");
  auto rows = ensemble_integrals(spec, {qv_integrand(phi, frame.velocity, spec.cfg)});
  return summarize("qv", column(rows, 0), spec.horizon);
}

TimeIntegralEstimate equipartition_stat(const EnsembleSpec& spec, const TestFunction& phi, const Frame& frame) {
  if (frame.sigma == 0) throw DomainError("equipartition needs a phonon frame");
  Prepared p(spec);
  auto rows = ensemble_integrals(spec, {equipartition_integrand(phi, frame.velocity, spec.cfg, p.pot.c2(), p.eq)});
  return second_moment("equipartition", column(rows, 0), spec.horizon);
}

std::vector<TimeIntegralEstimate> bg2_discrepancy(const EnsembleSpec& spec, const std::vector<std::size_t>& ells,
                                                  const TestFunction& phi, const Frame& frame) {
  Prepared p(spec);
  std::vector<Integrand> ints;
  for (std::size_t ell : ells) ints.push_back(bg2_integrand(phi, frame.velocity, spec.cfg, ell, p.eq));
  auto rows = ensemble_integrals(spec, ints);
  std::vector<TimeIntegralEstimate> out;
  for (std::size_t k = 0; k < ells.size(); ++k)
    out.push_back(second_moment("bg2_l" + std::to_string(ells[k]), column(rows, k), spec.horizon));
  return out;
}

TimeIntegralEstimate wrong_frame_integral(const EnsembleSpec& spec, WrongFrameKind kind, int sigma,
                                          double wrong_velocity, const TestFunction& phi) {
  if (sigma != 1 && sigma != -1) throw DomainError("wrong-frame integrals need sigma = +1 or -1");
  Prepared p(spec);
  Integrand f;
  std::string label;
  switch (kind) {
    case WrongFrameKind::Linear:
      f = linear_field_integrand(sigma, phi, wrong_velocity, spec.cfg, p.eq);
      label = "wrong_frame_linear";
      break;
    case WrongFrameKind::Quadratic:
      f = quadratic_field_integrand(sigma, phi, wrong_velocity, spec.cfg, p.eq);
      label = "wrong_frame_quadratic";
      break;
    case WrongFrameKind::Cross:
      f = cross_field_integrand(phi, wrong_velocity, spec.cfg, p.eq);
      label = "wrong_frame_cross";
      break;
  }
  auto rows = ensemble_integrals(spec, {f});
  return abs_moment(label, column(rows, 0), spec.horizon);
}

BracketEstimate martingale_cross_covariance(const EnsembleSpec& spec, const TestFunction& phi_plus,
                                            const TestFunction& phi_minus) {
  if (!(spec.horizon > 0.0)) throw DomainError("bracket time average needs T > 0");
  Prepared p(spec);
  const auto c = spec.potential.coeffs();
  const double vp = Frame::phonon(1, spec.cfg, c).velocity, vm = Frame::phonon(-1, spec.cfg, c).velocity;
  const double c2 = p.pot.c2();
  auto rows = ensemble_integrals(spec, {bracket_integrand(1, phi_plus, vp, -1, phi_minus, vm, spec.cfg, c2),
                                        bracket_integrand(1, phi_plus, vp, 1, phi_plus, vp, spec.cfg, c2),
                                        bracket_integrand(-1, phi_minus, vm, -1, phi_minus, vm, spec.cfg, c2)});
  for (auto& row : rows)
    for (double& v : row) v /= spec.horizon;
  return {summarize("bracket_cross", column(rows, 0), spec.horizon),
          summarize("bracket_plus", column(rows, 1), spec.horizon),
          summarize("bracket_minus", column(rows, 2), spec.horizon)};
}

namespace {

CorrelationSeries reduce_series(std::vector<CorrelationPoint> grid, const std::vector<std::vector<double>>& rows,
                                std::uint64_t seed) {
  CorrelationSeries out;
  out.grid = std::move(grid);
  out.replicas = rows.size();
  const std::size_t k = out.grid.size(), reps = rows.size();
  for (std::size_t g = 0; g < k; ++g) {
    const auto col = column(rows, g);
    const double m = mean_of(col);
    out.mean.push_back(m);
    out.std_error.push_back(std::sqrt(sample_variance(col, m) / static_cast<double>(reps)));
  }
  constexpr int kBoot = 200;
  RandomStream rng(seed, kBootstrapStream);
  std::vector<std::vector<double>> boot(k, std::vector<double>(kBoot, 0.0));
  std::vector<std::size_t> pick(reps);
  for (int b = 0; b < kBoot; ++b) {
    for (auto& i : pick) i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(reps)) % reps;
    for (std::size_t g = 0; g < k; ++g) {
      double acc = 0.0;
      for (std::size_t i : pick) acc += rows[i][g];
      boot[g][b] = acc / static_cast<double>(reps);
    }
  }
  for (std::size_t g = 0; g < k; ++g) out.bootstrap_error.push_back(std::sqrt(sample_variance(boot[g], mean_of(boot[g]))));
  return out;
}

void check_times(const std::vector<double>& times) {
  if (times.empty()) throw DomainError("need at least one time");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0) throw DomainError("times must be non-negative");
    if (i > 0 && times[i] < times[i - 1]) throw DomainError("times must be sorted");
  }
}

}  // namespace

CorrelationSeries spacetime_correlation(const EnsembleSpec& spec, int sigma, const std::vector<long>& lags,
                                        const std::vector<double>& times) {
  if (sigma != 1 && sigma != -1) throw DomainError("spacetime correlation needs sigma = +1 or -1");
  check_times(times);
  const std::size_t len = spec.cfg.lattice_len;
  for (long lag : lags)
    if (static_cast<std::size_t>(std::labs(lag)) > len / 2) throw DomainError("lag beyond L/2");
  if (spec.replicas < 2) throw ConfigError("need at least two replicas", "replicas");
  Prepared p(spec);
  spec.cfg.validate(p.pot.c2());
  const double sq = p.eq.sqrt_c2, m = xi_mean(p.eq, sigma);
  const double speed = sq * spec.cfg.alpha * spec.cfg.time_scale();
  auto xi_bar = [&](const ChainState& s) {
    std::vector<double> x(len);
    for (std::size_t j = 0; j < len; ++j) x[j] = sq * s.r[(j + 1) % len] + sigma * s.p[j] - m;
    return x;
  };
  const std::uint64_t steps = substep_count(spec.cfg, times.back());
  std::vector<CorrelationPoint> grid;
  std::vector<long> offsets;
  for (double t : times) {
    const double k = std::round(t / times.back() * static_cast<double>(steps));
    const double now = steps == 0 ? 0.0 : times.back() * k / static_cast<double>(steps);
    offsets.push_back(-sigma * std::lround(speed * now));
    for (long lag : lags) grid.push_back({t, lag, offsets.back()});
  }

  auto rows = parallel_replicas(spec.replicas, spec.workers, [&](std::size_t r) {
    RandomStream rng(spec.seed, r);
    ChainState state = sample_gibbs_state(len, p.marginal, spec.cfg.p_mean, rng);
    const auto x0 = xi_bar(state);
    std::vector<double> row;
    row.reserve(grid.size());
    std::vector<Hook> hooks;
    for (std::size_t ti = 0; ti < times.size(); ++ti)
      hooks.push_back({times[ti], [&, ti](double, const ChainState& s) {
                         const auto xt = xi_bar(s);
                         const long offset = offsets[ti];
                         for (long lag : lags) {
                           double acc = 0.0;
                           for (std::size_t i = 0; i < len; ++i)
                             acc += xt[wrap(static_cast<long>(i) + lag + offset, len)] * x0[i];
                           row.push_back(acc / static_cast<double>(len));
                         }
                       }});
    evolve_macro(state, times.back(), spec.cfg, p.pot, rng, hooks);
    return row;
  });
  return reduce_series(std::move(grid), rows, spec.seed);
}

std::vector<double> spread_centers(const ScalingConfig& cfg, const TestFunction& phi, std::size_t count) {
  std::vector<double> out;
  const double mid = box_center(cfg), gap = 2.0 * phi.support_radius();
  for (std::size_t k = 0; k < count; ++k)
    out.push_back(mid + (static_cast<double>(k) - 0.5 * static_cast<double>(count - 1)) * gap);
  return out;
}

CorrelationSeries smoothed_correlation(const EnsembleSpec& spec, int sigma, const TestFunction& phi,
                                       const std::vector<double>& times, const std::vector<double>& centers) {
  if (sigma != 1 && sigma != -1) throw DomainError("smoothed correlation needs sigma = +1 or -1");
  if (centers.empty()) throw DomainError("need at least one test-function center");
  check_times(times);
  if (spec.replicas < 2) throw ConfigError("need at least two replicas", "replicas");
  Prepared p(spec);
  spec.cfg.validate(p.pot.c2());
  const double v = Frame::phonon(sigma, spec.cfg, spec.potential.coeffs()).velocity;
  std::vector<TestFunction> phis;
  for (double c : centers) phis.push_back(phi.centered_at(c));
  std::vector<Integrand> fields;
  for (const auto& f : phis) fields.push_back(linear_field_integrand(sigma, f, v, spec.cfg, p.eq));
  std::vector<CorrelationPoint> grid;
  for (double t : times) grid.push_back({t, 0});

  auto rows = parallel_replicas(spec.replicas, spec.workers, [&](std::size_t r) {
    RandomStream rng(spec.seed, r);
    ChainState state = sample_gibbs_state(spec.cfg.lattice_len, p.marginal, spec.cfg.p_mean, rng);
    std::vector<double> x0;
    for (const auto& f : fields) x0.push_back(f(state, 0.0));
    std::vector<double> row;
    std::vector<Hook> hooks;
    for (double t : times)
      hooks.push_back({t, [&](double now, const ChainState& s) {
                         double acc = 0.0;
                         for (std::size_t c = 0; c < fields.size(); ++c) acc += fields[c](s, now) * x0[c];
                         row.push_back(acc / static_cast<double>(fields.size()));
                       }});
    evolve_macro(state, times.back(), spec.cfg, p.pot, rng, hooks);
    return row;
  });
  return reduce_series(std::move(grid), rows, spec.seed);
}

StationarityCheck gibbs_stationarity(const EnsembleSpec& spec) {
  if (spec.replicas < 2) throw ConfigError("need at least two replicas", "replicas");
  const ScaledPotential pot(spec.potential, spec.cfg.epsilon());
  spec.cfg.validate(pot.c2());
  const GibbsMarginal marginal(pot, spec.cfg.beta, spec.cfg.tau);
  const auto rows = parallel_replicas(spec.replicas, spec.workers, [&](std::size_t r) {
    RandomStream rng(spec.seed, r);
    ChainState state = sample_gibbs_state(spec.cfg.lattice_len, marginal, spec.cfg.p_mean, rng);
    evolve_macro(state, spec.horizon, spec.cfg, pot, rng);
    std::vector<double> acc(5, 0.0);
    for (std::size_t j = 0; j < state.size(); ++j) {
      const double p = state.p[j], x = state.r[j];
      acc[0] += p;
      acc[1] += p * p;
      acc[2] += x;
      acc[3] += x * x;
      acc[4] += pot.force(x);
    }
    for (auto& a : acc) a /= static_cast<double>(state.size());
    return acc;
  });
  const auto& m = marginal.moments();
  StationarityCheck out;
  out.expected = {spec.cfg.p_mean, 1.0 / spec.cfg.beta + spec.cfg.p_mean * spec.cfg.p_mean, m.mean_r, m.mean_r2,
                  m.mean_vprime};
  const char* labels[] = {"mean_p", "mean_p2", "mean_r", "mean_r2", "mean_vprime"};
  for (std::size_t k = 0; k < 5; ++k) out.measured.push_back(summarize(labels[k], column(rows, k), spec.horizon));
  return out;
}

StaticFieldCheck static_field_variances(const EnsembleSpec& spec, const TestFunction& phi) {
  if (spec.replicas < 2) throw ConfigError("need at least two replicas", "replicas");
  const ScaledPotential pot(spec.potential, spec.cfg.epsilon());
  spec.cfg.validate(pot.c2());
  const GibbsMarginal marginal(pot, spec.cfg.beta, spec.cfg.tau);
  const ModeMeans means = equilibrium_means(marginal, spec.cfg.p_mean);
  const int n = spec.cfg.n;
  const auto rows = parallel_replicas(spec.replicas, spec.workers, [&](std::size_t r) {
    RandomStream rng(spec.seed, r);
    const ChainState state = sample_gibbs_state(spec.cfg.lattice_len, marginal, spec.cfg.p_mean, rng);
    const ModeArrays modes = compute_modes(state, pot, spec.cfg, means);
    double vp = 0.0, vm = 0.0, e = 0.0;
    const std::size_t len = state.size();
    for (std::size_t j = 0; j < len; ++j) {
      const double a = modes.xi_plus[j] - means.xi_plus, b = modes.xi_minus[j] - means.xi_minus;
      vp += a * a;
      vm += b * b;
      e += (modes.xi_zero[j] - means.energy) * phi(static_cast<double>(j) / n);
    }
    return std::vector<double>{vp / static_cast<double>(len), vm / static_cast<double>(len), e / std::sqrt(n)};
  });
  return {summarize("var_xi_plus", column(rows, 0), 0.0), summarize("var_xi_minus", column(rows, 1), 0.0),
          second_moment("energy_pairing", column(rows, 2), 0.0)};
}

bool strictly_decreasing_trend(const std::vector<TimeIntegralEstimate>& by_n) {
  if (by_n.size() < 2) return false;
  for (std::size_t i = 1; i < by_n.size(); ++i)
    if (!(by_n[i].value < by_n[i - 1].value)) return false;
  const auto& a = by_n.front();
  const auto& b = by_n.back();
  return a.value - a.std_error() > b.value + b.std_error();
}

}  // namespace oscchain
