#include "oscchain/random.hpp"

#include <cmath>
#include <numbers>

namespace oscchain {

double RandomStream::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double radius = std::sqrt(-2.0 * std::log(uniform_pos()));
  const double angle = 2.0 * std::numbers::pi * uniform();
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

unsigned RandomStream::poisson_at_least_one(double mean) noexcept {
  // Inversion of the zero-truncated law; means used here are far below one,
  // so the loop almost always stops at k = 1.
  const double p0 = std::exp(-mean);
  const double total = -std::expm1(-mean);
  double u = uniform() * total;
  double term = p0 * mean;  // P(N = 1)
  unsigned k = 1;
  while (u > term && k < 64) {
    u -= term;
    ++k;
    term *= mean / k;
  }
  return k;
}

}  // namespace oscchain
