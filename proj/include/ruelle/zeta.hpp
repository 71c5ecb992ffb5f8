#pragma once

#include <array>
#include <cmath>
#include <string>

#include "error.hpp"

namespace ruelle {

/// Riemann zeta for real s > 1: a partial sum plus the integral tail
/// N^{1-s}/(s-1) with Euler-Maclaurin corrections. The returned value is
/// within `tol` of the true sum; the bound used is twice the first omitted
/// correction term.
inline double zeta(double s, double tol = 1e-14) {
  if (!(s > 1.0)) throw Error("zeta: s must exceed 1 (got " + std::to_string(s) + ")");
  if (!(tol > 0.0)) throw Error("zeta: tol must be positive");

  // B_{2j} / (2j)! for j = 1..7
  static constexpr std::array<double, 7> kCoef = {
      1.0 / 12.0,           -1.0 / 720.0,          1.0 / 30240.0,        -1.0 / 1209600.0,
      1.0 / 47900160.0,     -691.0 / 1307674368000.0, 1.0 / 74724249600.0};

  for (std::size_t n = 8;; n *= 2) {
    const double big_n = static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t k = n - 1; k >= 1; --k) sum += std::pow(static_cast<double>(k), -s);
    sum += std::pow(big_n, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(big_n, -s);

    // rising factorial s(s+1)...(s+2j-2) times N^{-s-2j+1}
    double rising = s;
    double power = std::pow(big_n, -s - 1.0);
    double omitted = 0.0;
    for (std::size_t j = 0; j < kCoef.size(); ++j) {
      const double term = kCoef[j] * rising * power;
      if (j + 1 == kCoef.size()) {
        omitted = std::abs(term);
        break;
      }
      sum += term;
      rising *= (s + 2.0 * j + 1.0) * (s + 2.0 * j + 2.0);
      power /= big_n * big_n;
    }
    if (2.0 * omitted < tol || n > (std::size_t{1} << 24)) {
      if (2.0 * omitted >= tol) throw Error("zeta: could not certify tolerance");
      return sum;
    }
  }
}

/// sum_{j > n} j^{-s}, the tail of the zeta series.
inline double zeta_tail(double s, std::size_t n, double tol = 1e-15) {
  double head = 0.0;
  for (std::size_t j = n; j >= 1; --j) head += std::pow(static_cast<double>(j), -s);
  return zeta(s, tol) - head;
}

}  // namespace ruelle
