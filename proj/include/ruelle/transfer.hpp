#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "configuration.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "potentials.hpp"
#include "state_space.hpp"

namespace ruelle {

/// Real function of the first `memory` coordinates, stored densely over M^m
/// in lexicographic word order.
struct CylinderFunction {
  std::size_t alphabet = 0;
  std::size_t memory = 0;
  std::vector<double> values;

  static CylinderFunction constant(std::size_t alphabet, std::size_t memory, double c) {
    return {alphabet, memory,
            std::vector<double>(checked_power(alphabet, memory, kDefaultEnumerationCap), c)};
  }

  template <typename Fn>
  static CylinderFunction tabulate(const StateSpace& space, std::size_t memory, Fn&& fn) {
    CylinderFunction out = constant(space.size(), memory, 0.0);
    std::size_t i = 0;
    for (const auto& w : enumerate_words(space, memory)) out.values[i++] = fn(std::span<const Index>(w));
    return out;
  }

  std::size_t size() const noexcept { return values.size(); }
  double operator()(ConfigView x) const { return values[word_index(x, alphabet, memory)]; }
  double operator()(const Configuration& x) const { return (*this)(x.view()); }
};

/// Uniform random values in [lo, hi] over M^m.
inline CylinderFunction random_cylinder_function(std::size_t alphabet, std::size_t memory,
                                                 std::mt19937_64& rng, double lo = -1.0,
                                                 double hi = 1.0) {
  auto phi = CylinderFunction::constant(alphabet, memory, 0.0);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : phi.values) v = u(rng);
  return phi;
}

inline double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

/// The Ruelle operator restricted to functions of the first m coordinates:
///
///   (L phi)(x) = sum_a mu_a exp(f(a x_1 .. x_m pad ...)) phi(a x_1 .. x_{m-1})
///
/// where mu is the a priori measure (times N under the counting convention).
/// This is the operator of the truncated potential f_{m+1}; for potentials
/// of memory <= m+1 it is exact.
class TransferGrid {
 public:
  TransferGrid(const StateSpace& space, const Potential& f, std::size_t m, Index pad = 0,
               std::size_t workers = 1, std::size_t cap = kDefaultEnumerationCap)
      : alphabet_(space.size()), memory_(m), workers_(workers) {
    require_compatible(space, f, "TransferGrid");
    if (!space.contains(pad)) throw Error("TransferGrid: pad outside alphabet");
    size_ = checked_power(alphabet_, m, cap);
    if (size_ > cap || size_ * alphabet_ > cap)
      throw CapExceeded("TransferGrid: " + std::to_string(alphabet_) + "^" + std::to_string(m + 1) +
                        " kernel entries exceed the cap " + std::to_string(cap));
    stride_ = m == 0 ? 0 : size_ / alphabet_;
    log_kernel_.resize(alphabet_ * size_);
    const auto log_mu = space.log_measure();
    detail::parallel_for(size_, workers_, [&](std::size_t begin, std::size_t end) {
      std::vector<Index> buf(m + 1);
      for (std::size_t x = begin; x < end; ++x) {
        auto w = WordRange::decode(x, alphabet_, m);
        std::copy(w.begin(), w.end(), buf.begin() + 1);
        for (Index a = 0; a < alphabet_; ++a) {
          buf[0] = a;
          log_kernel_[a * size_ + x] = log_mu[a] + f(ConfigView{buf, pad});
        }
      }
    });
  }

  std::size_t alphabet() const noexcept { return alphabet_; }
  std::size_t memory() const noexcept { return memory_; }
  std::size_t size() const noexcept { return size_; }

  /// log(mu_a) + f(a x pad...) for grid point x.
  double log_kernel(Index a, std::size_t x) const noexcept { return log_kernel_[a * size_ + x]; }
  /// Grid index of the first m coordinates of a x.
  std::size_t preimage(Index a, std::size_t x) const noexcept {
    return memory_ == 0 ? 0 : a * stride_ + x / alphabet_;
  }

  bool has_zero_entry() const noexcept {
    return std::any_of(log_kernel_.begin(), log_kernel_.end(),
                       [](double v) { return !(v > -std::numeric_limits<double>::infinity()); });
  }

  void apply(std::span<const double> phi, std::span<double> out) const {
    detail::parallel_for(size_, workers_, [&](std::size_t begin, std::size_t end) {
      for (std::size_t x = begin; x < end; ++x) {
        double s = 0.0;
        for (Index a = 0; a < alphabet_; ++a) s += std::exp(log_kernel(a, x)) * phi[preimage(a, x)];
        out[x] = s;
      }
    });
  }

  /// Same as apply on log-values, via log-sum-exp over the alphabet.
  void apply_log(std::span<const double> log_phi, std::span<double> out) const {
    detail::parallel_for(size_, workers_, [&](std::size_t begin, std::size_t end) {
      std::vector<double> terms(alphabet_);
      for (std::size_t x = begin; x < end; ++x) {
        for (Index a = 0; a < alphabet_; ++a) terms[a] = log_kernel(a, x) + log_phi[preimage(a, x)];
        out[x] = log_sum_exp(terms);
      }
    });
  }

  /// The transpose action on measures over M^m: out = nu T.
  void apply_adjoint(std::span<const double> nu, std::span<double> out) const {
    // column u = (a, u_2..u_m) collects rows x with x_1..x_{m-1} = u_2..u_m
    detail::parallel_for(size_, workers_, [&](std::size_t begin, std::size_t end) {
      for (std::size_t u = begin; u < end; ++u) {
        const Index a = memory_ == 0 ? 0 : static_cast<Index>(u / stride_);
        double s = 0.0;
        if (memory_ == 0) {
          for (Index b = 0; b < alphabet_; ++b) s += std::exp(log_kernel(b, 0)) * nu[0];
        } else {
          const std::size_t base = (u % stride_) * alphabet_;
          for (Index b = 0; b < alphabet_; ++b) s += nu[base + b] * std::exp(log_kernel(a, base + b));
        }
        out[u] = s;
      }
    });
  }

 private:
  std::size_t alphabet_;
  std::size_t memory_;
  std::size_t workers_;
  std::size_t size_ = 0;
  std::size_t stride_ = 0;
  std::vector<double> log_kernel_;
};

/// L_f(phi) on the memory-m grid of phi, extending by `pad` beyond m+1.
inline CylinderFunction apply(const StateSpace& space, const Potential& f,
                              const CylinderFunction& phi, Index pad = 0, std::size_t workers = 1) {
  if (phi.alphabet != space.size()) throw Error("apply: cylinder function alphabet mismatch");
  TransferGrid grid(space, f, phi.memory, pad, workers);
  CylinderFunction out{phi.alphabet, phi.memory, std::vector<double>(phi.size())};
  grid.apply(phi.values, out.values);
  return out;
}

/// log L^n_f(1) on the grid, stored as max-subtracted values plus the
/// per-step normalizers. log_values[x] + offset() reconstructs the absolute
/// logarithm.
struct LogIterate {
  CylinderFunction log_values;
  std::vector<double> normalizers;

  double offset() const {
    double s = 0.0;
    for (double c : normalizers) s += c;
    return s;
  }
  double log_value(std::size_t x) const { return log_values.values[x] + offset(); }
};

namespace detail {

/// One normalized log-domain step; returns the subtracted maximum.
inline double log_step(const TransferGrid& grid, std::vector<double>& g, std::vector<double>& tmp) {
  grid.apply_log(g, tmp);
  const double c = *std::max_element(tmp.begin(), tmp.end());
  for (std::size_t x = 0; x < tmp.size(); ++x) g[x] = tmp[x] - c;
  return c;
}

}  // namespace detail

inline LogIterate iterate_log(const StateSpace& space, const Potential& f, std::size_t n,
                              std::size_t m, Index pad = 0, std::size_t workers = 1,
                              std::size_t cap = kDefaultEnumerationCap) {
  if (n < 1) throw Error("iterate_log: n must be >= 1");
  TransferGrid grid(space, f, m, pad, workers, cap);
  LogIterate out{CylinderFunction::constant(space.size(), m, 0.0), {}};
  std::vector<double> tmp(grid.size());
  for (std::size_t k = 0; k < n; ++k)
    out.normalizers.push_back(detail::log_step(grid, out.log_values.values, tmp));
  return out;
}

struct PressureEntry {
  std::size_t n = 0;
  double p = 0.0;           ///< (1/n) log L^n_f(1)(sigma^n x)
  double cauchy_gap = 0.0;  ///< |p_n - p_{n-1}|; NaN at the first entry
};

struct PressureTrace {
  Configuration base_point;
  std::size_t memory = 0;
  std::vector<PressureEntry> entries;
  double final_estimate = 0.0;
  double cauchy_gap = 0.0;
  /// Bound on |p(f_{m+1}) - p(f)| from ||f_{m+1} - f||, when known.
  std::optional<double> truncation_bound;
};

struct PressureOptions {
  std::optional<Index> pad;  ///< grid extension letter; defaults to the base point's pad
  std::size_t workers = 1;
  std::size_t cap = kDefaultEnumerationCap;
};

/// p_n = (1/n) log L^n_f(1)(sigma^n x) for n = 1..n_max.
inline PressureTrace pressure_trace(const StateSpace& space, const Potential& f, std::size_t n_max,
                                    const Configuration& x, std::size_t m,
                                    const PressureOptions& options = {}) {
  if (n_max < 2) throw Error("pressure_trace: n_max must be >= 2");
  require_valid(x, space, "pressure_trace");
  const Index pad = options.pad.value_or(x.pad());
  TransferGrid grid(space, f, m, pad, options.workers, options.cap);
  std::vector<double> g(grid.size(), 0.0);
  std::vector<double> tmp(grid.size());
  PressureTrace out{x, m, {}, 0.0, 0.0, std::nullopt};
  double offset = 0.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    offset += detail::log_step(grid, g, tmp);
    const std::size_t y = word_index(x.view().shifted(n), space.size(), m);
    PressureEntry e{n, (g[y] + offset) / static_cast<double>(n),
                    std::numeric_limits<double>::quiet_NaN()};
    if (!out.entries.empty()) e.cauchy_gap = std::abs(e.p - out.entries.back().p);
    out.entries.push_back(e);
  }
  out.final_estimate = out.entries.back().p;
  out.cauchy_gap = out.entries.back().cauchy_gap;
  if (f.memory && *f.memory <= m + 1)
    out.truncation_bound = 0.0;
  else if (f.variation_bound)
    out.truncation_bound = f.variation_bound(m + 1);
  return out;
}

// ---------------------------------------------------------------------------
// Ruelle-Perron-Frobenius eigendata for finite-memory potentials.

enum class RpfStatus { converged, not_converged, non_primitive };

inline const char* to_string(RpfStatus s) {
  switch (s) {
    case RpfStatus::converged: return "converged";
    case RpfStatus::not_converged: return "not_converged";
    case RpfStatus::non_primitive: return "non_primitive";
  }
  return "unknown";
}

struct RpfSolution {
  double lambda = 0.0;
  double log_lambda = 0.0;
  CylinderFunction h;   ///< right eigenfunction, normalized so sum h*nu = 1
  CylinderFunction nu;  ///< eigenmeasure cylinder masses, summing to 1
  double residual_right = 0.0;
  double residual_left = 0.0;
  std::size_t iterations = 0;
  RpfStatus status = RpfStatus::not_converged;
  std::vector<std::string> warnings;

  bool converged() const noexcept { return status == RpfStatus::converged; }
  std::size_t memory() const noexcept { return h.memory; }
};

struct RpfOptions {
  double tol = 1e-12;
  std::size_t max_iter = 100000;
  std::size_t cap = std::size_t{1} << 22;
  std::size_t workers = 1;
};

namespace detail {

struct PowerResult {
  std::vector<double> vector;
  double eigenvalue = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool oscillating = false;
};

/// Power iteration for a nonnegative operator from the all-ones vector.
/// `normalize` returns the scale the new iterate is divided by.
template <typename Step, typename Norm>
PowerResult power_iterate(std::size_t size, Step&& step, Norm&& normalize, double tol,
                          std::size_t max_iter) {
  PowerResult r;
  std::vector<double> v(size, 1.0);
  const double s0 = normalize(v);
  for (auto& x : v) x /= s0;
  std::vector<double> w(size);
  std::vector<double> history;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    step(v, w);
    const double lambda = normalize(w);
    double change = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      w[i] /= lambda;
      change = std::max(change, std::abs(w[i] - v[i]));
    }
    v.swap(w);
    const double gap = history.empty() ? std::numeric_limits<double>::infinity()
                                       : std::abs(lambda - history.back());
    history.push_back(lambda);
    r.iterations = it;
    r.eigenvalue = lambda;
    if (change < tol && gap < tol * lambda) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged && history.size() >= 4) {
    const std::size_t k = history.size() - 1;
    const double step1 = std::abs(history[k] - history[k - 1]);
    const double step2 = std::abs(history[k] - history[k - 2]);
    r.oscillating = step1 > 1e3 * std::max(step2, 1e-300) && step1 > tol * r.eigenvalue;
  }
  r.vector = std::move(v);
  return r;
}

inline double sup_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double total(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace detail

/// Perron eigendata of the transfer matrix of a finite-memory potential on
/// M^m, m = max(memory, 1): right vector by power iteration with sup-norm
/// normalization, left vector by the adjoint iteration.
inline RpfSolution rpf_solve(const StateSpace& space, const Potential& f, const RpfOptions& options = {}) {
  require_compatible(space, f, "rpf_solve");
  if (!f.memory) throw Error("rpf_solve: potential '" + f.name + "' must have finite memory");
  if (!(options.tol > 0.0)) throw Error("rpf_solve: tol must be positive");
  const std::size_t m = std::max<std::size_t>(*f.memory, 1);
  TransferGrid grid(space, f, m, 0, options.workers, options.cap);
  const std::size_t n = grid.size();

  RpfSolution sol;
  if (grid.has_zero_entry())
    sol.warnings.push_back("transfer matrix has a zero transition; it may be reducible");

  auto right = detail::power_iterate(
      n, [&](const auto& v, auto& w) { grid.apply(v, w); },
      [](const auto& v) { return detail::sup_abs(v); }, options.tol, options.max_iter);
  auto left = detail::power_iterate(
      n, [&](const auto& v, auto& w) { grid.apply_adjoint(v, w); },
      [](const auto& v) { return detail::total(v); }, options.tol, options.max_iter);

  sol.lambda = right.eigenvalue;
  sol.log_lambda = std::log(sol.lambda);
  sol.iterations = std::max(right.iterations, left.iterations);
  if (right.converged && left.converged)
    sol.status = RpfStatus::converged;
  else if (right.oscillating || left.oscillating)
    sol.status = RpfStatus::non_primitive;
  else
    sol.status = RpfStatus::not_converged;
  if (sol.status != RpfStatus::converged)
    sol.warnings.push_back(std::string("power iteration ") + to_string(sol.status) + " after " +
                           std::to_string(sol.iterations) + " iterations");

  std::vector<double> nu = std::move(left.vector);
  const double mass = detail::total(nu);
  for (auto& x : nu) x /= mass;
  std::vector<double> h = std::move(right.vector);
  double pairing = 0.0;
  for (std::size_t i = 0; i < n; ++i) pairing += h[i] * nu[i];
  for (auto& x : h) x /= pairing;

  std::vector<double> th(n);
  grid.apply(h, th);
  double rr = 0.0;
  for (std::size_t i = 0; i < n; ++i) rr = std::max(rr, std::abs(th[i] - sol.lambda * h[i]));
  sol.residual_right = rr / detail::sup_abs(h);
  std::vector<double> nt(n);
  grid.apply_adjoint(nu, nt);
  double rl = 0.0;
  for (std::size_t i = 0; i < n; ++i) rl = std::max(rl, std::abs(nt[i] - sol.lambda * nu[i]));
  sol.residual_left = rl / detail::sup_abs(nu);

  sol.h = {space.size(), m, std::move(h)};
  sol.nu = {space.size(), m, std::move(nu)};
  return sol;
}

/// |sum nu L(phi) - lambda sum nu phi|, the discrete duality defect.
inline double duality_residual(const StateSpace& space, const Potential& f, const RpfSolution& sol,
                               const CylinderFunction& phi) {
  if (phi.memory != sol.memory() || phi.alphabet != space.size())
    throw Error("duality_residual: observable memory " + std::to_string(phi.memory) +
                " does not match the solution memory " + std::to_string(sol.memory()));
  const auto lphi = apply(space, f, phi, 0);
  double lhs = 0.0;
  double rhs = 0.0;
  for (std::size_t x = 0; x < phi.size(); ++x) {
    lhs += sol.nu.values[x] * lphi.values[x];
    rhs += sol.nu.values[x] * phi.values[x];
  }
  return std::abs(lhs - sol.lambda * rhs);
}

/// ||phi||_{L^1(nu)} for a cylinder function on the solution grid.
inline double l1_norm(const CylinderFunction& phi, const CylinderFunction& nu) {
  double s = 0.0;
  for (std::size_t x = 0; x < phi.size(); ++x) s += nu.values[x] * std::abs(phi.values[x]);
  return s;
}

struct OperatorNormReport {
  double lambda = 0.0;
  double ratio_at_one = 0.0;  ///< ||L_f 1|| / ||1|| in L^1(nu_f)
  double max_ratio = 0.0;     ///< max over samples of ||L_f phi|| / ||phi||
  std::vector<double> ratios;
  double sup_difference = 0.0;     ///< ||g - f||_inf on the grid
  double distance_estimate = 0.0;  ///< max over samples of ||(L_g - L_f) phi|| / ||phi||
  double distance_bound = 0.0;     ///< lambda_f (exp(||g - f||) - 1)
  bool norm_respected = false;
  bool distance_respected = false;
};

/// Checks ||L_f|| = lambda_f on L^1(nu_f) and the continuity bound
/// ||L_g - L_f|| <= lambda_f (e^{||g-f||} - 1) on a sample of observables.
inline OperatorNormReport operator_norm_check(const StateSpace& space, const Potential& f,
                                              const Potential& g, const RpfSolution& sol_f,
                                              const std::vector<CylinderFunction>& samples,
                                              double slack = 1e-10) {
  const std::size_t m = sol_f.memory();
  if (!f.memory || !g.memory || *g.memory > m + 1)
    throw Error("operator_norm_check: needs finite-memory potentials within the solution grid");
  TransferGrid lf(space, f, m, 0);
  TransferGrid lg(space, g, m, 0);
  OperatorNormReport r;
  r.lambda = sol_f.lambda;
  r.sup_difference = sup_distance_on_words(space, f, g, m + 1);
  r.distance_bound = sol_f.lambda * std::expm1(r.sup_difference);

  std::vector<double> a(lf.size()), b(lf.size());
  const auto one = CylinderFunction::constant(space.size(), m, 1.0);
  lf.apply(one.values, a);
  r.ratio_at_one = l1_norm({space.size(), m, a}, sol_f.nu) / l1_norm(one, sol_f.nu);

  for (const auto& phi : samples) {
    if (phi.memory != m) throw Error("operator_norm_check: sample memory mismatch");
    const double norm = l1_norm(phi, sol_f.nu);
    if (norm == 0.0) continue;
    lf.apply(phi.values, a);
    lg.apply(phi.values, b);
    double la = 0.0;
    double diff = 0.0;
    for (std::size_t x = 0; x < a.size(); ++x) {
      la += sol_f.nu.values[x] * std::abs(a[x]);
      diff += sol_f.nu.values[x] * std::abs(b[x] - a[x]);
    }
    r.ratios.push_back(la / norm);
    r.max_ratio = std::max(r.max_ratio, la / norm);
    r.distance_estimate = std::max(r.distance_estimate, diff / norm);
  }
  r.norm_respected = r.max_ratio <= r.lambda + slack && r.ratio_at_one <= r.lambda + slack;
  r.distance_respected = r.distance_estimate <= r.distance_bound + slack;
  return r;
}

}  // namespace ruelle
