#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "configuration.hpp"
#include "error.hpp"
#include "state_space.hpp"
#include "zeta.hpp"

namespace ruelle {

using Params = std::map<std::string, double>;

/// A continuous potential f on M^N together with what is known about its
/// regularity. Evaluators must be pure and reentrant.
struct Potential {
  using Evaluator = std::function<double(ConfigView)>;

  std::string name;
  std::size_t alphabet_size = 0;
  Evaluator evaluator;
  /// Smallest k such that f depends only on x_1..x_k, when finite.
  std::optional<std::size_t> memory;
  Params params;
  /// Certified bound on sup|f|, when known in closed form.
  std::optional<double> sup_bound;
  /// Certified upper bound on var_k(f), when known in closed form.
  std::function<double(std::size_t)> variation_bound;
  /// Natural local truncation (e.g. dropping a series tail), when it differs
  /// from padding.
  std::function<Potential(std::size_t)> series_truncation;
  /// ||f_m - f||_inf for potentials produced by truncation.
  std::optional<double> truncation_gap;

  double operator()(ConfigView x) const { return evaluator(x); }
  double operator()(const Configuration& x) const { return evaluator(x.view()); }
  bool finite_memory() const noexcept { return memory.has_value(); }
};

inline void require_compatible(const StateSpace& space, const Potential& f, const char* where) {
  if (f.alphabet_size != space.size())
    throw Error(std::string(where) + ": potential '" + f.name + "' is defined on an alphabet of size " +
                std::to_string(f.alphabet_size) + ", state space has " +
                std::to_string(space.size()));
}

inline double evaluate(const StateSpace& space, const Potential& f, const Configuration& x) {
  require_compatible(space, f, "evaluate");
  require_valid(x, space, "evaluate");
  return f(x);
}

/// S_n(f)(x) = f(x) + f(sigma x) + ... + f(sigma^{n-1} x).
inline double birkhoff_sum(const Potential& f, ConfigView x, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += f(x.shifted(j));
  return s;
}

inline double birkhoff_sum(const Potential& f, const Configuration& x, std::size_t n) {
  return birkhoff_sum(f, x.view(), n);
}

// ---------------------------------------------------------------------------
// Sampling helpers shared by the estimators.

/// Random tail: a uniform random prefix of `length` letters then a random pad.
inline Configuration random_tail(std::size_t alphabet, std::size_t length, std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> letter(0, static_cast<Index>(alphabet - 1));
  std::vector<Index> prefix(length);
  for (auto& a : prefix) a = letter(rng);
  return Configuration(std::move(prefix), letter(rng));
}

/// Pure-pad tails for every letter followed by `random_count` seeded tails.
inline std::vector<Configuration> default_tail_set(std::size_t alphabet, std::size_t random_count,
                                                   std::uint64_t seed,
                                                   std::size_t random_length = 16) {
  std::vector<Configuration> tails;
  for (Index p = 0; p < alphabet; ++p) tails.push_back(Configuration::pure_pad(p));
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < random_count; ++i)
    tails.push_back(random_tail(alphabet, random_length, rng));
  return tails;
}

// ---------------------------------------------------------------------------
// Variation and sup norm.

struct VariationMethod {
  enum class Kind { exhaustive, sampled };
  Kind kind = Kind::exhaustive;
  std::uint64_t seed = 0;
  std::size_t trials = 1000;        ///< random shared prefixes (sampled mode)
  std::size_t random_tails = 32;    ///< seeded tails added to the pure-pad tails
  std::size_t cap = 1'000'000;      ///< prefix enumeration cap (exhaustive mode)
};

/// Estimate of var_k(f) = sup{|f(x) - f(y)| : x_i = y_i, i <= k}. Always a
/// lower bound of the true supremum over the sampled tails.
struct VariationEstimate {
  std::size_t k = 0;
  double value = 0.0;
  VariationMethod method;
  std::size_t prefixes = 0;
  std::size_t tails = 0;
  bool lower_bound = true;
};

inline VariationEstimate variation_estimate(const StateSpace& space, const Potential& f,
                                            std::size_t k, VariationMethod method = {}) {
  require_compatible(space, f, "variation_estimate");
  if (k < 1) throw Error("variation_estimate: k must be >= 1");
  VariationEstimate out{k, 0.0, method, 0, 0, true};
  if (f.memory && *f.memory <= k) return out;

  const auto tails = default_tail_set(space.size(), method.random_tails, method.seed);
  out.tails = tails.size();
  std::vector<Index> buf;
  auto probe = [&](std::span<const Index> w) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& t : tails) {
      buf.assign(w.begin(), w.end());
      buf.insert(buf.end(), t.prefix().begin(), t.prefix().end());
      const double v = f(ConfigView{buf, t.pad()});
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out.value = std::max(out.value, hi - lo);
    ++out.prefixes;
  };

  if (method.kind == VariationMethod::Kind::exhaustive) {
    for (const auto& w : enumerate_words(space, k, method.cap)) probe(w);
  } else {
    std::mt19937_64 rng(method.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<Index> letter(0, static_cast<Index>(space.size() - 1));
    std::vector<Index> w(k);
    for (Index p = 0; p < space.size(); ++p) {
      std::fill(w.begin(), w.end(), p);
      probe(w);
    }
    for (std::size_t t = 0; t < method.trials; ++t) {
      for (auto& a : w) a = letter(rng);
      probe(w);
    }
  }
  return out;
}

/// sup|f|: the declared bound when available, otherwise exhaustive over
/// words of the potential's memory.
inline double sup_norm(const StateSpace& space, const Potential& f,
                       std::size_t cap = kDefaultEnumerationCap) {
  require_compatible(space, f, "sup_norm");
  if (f.sup_bound) return *f.sup_bound;
  if (!f.memory)
    throw Error("sup_norm: potential '" + f.name + "' has neither finite memory nor a declared bound");
  double best = 0.0;
  for (const auto& w : enumerate_words(space, std::max<std::size_t>(*f.memory, 1), cap))
    best = std::max(best, std::abs(f(ConfigView{w, 0})));
  return best;
}

/// sup|f - g| over words of length `length` padded with `pad`; exact when
/// both potentials have memory <= length.
inline double sup_distance_on_words(const StateSpace& space, const Potential& f, const Potential& g,
                                    std::size_t length, Index pad = 0,
                                    std::size_t cap = kDefaultEnumerationCap) {
  double best = 0.0;
  for (const auto& w : enumerate_words(space, length, cap)) {
    const ConfigView x{w, pad};
    best = std::max(best, std::abs(f(x) - g(x)));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Local truncation.

namespace detail {

/// Evaluates f at (x_1, ..., x_m, pad, pad, ...).
inline double eval_padded(const Potential& f, ConfigView x, std::size_t m, Index pad) {
  if (x.prefix_size() >= m) return f(ConfigView{x.prefix.first(m), pad});
  if (x.pad == pad) return f(x);
  constexpr std::size_t kInline = 64;
  if (m <= kInline) {
    std::array<Index, kInline> buf{};
    for (std::size_t k = 0; k < m; ++k) buf[k] = x[k];
    return f(ConfigView{std::span<const Index>(buf.data(), m), pad});
  }
  std::vector<Index> buf(m);
  for (std::size_t k = 0; k < m; ++k) buf[k] = x[k];
  return f(ConfigView{buf, pad});
}

}  // namespace detail

/// f_m(x) = f(x_1, ..., x_m, pad, pad, ...).
inline Potential truncate_local(const StateSpace& space, const Potential& f, std::size_t m,
                                Index pad = 0) {
  require_compatible(space, f, "truncate_local");
  if (!space.contains(pad)) throw Error("truncate_local: pad outside alphabet");
  if (f.memory && *f.memory <= m) {
    Potential same = f;
    same.truncation_gap = 0.0;
    return same;
  }
  Potential g;
  g.name = f.name + "|m=" + std::to_string(m);
  g.alphabet_size = f.alphabet_size;
  g.memory = m;
  g.params = f.params;
  g.evaluator = [f, m, pad](ConfigView x) { return detail::eval_padded(f, x, m, pad); };
  g.sup_bound = f.sup_bound;
  if (m == 0) {
    g.truncation_gap = f.sup_bound ? std::optional<double>(2.0 * *f.sup_bound) : std::nullopt;
  } else if (f.variation_bound) {
    g.truncation_gap = f.variation_bound(m);
  } else {
    VariationMethod method;
    method.kind = VariationMethod::Kind::sampled;
    g.truncation_gap = variation_estimate(space, f, m, method).value;
  }
  return g;
}

/// The potential's own local truncation when it has one (series
/// truncation), otherwise padding with letter 0.
inline Potential truncate_natural(const StateSpace& space, const Potential& f, std::size_t m) {
  if (f.series_truncation && !(f.memory && *f.memory <= m)) return f.series_truncation(m);
  return truncate_local(space, f, m, 0);
}

// ---------------------------------------------------------------------------
// Combinators.

inline Potential add_constant(const Potential& f, double c) {
  Potential g = f;
  g.name = f.name + "+" + std::to_string(c);
  g.evaluator = [e = f.evaluator, c](ConfigView x) { return e(x) + c; };
  if (f.sup_bound) g.sup_bound = *f.sup_bound + std::abs(c);
  g.series_truncation = nullptr;
  return g;
}

inline Potential sum(const Potential& f, const Potential& g) {
  if (f.alphabet_size != g.alphabet_size) throw Error("sum: potentials on different alphabets");
  Potential h;
  h.name = f.name + "+" + g.name;
  h.alphabet_size = f.alphabet_size;
  h.evaluator = [a = f.evaluator, b = g.evaluator](ConfigView x) { return a(x) + b(x); };
  if (f.memory && g.memory) h.memory = std::max(*f.memory, *g.memory);
  if (f.sup_bound && g.sup_bound) h.sup_bound = *f.sup_bound + *g.sup_bound;
  if (f.variation_bound && g.variation_bound)
    h.variation_bound = [a = f.variation_bound, b = g.variation_bound](std::size_t k) {
      return a(k) + b(k);
    };
  return h;
}

inline Potential scaled(const Potential& f, double s) {
  Potential g = f;
  g.name = std::to_string(s) + "*" + f.name;
  g.evaluator = [e = f.evaluator, s](ConfigView x) { return s * e(x); };
  if (f.sup_bound) g.sup_bound = std::abs(s) * *f.sup_bound;
  if (f.variation_bound)
    g.variation_bound = [v = f.variation_bound, s](std::size_t k) { return std::abs(s) * v(k); };
  g.series_truncation = nullptr;
  return g;
}

// ---------------------------------------------------------------------------
// Built-in potentials.

inline Potential make_constant(const StateSpace& space, double c) {
  Potential f;
  f.name = c == 0.0 ? "zero" : "constant";
  f.alphabet_size = space.size();
  f.evaluator = [c](ConfigView) { return c; };
  f.memory = 0;
  f.params = {{"c", c}};
  f.sup_bound = std::abs(c);
  f.variation_bound = [](std::size_t) { return 0.0; };
  return f;
}

inline Potential make_zero(const StateSpace& space) { return make_constant(space, 0.0); }

namespace detail {

inline std::vector<double> first_coordinates(const StateSpace& space) {
  std::vector<double> c(space.size());
  for (Index a = 0; a < space.size(); ++a) c[a] = space.coordinate(a);
  return c;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

/// f(x) = beta * x_1.
inline Potential make_single_site(const StateSpace& space, double beta) {
  auto c = detail::first_coordinates(space);
  Potential f;
  f.name = "single_site";
  f.alphabet_size = space.size();
  f.memory = 1;
  f.params = {{"beta", beta}};
  f.sup_bound = std::abs(beta) * detail::max_abs(c);
  f.variation_bound = [](std::size_t) { return 0.0; };
  f.evaluator = [c = std::move(c), beta](ConfigView x) { return beta * c[x[0]]; };
  return f;
}

/// f(x) = beta * <x_1, x_2>: the Ising coupling on {-1,+1}, the planar
/// rotor coupling beta*cos(theta_1 - theta_2) on the circle.
inline Potential make_nearest_neighbor(const StateSpace& space, double beta) {
  const std::size_t n = space.size();
  std::vector<double> dot(n * n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) {
      const auto& p = space.points()[a].coords;
      const auto& q = space.points()[b].coords;
      const std::size_t dim = space.metric_kind() == MetricKind::circle_arc ? 2 : 1;
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += p[d] * q[d];
      dot[a * n + b] = beta * s;
    }
  Potential f;
  f.name = "ising";
  f.alphabet_size = n;
  f.memory = 2;
  f.params = {{"beta", beta}};
  f.sup_bound = detail::max_abs(dot);
  f.variation_bound = [s = *f.sup_bound](std::size_t k) { return k >= 2 ? 0.0 : 2.0 * s; };
  f.evaluator = [dot = std::move(dot), n](ConfigView x) { return dot[x[0] * n + x[1]]; };
  return f;
}

/// Finite-memory potential given by a table over M^k in lexicographic order.
inline Potential make_table(const StateSpace& space, std::size_t k, std::vector<double> values,
                            std::string name = "table") {
  const std::size_t count = checked_power(space.size(), k, kDefaultEnumerationCap);
  if (values.size() != count)
    throw Error("make_table: expected " + std::to_string(count) + " values for memory " +
                std::to_string(k));
  Potential f;
  f.name = std::move(name);
  f.alphabet_size = space.size();
  f.memory = k;
  f.params = {{"memory", static_cast<double>(k)}};
  f.sup_bound = detail::max_abs(values);
  f.variation_bound = [s = *f.sup_bound, k](std::size_t j) { return j >= k ? 0.0 : 2.0 * s; };
  const std::size_t n = space.size();
  f.evaluator = [values = std::move(values), n, k](ConfigView x) {
    return values[word_index(x, n, k)];
  };
  return f;
}

/// Seeded random finite-memory potential with values uniform in [-scale, scale].
inline Potential make_random_table(const StateSpace& space, std::size_t k, double scale,
                                   std::uint64_t seed) {
  const std::size_t count = checked_power(space.size(), k, kDefaultEnumerationCap);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> values(count);
  for (auto& v : values) v = u(rng);
  auto f = make_table(space, k, std::move(values), "random_table");
  f.params["scale"] = scale;
  f.params["seed"] = static_cast<double>(seed);
  return f;
}

/// f(x) = beta * sum_k theta^k x_k, a Hoelder potential for 0 < theta < 1.
inline Potential make_geometric(const StateSpace& space, double beta, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw Error("make_geometric: theta must lie in (0,1)");
  auto c = detail::first_coordinates(space);
  const double cmax = detail::max_abs(c);
  Potential f;
  f.name = "geometric";
  f.alphabet_size = space.size();
  f.params = {{"beta", beta}, {"theta", theta}};
  f.sup_bound = std::abs(beta) * cmax * theta / (1.0 - theta);
  f.variation_bound = [=](std::size_t k) {
    return 2.0 * std::abs(beta) * cmax * std::pow(theta, static_cast<double>(k + 1)) / (1.0 - theta);
  };
  f.evaluator = [c = std::move(c), beta, theta](ConfigView x) {
    double s = 0.0;
    double w = theta;
    for (std::size_t k = 0; k < x.prefix_size(); ++k, w *= theta) s += w * c[x.prefix[k]];
    return beta * (s + c[x.pad] * w / (1.0 - theta));
  };
  return f;
}

/// f(x) = sum_{k>=1} x_k / k^gamma. Prefix coordinates are summed directly,
/// the pad contributes pad * (zeta(gamma) - sum_{k<=m} k^-gamma).
inline Potential make_long_range(const StateSpace& space, double gamma) {
  if (!(gamma > 1.0)) throw Error("make_long_range: gamma must exceed 1");
  auto c = detail::first_coordinates(space);
  const double cmax = detail::max_abs(c);
  const double z = zeta(gamma, 1e-15);
  // partial[k] = sum_{j<=k} j^-gamma for k < table size
  auto partial = std::make_shared<std::vector<double>>(1, 0.0);
  for (std::size_t k = 1; k <= 4096; ++k)
    partial->push_back(partial->back() + std::pow(static_cast<double>(k), -gamma));
  auto tail = [z, partial, gamma](std::size_t m) {
    if (m < partial->size()) return z - (*partial)[m];
    return zeta_tail(gamma, m);
  };

  Potential f;
  f.name = "long_range";
  f.alphabet_size = space.size();
  f.params = {{"gamma", gamma}};
  f.sup_bound = cmax * z;
  f.variation_bound = [tail, cmax](std::size_t k) { return 2.0 * cmax * tail(k); };
  f.evaluator = [c, gamma, tail](ConfigView x) {
    const std::size_t m = x.prefix_size();
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k)
      s += c[x.prefix[k]] * std::pow(static_cast<double>(k + 1), -gamma);
    return s + c[x.pad] * tail(m);
  };
  f.series_truncation = [c, gamma, tail, cmax, n = space.size()](std::size_t m) {
    Potential g;
    g.name = "long_range|m=" + std::to_string(m);
    g.alphabet_size = n;
    g.memory = m;
    g.params = {{"gamma", gamma}};
    g.sup_bound = cmax * (zeta(gamma, 1e-15) - tail(m));
    g.truncation_gap = cmax * tail(m);
    g.evaluator = [c, gamma, m](ConfigView x) {
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += c[x[k]] * std::pow(static_cast<double>(k + 1), -gamma);
      return s;
    };
    return g;
  };
  return f;
}

/// Position of a point of {0,1}^N in the Double Hofbauer partition.
struct HofbauerCell {
  enum class Kind { left, right, fixed_point };
  Kind kind = Kind::fixed_point;
  std::size_t n = 0;  ///< run length for L_n / R_n
};

/// L_n = [0^n 1], R_n = [1^n 0]; 0^inf and 1^inf are the fixed points.
inline HofbauerCell classify_hofbauer(ConfigView x) {
  const std::size_t len = x.prefix_size();
  if (len == 0) return {};
  const Index first = x.prefix[0];
  std::size_t run = 1;
  while (run < len && x.prefix[run] == first) ++run;
  if (run == len && x.pad == first) return {};
  return {first == 0 ? HofbauerCell::Kind::left : HofbauerCell::Kind::right, run};
}

/// Double Hofbauer potential on {0,1}: -gamma log(n/(n-1)) on L_n,
/// -delta log(n/(n-1)) on R_n (n >= 2), -log zeta(gamma) on L_1,
/// -log zeta(delta) on R_1, and 0 at the two fixed points.
inline Potential make_double_hofbauer(const StateSpace& space, double gamma, double delta,
                                      bool strict = false) {
  if (space.size() != 2) throw Error("make_double_hofbauer: alphabet must be {0,1}");
  if (!(gamma > 1.0) || !(delta > 1.0))
    throw Error("make_double_hofbauer: gamma and delta must exceed 1 (zeta diverges)");
  if (strict && !(delta < gamma)) throw Error("make_double_hofbauer: strict mode requires delta < gamma");
  const double log_zg = std::log(zeta(gamma, 1e-15));
  const double log_zd = std::log(zeta(delta, 1e-15));

  Potential f;
  f.name = "double_hofbauer";
  f.alphabet_size = 2;
  f.params = {{"gamma", gamma}, {"delta", delta}};
  const double sup = std::max({log_zg, log_zd, gamma * std::log(2.0), delta * std::log(2.0)});
  f.sup_bound = sup;
  f.variation_bound = [=](std::size_t k) {
    if (k <= 1) return sup;
    const double kk = static_cast<double>(k);
    return std::max(gamma, delta) * std::log(kk / (kk - 1.0));
  };
  f.evaluator = [=](ConfigView x) {
    const auto cell = classify_hofbauer(x);
    if (cell.kind == HofbauerCell::Kind::fixed_point) return 0.0;
    const bool left = cell.kind == HofbauerCell::Kind::left;
    if (cell.n == 1) return left ? -log_zg : -log_zd;
    const double n = static_cast<double>(cell.n);
    return -(left ? gamma : delta) * std::log(n / (n - 1.0));
  };
  return f;
}

}  // namespace ruelle
