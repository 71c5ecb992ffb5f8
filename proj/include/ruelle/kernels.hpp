#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "configuration.hpp"
#include "error.hpp"
#include "potentials.hpp"
#include "state_space.hpp"
#include "transfer.hpp"

namespace ruelle {

/// A bounded function on M^N evaluated on eventually constant points.
using Observable = std::function<double(ConfigView)>;

inline Observable constant_observable(double c) {
  return [c](ConfigView) { return c; };
}

inline Observable as_observable(CylinderFunction phi) {
  return [phi = std::move(phi)](ConfigView x) { return phi(x); };
}

/// {omega : omega_i = a for every constraint (i, a)}, coordinates 1-based.
struct CylinderSet {
  std::vector<std::pair<std::size_t, Index>> constraints;

  CylinderSet() = default;
  explicit CylinderSet(std::vector<std::pair<std::size_t, Index>> c) : constraints(std::move(c)) {
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      if (constraints[i].first < 1) throw Error("CylinderSet: coordinates are 1-based");
      for (std::size_t j = 0; j < i; ++j)
        if (constraints[j].first == constraints[i].first)
          throw Error("CylinderSet: coordinate " + std::to_string(constraints[i].first) +
                      " constrained twice");
    }
  }

  /// C_i(a).
  static CylinderSet coordinate(std::size_t i, Index a) { return CylinderSet({{i, a}}); }

  /// The cylinder [w_1 .. w_m].
  static CylinderSet word(std::span<const Index> w) {
    std::vector<std::pair<std::size_t, Index>> c;
    for (std::size_t k = 0; k < w.size(); ++k) c.emplace_back(k + 1, w[k]);
    return CylinderSet(std::move(c));
  }

  std::size_t max_coordinate() const noexcept {
    std::size_t m = 0;
    for (const auto& [i, a] : constraints) m = std::max(m, i);
    return m;
  }

  bool contains(ConfigView x) const noexcept {
    for (const auto& [i, a] : constraints)
      if (x[i - 1] != a) return false;
    return true;
  }

  Observable indicator() const {
    return [c = *this](ConfigView x) { return c.contains(x) ? 1.0 : 0.0; };
  }
};

struct KernelOptions {
  std::size_t enumeration_cap = kDefaultEnumerationCap;
  bool allow_sampling = false;
  std::uint64_t seed = 0;
  std::size_t samples = 200000;
  std::size_t workers = 1;
};

/// K_n(phi, x) = L^n_f(phi)(sigma^n x) / L^n_f(1)(sigma^n x).
struct KernelValue {
  std::size_t n = 0;
  double value = 0.0;
  /// log of the shifted numerator sum (-inf when it is not positive)
  double log_numerator = 0.0;
  double log_denominator = 0.0;
  bool sampled = false;
  double standard_error = 0.0;
  std::size_t terms = 0;
};

namespace detail {

/// Running sum of exp(logw) * value with a shared shift. The shift only moves
/// up, so every stored term is at most e^30.
struct ShiftedSum {
  double shift = -std::numeric_limits<double>::infinity();
  double num = 0.0;
  double den = 0.0;
  std::size_t terms = 0;

  void rebase(double new_shift) {
    if (shift > -std::numeric_limits<double>::infinity()) {
      const double factor = std::exp(shift - new_shift);
      num *= factor;
      den *= factor;
    }
    shift = new_shift;
  }
  void add(double logw, double value) {
    if (logw > shift + 30.0 || shift == -std::numeric_limits<double>::infinity()) rebase(logw);
    const double e = std::exp(logw - shift);
    num += e * value;
    den += e;
    ++terms;
  }
  void merge(const ShiftedSum& o) {
    if (o.terms == 0) return;
    if (o.shift > shift) rebase(o.shift);
    const double factor = std::exp(o.shift - shift);
    num += o.num * factor;
    den += o.den * factor;
    terms += o.terms;
  }
};

/// Same as ShiftedSum but the numerator is a histogram over buckets.
struct ShiftedHistogram {
  double shift = -std::numeric_limits<double>::infinity();
  std::vector<double> mass;
  double den = 0.0;

  explicit ShiftedHistogram(std::size_t buckets = 0) : mass(buckets, 0.0) {}

  void rebase(double new_shift) {
    if (shift > -std::numeric_limits<double>::infinity()) {
      const double factor = std::exp(shift - new_shift);
      for (auto& v : mass) v *= factor;
      den *= factor;
    }
    shift = new_shift;
  }
  void add(double logw, std::size_t bucket) {
    if (logw > shift + 30.0 || shift == -std::numeric_limits<double>::infinity()) rebase(logw);
    const double e = std::exp(logw - shift);
    mass[bucket] += e;
    den += e;
  }
  void merge(const ShiftedHistogram& o) {
    if (o.den == 0.0) return;
    if (o.shift > shift) rebase(o.shift);
    const double factor = std::exp(o.shift - shift);
    for (std::size_t i = 0; i < mass.size(); ++i) mass[i] += o.mass[i] * factor;
    den += o.den * factor;
  }
};

/// Depth-first enumeration of the words a in M^n whose letter at position n
/// equals `top`, visiting leaf(a sigma^n x, log weight) with log weight
/// sum_i log mu(a_i) + S_n f(a y). Words are built right to left so each
/// node costs one evaluation of f.
template <typename Leaf>
class WordWalker {
 public:
  WordWalker(const StateSpace& space, const Potential& f, std::size_t n, const Configuration& y,
             Leaf& leaf)
      : log_mu_(space.log_measure()), f_(f), n_(n), pad_(y.pad()), leaf_(leaf) {
    buf_.resize(n + y.prefix().size());
    std::copy(y.prefix().begin(), y.prefix().end(), buf_.begin() + static_cast<std::ptrdiff_t>(n));
  }

  void run(Index top) {
    if (n_ == 0) {
      leaf_(ConfigView{buf_, pad_}, 0.0);
      return;
    }
    visit(n_ - 1, 0.0, top, top + 1);
  }

 private:
  void visit(std::size_t j, double s, Index lo, Index hi) {
    const std::span<const Index> all(buf_);
    for (Index a = lo; a < hi; ++a) {
      buf_[j] = a;
      const double t = s + log_mu_[a] + f_(ConfigView{all.subspan(j), pad_});
      if (j == 0)
        leaf_(ConfigView{all, pad_}, t);
      else
        visit(j - 1, t, 0, static_cast<Index>(log_mu_.size()));
    }
  }

  std::span<const double> log_mu_;
  const Potential& f_;
  std::size_t n_;
  Index pad_;
  Leaf& leaf_;
  std::vector<Index> buf_;
};

/// Runs one accumulator per top letter (optionally in parallel) and returns
/// them in letter order, so merged results are independent of `workers`.
template <typename Acc, typename MakeLeaf>
std::vector<Acc> enumerate_partitions(const StateSpace& space, const Potential& f, std::size_t n,
                                      const Configuration& y, std::size_t workers, const Acc& init,
                                      MakeLeaf&& make_leaf) {
  const std::size_t parts = n == 0 ? 1 : space.size();
  std::vector<Acc> accs(parts, init);
  auto job = [&](std::size_t p) {
    auto leaf = make_leaf(accs[p]);
    WordWalker<decltype(leaf)> walker(space, f, n, y, leaf);
    walker.run(static_cast<Index>(p));
  };
  if (workers <= 1 || parts == 1) {
    for (std::size_t p = 0; p < parts; ++p) job(p);
  } else {
    std::vector<std::future<void>> futures;
    for (std::size_t p = 0; p < parts; ++p) futures.push_back(std::async(std::launch::async, job, p));
    for (auto& fu : futures) fu.get();
  }
  return accs;
}

inline void check_kernel_inputs(const StateSpace& space, const Potential& f, const Configuration& x,
                                const char* where) {
  require_compatible(space, f, where);
  require_valid(x, space, where);
}

inline KernelValue sampled_kernel(const StateSpace& space, const Potential& f, std::size_t n,
                                  const Observable& phi, const Configuration& y,
                                  const KernelOptions& opt) {
  const std::size_t alphabet = space.size();
  std::size_t s = 0;
  while (s < n && checked_power(alphabet, s + 1, 64) <= 64) ++s;
  const std::size_t strata = checked_power(alphabet, s, 64);
  const std::size_t per = std::max<std::size_t>(2, opt.samples / strata);
  const auto w = space.weights();
  std::discrete_distribution<Index> letter(w.begin(), w.end());
  std::mt19937_64 rng(opt.seed);

  struct Draw {
    double s;
    double phi;
  };
  std::vector<std::vector<Draw>> draws(strata);
  std::vector<double> stratum_prob(strata, 1.0);
  std::vector<Index> buf(n + y.prefix().size());
  std::copy(y.prefix().begin(), y.prefix().end(), buf.begin() + static_cast<std::ptrdiff_t>(n));
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t st = 0; st < strata; ++st) {
    const auto head = WordRange::decode(st, alphabet, s);
    for (Index a : head) stratum_prob[st] *= w[a];
    std::copy(head.begin(), head.end(), buf.begin());
    for (std::size_t k = 0; k < per; ++k) {
      for (std::size_t j = s; j < n; ++j) buf[j] = letter(rng);
      const ConfigView z{buf, y.pad()};
      const double sn = birkhoff_sum(f, z, n);
      draws[st].push_back({sn, phi(z)});
      shift = std::max(shift, sn);
    }
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t st = 0; st < strata; ++st) {
    double mn = 0.0, md = 0.0;
    for (const auto& d : draws[st]) {
      const double e = std::exp(d.s - shift);
      mn += e * d.phi;
      md += e;
    }
    num += stratum_prob[st] * mn / static_cast<double>(per);
    den += stratum_prob[st] * md / static_cast<double>(per);
  }
  const double ratio = num / den;
  double var = 0.0;
  for (std::size_t st = 0; st < strata; ++st) {
    double mean = 0.0, sq = 0.0;
    for (const auto& d : draws[st]) {
      const double r = std::exp(d.s - shift) * (d.phi - ratio);
      mean += r;
      sq += r * r;
    }
    const double k = static_cast<double>(per);
    mean /= k;
    const double sample_var = (sq / k - mean * mean) * k / (k - 1.0);
    var += stratum_prob[st] * stratum_prob[st] * sample_var / k;
  }
  KernelValue out;
  out.n = n;
  out.value = ratio;
  out.sampled = true;
  out.standard_error = std::sqrt(std::max(var, 0.0)) / den;
  const double log_mass = static_cast<double>(n) * std::log(space.total_mass());
  out.log_numerator = num > 0.0 ? shift + std::log(num) + log_mass
                                : -std::numeric_limits<double>::infinity();
  out.log_denominator = shift + std::log(den) + log_mass;
  out.terms = strata * per;
  return out;
}

}  // namespace detail

/// K_n(phi, x), exact over M^n when N^n fits the cap, otherwise by stratified
/// sampling (if enabled) with a delta-method standard error.
inline KernelValue kernel_value(const StateSpace& space, const Potential& f, std::size_t n,
                                const Observable& phi, const Configuration& x,
                                const KernelOptions& opt = {}) {
  detail::check_kernel_inputs(space, f, x, "kernel_value");
  const Configuration y = shift(x, n);
  if (checked_power(space.size(), n, opt.enumeration_cap) > opt.enumeration_cap) {
    if (!opt.allow_sampling)
      throw CapExceeded("kernel_value: " + std::to_string(space.size()) + "^" + std::to_string(n) +
                        " terms exceed the enumeration cap; enable sampling");
    return detail::sampled_kernel(space, f, n, phi, y, opt);
  }
  auto parts = detail::enumerate_partitions(
      space, f, n, y, opt.workers, detail::ShiftedSum{}, [&](detail::ShiftedSum& acc) {
        return [&acc, &phi](ConfigView z, double logw) { acc.add(logw, phi(z)); };
      });
  detail::ShiftedSum total;
  for (const auto& p : parts) total.merge(p);
  KernelValue out;
  out.n = n;
  out.value = total.num / total.den;
  out.log_numerator = total.num > 0.0 ? total.shift + std::log(total.num)
                                      : -std::numeric_limits<double>::infinity();
  out.log_denominator = total.shift + std::log(total.den);
  out.terms = total.terms;
  return out;
}

/// The law of (omega_1..omega_m) under K_n(., x): masses K_n([w], x) for
/// every w in M^m (m <= n), from a single enumeration.
inline std::vector<double> kernel_distribution(const StateSpace& space, const Potential& f,
                                               std::size_t n, std::size_t m, const Configuration& x,
                                               const KernelOptions& opt = {}) {
  detail::check_kernel_inputs(space, f, x, "kernel_distribution");
  if (m > n) throw Error("kernel_distribution: marginal memory exceeds n");
  if (checked_power(space.size(), n, opt.enumeration_cap) > opt.enumeration_cap)
    throw CapExceeded("kernel_distribution: " + std::to_string(space.size()) + "^" +
                      std::to_string(n) + " terms exceed the enumeration cap");
  const std::size_t buckets = checked_power(space.size(), m, opt.enumeration_cap);
  const Configuration y = shift(x, n);
  const std::size_t alphabet = space.size();
  auto parts = detail::enumerate_partitions(
      space, f, n, y, opt.workers, detail::ShiftedHistogram(buckets),
      [&](detail::ShiftedHistogram& acc) {
        return [&acc, alphabet, m](ConfigView z, double logw) {
          acc.add(logw, word_index(z, alphabet, m));
        };
      });
  detail::ShiftedHistogram total(buckets);
  for (const auto& p : parts) total.merge(p);
  for (auto& v : total.mass) v /= total.den;
  return total.mass;
}

/// |K_{n+r}(phi, x) - K_{n+r}(K_n(phi, .), x)|, the compatibility defect.
inline double dlr_residual(const StateSpace& space, const Potential& f, std::size_t n, std::size_t r,
                           const Observable& phi, const Configuration& x,
                           const KernelOptions& opt = {}) {
  if (n < 1 || r < 1) throw Error("dlr_residual: n and r must be >= 1");
  const double direct = kernel_value(space, f, n + r, phi, x, opt).value;

  // K_n(phi, z) only reads z beyond coordinate n; with z = b sigma^{n+r} x it
  // depends on b_{n+1..n+r} alone.
  const Configuration y = shift(x, n + r);
  const std::size_t alphabet = space.size();
  std::vector<double> inner(checked_power(alphabet, r, opt.enumeration_cap));
  std::vector<Index> head(n, 0);
  for (std::size_t c = 0; c < inner.size(); ++c) {
    const auto word = WordRange::decode(c, alphabet, r);
    std::vector<Index> prefix(head);
    prefix.insert(prefix.end(), word.begin(), word.end());
    inner[c] = kernel_value(space, f, n, phi, concat(prefix, y), opt).value;
  }
  const Observable nested = [&inner, n, r, alphabet](ConfigView z) {
    std::size_t idx = 0;
    for (std::size_t k = n; k < n + r; ++k) idx = idx * alphabet + z[k];
    return inner[idx];
  };
  const double composed = kernel_value(space, f, n + r, nested, x, opt).value;
  return std::abs(direct - composed);
}

/// |K_n(psi, x) - psi(sigma^n x)| for psi measurable w.r.t. coordinates > n.
/// psi is probed for dependence on coordinates 1..n first.
inline double properness_check(const StateSpace& space, const Potential& f, std::size_t n,
                               const Observable& psi, const Configuration& x,
                               const KernelOptions& opt = {}, std::size_t probes = 16) {
  detail::check_kernel_inputs(space, f, x, "properness_check");
  std::mt19937_64 rng(opt.seed ^ 0x5bd1e995ULL);
  std::vector<Configuration> points{x};
  for (std::size_t i = 0; i < probes; ++i) points.push_back(random_tail(space.size(), n + 8, rng));
  for (const auto& p : points) {
    auto z = materialize(p.view(), std::max(n, p.prefix().size()));
    const double base = psi(z.view());
    std::vector<Index> w = z.prefix();
    for (std::size_t k = 0; k < n; ++k) {
      const Index keep = w[k];
      for (Index b = 0; b < space.size(); ++b) {
        w[k] = b;
        if (psi(ConfigView{w, z.pad()}) != base)
          throw Error("properness_check: observable depends on coordinate " + std::to_string(k + 1) +
                      " <= n = " + std::to_string(n));
      }
      w[k] = keep;
    }
  }
  const double k = kernel_value(space, f, n, psi, x, opt).value;
  return std::abs(k - psi(x.view()));
}

/// One line of a probe trace: index (i or depth), value, standard error.
struct TracePoint {
  std::size_t index = 0;
  double value = 0.0;
  double standard_error = 0.0;
};

struct StrongNonNullTrace {
  Index letter = 0;
  std::vector<TracePoint> entries;       ///< inf over boundaries of K_i(C_i(a), x)
  std::vector<std::size_t> argmin;       ///< boundary achieving each inf
  double fitted_exponent = 0.0;          ///< slope of log K_i against log i, second half
  std::string trend;
  std::string rule;
};

/// inf_x K_i(C_i(a), x) for i = 1..i_max over a set of boundaries.
inline StrongNonNullTrace strong_non_null_probe(const StateSpace& space, const Potential& f, Index a,
                                                std::size_t i_max,
                                                const std::vector<Configuration>& boundaries,
                                                const KernelOptions& opt = {}) {
  if (boundaries.empty()) throw Error("strong_non_null_probe: empty boundary set");
  if (!space.contains(a)) throw Error("strong_non_null_probe: letter outside alphabet");
  StrongNonNullTrace out;
  out.letter = a;
  for (std::size_t i = 1; i <= i_max; ++i) {
    const auto ind = CylinderSet::coordinate(i, a).indicator();
    double best = std::numeric_limits<double>::infinity();
    double err = 0.0;
    std::size_t arg = 0;
    for (std::size_t b = 0; b < boundaries.size(); ++b) {
      const auto kv = kernel_value(space, f, i, ind, boundaries[b], opt);
      if (kv.value < best) {
        best = kv.value;
        err = kv.standard_error;
        arg = b;
      }
    }
    out.entries.push_back({i, best, err});
    out.argmin.push_back(arg);
  }

  const std::size_t half = std::max<std::size_t>(1, i_max / 2);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
  for (const auto& e : out.entries) {
    if (e.index < half || !(e.value > 0.0)) continue;
    const double lx = std::log(static_cast<double>(e.index));
    const double ly = std::log(e.value);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly; cnt += 1;
  }
  if (cnt >= 2) out.fitted_exponent = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);

  const double first = out.entries.front().value;
  const double last = out.entries.back().value;
  bool decreasing = true;
  double low = first;
  for (std::size_t k = 1; k < out.entries.size(); ++k) {
    decreasing = decreasing && out.entries[k].value < out.entries[k - 1].value;
    low = std::min(low, out.entries[k].value);
  }
  out.rule = "decay-trend if strictly decreasing with K_imax < K_1/2; bounded-below-trend if "
             "min_i K_i >= 0.9 K_1; otherwise inconclusive";
  if (decreasing && last < first / 2.0)
    out.trend = "decay-trend";
  else if (low >= 0.9 * first)
    out.trend = "bounded-below-trend";
  else
    out.trend = "inconclusive";
  return out;
}

/// max over tails t of |K_n(phi, x) - K_n(phi, x_1..x_d t)| for each depth d.
inline std::vector<TracePoint> quasilocality_probe(const StateSpace& space, const Potential& f,
                                                   std::size_t n, const Observable& phi,
                                                   const Configuration& x,
                                                   const std::vector<std::size_t>& depths,
                                                   const std::vector<Configuration>& tails,
                                                   const KernelOptions& opt = {}) {
  const double base = kernel_value(space, f, n, phi, x, opt).value;
  std::vector<TracePoint> out;
  for (std::size_t d : depths) {
    double osc = 0.0;
    const auto head = materialize(x.view(), d);
    for (const auto& t : tails) {
      const auto xp = concat(head.prefix(), t);
      osc = std::max(osc, std::abs(base - kernel_value(space, f, n, phi, xp, opt).value));
    }
    out.push_back({d, osc, 0.0});
  }
  return out;
}

struct UniquenessRatio {
  double c_estimate = 1.0;
  std::size_t worst_pair = 0;
  bool worst_reversed = false;
  std::size_t undefined_pairs = 0;  ///< pairs with K_n(F, y) = 0 exactly
};

/// min over ordered pairs of K_n(F, x) / K_n(F, y); both orders of each pair
/// are used, so the estimate is at most 1.
inline UniquenessRatio uniqueness_ratio_probe(
    const StateSpace& space, const Potential& f, const CylinderSet& cylinder, std::size_t n,
    const std::vector<std::pair<Configuration, Configuration>>& pairs,
    const KernelOptions& opt = {}) {
  if (n < cylinder.max_coordinate())
    throw Error("uniqueness_ratio_probe: n must cover the constrained coordinates");
  UniquenessRatio out;
  const auto ind = cylinder.indicator();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double kx = kernel_value(space, f, n, ind, pairs[p].first, opt).value;
    const double ky = kernel_value(space, f, n, ind, pairs[p].second, opt).value;
    for (int order = 0; order < 2; ++order) {
      const double num = order == 0 ? kx : ky;
      const double den = order == 0 ? ky : kx;
      if (den == 0.0) {
        ++out.undefined_pairs;
        continue;
      }
      if (num / den < out.c_estimate) {
        out.c_estimate = num / den;
        out.worst_pair = p;
        out.worst_reversed = order == 1;
      }
    }
  }
  return out;
}

}  // namespace ruelle
