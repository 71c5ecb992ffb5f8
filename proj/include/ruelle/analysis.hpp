#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "configuration.hpp"
#include "error.hpp"
#include "kernels.hpp"
#include "potentials.hpp"
#include "state_space.hpp"
#include "transfer.hpp"
#include "zeta.hpp"

namespace ruelle {

// ---------------------------------------------------------------------------
// Bowen constant.

struct BowenOptions {
  std::vector<Configuration> tails;  ///< empty: pure pads plus `random_tails` seeded tails
  std::size_t random_tails = 32;
  std::uint64_t seed = 0;
  std::size_t exhaustive_cap = 4096;  ///< enumerate all prefixes when N^n fits
  std::size_t random_prefixes = 256;  ///< otherwise constant words plus seeded prefixes
};

struct BowenEntry {
  std::size_t n = 0;
  double d = 0.0;
  std::size_t prefixes = 0;
  bool exhaustive = false;
};

enum class Verdict { bounded_trend, diverging_trend, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::bounded_trend: return "bounded-trend";
    case Verdict::diverging_trend: return "diverging-trend";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct BowenEstimate {
  std::vector<BowenEntry> entries;  ///< D_n = max |S_n f(w t) - S_n f(w t')|
  std::size_t tails = 0;
  Verdict verdict = Verdict::inconclusive;
  std::string rule;
};

inline BowenEstimate bowen_estimate(const StateSpace& space, const Potential& f, std::size_t n_max,
                                    const BowenOptions& opt = {}) {
  require_compatible(space, f, "bowen_estimate");
  if (n_max < 1) throw Error("bowen_estimate: n_max must be >= 1");
  const auto tails =
      opt.tails.empty() ? default_tail_set(space.size(), opt.random_tails, opt.seed) : opt.tails;
  BowenEstimate out;
  out.tails = tails.size();
  const std::size_t alphabet = space.size();
  std::vector<Index> buf;

  for (std::size_t n = 1; n <= n_max; ++n) {
    BowenEntry e{n, 0.0, 0, false};
    auto probe = [&](std::span<const Index> w) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const auto& t : tails) {
        buf.assign(w.begin(), w.end());
        buf.insert(buf.end(), t.prefix().begin(), t.prefix().end());
        const double s = birkhoff_sum(f, ConfigView{buf, t.pad()}, n);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
      e.d = std::max(e.d, hi - lo);
      ++e.prefixes;
    };
    if (checked_power(alphabet, n, opt.exhaustive_cap) <= opt.exhaustive_cap) {
      e.exhaustive = true;
      for (const auto& w : enumerate_words(space, n, opt.exhaustive_cap)) probe(w);
    } else {
      std::vector<Index> w(n);
      for (Index p = 0; p < alphabet; ++p) {
        std::fill(w.begin(), w.end(), p);
        probe(w);
      }
      std::mt19937_64 rng(opt.seed + 0x632be59bd9b4e019ULL * n);
      std::uniform_int_distribution<Index> letter(0, static_cast<Index>(alphabet - 1));
      for (std::size_t k = 0; k < opt.random_prefixes; ++k) {
        for (auto& a : w) a = letter(rng);
        probe(w);
      }
    }
    out.entries.push_back(e);
  }

  out.rule = "heuristic: diverging-trend if D_nmax > 1.1 * D_(nmax/2), else bounded-trend";
  if (n_max < 4) {
    out.verdict = Verdict::inconclusive;
  } else {
    const double last = out.entries[n_max - 1].d;
    const double mid = out.entries[n_max / 2 - 1].d;
    out.verdict = last > 1.1 * mid + 1e-12 ? Verdict::diverging_trend : Verdict::bounded_trend;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pressure Lipschitz property.

struct LipschitzReport {
  double p_f = 0.0;
  double p_g = 0.0;
  double difference = 0.0;  ///< |p_n(f; x) - p_n(g; x)|
  double sup_norm = 0.0;    ///< ||f - g||_inf on the grid words
  double slack = 0.0;       ///< sup_norm - difference
  bool holds = false;
};

inline LipschitzReport pressure_lipschitz_check(const StateSpace& space, const Potential& f,
                                                const Potential& g, std::size_t n, std::size_t m,
                                                const Configuration& x, double tol = 1e-9) {
  LipschitzReport r;
  r.p_f = pressure_trace(space, f, std::max<std::size_t>(n, 2), x, m).entries[n - 1].p;
  r.p_g = pressure_trace(space, g, std::max<std::size_t>(n, 2), x, m).entries[n - 1].p;
  r.difference = std::abs(r.p_f - r.p_g);
  r.sup_norm = sup_distance_on_words(space, f, g, m + 1, x.pad());
  r.slack = r.sup_norm - r.difference;
  r.holds = r.difference <= r.sup_norm + tol;
  return r;
}

// ---------------------------------------------------------------------------
// Marginal measures.

struct Provenance {
  std::string construction;
  Params parameters;
  std::size_t n = 0;
  std::optional<Configuration> boundary;
};

/// A probability vector over M^m: the masses of the cylinders [w].
struct MarginalMeasure {
  std::size_t alphabet = 0;
  std::size_t memory = 0;
  std::vector<double> mass;
  Provenance provenance;

  double probability(const CylinderSet& c) const {
    if (c.max_coordinate() > memory) throw Error("MarginalMeasure: cylinder beyond memory");
    double s = 0.0;
    std::size_t i = 0;
    for (const auto& w : WordRange(alphabet, memory, mass.size())) {
      if (c.contains(ConfigView{w, 0})) s += mass[i];
      ++i;
    }
    return s;
  }
};

/// Sums out the last coordinate.
inline MarginalMeasure marginalize_last(const MarginalMeasure& mu) {
  if (mu.memory == 0) throw Error("marginalize_last: memory is already 0");
  MarginalMeasure out{mu.alphabet, mu.memory - 1, std::vector<double>(mu.mass.size() / mu.alphabet, 0.0),
                      mu.provenance};
  for (std::size_t i = 0; i < mu.mass.size(); ++i) out.mass[i / mu.alphabet] += mu.mass[i];
  return out;
}

/// Sums out the first coordinate (the law of sigma under mu).
inline MarginalMeasure marginalize_first(const MarginalMeasure& mu) {
  if (mu.memory == 0) throw Error("marginalize_first: memory is already 0");
  const std::size_t stride = mu.mass.size() / mu.alphabet;
  MarginalMeasure out{mu.alphabet, mu.memory - 1, std::vector<double>(stride, 0.0), mu.provenance};
  for (std::size_t i = 0; i < mu.mass.size(); ++i) out.mass[i % stride] += mu.mass[i];
  return out;
}

inline MarginalMeasure marginalize_to(MarginalMeasure mu, std::size_t memory) {
  while (mu.memory > memory) mu = marginalize_last(mu);
  return mu;
}

/// Total variation distance, after marginalizing both to the smaller memory.
inline double total_variation(const MarginalMeasure& a, const MarginalMeasure& b) {
  const std::size_t m = std::min(a.memory, b.memory);
  const auto x = marginalize_to(a, m);
  const auto y = marginalize_to(b, m);
  double s = 0.0;
  for (std::size_t i = 0; i < x.mass.size(); ++i) s += std::abs(x.mass[i] - y.mass[i]);
  return 0.5 * s;
}

/// mu_n^y restricted to M^m: mass(w) = K_n([w], y).
inline MarginalMeasure thermodynamic_marginal(const StateSpace& space, const Potential& f,
                                              std::size_t n, std::size_t m, const Configuration& y,
                                              const KernelOptions& opt = {}) {
  MarginalMeasure mu{space.size(), m, kernel_distribution(space, f, n, m, y, opt),
                     {"thermodynamic_limit", f.params, n, y}};
  return mu;
}

struct PhaseGapTrace {
  std::vector<TracePoint> entries;  ///< (n, TV distance)
  std::string trend;
  std::string rule;
};

inline PhaseGapTrace phase_gap_probe(const StateSpace& space, const Potential& f,
                                     const Configuration& y1, const Configuration& y2,
                                     const std::vector<std::size_t>& n_list, std::size_t m,
                                     const KernelOptions& opt = {}) {
  PhaseGapTrace out;
  for (std::size_t n : n_list) {
    const auto a = thermodynamic_marginal(space, f, n, m, y1, opt);
    const auto b = thermodynamic_marginal(space, f, n, m, y2, opt);
    out.entries.push_back({n, total_variation(a, b), 0.0});
  }
  out.rule = "vanishing-trend if the last gap is below 1e-9 or 10% of the first; persistent-trend "
             "if it stays above 50% of the first; otherwise inconclusive (evidence only)";
  if (out.entries.empty()) {
    out.trend = "inconclusive";
    return out;
  }
  const double first = out.entries.front().value;
  const double last = out.entries.back().value;
  if (last < 1e-9 || last < 0.1 * first)
    out.trend = "vanishing-trend";
  else if (last >= 0.5 * first)
    out.trend = "persistent-trend";
  else
    out.trend = "inconclusive";
  return out;
}

// ---------------------------------------------------------------------------
// Variational entropy.

struct EntropyEstimate {
  double value = 0.0;  ///< min over candidates, an upper bound of h(mu)
  std::size_t argmin = 0;
  std::string argmin_name;
  std::size_t candidate_count = 0;
  std::vector<double> objectives;  ///< per candidate; the zero potential is last
};

/// -sum_w mu(w) g(w) + log lambda_g for one finite-memory candidate.
inline double entropy_objective(const StateSpace& space, const MarginalMeasure& mu,
                                const Potential& g, const RpfOptions& rpf = {}) {
  if (!g.memory || *g.memory > std::max<std::size_t>(mu.memory, 1))
    throw Error("entropy_estimate: candidate '" + g.name + "' memory exceeds the measure memory");
  const auto sol = rpf_solve(space, g, rpf);
  if (!sol.converged())
    throw Error("entropy_estimate: rpf_solve did not converge for candidate '" + g.name + "'");
  double integral = 0.0;
  std::size_t i = 0;
  for (const auto& w : WordRange(mu.alphabet, mu.memory, mu.mass.size()))
    integral += mu.mass[i++] * g(ConfigView{w, 0});
  return -integral + sol.log_lambda;
}

inline EntropyEstimate entropy_estimate(const StateSpace& space, const MarginalMeasure& mu,
                                        const std::vector<Potential>& candidates,
                                        const RpfOptions& rpf = {}) {
  EntropyEstimate out;
  out.value = std::numeric_limits<double>::infinity();
  auto consider = [&](const Potential& g, std::size_t idx) {
    const double obj = entropy_objective(space, mu, g, rpf);
    out.objectives.push_back(obj);
    if (obj < out.value) {
      out.value = obj;
      out.argmin = idx;
      out.argmin_name = g.name;
    }
  };
  for (std::size_t i = 0; i < candidates.size(); ++i) consider(candidates[i], i);
  consider(make_zero(space), candidates.size());
  out.candidate_count = candidates.size() + 1;
  return out;
}

/// Potentials sum_{w in M^k} c_w 1_[w] with k = min(2, memory) and
/// coefficients from `grid`, evenly strided down to at most `max_count`.
inline std::vector<Potential> default_candidate_family(const StateSpace& space, std::size_t memory,
                                                       std::vector<double> grid = {-1.0, 0.0, 1.0},
                                                       std::size_t max_count = 729) {
  const std::size_t k = std::min<std::size_t>(2, std::max<std::size_t>(memory, 1));
  const std::size_t cells = checked_power(space.size(), k, 64);
  const std::size_t total = checked_power(grid.size(), cells, std::size_t{1} << 40);
  const std::size_t stride = std::max<std::size_t>(1, (total + max_count - 1) / max_count);
  std::vector<Potential> out;
  for (std::size_t code = 0; code < total; code += stride) {
    std::vector<double> values(cells);
    std::size_t c = code;
    for (std::size_t j = cells; j-- > 0;) {
      values[j] = grid[c % grid.size()];
      c /= grid.size();
    }
    out.push_back(make_table(space, k, std::move(values), "cylinder_combo#" + std::to_string(code)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equilibrium states by truncation.

struct EquilibriumStep {
  std::size_t m = 0;
  std::optional<double> truncation_gap;
  RpfSolution solution;
  MarginalMeasure measure;
  EntropyEstimate entropy;
  double integral = 0.0;  ///< sum_w mu(w) f_m(w)
  double defect = 0.0;    ///< |h_est + integral - log lambda|
  std::vector<double> cylinder_probabilities;
};

struct EquilibriumOptions {
  RpfOptions rpf;
  std::vector<double> coefficient_grid{-1.0, 0.0, 1.0};
  std::size_t max_candidates = 729;
  std::vector<Potential> extra_candidates;
};

/// mu_{f_m} = h_{f_m} nu_{f_m} restricted to M^m.
inline MarginalMeasure equilibrium_marginal(const RpfSolution& sol, Params params = {}) {
  MarginalMeasure mu{sol.h.alphabet, sol.memory(), std::vector<double>(sol.h.size()),
                     {"equilibrium", std::move(params), 0, std::nullopt}};
  double z = 0.0;
  for (std::size_t i = 0; i < mu.mass.size(); ++i) {
    mu.mass[i] = sol.h.values[i] * sol.nu.values[i];
    z += mu.mass[i];
  }
  for (auto& v : mu.mass) v /= z;
  return mu;
}

inline std::vector<EquilibriumStep> equilibrium_pipeline(const StateSpace& space, const Potential& f,
                                                         const std::vector<std::size_t>& memory_list,
                                                         const std::vector<CylinderSet>& report,
                                                         const EquilibriumOptions& opt = {}) {
  std::vector<EquilibriumStep> out;
  for (std::size_t idx = 0; idx < memory_list.size(); ++idx) {
    const std::size_t m = memory_list[idx];
    if (m < 1) throw Error("equilibrium_pipeline: memories must be >= 1");
    if (idx > 0 && m <= memory_list[idx - 1])
      throw Error("equilibrium_pipeline: memory_list must be ascending");
    const Potential fm = truncate_natural(space, f, m);
    EquilibriumStep step;
    step.m = m;
    step.truncation_gap = fm.truncation_gap;
    step.solution = rpf_solve(space, fm, opt.rpf);
    if (!step.solution.converged())
      throw Error("equilibrium_pipeline: rpf_solve failed at m = " + std::to_string(m));
    step.measure = equilibrium_marginal(step.solution, f.params);
    step.measure.provenance.n = m;

    auto candidates = default_candidate_family(space, m, opt.coefficient_grid, opt.max_candidates);
    candidates.push_back(fm);
    for (const auto& g : opt.extra_candidates) candidates.push_back(g);
    step.entropy = entropy_estimate(space, step.measure, candidates, opt.rpf);

    std::size_t i = 0;
    for (const auto& w : WordRange(space.size(), step.measure.memory, step.measure.mass.size()))
      step.integral += step.measure.mass[i++] * fm(ConfigView{w, 0});
    step.defect = std::abs(step.entropy.value + step.integral - step.solution.log_lambda);
    for (const auto& c : report)
      step.cylinder_probabilities.push_back(
          c.max_coordinate() <= m ? step.measure.probability(c)
                                  : std::numeric_limits<double>::quiet_NaN());
    out.push_back(std::move(step));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Eigenfunctions as limits of normalized iterates.

struct LimsupResult {
  double lambda = 0.0;
  CylinderFunction final_iterate;  ///< g_{n_max} = L^{n_max}(1) / lambda^{n_max}
  CylinderFunction running_max;    ///< pointwise max of g_n over n > burn_in
  std::vector<TracePoint> sup_trace;
  std::vector<TracePoint> residual_trace;  ///< ||L g_n - lambda g_n|| / ||g_n||
  double residual = 0.0;
  std::string trend;
};

inline LimsupResult limsup_eigenfunction(const StateSpace& space, const Potential& f, double lambda,
                                         std::size_t n_max, std::size_t m, std::size_t burn_in = 0,
                                         Index pad = 0) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw Error("limsup_eigenfunction: a positive eigenvalue estimate is required");
  if (n_max < 1) throw Error("limsup_eigenfunction: n_max must be >= 1");
  TransferGrid grid(space, f, m, pad);
  const double log_lambda = std::log(lambda);
  std::vector<double> g(grid.size(), 0.0);  // log g_n
  std::vector<double> next(grid.size());
  LimsupResult out;
  out.lambda = lambda;
  out.running_max = CylinderFunction::constant(space.size(), m, 0.0);
  auto linear = [](const std::vector<double>& lg) {
    std::vector<double> v(lg.size());
    for (std::size_t i = 0; i < lg.size(); ++i) v[i] = std::exp(lg[i]);
    return v;
  };
  for (std::size_t n = 1; n <= n_max + 1; ++n) {
    grid.apply_log(g, next);
    for (auto& v : next) v -= log_lambda;
    if (n >= 2) {
      // g holds log g_{n-1}; L g_{n-1} = lambda g_n.
      const auto prev = linear(g);
      const auto cur = linear(next);
      double diff = 0.0;
      double sup = 0.0;
      for (std::size_t i = 0; i < prev.size(); ++i) {
        diff = std::max(diff, std::abs(cur[i] - prev[i]));
        sup = std::max(sup, prev[i]);
      }
      out.residual_trace.push_back({n - 1, lambda * diff / sup, 0.0});
    }
    g.swap(next);
    if (n > n_max) break;
    const auto cur = linear(g);
    double sup = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      sup = std::max(sup, cur[i]);
      if (n > burn_in) out.running_max.values[i] = std::max(out.running_max.values[i], cur[i]);
    }
    out.sup_trace.push_back({n, sup, 0.0});
    if (n == n_max) out.final_iterate = {space.size(), m, cur};
  }
  out.residual = out.residual_trace.back().value;

  const double last = out.sup_trace.back().value;
  const double mid = out.sup_trace[out.sup_trace.size() / 2].value;
  out.trend = last <= 1.1 * mid ? "bounded-trend" : "growing-trend";
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form eigenfunction of the long-range potential on {-1,+1}.

struct EigenrelationCheck {
  std::string convention;  ///< "probability" (lambda = cosh zeta) or "counting" (2 cosh zeta)
  double lambda = 0.0;
  double residual = 0.0;
};

struct XyReport {
  double gamma = 0.0;
  std::size_t m = 0;
  double zeta_value = 0.0;
  std::vector<double> alpha;  ///< alpha_n = sum_{j>n} j^-gamma, n = 1..m
  CylinderFunction log_h;     ///< log h(w) = sum_{n<=m} alpha_n w_n
  std::vector<EigenrelationCheck> checks;
  std::string closing_convention;  ///< the single convention within tol, or "none"/"ambiguous"
  std::string space_convention;
  bool sign_symmetry_exact = false;  ///< log h(-w) == -log h(w) bit for bit
  double sign_symmetry_defect = 0.0; ///< max |h(w) h(-w) - 1|
  bool wide_gamma = false;
};

inline XyReport xy_closed_form(const StateSpace& space, double gamma, std::size_t m,
                               bool allow_wide = false, double tol = 1e-8) {
  if (space.size() != 2 || space.coordinate(0) != -1.0 || space.coordinate(1) != 1.0)
    throw Error("xy_closed_form: needs the alphabet {-1,+1}");
  if (!(gamma > 1.0)) throw Error("xy_closed_form: gamma must exceed 1");
  if (!(gamma > 1.5) && !allow_wide)
    throw Error("xy_closed_form: gamma <= 3/2 requires the wide-gamma override");
  if (m < 2) throw Error("xy_closed_form: m must be >= 2");

  XyReport r;
  r.gamma = gamma;
  r.m = m;
  r.wide_gamma = !(gamma > 1.5 && gamma <= 2.0);
  r.zeta_value = zeta(gamma, 1e-15);
  r.space_convention =
      space.convention() == MassConvention::counting ? "counting" : "probability";
  double head = 0.0;
  for (std::size_t n = 1; n <= m; ++n) {
    head += std::pow(static_cast<double>(n), -gamma);
    r.alpha.push_back(r.zeta_value - head);
  }
  auto log_h = [&](std::span<const Index> w, std::size_t len) {
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) s += r.alpha[k] * space.coordinate(w[k]);
    return s;
  };
  r.log_h = CylinderFunction::tabulate(space, m, [&](std::span<const Index> w) { return log_h(w, m); });

  // L_{f_m} h on functions of x_1..x_{m-1}: the truncated series and h_m are
  // consistent there, so the eigenrelation closes up to rounding.
  const Potential fm = make_long_range(space, gamma).series_truncation(m);
  const auto log_mu = space.log_measure();
  std::vector<double> lh;
  std::vector<double> h_short;
  std::vector<Index> buf(m);
  for (const auto& x : enumerate_words(space, m - 1)) {
    std::copy(x.begin(), x.end(), buf.begin() + 1);
    double s = 0.0;
    for (Index a = 0; a < 2; ++a) {
      buf[0] = a;
      s += std::exp(log_mu[a] + fm(ConfigView{buf, 0}) + log_h(buf, m));
    }
    lh.push_back(s);
    h_short.push_back(std::exp(log_h(x, m - 1)));
  }
  const double c = std::cosh(r.zeta_value);
  for (const auto& [name, lambda] : {std::pair{"probability", c}, std::pair{"counting", 2.0 * c}}) {
    double diff = 0.0, sup = 0.0;
    for (std::size_t i = 0; i < lh.size(); ++i) {
      diff = std::max(diff, std::abs(lh[i] - lambda * h_short[i]));
      sup = std::max(sup, lambda * h_short[i]);
    }
    r.checks.push_back({name, lambda, diff / sup});
  }
  std::size_t closing = 0;
  for (const auto& ch : r.checks)
    if (ch.residual < tol) {
      ++closing;
      r.closing_convention = ch.convention;
    }
  if (closing == 0) r.closing_convention = "none";
  if (closing > 1) r.closing_convention = "ambiguous";

  r.sign_symmetry_exact = true;
  const std::size_t size = r.log_h.size();
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t flipped = size - 1 - i;  // every letter swapped on {0,1}
    const double a = r.log_h.values[i];
    const double b = r.log_h.values[flipped];
    if (a != -b) r.sign_symmetry_exact = false;
    r.sign_symmetry_defect = std::max(r.sign_symmetry_defect, std::abs(std::exp(a) * std::exp(b) - 1.0));
  }
  return r;
}

}  // namespace ruelle
