#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "configuration.hpp"
#include "error.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "potentials.hpp"
#include "state_space.hpp"
#include "transfer.hpp"

namespace ruelle {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Configuration document.

struct StateSpaceSpec {
  std::string type = "finite";  ///< finite | circle
  std::vector<std::string> labels;
  std::vector<double> weights;  ///< empty: uniform
  std::string normalization = "probability";
  std::size_t node_count = 0;
};

struct PotentialSpec {
  std::string name;
  Params params;
  std::vector<double> values;  ///< table potentials
};

struct ObservableSpec {
  std::string type = "constant";  ///< constant | cylinder
  double value = 1.0;
  std::vector<std::pair<std::size_t, Index>> constraints;
};

struct RunConfig {
  std::string command;
  StateSpaceSpec state_space;
  PotentialSpec potential;
  std::optional<std::size_t> n, n_max, m, r, i_max, letter, burn_in;
  std::vector<std::size_t> memory_list, n_list, depths;
  double tol = 1e-12;
  std::size_t max_iter = 100000;
  std::size_t enumeration_cap = kDefaultEnumerationCap;
  std::size_t workers = 1;
  bool sampling = false;
  std::size_t samples = 200000;
  std::string probe = "strong_non_null";
  ObservableSpec observable;
  std::vector<Configuration> boundaries;
  std::vector<CylinderSet> cylinders;
  std::optional<double> lambda;
  bool allow_wide = false;
  std::optional<std::uint64_t> seed;
  std::string output_dir = ".";
  nlohmann::json document;  ///< the validated input, echoed in results
};

struct PotentialEntry {
  std::string name;
  std::vector<std::string> params;
  std::string description;
  std::function<Potential(const StateSpace&, const PotentialSpec&)> build;
};

inline double required_param(const PotentialSpec& s, const std::string& key) {
  auto it = s.params.find(key);
  if (it == s.params.end()) throw Error("potential '" + s.name + "': missing parameter '" + key + "'");
  return it->second;
}

inline const std::vector<PotentialEntry>& potential_registry() {
  static const std::vector<PotentialEntry> registry = {
      {"zero", {}, "f = 0", [](const StateSpace& s, const PotentialSpec&) { return make_zero(s); }},
      {"constant", {"c"}, "f = c",
       [](const StateSpace& s, const PotentialSpec& p) { return make_constant(s, required_param(p, "c")); }},
      {"single_site", {"beta"}, "f(x) = beta * x_1",
       [](const StateSpace& s, const PotentialSpec& p) {
         return make_single_site(s, required_param(p, "beta"));
       }},
      {"ising", {"beta"}, "f(x) = beta * <x_1, x_2>",
       [](const StateSpace& s, const PotentialSpec& p) {
         return make_nearest_neighbor(s, required_param(p, "beta"));
       }},
      {"geometric", {"beta", "theta"}, "f(x) = beta * sum_k theta^k x_k",
       [](const StateSpace& s, const PotentialSpec& p) {
         return make_geometric(s, required_param(p, "beta"), required_param(p, "theta"));
       }},
      {"long_range", {"gamma"}, "f(x) = sum_k x_k / k^gamma",
       [](const StateSpace& s, const PotentialSpec& p) {
         return make_long_range(s, required_param(p, "gamma"));
       }},
      {"double_hofbauer", {"gamma", "delta", "strict?"}, "Double Hofbauer potential on {0,1}",
       [](const StateSpace& s, const PotentialSpec& p) {
         auto it = p.params.find("strict");
         const bool strict = it != p.params.end() && it->second != 0.0;
         return make_double_hofbauer(s, required_param(p, "gamma"), required_param(p, "delta"), strict);
       }},
      {"table", {"memory", "values[]"}, "finite-memory table over M^memory (lexicographic)",
       [](const StateSpace& s, const PotentialSpec& p) {
         return make_table(s, static_cast<std::size_t>(required_param(p, "memory")), p.values);
       }},
      {"random_table", {"memory", "scale", "seed"}, "seeded random table with values in [-scale, scale]",
       [](const StateSpace& s, const PotentialSpec& p) {
         return make_random_table(s, static_cast<std::size_t>(required_param(p, "memory")),
                                  required_param(p, "scale"),
                                  static_cast<std::uint64_t>(required_param(p, "seed")));
       }},
  };
  return registry;
}

inline const PotentialEntry* find_potential(const std::string& name) {
  for (const auto& e : potential_registry())
    if (e.name == name) return &e;
  return nullptr;
}

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> c = {"pressure", "rpf",       "kernel",      "probe",
                                             "bowen",    "hofbauer",  "equilibrium", "xy"};
  return c;
}

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw Error(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error("invalid value for '" + key + "': " + e.what());
  }
}

inline std::size_t get_count(const json& j, const std::string& key) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    throw Error("invalid value for '" + key + "': expected a nonnegative integer");
  const auto v = j.get<std::int64_t>();
  if (v < 0) throw Error("invalid value for '" + key + "': expected a nonnegative integer");
  return static_cast<std::size_t>(v);
}

inline std::vector<std::size_t> get_counts(const json& j, const std::string& key) {
  if (!j.is_array()) throw Error("invalid value for '" + key + "': expected an array");
  std::vector<std::size_t> out;
  for (const auto& v : j) out.push_back(get_count(v, key));
  return out;
}

inline Configuration parse_configuration(const json& j, const std::string& where) {
  check_keys(j, {"prefix", "pad"}, where);
  std::vector<Index> prefix;
  if (j.contains("prefix"))
    for (const auto& v : j.at("prefix")) prefix.push_back(static_cast<Index>(get_count(v, where + ".prefix")));
  const Index pad = j.contains("pad") ? static_cast<Index>(get_count(j.at("pad"), where + ".pad")) : 0;
  return Configuration(std::move(prefix), pad);
}

inline std::vector<std::pair<std::size_t, Index>> parse_constraints(const json& j, const std::string& where) {
  if (!j.is_array()) throw Error(where + ": expected an array of [coordinate, letter] pairs");
  std::vector<std::pair<std::size_t, Index>> out;
  for (const auto& c : j) {
    if (!c.is_array() || c.size() != 2) throw Error(where + ": expected [coordinate, letter]");
    out.emplace_back(get_count(c[0], where), static_cast<Index>(get_count(c[1], where)));
  }
  return out;
}

inline std::string position_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline const std::set<std::string>& scalar_keys() {
  static const std::set<std::string> k = {
      "command", "n",       "n_max",  "m",         "r",      "i_max",   "letter", "burn_in",
      "tol",     "max_iter", "enumeration_cap", "workers", "sampling", "samples", "probe",
      "lambda",  "allow_wide", "seed", "output_dir"};
  return k;
}

}  // namespace detail

/// Validates a parsed document into a RunConfig. Unknown keys are errors.
inline RunConfig config_from_json(const nlohmann::json& doc) {
  using detail::get_count;
  std::set<std::string> allowed = detail::scalar_keys();
  allowed.insert({"state_space", "potential", "memory_list", "n_list", "depths", "observable",
                  "boundaries", "cylinders"});
  detail::check_keys(doc, allowed, "config");

  RunConfig c;
  c.document = doc;
  if (!doc.contains("command")) throw Error("config: missing key 'command'");
  c.command = detail::get_as<std::string>(doc.at("command"), "command");
  if (std::find(known_commands().begin(), known_commands().end(), c.command) == known_commands().end())
    throw Error("config: unknown command '" + c.command + "'");

  if (!doc.contains("state_space")) throw Error("config: missing key 'state_space'");
  {
    const auto& s = doc.at("state_space");
    detail::check_keys(s, {"type", "labels", "weights", "normalization", "node_count"}, "state_space");
    if (s.contains("type")) c.state_space.type = detail::get_as<std::string>(s.at("type"), "state_space.type");
    if (c.state_space.type != "finite" && c.state_space.type != "circle")
      throw Error("state_space.type: expected 'finite' or 'circle', got '" + c.state_space.type + "'");
    if (s.contains("labels"))
      for (const auto& l : s.at("labels"))
        c.state_space.labels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
    if (s.contains("weights")) {
      const auto& w = s.at("weights");
      if (!(w.is_string() && w.get<std::string>() == "uniform"))
        c.state_space.weights = detail::get_as<std::vector<double>>(w, "state_space.weights");
    }
    if (s.contains("normalization"))
      c.state_space.normalization = detail::get_as<std::string>(s.at("normalization"), "state_space.normalization");
    if (c.state_space.normalization != "probability" && c.state_space.normalization != "counting")
      throw Error("state_space.normalization: expected 'probability' or 'counting'");
    if (s.contains("node_count")) c.state_space.node_count = get_count(s.at("node_count"), "state_space.node_count");
  }

  if (doc.contains("potential")) {
    const auto& p = doc.at("potential");
    detail::check_keys(p, {"name", "params", "values"}, "potential");
    c.potential.name = detail::get_as<std::string>(p.at("name"), "potential.name");
    if (!find_potential(c.potential.name))
      throw Error("potential: unknown potential name '" + c.potential.name + "'");
    if (p.contains("params")) {
      const auto* entry = find_potential(c.potential.name);
      for (auto it = p.at("params").begin(); it != p.at("params").end(); ++it) {
        const bool known = std::any_of(entry->params.begin(), entry->params.end(), [&](const std::string& k) {
          return k == it.key() || k == it.key() + "?";
        });
        if (!known) throw Error("potential.params: unknown key '" + it.key() + "' for '" + c.potential.name + "'");
        c.potential.params[it.key()] = detail::get_as<double>(it.value(), "potential.params." + it.key());
      }
    }
    if (p.contains("values")) c.potential.values = detail::get_as<std::vector<double>>(p.at("values"), "potential.values");
  } else if (c.command != "xy") {
    throw Error("config: missing key 'potential'");
  }

  auto opt_count = [&](const char* key, std::optional<std::size_t>& dst) {
    if (doc.contains(key)) dst = get_count(doc.at(key), key);
  };
  opt_count("n", c.n);
  opt_count("n_max", c.n_max);
  opt_count("m", c.m);
  opt_count("r", c.r);
  opt_count("i_max", c.i_max);
  opt_count("letter", c.letter);
  opt_count("burn_in", c.burn_in);
  if (doc.contains("memory_list")) c.memory_list = detail::get_counts(doc.at("memory_list"), "memory_list");
  if (doc.contains("n_list")) c.n_list = detail::get_counts(doc.at("n_list"), "n_list");
  if (doc.contains("depths")) c.depths = detail::get_counts(doc.at("depths"), "depths");
  if (doc.contains("tol")) c.tol = detail::get_as<double>(doc.at("tol"), "tol");
  if (doc.contains("max_iter")) c.max_iter = get_count(doc.at("max_iter"), "max_iter");
  if (doc.contains("enumeration_cap")) c.enumeration_cap = get_count(doc.at("enumeration_cap"), "enumeration_cap");
  if (doc.contains("workers")) c.workers = get_count(doc.at("workers"), "workers");
  if (doc.contains("sampling")) c.sampling = detail::get_as<bool>(doc.at("sampling"), "sampling");
  if (doc.contains("samples")) c.samples = get_count(doc.at("samples"), "samples");
  if (doc.contains("probe")) c.probe = detail::get_as<std::string>(doc.at("probe"), "probe");
  if (c.probe != "strong_non_null" && c.probe != "quasilocality" && c.probe != "uniqueness")
    throw Error("probe: unknown probe '" + c.probe + "'");
  if (doc.contains("lambda")) c.lambda = detail::get_as<double>(doc.at("lambda"), "lambda");
  if (doc.contains("allow_wide")) c.allow_wide = detail::get_as<bool>(doc.at("allow_wide"), "allow_wide");
  if (doc.contains("seed")) {
    const auto& s = doc.at("seed");
    if (!s.is_number_unsigned() && !s.is_number_integer()) throw Error("invalid value for 'seed': expected an integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("output_dir")) c.output_dir = detail::get_as<std::string>(doc.at("output_dir"), "output_dir");

  if (doc.contains("observable")) {
    const auto& o = doc.at("observable");
    detail::check_keys(o, {"type", "value", "constraints"}, "observable");
    if (o.contains("type")) c.observable.type = detail::get_as<std::string>(o.at("type"), "observable.type");
    if (c.observable.type != "constant" && c.observable.type != "cylinder")
      throw Error("observable.type: expected 'constant' or 'cylinder'");
    if (o.contains("value")) c.observable.value = detail::get_as<double>(o.at("value"), "observable.value");
    if (o.contains("constraints")) c.observable.constraints = detail::parse_constraints(o.at("constraints"), "observable.constraints");
  }
  if (doc.contains("boundaries")) {
    if (!doc.at("boundaries").is_array()) throw Error("boundaries: expected an array");
    for (const auto& b : doc.at("boundaries")) c.boundaries.push_back(detail::parse_configuration(b, "boundaries[]"));
  }
  if (doc.contains("cylinders")) {
    if (!doc.at("cylinders").is_array()) throw Error("cylinders: expected an array");
    for (const auto& cyl : doc.at("cylinders")) c.cylinders.emplace_back(detail::parse_constraints(cyl, "cylinders[]"));
  }

  const bool sampled = c.sampling || c.command == "bowen" || c.command == "hofbauer";
  if (sampled && !c.seed)
    throw Error("config: 'seed' is required when a sampled estimator is enabled (command '" + c.command + "')");
  return c;
}

/// Parses and validates a JSON configuration document.
inline RunConfig load_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config parse error at " + detail::position_of(text, e.byte) + ": " + e.what());
  }
  return config_from_json(doc);
}

/// Applies `key=value` overrides to top-level scalar keys. Values are read as
/// JSON when they parse, otherwise as strings.
inline nlohmann::json apply_overrides(nlohmann::json doc, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + s + "'");
    const std::string key = s.substr(0, eq);
    const std::string raw = s.substr(eq + 1);
    if (!detail::scalar_keys().count(key)) throw Error("--set: '" + key + "' is not a top-level scalar key");
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
      value = raw;
    }
    if (value.is_object() || value.is_array()) throw Error("--set: '" + key + "' takes a scalar value");
    doc[key] = value;
  }
  return doc;
}

inline StateSpace build_state_space(const StateSpaceSpec& s) {
  if (s.type == "circle") return make_circle(s.node_count);
  return make_finite_alphabet(s.labels, s.weights,
                              s.normalization == "counting" ? MassConvention::counting
                                                            : MassConvention::probability);
}

/// The state space exactly as written, weights not normalized, for `validate`.
inline StateSpace raw_state_space(const StateSpaceSpec& s) {
  if (s.type == "circle" || s.weights.empty()) return build_state_space(s);
  std::vector<Point> points;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    double value = 0.0;
    if (!detail::parse_number(s.labels[i], value)) value = static_cast<double>(i);
    points.push_back({s.labels[i], {value}});
  }
  return StateSpace::unchecked(std::move(points), s.weights, MetricKind::discrete,
                               s.normalization == "counting" ? MassConvention::counting
                                                             : MassConvention::probability);
}

inline Potential build_potential(const StateSpace& space, const PotentialSpec& p) {
  const auto* entry = find_potential(p.name);
  if (!entry) throw Error("unknown potential name '" + p.name + "'");
  return entry->build(space, p);
}

// ---------------------------------------------------------------------------
// Execution.

struct RunResult {
  nlohmann::json config;
  std::string version = kVersion;
  std::string command;
  nlohmann::json payload = nlohmann::json::object();
  double wall_seconds = 0.0;
  std::map<std::string, io::CsvTable> traces;
};

/// A failed run with whatever traces were complete before the failure.
class RunFailure : public Error {
 public:
  RunFailure(const std::string& what, RunResult partial) : Error(what), partial_(std::move(partial)) {}
  const RunResult& partial() const noexcept { return partial_; }

 private:
  RunResult partial_;
};

namespace detail {

inline json to_json(const Configuration& x) { return {{"prefix", x.prefix()}, {"pad", x.pad()}}; }

inline json to_json(const RpfSolution& s) {
  return {{"lambda", s.lambda},         {"log_lambda", s.log_lambda},
          {"h", s.h.values},            {"nu", s.nu.values},
          {"memory", s.memory()},       {"residual_right", s.residual_right},
          {"residual_left", s.residual_left}, {"iterations", s.iterations},
          {"status", to_string(s.status)},    {"warnings", s.warnings}};
}

inline io::CsvTable pressure_csv(const PressureTrace& t) {
  io::CsvTable csv{{"n", "p_n", "cauchy_gap"}, {}};
  for (const auto& e : t.entries) csv.rows.push_back({static_cast<double>(e.n), e.p, e.cauchy_gap});
  return csv;
}

inline io::CsvTable probe_csv(const std::vector<TracePoint>& t) {
  io::CsvTable csv{{"i_or_depth", "value", "stderr_if_sampled"}, {}};
  for (const auto& e : t) csv.rows.push_back({static_cast<double>(e.index), e.value, e.standard_error});
  return csv;
}

inline std::string pressure_trend(const PressureTrace& t) {
  const std::size_t n = t.entries.size();
  if (n < 4) return "inconclusive";
  const double a = std::abs(t.entries[n / 4 - 1].p);
  const double b = std::abs(t.entries[n / 2 - 1].p);
  const double c = std::abs(t.entries[n - 1].p);
  if (c < b && b < a) return "decreasing-magnitude-trend";
  if (t.cauchy_gap < 1e-12) return "stationary";
  return "inconclusive";
}

inline json pressure_json(const PressureTrace& t) {
  json entries = json::array();
  for (const auto& e : t.entries) entries.push_back({{"n", e.n}, {"p_n", e.p}, {"cauchy_gap", e.cauchy_gap}});
  return {{"base_point", to_json(t.base_point)},
          {"memory", t.memory},
          {"entries", entries},
          {"final_estimate", t.final_estimate},
          {"cauchy_gap", t.cauchy_gap},
          {"truncation_bound", t.truncation_bound ? json(*t.truncation_bound) : json(nullptr)},
          {"trend", pressure_trend(t)},
          {"trend_rule", "decreasing-magnitude-trend if |p| at n_max < at n_max/2 < at n_max/4"}};
}

inline json strong_non_null_json(const StrongNonNullTrace& t) {
  json entries = json::array();
  for (std::size_t k = 0; k < t.entries.size(); ++k)
    entries.push_back({{"i", t.entries[k].index}, {"value", t.entries[k].value},
                       {"stderr", t.entries[k].standard_error}, {"argmin_boundary", t.argmin[k]}});
  return {{"letter", t.letter}, {"entries", entries}, {"fitted_exponent", t.fitted_exponent},
          {"trend", t.trend}, {"trend_rule", t.rule}};
}

inline json bowen_json(const BowenEstimate& b) {
  json entries = json::array();
  for (const auto& e : b.entries)
    entries.push_back({{"n", e.n}, {"D_n", e.d}, {"prefixes", e.prefixes}, {"exhaustive", e.exhaustive}});
  return {{"entries", entries}, {"tails", b.tails}, {"verdict", to_string(b.verdict)}, {"verdict_rule", b.rule}};
}

inline io::CsvTable bowen_csv(const BowenEstimate& b) {
  io::CsvTable csv{{"n", "D_n"}, {}};
  for (const auto& e : b.entries) csv.rows.push_back({static_cast<double>(e.n), e.d});
  return csv;
}

inline Observable build_observable(const ObservableSpec& o) {
  if (o.type == "cylinder") return CylinderSet(o.constraints).indicator();
  return constant_observable(o.value);
}

inline Configuration first_boundary(const RunConfig& c) {
  return c.boundaries.empty() ? Configuration::pure_pad(0) : c.boundaries.front();
}

/// (0,1,0,1,...) of the given length, then pad 0.
inline Configuration alternating(std::size_t length) {
  std::vector<Index> w(length);
  for (std::size_t k = 0; k < length; ++k) w[k] = static_cast<Index>(k % 2);
  return Configuration(std::move(w), 0);
}

inline void execute(const RunConfig& c, RunResult& out) {
  const StateSpace space = build_state_space(c.state_space);
  KernelOptions kopt;
  kopt.enumeration_cap = c.enumeration_cap;
  kopt.allow_sampling = c.sampling;
  kopt.seed = c.seed.value_or(0);
  kopt.samples = c.samples;
  kopt.workers = c.workers;
  RpfOptions ropt;
  ropt.tol = c.tol;
  ropt.max_iter = c.max_iter;
  ropt.workers = c.workers;

  auto& p = out.payload;
  p["state_space"] = {{"size", space.size()}, {"weights", std::vector<double>(space.weights().begin(), space.weights().end())},
                      {"convention", space.convention() == MassConvention::counting ? "counting" : "probability"}};
  if (c.state_space.type == "circle") p["state_space"]["node_count"] = space.size();

  if (c.command == "xy") {
    const double gamma = c.potential.params.count("gamma") ? c.potential.params.at("gamma") : 2.0;
    const auto r = xy_closed_form(space, gamma, c.m.value_or(12), c.allow_wide);
    json checks = json::array();
    for (const auto& ch : r.checks)
      checks.push_back({{"convention", ch.convention}, {"lambda", ch.lambda}, {"residual", ch.residual}});
    p["xy"] = {{"gamma", r.gamma}, {"m", r.m}, {"zeta", r.zeta_value}, {"alpha", r.alpha},
               {"checks", checks}, {"closing_convention", r.closing_convention},
               {"space_convention", r.space_convention}, {"sign_symmetry_exact", r.sign_symmetry_exact},
               {"sign_symmetry_defect", r.sign_symmetry_defect}, {"wide_gamma", r.wide_gamma},
               {"alpha_definition", "alpha_n = sum_{j>n} j^-gamma"}};
    return;
  }

  const Potential f = build_potential(space, c.potential);
  p["potential"] = {{"name", f.name}, {"params", f.params},
                    {"memory", f.memory ? json(*f.memory) : json("infinite")}};

  if (c.command == "pressure") {
    const auto t = pressure_trace(space, f, c.n_max.value_or(16), first_boundary(c), c.m.value_or(8),
                                  {std::nullopt, c.workers, c.enumeration_cap});
    out.traces["pressure_trace"] = pressure_csv(t);
    p["pressure"] = pressure_json(t);
  } else if (c.command == "rpf") {
    const auto sol = rpf_solve(space, f, ropt);
    p["rpf"] = to_json(sol);
  } else if (c.command == "kernel") {
    const std::size_t n = c.n.value_or(4);
    const auto phi = build_observable(c.observable);
    json values = json::array();
    const auto boundaries = c.boundaries.empty() ? std::vector<Configuration>{Configuration::pure_pad(0)} : c.boundaries;
    for (const auto& x : boundaries) {
      const auto kv = kernel_value(space, f, n, phi, x, kopt);
      json entry = {{"boundary", to_json(x)}, {"value", kv.value}, {"log_numerator", kv.log_numerator},
                    {"log_denominator", kv.log_denominator}, {"sampled", kv.sampled},
                    {"stderr", kv.standard_error}, {"terms", kv.terms}};
      if (c.r) entry["dlr_residual"] = dlr_residual(space, f, n, *c.r, phi, x, kopt);
      values.push_back(entry);
    }
    p["kernel"] = {{"n", n}, {"values", values}};
  } else if (c.command == "probe") {
    const auto boundaries = c.boundaries.empty() ? std::vector<Configuration>{Configuration::pure_pad(0)} : c.boundaries;
    if (c.probe == "strong_non_null") {
      const auto t = strong_non_null_probe(space, f, static_cast<Index>(c.letter.value_or(0)),
                                           c.i_max.value_or(10), boundaries, kopt);
      out.traces["strong_non_null"] = probe_csv(t.entries);
      p["strong_non_null"] = strong_non_null_json(t);
    } else if (c.probe == "quasilocality") {
      const auto tails = default_tail_set(space.size(), 8, kopt.seed);
      const auto t = quasilocality_probe(space, f, c.n.value_or(2), build_observable(c.observable),
                                         boundaries.front(), c.depths, tails, kopt);
      out.traces["quasilocality"] = probe_csv(t);
      json entries = json::array();
      for (const auto& e : t) entries.push_back({{"depth", e.index}, {"oscillation", e.value}});
      p["quasilocality"] = {{"entries", entries}};
    } else {
      std::vector<std::pair<Configuration, Configuration>> pairs;
      for (std::size_t i = 0; i < boundaries.size(); ++i)
        for (std::size_t j = i + 1; j < boundaries.size(); ++j) pairs.emplace_back(boundaries[i], boundaries[j]);
      const CylinderSet cyl(c.observable.constraints);
      const auto u = uniqueness_ratio_probe(space, f, cyl, c.n.value_or(std::max<std::size_t>(1, cyl.max_coordinate())), pairs, kopt);
      p["uniqueness"] = {{"c_estimate", u.c_estimate}, {"worst_pair", u.worst_pair},
                         {"worst_reversed", u.worst_reversed}, {"undefined_pairs", u.undefined_pairs}};
    }
  } else if (c.command == "bowen") {
    BowenOptions bopt;
    bopt.seed = *c.seed;
    const auto b = bowen_estimate(space, f, c.n_max.value_or(16), bopt);
    out.traces["bowen"] = bowen_csv(b);
    p["bowen"] = bowen_json(b);
  } else if (c.command == "hofbauer") {
    if (f.name != "double_hofbauer") throw Error("hofbauer command needs the double_hofbauer potential");
    const std::size_t n_max = c.n_max.value_or(64);
    const std::size_t m = c.m.value_or(12);
    const Configuration base = c.boundaries.empty() ? alternating(n_max + m + 2) : c.boundaries.front();
    const auto t = pressure_trace(space, f, n_max, base, m, {std::nullopt, c.workers, c.enumeration_cap});
    out.traces["pressure_trace"] = pressure_csv(t);
    p["pressure"] = pressure_json(t);

    const auto s = strong_non_null_probe(space, f, 0, c.i_max.value_or(20), {Configuration::pure_pad(1)}, kopt);
    out.traces["strong_non_null"] = probe_csv(s.entries);
    p["strong_non_null"] = strong_non_null_json(s);

    BowenOptions bopt;
    bopt.seed = *c.seed;
    bopt.tails = {Configuration::pure_pad(0), Configuration::pure_pad(1)};
    const auto b = bowen_estimate(space, f, std::min<std::size_t>(n_max, 64), bopt);
    out.traces["bowen"] = bowen_csv(b);
    p["bowen"] = bowen_json(b);
  } else if (c.command == "equilibrium") {
    if (c.memory_list.empty()) throw Error("equilibrium command needs 'memory_list'");
    EquilibriumOptions eopt;
    eopt.rpf = ropt;
    const auto steps = equilibrium_pipeline(space, f, c.memory_list, c.cylinders, eopt);
    json arr = json::array();
    io::CsvTable csv{{"m", "log_lambda", "entropy", "integral", "defect"}, {}};
    for (const auto& s : steps) {
      arr.push_back({{"m", s.m}, {"rpf", to_json(s.solution)}, {"mu", s.measure.mass},
                     {"entropy_estimate", s.entropy.value}, {"entropy_argmin", s.entropy.argmin_name},
                     {"candidate_count", s.entropy.candidate_count}, {"integral", s.integral},
                     {"defect", s.defect}, {"cylinder_probabilities", s.cylinder_probabilities},
                     {"truncation_gap", s.truncation_gap ? json(*s.truncation_gap) : json(nullptr)}});
      csv.rows.push_back({static_cast<double>(s.m), s.solution.log_lambda, s.entropy.value, s.integral, s.defect});
    }
    out.traces["equilibrium"] = csv;
    p["equilibrium"] = {{"steps", arr}};
  }
}

}  // namespace detail

/// Executes one configured command. Identical configurations give identical
/// payloads; timing is reported separately.
inline RunResult run(const RunConfig& config) {
  RunResult out;
  out.config = config.document;
  out.command = config.command;
  const auto start = std::chrono::steady_clock::now();
  try {
    detail::execute(config, out);
  } catch (const std::exception& e) {
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    throw RunFailure("command '" + config.command + "': " + e.what(), std::move(out));
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline nlohmann::json result_document(const RunResult& r) {
  return {{"config", r.config},
          {"version", r.version},
          {"command", r.command},
          {"payload", r.payload},
          {"timing", {{"wall_seconds", r.wall_seconds}}}};
}

/// Stable key derived from the command and the configuration echo.
inline std::string result_stem(const RunResult& r) {
  auto cfg = r.config;
  cfg.erase("output_dir");
  return r.command + "-" + io::hex64(io::fnv1a(io::dump_json(cfg, -1)));
}

/// Writes `<stem>.json` and one `<stem>-<trace>.csv` per trace into `dir`.
/// Returns the written paths.
inline std::vector<std::string> write_results(const RunResult& r, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
  const std::string stem = result_stem(r);
  std::vector<std::string> written;
  for (const auto& [name, table] : r.traces) {
    const auto path = (std::filesystem::path(dir) / (stem + "-" + name + ".csv")).string();
    io::write_file(path, io::to_csv(table));
    written.push_back(path);
  }
  const auto path = (std::filesystem::path(dir) / (stem + ".json")).string();
  io::write_file(path, io::dump_json(result_document(r)) + "\n");
  written.push_back(path);
  return written;
}

}  // namespace ruelle
