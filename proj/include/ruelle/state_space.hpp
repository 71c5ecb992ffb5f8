#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace ruelle {

/// Index of a point of the alphabet M.
using Index = std::uint32_t;

enum class MetricKind { discrete, circle_arc };

/// How the a priori weights enter the transfer operator.
///
/// `probability` integrates against p itself. `counting` integrates against
/// the counting measure N*p on a uniform alphabet (total mass N); this is the
/// convention under which some classical closed forms (e.g. 2cosh) are stated.
enum class MassConvention { probability, counting };

struct Point {
  std::string label;
  std::vector<double> coords;
};

/// The alphabet M with its metric d and a priori measure p.
///
/// Instances built through the factories satisfy all invariants; use
/// `StateSpace::unchecked` plus `validate` to inspect arbitrary inputs.
class StateSpace {
 public:
  StateSpace() = default;

  /// Builds a space without normalizing or checking anything.
  static StateSpace unchecked(std::vector<Point> points, std::vector<double> weights,
                              MetricKind kind,
                              MassConvention convention = MassConvention::probability) {
    StateSpace s;
    s.points_ = std::move(points);
    s.weights_ = std::move(weights);
    s.kind_ = kind;
    s.convention_ = convention;
    s.refresh();
    return s;
  }

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Point>& points() const noexcept { return points_; }
  std::span<const double> weights() const noexcept { return weights_; }
  MetricKind metric_kind() const noexcept { return kind_; }
  MassConvention convention() const noexcept { return convention_; }

  /// Total mass of the reference measure the operator integrates against.
  double total_mass() const noexcept {
    return convention_ == MassConvention::counting ? static_cast<double>(size()) : 1.0;
  }

  /// log(total_mass * w_a), the per-letter log weight used by the operator.
  std::span<const double> log_measure() const noexcept { return log_measure_; }

  /// First coordinate of point a (the spin value for numeric alphabets).
  double coordinate(Index a) const { return points_.at(a).coords.at(0); }

  double distance(Index a, Index b) const {
    if (a == b) return 0.0;
    if (kind_ == MetricKind::discrete) return 1.0;
    const auto& p = points_.at(a).coords;
    const auto& q = points_.at(b).coords;
    double dot = std::clamp(p[0] * q[0] + p[1] * q[1], -1.0, 1.0);
    return std::acos(dot) / std::numbers::pi;
  }

  /// Metrics are normalized so diam(M) <= 1.
  double diameter() const noexcept {
    if (size() < 2) return 0.0;
    if (kind_ == MetricKind::discrete) return 1.0;
    double best = 0.0;
    for (Index b = 1; b < size(); ++b) best = std::max(best, distance(0, b));
    return best;
  }

  bool contains(Index a) const noexcept { return a < size(); }

  StateSpace with_convention(MassConvention convention) const {
    StateSpace s = *this;
    s.convention_ = convention;
    s.refresh();
    return s;
  }

 private:
  void refresh() {
    log_measure_.resize(weights_.size());
    for (std::size_t i = 0; i < weights_.size(); ++i)
      log_measure_[i] = std::log(weights_[i] * total_mass());
  }

  std::vector<Point> points_;
  std::vector<double> weights_;
  std::vector<double> log_measure_;
  MetricKind kind_ = MetricKind::discrete;
  MassConvention convention_ = MassConvention::probability;
};

namespace detail {

inline bool parse_number(const std::string& s, double& out) {
  std::istringstream in(s);
  in >> out;
  return !in.fail() && in.eof();
}

}  // namespace detail

/// Finite alphabet with discrete metric. Weights are rescaled to sum to 1;
/// an empty `weights` means uniform. Numeric labels ("-1", "+1") become the
/// point's coordinate, other labels get their position as coordinate.
inline StateSpace make_finite_alphabet(const std::vector<std::string>& labels,
                                       std::vector<double> weights = {},
                                       MassConvention convention = MassConvention::probability) {
  if (labels.empty()) throw Error("make_finite_alphabet: labels must be nonempty");
  if (weights.empty()) weights.assign(labels.size(), 1.0);
  if (weights.size() != labels.size())
    throw Error("make_finite_alphabet: got " + std::to_string(weights.size()) + " weights for " +
                std::to_string(labels.size()) + " labels");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw Error("make_finite_alphabet: weight of '" + labels[i] +
                  "' must be positive and finite (full support)");
  }
  if (convention == MassConvention::counting) {
    for (double w : weights)
      if (w != weights.front())
        throw Error("make_finite_alphabet: counting convention requires uniform weights");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<Point> points;
  points.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double value = 0.0;
    if (!detail::parse_number(labels[i], value)) value = static_cast<double>(i);
    points.push_back({labels[i], {value}});
    weights[i] /= total;
  }
  return StateSpace::unchecked(std::move(points), std::move(weights), MetricKind::discrete,
                               convention);
}

/// Uniform quadrature of the unit circle with `node_count` nodes.
inline StateSpace make_circle(std::size_t node_count) {
  if (node_count < 2) throw Error("make_circle: node_count must be >= 2");
  std::vector<Point> points;
  std::vector<double> weights(node_count, 1.0 / static_cast<double>(node_count));
  for (std::size_t k = 0; k < node_count; ++k) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(node_count);
    points.push_back({"theta" + std::to_string(k), {std::cos(theta), std::sin(theta), theta}});
  }
  return StateSpace::unchecked(std::move(points), std::move(weights), MetricKind::circle_arc);
}

struct InvariantCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<InvariantCheck> checks;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
  bool failed(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return !c.passed;
    return false;
  }
};

inline ValidationReport validate(const StateSpace& space) {
  ValidationReport r;
  r.checks.push_back({"nonempty", space.size() >= 1, std::to_string(space.size()) + " points"});

  const auto w = space.weights();
  const bool sizes = w.size() == space.size();
  r.checks.push_back({"weight_count", sizes, std::to_string(w.size()) + " weights"});

  double min_w = w.empty() ? 0.0 : *std::min_element(w.begin(), w.end());
  r.checks.push_back({"full_support", !w.empty() && min_w > 0.0,
                      "min weight " + std::to_string(min_w)});

  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  r.checks.push_back({"sum_to_one", std::abs(total - 1.0) <= 1e-12,
                      "sum " + std::to_string(total)});

  bool on_circle = true;
  if (space.metric_kind() == MetricKind::circle_arc) {
    for (const auto& p : space.points()) {
      if (p.coords.size() < 2 ||
          std::abs(std::hypot(p.coords[0], p.coords[1]) - 1.0) > 1e-12)
        on_circle = false;
    }
  }
  r.checks.push_back({"on_unit_circle", on_circle, ""});
  return r;
}

}  // namespace ruelle
