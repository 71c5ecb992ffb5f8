#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ruelle/state_space.hpp"

using namespace ruelle;

TEST(FiniteAlphabet, UniformPair) {
  const auto s = make_finite_alphabet({"-1", "1"});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s.weights()[0], 0.5);
  EXPECT_DOUBLE_EQ(s.weights()[1], 0.5);
  EXPECT_EQ(s.metric_kind(), MetricKind::discrete);
  EXPECT_EQ(s.coordinate(0), -1.0);
  EXPECT_EQ(s.coordinate(1), 1.0);
}

TEST(FiniteAlphabet, EqualWeightsNormalize) {
  const auto s = make_finite_alphabet({"0", "1"}, {2.0, 2.0});
  EXPECT_DOUBLE_EQ(s.weights()[0], 0.5);
  EXPECT_DOUBLE_EQ(s.weights()[1], 0.5);
}

TEST(FiniteAlphabet, UnequalWeightsNormalize) {
  const auto s = make_finite_alphabet({"a", "b", "c"}, {1.0, 2.0, 3.0});
  EXPECT_NEAR(s.weights()[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(s.weights()[1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.weights()[2], 0.5, 1e-15);
  EXPECT_EQ(s.coordinate(2), 2.0);
}

TEST(FiniteAlphabet, DiscreteMetric) {
  const auto s = make_finite_alphabet({"a", "b", "c"});
  EXPECT_EQ(s.distance(0, 0), 0.0);
  EXPECT_EQ(s.distance(0, 2), 1.0);
  EXPECT_EQ(s.diameter(), 1.0);
}

TEST(FiniteAlphabet, Rejections) {
  EXPECT_THROW(make_finite_alphabet({}), Error);
  EXPECT_THROW(make_finite_alphabet({"a", "b"}, {1.0, 0.0}), Error);
  EXPECT_THROW(make_finite_alphabet({"a", "b"}, {1.0, -2.0}), Error);
  EXPECT_THROW(make_finite_alphabet({"a", "b"}, {1.0}), Error);
  EXPECT_THROW(make_finite_alphabet({"a", "b"}, {1.0, 2.0}, MassConvention::counting), Error);
}

TEST(FiniteAlphabet, CountingConventionMass) {
  const auto s = make_finite_alphabet({"0", "1", "2"}, {}, MassConvention::counting);
  EXPECT_DOUBLE_EQ(s.total_mass(), 3.0);
  EXPECT_NEAR(std::exp(s.log_measure()[1]), 1.0, 1e-15);
  EXPECT_TRUE(validate(s).ok());
}

TEST(Circle, FourNodes) {
  const auto s = make_circle(4);
  ASSERT_EQ(s.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(s.weights()[k], 0.25);
    EXPECT_NEAR(s.points()[k].coords[2], k * std::numbers::pi / 2, 1e-15);
  }
  EXPECT_EQ(s.metric_kind(), MetricKind::circle_arc);
  EXPECT_NEAR(s.distance(0, 2), 1.0, 1e-15);
  EXPECT_NEAR(s.distance(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(s.distance(0, 3), 0.5, 1e-15);
}

TEST(Circle, TwoNodes) {
  const auto s = make_circle(2);
  EXPECT_NEAR(s.points()[1].coords[2], std::numbers::pi, 1e-15);
  EXPECT_DOUBLE_EQ(s.weights()[0], 0.5);
  EXPECT_LE(s.diameter(), 1.0);
}

TEST(Circle, ConstantQuadrature) {
  const auto s = make_circle(8);
  double total = 0.0;
  for (std::size_t k = 0; k < 8; ++k) total += s.weights()[k] * 3.25;
  EXPECT_NEAR(total, 3.25, 1e-15);
}

TEST(Circle, RejectsSmall) {
  EXPECT_THROW(make_circle(1), Error);
  EXPECT_THROW(make_circle(0), Error);
}

TEST(Circle, TrigonometricExactness) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (std::size_t n : {4u, 7u, 16u, 33u}) {
    const auto s = make_circle(n);
    const std::size_t degree = (n - 1) / 2;
    std::vector<double> a(degree + 1), b(degree + 1);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    double quad = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double t = s.points()[k].coords[2];
      double v = a[0];
      for (std::size_t j = 1; j <= degree; ++j) v += a[j] * std::cos(j * t) + b[j] * std::sin(j * t);
      quad += s.weights()[k] * v;
    }
    EXPECT_NEAR(quad, a[0], 1e-10) << "nodes " << n;
  }
}

TEST(Validate, UniformPasses) {
  const auto r = validate(make_finite_alphabet({"0", "1"}));
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.checks.size(), 5u);
}

TEST(Validate, FlagsSumToOne) {
  const auto s = StateSpace::unchecked({{"a", {0.0}}, {"b", {1.0}}}, {0.5, 0.5 + 1e-6}, MetricKind::discrete);
  const auto r = validate(s);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(r.failed("sum_to_one"));
  EXPECT_FALSE(r.failed("full_support"));
}

TEST(Validate, FlagsZeroWeight) {
  const auto s = StateSpace::unchecked({{"a", {0.0}}, {"b", {1.0}}}, {0.0, 1.0}, MetricKind::discrete);
  EXPECT_TRUE(validate(s).failed("full_support"));
}

TEST(Validate, FlagsOffCircle) {
  const auto s = StateSpace::unchecked({{"p", {1.1, 0.0, 0.0}}, {"q", {-1.0, 0.0, 3.14159}}}, {0.5, 0.5},
                                       MetricKind::circle_arc);
  EXPECT_TRUE(validate(s).failed("on_unit_circle"));
}

TEST(Property, ConstructedSpacesSatisfyInvariants) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 9;
    std::vector<std::string> labels;
    std::vector<double> w;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back("s" + std::to_string(i));
      w.push_back(u(rng));
    }
    const auto s = make_finite_alphabet(labels, w);
    double total = 0.0, low = 1.0;
    for (double v : s.weights()) {
      total += v;
      low = std::min(low, v);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_GT(low, 0.0);
    EXPECT_TRUE(validate(s).ok());
  }
  for (std::size_t n = 2; n < 64; ++n) EXPECT_TRUE(validate(make_circle(n)).ok());
}
