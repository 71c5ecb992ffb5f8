#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ruelle/potentials.hpp"
#include "ruelle/zeta.hpp"

using namespace ruelle;

namespace {

// Bracket of sum_{k>=1} k^-s from the partial sum to N and integral bounds
// on the remainder.
struct ZetaBracket {
  double lo, hi;
  double mid() const { return 0.5 * (lo + hi); }
};

ZetaBracket brute_zeta(double s, std::size_t n) {
  double partial = 0.0;
  for (std::size_t k = n; k >= 1; --k) partial += std::pow(static_cast<double>(k), -s);
  return {partial + std::pow(static_cast<double>(n + 1), 1.0 - s) / (s - 1.0),
          partial + std::pow(static_cast<double>(n), 1.0 - s) / (s - 1.0)};
}

double brute_tail(double s, std::size_t m) {
  double head = 0.0;
  for (std::size_t k = m; k >= 1; --k) head += std::pow(static_cast<double>(k), -s);
  return brute_zeta(s, 2'000'000).mid() - head;
}

StateSpace pm() { return make_finite_alphabet({"-1", "1"}); }
StateSpace binary() { return make_finite_alphabet({"0", "1"}); }

Configuration random_config(std::mt19937_64& rng, std::size_t alphabet, std::size_t len) {
  std::vector<Index> p(len);
  for (auto& a : p) a = static_cast<Index>(rng() % alphabet);
  return Configuration(std::move(p), static_cast<Index>(rng() % alphabet));
}

}  // namespace

TEST(Zeta, ClosedForms) {
  EXPECT_NEAR(zeta(2.0), std::numbers::pi * std::numbers::pi / 6.0, 1e-14);
  EXPECT_NEAR(zeta(4.0), std::pow(std::numbers::pi, 4) / 90.0, 1e-14);
}

TEST(Zeta, ThreeAgainstBruteForce) {
  const auto b = brute_zeta(3.0, 100000);
  EXPECT_LE(b.hi - b.lo, 1e-12);
  EXPECT_NEAR(zeta(3.0), b.mid(), 1e-9);
  EXPECT_NEAR(zeta(3.0), 1.2020569, 1e-7);
}

TEST(Zeta, ToleranceHonoured) {
  for (double s : {1.1, 1.5, 2.5, 7.0}) {
    const auto b = brute_zeta(s, 4'000'000);
    const double v = zeta(s, 1e-10);
    EXPECT_GE(v, b.lo - 1e-10) << s;
    EXPECT_LE(v, b.hi + 1e-10) << s;
  }
}

TEST(Zeta, Rejections) {
  EXPECT_THROW(zeta(1.0), Error);
  EXPECT_THROW(zeta(0.5), Error);
  EXPECT_THROW(zeta(2.0, 0.0), Error);
}

TEST(Evaluate, Constant) {
  const auto s = binary();
  const auto f = make_constant(s, 0.7);
  EXPECT_EQ(evaluate(s, f, Configuration({1, 0, 1}, 1)), 0.7);
  EXPECT_EQ(evaluate(s, f, Configuration::pure_pad(0)), 0.7);
  EXPECT_EQ(f.memory, 0u);
}

TEST(Evaluate, SingleSite) {
  const auto s = pm();
  const auto f = make_single_site(s, 1.0);
  EXPECT_EQ(evaluate(s, f, Configuration::pure_pad(1)), 1.0);
  EXPECT_EQ(evaluate(s, f, Configuration({0}, 1)), -1.0);
}

TEST(Evaluate, IncompatibleAlphabet) {
  const auto f = make_single_site(pm(), 1.0);
  const auto s3 = make_finite_alphabet({"a", "b", "c"});
  EXPECT_THROW(evaluate(s3, f, Configuration::pure_pad(0)), Error);
  EXPECT_THROW(evaluate(pm(), f, Configuration({2}, 0)), Error);
}

TEST(LongRange, AllPlus) {
  const auto s = pm();
  const auto f = make_long_range(s, 2.0);
  const double oracle = brute_zeta(2.0, 2'000'000).mid();
  EXPECT_NEAR(evaluate(s, f, Configuration::pure_pad(1)), oracle, 1e-11);
  EXPECT_NEAR(evaluate(s, f, Configuration({1, 1, 1, 1, 1}, 1)), oracle, 1e-11);
  EXPECT_NEAR(evaluate(s, f, Configuration::pure_pad(1)), 1.6449341, 1e-7);
}

TEST(LongRange, AllMinus) {
  const auto s = pm();
  const auto f = make_long_range(s, 2.0);
  EXPECT_EQ(f(Configuration::pure_pad(0)), -f(Configuration::pure_pad(1)));
}

TEST(LongRange, PlusThenMinus) {
  const auto s = pm();
  const auto f = make_long_range(s, 2.0);
  const double oracle = 1.0 - brute_tail(2.0, 1);
  EXPECT_NEAR(f(Configuration({1}, 0)), oracle, 1e-11);
  EXPECT_NEAR(f(Configuration({1}, 0)), 0.3550659, 1e-7);
}

TEST(LongRange, Oddness) {
  const auto s = pm();
  const auto f = make_long_range(s, 1.7);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto x = random_config(rng, 2, rng() % 20);
    std::vector<Index> flipped(x.prefix());
    for (auto& a : flipped) a = 1 - a;
    const Configuration y(flipped, 1 - x.pad());
    EXPECT_NEAR(f(y), -f(x), 1e-14);
  }
}

TEST(LongRange, Rejection) {
  EXPECT_THROW(make_long_range(pm(), 1.0), Error);
}

TEST(Birkhoff, Zero) {
  const auto f = make_constant(binary(), 3.0);
  EXPECT_EQ(birkhoff_sum(f, Configuration({1, 0}), 0), 0.0);
}

TEST(Birkhoff, Alternating) {
  const auto f = make_single_site(pm(), 1.0);
  EXPECT_EQ(birkhoff_sum(f, Configuration({1, 0, 1}, 1), 3), 1.0);
}

TEST(Birkhoff, Constant) {
  const auto f = make_constant(binary(), 0.25);
  for (std::size_t n : {1u, 5u, 17u}) EXPECT_DOUBLE_EQ(birkhoff_sum(f, Configuration({1}), n), 0.25 * n);
}

TEST(Birkhoff, Additivity) {
  const auto s = binary();
  const auto f = make_double_hofbauer(s, 3.0, 2.0);
  const auto g = make_random_table(s, 3, 1.0, 9);
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const auto x = random_config(rng, 2, 30);
    const std::size_t n = rng() % 10, m = rng() % 10;
    for (const auto* p : {&f, &g}) {
      const double lhs = birkhoff_sum(*p, x, n + m);
      const double rhs = birkhoff_sum(*p, x, n) + birkhoff_sum(*p, shift(x, n), m);
      EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(lhs)));
    }
  }
}

TEST(Memory, DeclaredMemoryConsistent) {
  const auto s3 = make_finite_alphabet({"-1", "0", "1"});
  const auto c8 = make_circle(8);
  std::vector<std::pair<StateSpace, Potential>> cases = {
      {s3, make_constant(s3, 1.5)},       {s3, make_single_site(s3, 0.8)},
      {s3, make_nearest_neighbor(s3, 1.2)}, {s3, make_random_table(s3, 3, 2.0, 4)},
      {c8, make_nearest_neighbor(c8, 1.0)}, {s3, truncate_local(s3, make_geometric(s3, 1.0, 0.5), 4, 2)},
  };
  std::mt19937_64 rng(13);
  for (const auto& [s, f] : cases) {
    ASSERT_TRUE(f.memory.has_value()) << f.name;
    const std::size_t k = *f.memory;
    for (int t = 0; t < 200; ++t) {
      auto x = random_config(rng, s.size(), k + rng() % 6);
      auto y = random_config(rng, s.size(), k + rng() % 6);
      auto yp = materialize(y.view(), std::max(k, y.prefix().size())).prefix();
      for (std::size_t i = 0; i < k; ++i) yp[i] = x[i];
      EXPECT_NEAR(f(x), f(Configuration(yp, y.pad())), 1e-12) << f.name;
    }
  }
}

TEST(Truncate, IdentityWhenMemoryFits) {
  const auto s = binary();
  const auto f = make_random_table(s, 2, 1.0, 3);
  const auto g = truncate_local(s, f, 5, 1);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto x = random_config(rng, 2, 8);
    EXPECT_EQ(f(x), g(x));
  }
  EXPECT_EQ(g.truncation_gap, 0.0);
}

TEST(Truncate, LongRangeSeries) {
  const auto s = pm();
  const auto f = make_long_range(s, 2.0);
  const auto f2 = truncate_natural(s, f, 2);
  EXPECT_EQ(f2.memory, 2u);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    const auto x = random_config(rng, 2, rng() % 6);
    const double x1 = x[0] == 1 ? 1.0 : -1.0;
    const double x2 = x[1] == 1 ? 1.0 : -1.0;
    EXPECT_NEAR(f2(x), x1 + x2 / 4.0, 1e-15);
  }
}

TEST(Truncate, LongRangeGapBound) {
  const auto s = pm();
  const auto f = make_long_range(s, 2.0);
  std::mt19937_64 rng(21);
  for (std::size_t m : {1u, 2u, 4u, 8u, 16u}) {
    const auto fm = truncate_natural(s, f, m);
    ASSERT_TRUE(fm.truncation_gap.has_value());
    EXPECT_NEAR(*fm.truncation_gap, brute_tail(2.0, m), 1e-11);
    EXPECT_LE(*fm.truncation_gap, 1.0 / m + 1e-15);
    double sampled = 0.0;
    for (int t = 0; t < 400; ++t) {
      const auto x = random_config(rng, 2, m + 20);
      sampled = std::max(sampled, std::abs(fm(x) - f(x)));
    }
    EXPECT_LE(sampled, *fm.truncation_gap + 1e-14);
  }
}

TEST(Truncate, GapNonincreasingAndVanishing) {
  const auto pm_s = pm();
  const auto bin = binary();
  std::vector<std::pair<StateSpace, Potential>> cases = {
      {pm_s, make_long_range(pm_s, 2.0)},
      {pm_s, make_geometric(pm_s, 1.0, 0.5)},
      {bin, make_double_hofbauer(bin, 3.0, 2.0)},
      {pm_s, make_nearest_neighbor(pm_s, 1.0)},
  };
  for (const auto& [s, f] : cases) {
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t m = 1; m <= 512; m *= 2) {
      const auto g = truncate_local(s, f, m, 0);
      ASSERT_TRUE(g.truncation_gap.has_value()) << f.name;
      EXPECT_LE(*g.truncation_gap, prev) << f.name << " m=" << m;
      prev = *g.truncation_gap;
    }
    EXPECT_LT(prev, 0.02) << f.name;
  }
}

TEST(Variation, MemoryAndConstant) {
  const auto s = binary();
  const auto f = make_random_table(s, 3, 1.0, 2);
  EXPECT_EQ(variation_estimate(s, f, 3).value, 0.0);
  EXPECT_EQ(variation_estimate(s, f, 5).value, 0.0);
  EXPECT_GT(variation_estimate(s, f, 2).value, 0.0);
  const auto c = make_constant(s, 2.0);
  for (std::size_t k = 1; k < 6; ++k) EXPECT_EQ(variation_estimate(s, c, k).value, 0.0);
  EXPECT_THROW(variation_estimate(s, c, 0), Error);
}

TEST(Variation, LongRangeBelowTailBound) {
  const auto s = pm();
  const auto f = make_long_range(s, 2.0);
  for (std::size_t k : {1u, 3u, 6u, 10u}) {
    const double bound = 2.0 * brute_tail(2.0, k);
    VariationMethod method;
    method.kind = VariationMethod::Kind::sampled;
    method.seed = 5;
    const auto est = variation_estimate(s, f, k, method);
    EXPECT_TRUE(est.lower_bound);
    EXPECT_LE(est.value, bound + 1e-12);
    EXPECT_GE(est.value, 0.5 * bound);
    const auto ex = variation_estimate(s, f, k);
    EXPECT_LE(ex.value, bound + 1e-12);
    EXPECT_NEAR(ex.value, bound, 1e-12);  // pure-pad tails of opposite sign attain it
  }
}

TEST(Variation, ExhaustiveCap) {
  const auto s = binary();
  const auto f = make_double_hofbauer(s, 3.0, 2.0);
  VariationMethod method;
  method.cap = 100;
  EXPECT_THROW(variation_estimate(s, f, 20, method), Error);
}

TEST(Hofbauer, TableValues) {
  const auto s = binary();
  const auto f = make_double_hofbauer(s, 3.0, 3.0);
  EXPECT_EQ(f(Configuration::pure_pad(0)), 0.0);
  EXPECT_EQ(f(Configuration::pure_pad(1)), 0.0);
  EXPECT_NEAR(f(Configuration({0, 1}, 0)), -std::log(brute_zeta(3.0, 100000).mid()), 1e-12);
  EXPECT_NEAR(f(Configuration({0, 1}, 0)), -0.1840342, 1e-7);
  EXPECT_NEAR(f(Configuration({0, 0, 1}, 0)), -3.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(f(Configuration({0, 0, 1}, 0)), -2.0794415, 1e-7);
}

TEST(Hofbauer, RightCells) {
  const auto s = binary();
  const auto f = make_double_hofbauer(s, 3.0, 2.0);
  EXPECT_NEAR(f(Configuration({1, 0})), -std::log(std::numbers::pi * std::numbers::pi / 6.0), 1e-14);
  EXPECT_NEAR(f(Configuration({1, 1, 1, 0})), -2.0 * std::log(3.0 / 2.0), 1e-15);
  EXPECT_NEAR(f(Configuration({0, 0, 0}, 1)), -3.0 * std::log(3.0 / 2.0), 1e-15);
  EXPECT_EQ(f(Configuration({1, 1, 1}, 1)), 0.0);
}

TEST(Hofbauer, Partition) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 500; ++t) {
    const auto x = random_config(rng, 2, 1 + rng() % 12);
    const auto cell = classify_hofbauer(x.view());
    // Brute classification: count how many cylinders [0^n 1] / [1^n 0] contain x.
    int hits = 0;
    for (std::size_t n = 1; n <= 40; ++n) {
      for (Index a : {0u, 1u}) {
        bool in = true;
        for (std::size_t i = 0; i < n && in; ++i) in = x[i] == a;
        in = in && x[n] == 1 - a;
        if (in) {
          ++hits;
          EXPECT_EQ(cell.kind, a == 0 ? HofbauerCell::Kind::left : HofbauerCell::Kind::right);
          EXPECT_EQ(cell.n, n);
        }
      }
    }
    EXPECT_EQ(hits, cell.kind == HofbauerCell::Kind::fixed_point ? 0 : 1);
  }
}

TEST(Hofbauer, Rejections) {
  const auto s = binary();
  EXPECT_THROW(make_double_hofbauer(s, 1.0, 2.0), Error);
  EXPECT_THROW(make_double_hofbauer(s, 3.0, 0.9), Error);
  EXPECT_NO_THROW(make_double_hofbauer(s, 2.0, 3.0));
  EXPECT_THROW(make_double_hofbauer(s, 2.0, 3.0, true), Error);
  EXPECT_THROW(make_double_hofbauer(make_finite_alphabet({"a", "b", "c"}), 3.0, 2.0), Error);
}

TEST(Hofbauer, VariationBoundHolds) {
  const auto s = binary();
  const auto f = make_double_hofbauer(s, 3.0, 2.0);
  for (std::size_t k = 1; k <= 10; ++k)
    EXPECT_LE(variation_estimate(s, f, k).value, f.variation_bound(k) + 1e-14) << k;
}

TEST(Combinators, SumAndShift) {
  const auto s = binary();
  const auto f = make_random_table(s, 2, 1.0, 1);
  const auto g = make_random_table(s, 3, 1.0, 2);
  const auto h = sum(f, g);
  const auto fc = add_constant(f, 0.5);
  EXPECT_EQ(h.memory, 3u);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 30; ++t) {
    const auto x = random_config(rng, 2, 5);
    EXPECT_DOUBLE_EQ(h(x), f(x) + g(x));
    EXPECT_DOUBLE_EQ(fc(x), f(x) + 0.5);
    EXPECT_DOUBLE_EQ(scaled(g, -2.0)(x), -2.0 * g(x));
  }
}

TEST(Table, RejectsWrongSize) {
  const auto s = binary();
  EXPECT_THROW(make_table(s, 2, {1.0, 2.0, 3.0}), Error);
  const auto f = make_table(s, 2, {1.0, 2.0, 3.0, 4.0});
  EXPECT_EQ(f(Configuration({1, 0}, 0)), 3.0);
  EXPECT_EQ(f(Configuration({0}, 1)), 2.0);
}
