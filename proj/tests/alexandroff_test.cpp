#include <random>

#include <gtest/gtest.h>

#include "itlc/alexandroff.hpp"
#include "itlc/json_io.hpp"
#include "support.hpp"

namespace itlc {
namespace {

Model fixture() { return load_system(ITLC_FIXTURE_DIR "/minimal5.json"); }

PointSet points(const FiniteSystem& s, std::initializer_list<const char*> names) {
  PointSet out = 0;
  for (const char* n : names) out |= singleton(*s.index_of(n));
  return out;
}

FiniteSystem antichain2() { return FiniteSystem({0b01, 0b10}, {0, 1}); }
FiniteSystem chain2() { return FiniteSystem({0b01, 0b11}, {0, 1}); }

// Down-closed subsets by direct filtering of all subsets.
std::vector<PointSet> opens_by_filter(const FiniteSystem& s) {
  std::vector<PointSet> out;
  for (PointSet x = 0; x <= s.all(); ++x)
    if (s.is_open(x)) out.push_back(x);
  return out;
}

TEST(Fixture, LoadsAndPassesInvariants) {
  const Model m = fixture();
  EXPECT_EQ(m.system.size(), 5u);
  EXPECT_FALSE(system_violation(m.system));
  EXPECT_EQ(m.valuation.at("p"), points(m.system, {"y", "z"}));
  EXPECT_EQ(m.valuation.at("q"), points(m.system, {"z"}));
}

TEST(Interior, Examples) {
  const FiniteSystem& s = fixture().system;
  EXPECT_EQ(interior(s, s.all()), s.all());
  EXPECT_EQ(interior(s, 0), 0u);
  EXPECT_EQ(interior(s, points(s, {"v", "w", "x"})), points(s, {"v", "w"}));
}

TEST(Closure, Examples) {
  const FiniteSystem& s = fixture().system;
  EXPECT_EQ(closure(s, 0), 0u);
  EXPECT_EQ(closure(s, points(s, {"w"})), points(s, {"w", "v"}));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const FiniteSystem r = random_system(6, rng());
    const PointSet x = rng() & r.all();
    const PointSet c = closure(r, x);
    EXPECT_EQ(c & x, x);
    EXPECT_EQ(c, r.all() & ~interior(r, r.all() & ~x));
  }
}

TEST(Evaluate, FixtureExamples) {
  const Model m = fixture();
  const FiniteSystem& s = m.system;
  const PointSet t = evaluate(s, m.valuation, parse("(Xp -> Xq) -> X(p -> q)"));
  EXPECT_FALSE(has_point(t, *s.index_of("v")));
  EXPECT_EQ(evaluate(s, m.valuation, parse("<>p")), s.all());
  EXPECT_THROW(evaluate(s, m.valuation, parse("r")), std::invalid_argument);
}

TEST(Evaluate, AlwaysOpen) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 300; ++i) {
    const FiniteSystem s = random_system(1 + i % 6, rng());
    const Valuation v = random_valuation(s, {"p", "q"}, rng);
    const Formula f = testing::random_formula(rng, 4, {"p", "q"}, testing::all_ops());
    EXPECT_TRUE(s.is_open(evaluate(s, v, f))) << format(f);
  }
}

TEST(Evaluate, ExistentialFragmentAgreesOnDenseInvariantOpen) {
  const FiniteSystem s = chain2();
  const Valuation a{{"p", 0b11}, {"q", 0}}, b{{"p", 0b01}, {"q", 0}};
  std::mt19937_64 rng(4);
  const std::vector<Op> ops{Op::And,  Op::Or,         Op::Implies, Op::Next,
                            Op::Eventually, Op::Henceforth, Op::Exists};
  for (int i = 0; i < 2000; ++i) {
    const Formula f = testing::random_formula(rng, 3, {"p", "q"}, ops);
    EXPECT_EQ(has_point(evaluate(s, a, f), 0), has_point(evaluate(s, b, f), 0)) << format(f);
  }
  EXPECT_NE(has_point(evaluate(s, a, parse("Ap")), 0), has_point(evaluate(s, b, parse("Ap")), 0));
}

TEST(OpenSets, MatchFilteredSubsets) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const FiniteSystem s = random_system(1 + i % 7, rng());
    auto got = open_sets(s);
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, opens_by_filter(s));
  }
}

TEST(Validity, Examples) {
  const FiniteSystem& s = fixture().system;
  EXPECT_TRUE(is_valid_on_system(s, parse("p -> p")));
  EXPECT_TRUE(is_valid_on_system(s, parse("Ep -> <>p")));
  EXPECT_FALSE(is_valid_on_system(antichain2(), parse("Ep -> <>p")));
  const auto fal = find_falsifying_valuation(antichain2(), parse("Ep -> <>p"));
  ASSERT_TRUE(fal);
  EXPECT_EQ(point_count(fal->valuation.at("p")), 1u);
}

TEST(Validity, CapIsEnforced) {
  const FiniteSystem s = antichain2();
  EXPECT_THROW(find_falsifying_valuation(s, parse("p & q & r"), 10), CapExceeded);
}

TEST(Countermodel, Examples) {
  EXPECT_FALSE(find_countermodel(parse("p -> p"), 3));
  const auto cm = find_countermodel(parse("Xp -> p"), 2);
  ASSERT_TRUE(cm);
  EXPECT_LE(cm->system.size(), 2u);
  EXPECT_FALSE(has_point(evaluate(cm->system, cm->valuation, parse("Xp -> p")), cm->point));
}

TEST(Countermodel, FlagshipHasNoneUpToFourPoints) {
  EXPECT_FALSE(find_countermodel(parse(testing::kFlagship), 4));
}

TEST(Analyze, Examples) {
  const Analysis one = analyze(FiniteSystem({1}, {0}));
  EXPECT_TRUE(one.minimal && one.recurrent && one.connected);

  const Analysis fix = analyze(fixture().system);
  EXPECT_TRUE(fix.minimal);
  EXPECT_TRUE(fix.recurrent);
  EXPECT_FALSE(fix.connected);

  const Analysis chain = analyze(chain2());
  EXPECT_FALSE(chain.minimal);
  EXPECT_TRUE(chain.recurrent);
  EXPECT_TRUE(chain.connected);
}

TEST(RandomSystem, Contract) {
  const FiniteSystem one = random_system(1, 99);
  EXPECT_EQ(one.f(0), 0u);
  EXPECT_EQ(random_system(5, 3), random_system(5, 3));
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const FiniteSystem s = random_system(6, seed);
    ASSERT_FALSE(system_violation(s)) << seed;
  }
}

TEST(EnumerateSystems, Counts) {
  EXPECT_EQ(enumerate_systems(1).size(), 1u);
  const auto two = enumerate_systems(2);
  EXPECT_EQ(two.size(), 10u);
  for (const FiniteSystem& s : enumerate_systems(3)) EXPECT_FALSE(system_violation(s));
  EXPECT_LT(enumerate_systems(3, true).size(), enumerate_systems(3).size());
  EXPECT_THROW(enumerate_systems(5), CapExceeded);
}

TEST(EnumerateSystems, LabelledCountMatchesBruteForce) {
  // Every (relation, map) pair filtered by the poset and monotonicity checks.
  for (std::size_t n = 1; n <= 3; ++n) {
    std::size_t expected = 0;
    const std::size_t bits = n * n;
    for (std::uint64_t rel = 0; rel < (std::uint64_t{1} << bits); ++rel) {
      std::vector<PointSet> down(n, 0);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          if ((rel >> (a * n + b)) & 1u) down[b] |= singleton(a);
      std::vector<std::size_t> map(n, 0);
      std::size_t total = 1;
      for (std::size_t i = 0; i < n; ++i) total *= n;
      for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i, c /= n) map[i] = c % n;
        const FiniteSystem s(down, map);
        if (is_reflexive(s) && is_antisymmetric(s) && is_transitive(s) && is_monotone(s))
          ++expected;
      }
    }
    EXPECT_EQ(enumerate_systems(n).size(), expected) << n;
  }
}

TEST(FromPairs, Errors) {
  try {
    FiniteSystem::from_pairs({"a", "b"}, {{0, 1}, {1, 0}}, {0, 1});
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("(a, b)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(FiniteSystem::from_pairs({"a", "b"}, {{0, 1}}, {1, 0}), SchemaError);
  EXPECT_THROW(FiniteSystem::from_pairs({"a"}, {}, {3}), SchemaError);
}

}  // namespace
}  // namespace itlc
