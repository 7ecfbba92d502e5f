#include <random>
#include <set>

#include <gtest/gtest.h>

#include "itlc/types.hpp"
#include "support.hpp"

namespace itlc {
namespace {

// Type conditions written against Formula values rather than indices.
bool oracle_is_type(const SigmaContext& sigma, TypeSet t) {
  auto in = [&](const Formula& f) { return t.contains(sigma.at(f)); };
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const Formula& f = sigma[i];
    const bool member = t.contains(i);
    switch (f.op()) {
      case Op::Bottom:
        if (member) return false;
        break;
      case Op::And:
        if (member != (in(f.left()) && in(f.right()))) return false;
        break;
      case Op::Or:
        if (member != (in(f.left()) || in(f.right()))) return false;
        break;
      case Op::Implies:
        if (member && in(f.left()) && !in(f.right())) return false;
        if (in(f.right()) && !member) return false;
        break;
      case Op::Eventually:
        if (in(f.body()) && !member) return false;
        break;
      default:
        break;
    }
  }
  return true;
}

std::vector<TypeSet> all_subsets(const SigmaContext& sigma) {
  std::vector<TypeSet> out;
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << sigma.size()); ++b) out.emplace_back(b);
  return out;
}

TEST(SigmaContext, RejectsMoreThan64Formulas) {
  std::string text = "p0";
  for (int i = 1; i < 40; ++i) text += " & p" + std::to_string(i);
  EXPECT_THROW(SigmaContext{parse(text)}, CapExceeded);
}

TEST(EnumerateTypes, Examples) {
  EXPECT_EQ(enumerate_types(SigmaContext(parse("p"))).size(), 2u);
  const SigmaContext ev(parse("<>p"));
  const auto types = enumerate_types(ev);
  const std::vector<TypeSet> expected{TypeSet{}, ev.set_of(std::vector<std::string>{"<>p"}),
                                      ev.set_of(std::vector<std::string>{"p", "<>p"})};
  EXPECT_EQ(types, expected);
}

TEST(EnumerateTypes, ContainsWorkedLabels) {
  const testing::WorkedExample ex;
  const auto types = enumerate_types(ex.sigma());
  for (TypeSet t : {ex.lu, ex.lv, ex.lw})
    EXPECT_NE(std::find(types.begin(), types.end(), t), types.end()) << ex.sigma().format_set(t);
}

TEST(EnumerateTypes, AgreesWithOracleOnRandomSigmas) {
  std::mt19937_64 rng(3);
  const std::vector<Op> ops{Op::And, Op::Or, Op::Implies, Op::Next, Op::Eventually, Op::Forall};
  for (int i = 0; i < 60; ++i) {
    const Formula f = testing::random_formula(rng, 4, {"p", "q"}, ops);
    const SigmaContext sigma(f);
    if (sigma.size() > 16) continue;
    std::vector<TypeSet> expected;
    for (TypeSet t : all_subsets(sigma))
      if (oracle_is_type(sigma, t)) expected.push_back(t);
    const auto got = enumerate_types(sigma);
    ASSERT_EQ(got, expected) << format(f);
    ASSERT_LE(got.size(), std::size_t{1} << sigma.size());
    for (TypeSet t : got) {
      ASSERT_TRUE(is_type(sigma, t));
      for (std::size_t imp : sigma.with_op(Op::Implies))
        if (t.contains(imp) && t.contains(sigma.left(imp))) {
          ASSERT_TRUE(t.contains(sigma.right(imp)));
        }
    }
  }
}

TEST(Defects, Examples) {
  const SigmaContext s(parse("p -> q"));
  EXPECT_EQ(defects(s, TypeSet{}), s.set_of(std::vector<std::string>{"p -> q"}));

  const testing::WorkedExample ex;
  EXPECT_EQ(defects(ex.sigma(), ex.lu), ex.sigma().set_of(std::vector<std::string>{"~<>p"}));
  EXPECT_TRUE(defects(ex.sigma(), ex.lv).empty());
}

TEST(Defects, MembersAreAbsentWithAbsentAntecedent) {
  const testing::WorkedExample ex;
  for (TypeSet t : enumerate_types(ex.sigma()))
    for (std::size_t d : defects(ex.sigma(), t).indices()) {
      EXPECT_EQ(ex.sigma().op(d), Op::Implies);
      EXPECT_FALSE(t.contains(d));
      EXPECT_FALSE(t.contains(ex.sigma().left(d)));
    }
}

TEST(SensiblePair, Examples) {
  const testing::WorkedExample ex;
  EXPECT_TRUE(sensible_pair(ex.sigma(), ex.lv, ex.lw));
  EXPECT_TRUE(sensible_pair(ex.sigma(), ex.lu, ex.lu));

  const SigmaContext s(parse("Xp"));
  const TypeSet xp = s.set_of(std::vector<std::string>{"Xp"});
  const TypeSet p = s.set_of(std::vector<std::string>{"p"});
  EXPECT_TRUE(sensible_pair(s, xp, p));
  EXPECT_FALSE(sensible_pair(s, xp, TypeSet{}));
}

TEST(SensiblePair, RejectsForeignBits) {
  const SigmaContext s(parse("p"));
  EXPECT_THROW(sensible_pair(s, TypeSet{0b10}, TypeSet{}), std::invalid_argument);
}

TEST(SensiblePair, EventualityPropagatesAndUniversalsAgree) {
  std::mt19937_64 rng(9);
  const std::vector<Op> ops{Op::And, Op::Or, Op::Implies, Op::Next, Op::Eventually, Op::Forall};
  for (int i = 0; i < 40; ++i) {
    const SigmaContext sigma(testing::random_formula(rng, 4, {"p", "q"}, ops));
    const auto types = enumerate_types(sigma);
    std::uniform_int_distribution<std::size_t> pick(0, types.size() - 1);
    for (int k = 0; k < 200; ++k) {
      const TypeSet a = types[pick(rng)], b = types[pick(rng)];
      if (!sensible_pair(sigma, a, b)) continue;
      EXPECT_EQ(a & forall_part(sigma), b & forall_part(sigma));
      for (std::size_t e : sigma.with_op(Op::Eventually))
        if (a.contains(e) && !a.contains(sigma.left(e)) && !b.contains(sigma.left(e))) {
          EXPECT_TRUE(b.contains(e));
        }
    }
  }
}

}  // namespace
}  // namespace itlc
