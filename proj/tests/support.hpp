#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "itlc/formula.hpp"
#include "itlc/moments.hpp"
#include "itlc/quasimodel.hpp"
#include "itlc/types.hpp"

namespace itlc::testing {

inline const char* const kFlagship = "A(~p | <>p) -> ~<>p | <>p";

/// Random formula of depth at most `depth` over the given atoms and operators.
inline Formula random_formula(std::mt19937_64& rng, int depth, const std::vector<std::string>& atoms,
                              const std::vector<Op>& ops) {
  std::uniform_int_distribution<int> coin(0, 3);
  if (depth == 0 || coin(rng) == 0) {
    std::uniform_int_distribution<std::size_t> pick(0, atoms.size());
    const std::size_t i = pick(rng);
    return i == atoms.size() ? Formula::bottom() : Formula::atom(atoms[i]);
  }
  std::uniform_int_distribution<std::size_t> pick_op(0, ops.size() - 1);
  const Op op = ops[pick_op(rng)];
  if (is_binary(op)) {
    Formula a = random_formula(rng, depth - 1, atoms, ops);
    Formula b = random_formula(rng, depth - 1, atoms, ops);
    return Formula::binary(op, a, b);
  }
  return Formula::unary(op, random_formula(rng, depth - 1, atoms, ops));
}

inline const std::vector<Op>& all_ops() {
  static const std::vector<Op> ops{Op::And,  Op::Or,         Op::Implies,    Op::Next,
                                   Op::Eventually, Op::Henceforth, Op::Forall, Op::Exists};
  return ops;
}

/// The three labels and moments of the worked falsifying quasimodel.
struct WorkedExample {
  std::shared_ptr<MomentStore> store;
  TypeSet lu, lv, lw;
  MomentId mu, mv, mw;

  WorkedExample() : store(std::make_shared<MomentStore>(SigmaContext(parse(kFlagship)))) {
    const SigmaContext& s = store->sigma();
    lu = s.set_of(std::vector<std::string>{"A(~p | <>p)", "~p | <>p", "~p"});
    lv = s.set_of(std::vector<std::string>{"<>p", "~p", "~p | <>p", kFlagship, "~<>p | <>p",
                                           "A(~p | <>p)"});
    lw = s.set_of(std::vector<std::string>{"p", "~p | <>p", kFlagship, "~<>p | <>p",
                                           "A(~p | <>p)", "<>p"});
    mv = graft(*store, lv, {});
    mw = graft(*store, lw, {});
    mu = graft(*store, lu, {mv});
  }

  const SigmaContext& sigma() const { return store->sigma(); }

  /// Worlds in the order (m_u, m_v, m_w) with the four drawn edges.
  Quasimodel quasimodel() const {
    Quasimodel q{store, {mu, mv, mw}, {{0, 0}, {1, 1}, {1, 2}, {2, 2}}, {}};
    q.profile.insert(sigma().at(parse("A(~p | <>p)")));
    return q;
  }
};

}  // namespace itlc::testing
