#pragma once

// Σ-types: membership sets over a fixed subformula-closed set Σ, plus
// defects and sensible pairs.

#include <algorithm>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "itlc/formula.hpp"

namespace itlc {

/// Membership set over Σ indices. Σ never has more than 64 formulas.
class TypeSet {
 public:
  constexpr TypeSet() = default;
  constexpr explicit TypeSet(std::uint64_t bits) : bits_(bits) {}

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool contains(std::size_t i) const { return (bits_ >> i) & 1u; }
  constexpr void insert(std::size_t i) { bits_ |= std::uint64_t{1} << i; }
  constexpr void erase(std::size_t i) { bits_ &= ~(std::uint64_t{1} << i); }
  constexpr bool empty() const { return bits_ == 0; }
  std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }

  constexpr bool subset_of(TypeSet o) const { return (bits_ & ~o.bits_) == 0; }
  constexpr bool strict_subset_of(TypeSet o) const { return subset_of(o) && bits_ != o.bits_; }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::uint64_t b = bits_; b != 0; b &= b - 1)
      out.push_back(static_cast<std::size_t>(std::countr_zero(b)));
    return out;
  }

  friend constexpr TypeSet operator|(TypeSet a, TypeSet b) { return TypeSet(a.bits_ | b.bits_); }
  friend constexpr TypeSet operator&(TypeSet a, TypeSet b) { return TypeSet(a.bits_ & b.bits_); }
  friend constexpr bool operator==(TypeSet, TypeSet) = default;
  friend constexpr auto operator<=>(TypeSet, TypeSet) = default;

 private:
  std::uint64_t bits_ = 0;
};

/// Set of implications of Σ, by index.
using DefectSet = TypeSet;

/// A subformula-closed set of formulas with a fixed index order.
class SigmaContext {
 public:
  static constexpr std::size_t kMaxSize = 64;

  SigmaContext() = default;

  /// sub(f), indexed in post-order of first occurrence.
  explicit SigmaContext(const Formula& f) : SigmaContext(std::vector<Formula>{f}) {}

  /// Union of sub(f) over `roots`, in order.
  explicit SigmaContext(const std::vector<Formula>& roots) {
    for (const Formula& r : roots)
      for (const Formula& g : subformulas(r))
        if (!index_.count(g)) add(g);
  }

  std::size_t size() const { return formulas_.size(); }
  const Formula& operator[](std::size_t i) const { return formulas_[i]; }
  const std::vector<Formula>& formulas() const { return formulas_; }

  std::optional<std::size_t> index_of(const Formula& f) const {
    auto it = index_.find(f);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const Formula& f) const { return index_.count(f) != 0; }
  std::size_t at(const Formula& f) const {
    auto i = index_of(f);
    if (!i) throw std::out_of_range("formula not in sigma: " + format(f));
    return *i;
  }

  Op op(std::size_t i) const { return entries_[i].op; }
  /// Index of the left operand (binary) or the body (unary).
  std::size_t left(std::size_t i) const { return entries_[i].left; }
  std::size_t right(std::size_t i) const { return entries_[i].right; }

  const std::vector<std::size_t>& with_op(Op op) const {
    return by_op_[static_cast<std::size_t>(op)];
  }

  /// All indices as a set.
  TypeSet all() const {
    return TypeSet(size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << size()) - 1);
  }

  TypeSet set_of(const std::vector<Formula>& fs) const {
    TypeSet t;
    for (const Formula& f : fs) t.insert(at(f));
    return t;
  }
  TypeSet set_of(const std::vector<std::string>& texts) const {
    TypeSet t;
    for (const std::string& s : texts) t.insert(at(parse(s)));
    return t;
  }

  std::string format_set(TypeSet t) const {
    std::string out = "{";
    bool first = true;
    for (std::size_t i : t.indices()) {
      if (!first) out += ", ";
      first = false;
      out += format(formulas_[i]);
    }
    return out + "}";
  }

  friend bool operator==(const SigmaContext& a, const SigmaContext& b) {
    return a.formulas_ == b.formulas_;
  }

 private:
  struct Entry {
    Op op;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  void add(const Formula& g) {
    if (formulas_.size() == kMaxSize)
      throw CapExceeded("sigma has more than " + std::to_string(kMaxSize) + " formulas");
    Entry e{g.op()};
    if (is_binary(g.op())) {
      e.left = index_.at(g.left());
      e.right = index_.at(g.right());
    } else if (is_unary(g.op())) {
      e.left = index_.at(g.body());
    }
    std::size_t i = formulas_.size();
    index_.emplace(g, i);
    formulas_.push_back(g);
    entries_.push_back(e);
    by_op_[static_cast<std::size_t>(g.op())].push_back(i);
  }

  std::vector<Formula> formulas_;
  std::vector<Entry> entries_;
  std::unordered_map<Formula, std::size_t, FormulaHash> index_;
  std::vector<std::size_t> by_op_[10];
};

/// The type conditions, checked one formula at a time.
inline bool is_type(const SigmaContext& sigma, TypeSet t) {
  if (!t.subset_of(sigma.all())) return false;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const bool in = t.contains(i);
    switch (sigma.op(i)) {
      case Op::Bottom:
        if (in) return false;
        break;
      case Op::And:
        if (in != (t.contains(sigma.left(i)) && t.contains(sigma.right(i)))) return false;
        break;
      case Op::Or:
        if (in != (t.contains(sigma.left(i)) || t.contains(sigma.right(i)))) return false;
        break;
      case Op::Implies:
        if (in && t.contains(sigma.left(i)) && !t.contains(sigma.right(i))) return false;
        if (t.contains(sigma.right(i)) && !in) return false;
        break;
      case Op::Eventually:
        if (t.contains(sigma.left(i)) && !in) return false;
        break;
      default:
        break;
    }
  }
  return true;
}

/// All Σ-types, sorted numerically. When `allowed` is given, only types
/// for which it returns true are kept.
template <class Pred>
std::vector<TypeSet> enumerate_types(const SigmaContext& sigma, Pred&& allowed) {
  std::vector<TypeSet> out;
  const std::size_t n = sigma.size();
  // Operands precede their parents in Σ, so each membership is either
  // forced by earlier choices or free.
  auto rec = [&](auto&& self, std::size_t i, TypeSet t) -> void {
    if (i == n) {
      if (allowed(t)) out.push_back(t);
      return;
    }
    auto branch = [&](bool in) {
      TypeSet u = t;
      if (in) u.insert(i);
      self(self, i + 1, u);
    };
    switch (sigma.op(i)) {
      case Op::Bottom:
        branch(false);
        return;
      case Op::And:
        branch(t.contains(sigma.left(i)) && t.contains(sigma.right(i)));
        return;
      case Op::Or:
        branch(t.contains(sigma.left(i)) || t.contains(sigma.right(i)));
        return;
      case Op::Implies:
        if (t.contains(sigma.right(i))) {
          branch(true);
        } else if (t.contains(sigma.left(i))) {
          branch(false);
        } else {
          branch(false);
          branch(true);
        }
        return;
      case Op::Eventually:
        if (t.contains(sigma.left(i))) {
          branch(true);
        } else {
          branch(false);
          branch(true);
        }
        return;
      default:
        branch(false);
        branch(true);
        return;
    }
  };
  rec(rec, 0, TypeSet{});
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<TypeSet> enumerate_types(const SigmaContext& sigma) {
  return enumerate_types(sigma, [](TypeSet) { return true; });
}

/// Implications φ⇒ψ ∈ Σ with φ⇒ψ ∉ Φ and φ ∉ Φ.
inline DefectSet defects(const SigmaContext& sigma, TypeSet phi) {
  DefectSet out;
  for (std::size_t i : sigma.with_op(Op::Implies))
    if (!phi.contains(i) && !phi.contains(sigma.left(i))) out.insert(i);
  return out;
}

/// True when a node labelled `t` revokes the implication at index `imp`.
inline bool revokes(const SigmaContext& sigma, TypeSet t, std::size_t imp) {
  return t.contains(sigma.left(imp)) && !t.contains(sigma.right(imp));
}

/// Whether Ψ may label the temporal successor of a point labelled Φ.
inline bool sensible_pair(const SigmaContext& sigma, TypeSet phi, TypeSet psi) {
  if (!phi.subset_of(sigma.all()) || !psi.subset_of(sigma.all()))
    throw std::invalid_argument("type does not belong to this sigma");
  for (std::size_t i : sigma.with_op(Op::Next))
    if (phi.contains(i) != psi.contains(sigma.left(i))) return false;
  for (std::size_t i : sigma.with_op(Op::Eventually))
    if (phi.contains(i) != (phi.contains(sigma.left(i)) || psi.contains(i))) return false;
  for (std::size_t i : sigma.with_op(Op::Forall))
    if (phi.contains(i) != psi.contains(i)) return false;
  return true;
}

/// The ∀-formulas of Σ as a set.
inline TypeSet forall_part(const SigmaContext& sigma) {
  TypeSet t;
  for (std::size_t i : sigma.with_op(Op::Forall)) t.insert(i);
  return t;
}

}  // namespace itlc
