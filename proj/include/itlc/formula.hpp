#pragma once

// Formulas of the intuitionistic temporal language: AST, parser, printer and
// the syntactic transformations used by the decision procedure.
//
// Concrete grammar:
//   formula := impl
//   impl    := or ('->' impl)? | or '<->' or
//   or      := and ('|' and)*
//   and     := unary ('&' unary)*
//   unary   := ('~'|'X'|'<>'|'[]'|'A'|'E') unary | atom | '#' | '(' formula ')'
//   atom    := [a-z][a-zA-Z0-9_]*
// `~a` is sugar for `a -> #`, `a <-> b` for `(a -> b) & (b -> a)`.

#include <cctype>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "itlc/errors.hpp"

namespace itlc {

enum class Op : std::uint8_t {
  Bottom,
  Atom,
  And,
  Or,
  Implies,
  Next,
  Eventually,
  Henceforth,
  Forall,
  Exists,
};

constexpr bool is_binary(Op op) { return op == Op::And || op == Op::Or || op == Op::Implies; }

constexpr bool is_unary(Op op) {
  return op == Op::Next || op == Op::Eventually || op == Op::Henceforth || op == Op::Forall ||
         op == Op::Exists;
}

/// Immutable formula tree with structural equality. Copies share nodes.
class Formula {
 public:
  Formula() : Formula(bottom()) {}

  static Formula bottom() {
    static const Formula b{std::make_shared<const Node>(Node{Op::Bottom, {}, {}, {}, 0, 1})};
    return b;
  }
  static Formula atom(std::string name) {
    std::size_t h = std::hash<std::string>{}(name) ^ 0x9e3779b97f4a7c15ULL;
    return Formula{std::make_shared<const Node>(Node{Op::Atom, std::move(name), {}, {}, h, 1})};
  }
  static Formula conj(Formula a, Formula b) { return make(Op::And, std::move(a), b); }
  static Formula disj(Formula a, Formula b) { return make(Op::Or, std::move(a), b); }
  static Formula implies(Formula a, Formula b) {
    return make(Op::Implies, std::move(a), b);
  }
  static Formula neg(Formula a) { return implies(std::move(a), bottom()); }
  static Formula iff(const Formula& a, const Formula& b) {
    return conj(implies(a, b), implies(b, a));
  }
  static Formula next(Formula a) { return make(Op::Next, std::move(a), nullptr); }
  static Formula eventually(Formula a) { return make(Op::Eventually, std::move(a), nullptr); }
  static Formula henceforth(Formula a) { return make(Op::Henceforth, std::move(a), nullptr); }
  static Formula forall(Formula a) { return make(Op::Forall, std::move(a), nullptr); }
  static Formula exists(Formula a) { return make(Op::Exists, std::move(a), nullptr); }
  static Formula unary(Op op, Formula a) { return make(op, std::move(a), nullptr); }
  static Formula binary(Op op, Formula a, Formula b) {
    return make(op, std::move(a), b);
  }

  Op op() const { return node_->op; }
  const std::string& name() const { return node_->name; }
  /// Left operand of a binary node, or the operand of a unary node.
  const Formula& left() const { return *node_->left; }
  const Formula& right() const { return *node_->right; }
  const Formula& body() const { return *node_->left; }
  /// Number of AST nodes (not deduplicated).
  std::size_t node_count() const { return node_->count; }
  std::size_t hash() const { return node_->hash; }

  /// `a -> #`, printed as `~a`.
  bool is_negation() const { return op() == Op::Implies && right().op() == Op::Bottom; }

  friend bool operator==(const Formula& a, const Formula& b) {
    if (a.node_ == b.node_) return true;
    if (a.node_->hash != b.node_->hash) return false;
    return (a <=> b) == std::strong_ordering::equal;
  }

  friend std::strong_ordering operator<=>(const Formula& a, const Formula& b) {
    if (a.node_ == b.node_) return std::strong_ordering::equal;
    if (auto c = a.op() <=> b.op(); c != 0) return c;
    switch (a.op()) {
      case Op::Bottom:
        return std::strong_ordering::equal;
      case Op::Atom:
        return a.name() <=> b.name();
      case Op::And:
      case Op::Or:
      case Op::Implies:
        if (auto c = a.left() <=> b.left(); c != 0) return c;
        return a.right() <=> b.right();
      default:
        return a.body() <=> b.body();
    }
  }

 private:
  struct Node {
    Op op;
    std::string name;
    std::shared_ptr<const Formula> left;
    std::shared_ptr<const Formula> right;
    std::size_t hash;
    std::size_t count;
  };

  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static Formula make(Op op, Formula a, const Formula* b) {
    std::size_t h = static_cast<std::size_t>(op) * 0x100000001b3ULL;
    h ^= a.hash() + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    std::size_t count = 1 + a.node_count();
    std::shared_ptr<const Formula> r;
    if (b) {
      h ^= b->hash() + 0x7f4a7c159e3779b9ULL + (h << 6) + (h >> 2);
      count += b->node_count();
      r = std::make_shared<const Formula>(*b);
    }
    return Formula{std::make_shared<const Node>(
        Node{op, {}, std::make_shared<const Formula>(std::move(a)), std::move(r), h, count})};
  }
  static Formula make(Op op, Formula a, const Formula& b) { return make(op, std::move(a), &b); }

 private:
  std::shared_ptr<const Node> node_;
};

struct FormulaHash {
  std::size_t operator()(const Formula& f) const noexcept { return f.hash(); }
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

enum class Tok : std::uint8_t {
  End,
  Atom,
  Bottom,
  Not,
  Next,
  Eventually,
  Henceforth,
  Forall,
  Exists,
  And,
  Or,
  Implies,
  Iff,
  LParen,
  RParen,
};

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

inline std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto starts = [&](std::string_view lit) { return s.substr(i, lit.size()) == lit; };
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (c >= 'a' && c <= 'z') {
      ++i;
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      out.push_back({Tok::Atom, std::string(s.substr(start, i - start)), start});
      continue;
    }
    if (starts("<->")) {
      out.push_back({Tok::Iff, "<->", start});
      i += 3;
    } else if (starts("->")) {
      out.push_back({Tok::Implies, "->", start});
      i += 2;
    } else if (starts("<>")) {
      out.push_back({Tok::Eventually, "<>", start});
      i += 2;
    } else if (starts("[]")) {
      out.push_back({Tok::Henceforth, "[]", start});
      i += 2;
    } else {
      Tok k;
      switch (c) {
        case '#': k = Tok::Bottom; break;
        case '~': k = Tok::Not; break;
        case 'X': k = Tok::Next; break;
        case 'A': k = Tok::Forall; break;
        case 'E': k = Tok::Exists; break;
        case '&': k = Tok::And; break;
        case '|': k = Tok::Or; break;
        case '(': k = Tok::LParen; break;
        case ')': k = Tok::RParen; break;
        default:
          throw ParseError("unknown token '" + std::string(1, static_cast<char>(c)) + "'", start);
      }
      out.push_back({k, std::string(1, static_cast<char>(c)), start});
      ++i;
    }
  }
  out.push_back({Tok::End, "", s.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

  Formula parse_all() {
    Formula f = impl();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    return f;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, peek().pos); }

  Formula impl() {
    Formula lhs = disj();
    if (peek().kind == Tok::Implies) {
      take();
      return Formula::implies(std::move(lhs), impl());
    }
    if (peek().kind == Tok::Iff) {
      take();
      Formula rhs = disj();
      return Formula::iff(lhs, rhs);
    }
    return lhs;
  }

  Formula disj() {
    Formula f = conj();
    while (peek().kind == Tok::Or) {
      take();
      f = Formula::disj(std::move(f), conj());
    }
    return f;
  }

  Formula conj() {
    Formula f = unary();
    while (peek().kind == Tok::And) {
      take();
      f = Formula::conj(std::move(f), unary());
    }
    return f;
  }

  Formula unary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Not: take(); return Formula::neg(unary());
      case Tok::Next: take(); return Formula::next(unary());
      case Tok::Eventually: take(); return Formula::eventually(unary());
      case Tok::Henceforth: take(); return Formula::henceforth(unary());
      case Tok::Forall: take(); return Formula::forall(unary());
      case Tok::Exists: take(); return Formula::exists(unary());
      case Tok::Bottom: take(); return Formula::bottom();
      case Tok::Atom: return Formula::atom(take().text);
      case Tok::LParen: {
        take();
        Formula f = impl();
        if (peek().kind != Tok::RParen) fail("expected ')'");
        take();
        return f;
      }
      case Tok::End: fail("unexpected end of input");
      default: fail("unexpected '" + t.text + "'");
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Formula parse(std::string_view text) { return detail::Parser(text).parse_all(); }

// ---------------------------------------------------------------------------
// Printing

namespace detail {

// Binding strength; larger binds tighter.
enum Level : int { kImpl = 1, kOr = 2, kAnd = 3, kUnary = 4 };

inline bool is_iff(const Formula& f) {
  if (f.op() != Op::And || f.left().op() != Op::Implies || f.right().op() != Op::Implies)
    return false;
  const Formula& l = f.left();
  const Formula& r = f.right();
  return l.left() == r.right() && l.right() == r.left() && !l.is_negation() &&
         !r.is_negation();
}

inline int level_of(const Formula& f) {
  switch (f.op()) {
    case Op::Implies: return f.is_negation() ? kUnary : kImpl;
    case Op::Or: return kOr;
    case Op::And: return is_iff(f) ? kImpl : kAnd;
    default: return kUnary;
  }
}

inline void print(const Formula& f, int min_level, std::string& out) {
  const bool paren = level_of(f) < min_level;
  if (paren) out += '(';
  switch (f.op()) {
    case Op::Bottom: out += '#'; break;
    case Op::Atom: out += f.name(); break;
    case Op::Next: out += 'X'; print(f.body(), kUnary, out); break;
    case Op::Eventually: out += "<>"; print(f.body(), kUnary, out); break;
    case Op::Henceforth: out += "[]"; print(f.body(), kUnary, out); break;
    case Op::Forall: out += 'A'; print(f.body(), kUnary, out); break;
    case Op::Exists: out += 'E'; print(f.body(), kUnary, out); break;
    case Op::Implies:
      if (f.is_negation()) {
        out += '~';
        print(f.left(), kUnary, out);
      } else {
        print(f.left(), kOr, out);
        out += " -> ";
        print(f.right(), kImpl, out);
      }
      break;
    case Op::Or:
      print(f.left(), kOr, out);
      out += " | ";
      print(f.right(), kAnd, out);
      break;
    case Op::And:
      if (is_iff(f)) {
        print(f.left().left(), kOr, out);
        out += " <-> ";
        print(f.left().right(), kOr, out);
      } else {
        print(f.left(), kAnd, out);
        out += " & ";
        print(f.right(), kUnary, out);
      }
      break;
  }
  if (paren) out += ')';
}

}  // namespace detail

/// Prints with the fewest parentheses that parse back to the same tree.
inline std::string format(const Formula& f) {
  std::string out;
  detail::print(f, detail::kImpl, out);
  return out;
}

// ---------------------------------------------------------------------------
// Syntactic transformations

/// Distinct subformulas in post-order of first occurrence.
inline std::vector<Formula> subformulas(const Formula& f) {
  std::vector<Formula> out;
  std::unordered_set<Formula, FormulaHash> seen;
  std::function<void(const Formula&)> walk = [&](const Formula& g) {
    if (seen.count(g)) return;
    if (is_binary(g.op())) {
      walk(g.left());
      walk(g.right());
    } else if (is_unary(g.op())) {
      walk(g.body());
    }
    if (seen.insert(g).second) out.push_back(g);
  };
  walk(f);
  return out;
}

/// Rewrites every `E a` as `~A~a`, innermost first.
inline Formula eliminate_exists(const Formula& f) {
  switch (f.op()) {
    case Op::Bottom:
    case Op::Atom:
      return f;
    case Op::Exists:
      return Formula::neg(Formula::forall(Formula::neg(eliminate_exists(f.body()))));
    case Op::And:
    case Op::Or:
    case Op::Implies:
      return Formula::binary(f.op(), eliminate_exists(f.left()), eliminate_exists(f.right()));
    default:
      return Formula::unary(f.op(), eliminate_exists(f.body()));
  }
}

namespace detail {

// Classical target language: ⊥, atoms, ∧, ∨, →, ■, ∘, ◊, □, ∀, ∃.
inline void print_classical(const Formula& f, int min_level, std::string& out);

inline void classical_box(const Formula& f, std::string& out) {
  out += "■";
  print_classical(f, kUnary, out);
}

inline void print_classical(const Formula& f, int min_level, std::string& out) {
  auto unary = [&](const char* sym) {
    out += sym;
    print_classical(f.body(), kUnary, out);
  };
  auto wrap = [&](int level, auto&& body) {
    const bool paren = level < min_level;
    if (paren) out += '(';
    body();
    if (paren) out += ')';
  };
  switch (f.op()) {
    case Op::Bottom: out += "⊥"; break;
    case Op::Atom: out += "■"; out += f.name(); break;
    case Op::Next: unary("∘"); break;
    case Op::Eventually: unary("◊"); break;
    case Op::Forall: unary("∀"); break;
    case Op::Exists: unary("∃"); break;
    case Op::Henceforth:
      // (□a)■ = ■□(a■)
      out += "■□";
      print_classical(f.body(), kUnary, out);
      break;
    case Op::Implies:
      // (a ⇒ b)■ = ■(a■ → b■)
      out += "■(";
      print_classical(f.left(), kOr, out);
      out += " → ";
      print_classical(f.right(), kImpl, out);
      out += ')';
      break;
    case Op::Or:
      wrap(kOr, [&] {
        print_classical(f.left(), kOr, out);
        out += " ∨ ";
        print_classical(f.right(), kAnd, out);
      });
      break;
    case Op::And:
      wrap(kAnd, [&] {
        print_classical(f.left(), kAnd, out);
        out += " ∧ ";
        print_classical(f.right(), kUnary, out);
      });
      break;
  }
}

}  // namespace detail

/// Gödel–Tarski translation into the classical language with an interior
/// modality ■, rendered as text. Atoms and implications acquire a ■.
inline std::string godel_tarski(const Formula& f) {
  std::string out;
  detail::print_classical(f, detail::kImpl, out);
  return out;
}

// ---------------------------------------------------------------------------
// Fragments

/// Set of modalities occurring in a formula. Booleans and implication are
/// always allowed and not recorded.
class Fragment {
 public:
  constexpr Fragment() = default;
  constexpr Fragment(std::initializer_list<Op> ops) {
    for (Op op : ops) insert(op);
  }

  constexpr void insert(Op op) {
    if (is_unary(op)) mask_ |= bit(op);
  }
  constexpr bool contains(Op op) const { return (mask_ & bit(op)) != 0; }
  constexpr bool subset_of(Fragment other) const { return (mask_ & ~other.mask_) == 0; }
  constexpr bool empty() const { return mask_ == 0; }
  friend constexpr bool operator==(Fragment, Fragment) = default;

  std::vector<Op> modalities() const {
    std::vector<Op> out;
    for (Op op : {Op::Next, Op::Eventually, Op::Henceforth, Op::Forall, Op::Exists})
      if (contains(op)) out.push_back(op);
    return out;
  }

 private:
  static constexpr std::uint16_t bit(Op op) {
    return static_cast<std::uint16_t>(1u << static_cast<unsigned>(op));
  }
  std::uint16_t mask_ = 0;
};

/// The decidable fragment: next, eventually and the universal modality.
inline constexpr Fragment kDecidableFragment{Op::Next, Op::Eventually, Op::Forall};

inline Fragment fragment_of(const Formula& f) {
  Fragment frag;
  for (const Formula& g : subformulas(f)) frag.insert(g.op());
  return frag;
}

inline const char* modality_name(Op op) {
  switch (op) {
    case Op::Next: return "X";
    case Op::Eventually: return "<>";
    case Op::Henceforth: return "[]";
    case Op::Forall: return "A";
    case Op::Exists: return "E";
    default: return "?";
  }
}

}  // namespace itlc
