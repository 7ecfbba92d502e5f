#pragma once

// Finite Alexandroff dynamical systems: a finite poset with the down-set
// topology and a monotone self-map. Point sets are 64-bit masks.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "itlc/errors.hpp"
#include "itlc/formula.hpp"

namespace itlc {

using PointSet = std::uint64_t;

inline PointSet singleton(std::size_t x) { return PointSet{1} << x; }
inline bool has_point(PointSet s, std::size_t x) { return (s >> x) & 1u; }
inline std::size_t point_count(PointSet s) { return static_cast<std::size_t>(std::popcount(s)); }

class FiniteSystem {
 public:
  static constexpr std::size_t kMaxPoints = 64;

  FiniteSystem() = default;

  /// `down[x]` is ↓x (x included); `map[x]` is f(x). Not validated; see
  /// system_violation.
  FiniteSystem(std::vector<PointSet> down, std::vector<std::size_t> map,
               std::vector<std::string> names = {})
      : down_(std::move(down)), map_(std::move(map)), names_(std::move(names)) {
    if (down_.size() > kMaxPoints) throw CapExceeded("system has more than 64 points");
    if (map_.size() != down_.size()) throw std::invalid_argument("map size differs from order");
    if (names_.empty())
      for (std::size_t i = 0; i < down_.size(); ++i) names_.push_back(std::to_string(i));
    up_.assign(down_.size(), 0);
    for (std::size_t x = 0; x < down_.size(); ++x)
      for (std::size_t y = 0; y < down_.size(); ++y)
        if (has_point(down_[y], x)) up_[x] |= singleton(y);
  }

  /// Builds from pairs (a, b) meaning a ≼ b; adds reflexivity and the
  /// transitive closure, then rejects cycles and non-monotone maps.
  static FiniteSystem from_pairs(std::vector<std::string> names,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& leq,
                                 std::vector<std::size_t> map) {
    const std::size_t n = names.size();
    if (n > kMaxPoints) throw CapExceeded("system has more than 64 points");
    if (map.size() != n) throw SchemaError("map: expected one entry per element");
    for (std::size_t x = 0; x < n; ++x)
      if (map[x] >= n) throw SchemaError("map: image of " + names[x] + " is not an element");
    std::vector<PointSet> down(n);
    for (std::size_t x = 0; x < n; ++x) down[x] = singleton(x);
    for (auto [a, b] : leq) down[b] |= singleton(a);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t x = 0; x < n; ++x)
        if (has_point(down[x], k)) down[x] |= down[k];
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        if (has_point(down[b], a) && has_point(down[a], b))
          throw SchemaError("order: (" + names[a] + ", " + names[b] +
                            ") violates antisymmetry");
    FiniteSystem s(std::move(down), std::move(map), std::move(names));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (s.leq(a, b) && !s.leq(s.f(a), s.f(b)))
          throw SchemaError("map: not monotone on (" + s.name(a) + ", " + s.name(b) + ")");
    return s;
  }

  std::size_t size() const { return down_.size(); }
  PointSet all() const { return size() == 64 ? ~PointSet{0} : singleton(size()) - 1; }
  bool leq(std::size_t a, std::size_t b) const { return has_point(down_[b], a); }
  PointSet down(std::size_t x) const { return down_[x]; }
  PointSet up(std::size_t x) const { return up_[x]; }
  std::size_t f(std::size_t x) const { return map_[x]; }
  const std::vector<std::size_t>& map() const { return map_; }
  const std::vector<PointSet>& down_sets() const { return down_; }
  const std::string& name(std::size_t x) const { return names_[x]; }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    return std::nullopt;
  }

  PointSet preimage(PointSet s) const {
    PointSet out = 0;
    for (std::size_t x = 0; x < size(); ++x)
      if (has_point(s, map_[x])) out |= singleton(x);
    return out;
  }

  bool is_open(PointSet s) const {
    for (std::size_t x = 0; x < size(); ++x)
      if (has_point(s, x) && (down_[x] & ~s)) return false;
    return true;
  }

  friend bool operator==(const FiniteSystem& a, const FiniteSystem& b) {
    return a.down_ == b.down_ && a.map_ == b.map_ && a.names_ == b.names_;
  }

 private:
  std::vector<PointSet> down_;
  std::vector<PointSet> up_;
  std::vector<std::size_t> map_;
  std::vector<std::string> names_;
};

using Valuation = std::map<std::string, PointSet>;

inline bool is_reflexive(const FiniteSystem& s) {
  for (std::size_t x = 0; x < s.size(); ++x)
    if (!s.leq(x, x)) return false;
  return true;
}

inline bool is_antisymmetric(const FiniteSystem& s) {
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b)
      if (a != b && s.leq(a, b) && s.leq(b, a)) return false;
  return true;
}

inline bool is_transitive(const FiniteSystem& s) {
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b)
      for (std::size_t c = 0; c < s.size(); ++c)
        if (s.leq(a, b) && s.leq(b, c) && !s.leq(a, c)) return false;
  return true;
}

inline bool is_monotone(const FiniteSystem& s) {
  for (std::size_t a = 0; a < s.size(); ++a) {
    if (s.f(a) >= s.size()) return false;
    for (std::size_t b = 0; b < s.size(); ++b)
      if (s.leq(a, b) && !s.leq(s.f(a), s.f(b))) return false;
  }
  return true;
}

inline std::optional<std::string> system_violation(const FiniteSystem& s) {
  if (!is_reflexive(s)) return "order is not reflexive";
  if (!is_antisymmetric(s)) return "order is not antisymmetric";
  if (!is_transitive(s)) return "order is not transitive";
  if (!is_monotone(s)) return "map is not monotone";
  return std::nullopt;
}

/// Largest open subset: {x : ↓x ⊆ S}.
inline PointSet interior(const FiniteSystem& s, PointSet set) {
  PointSet out = 0;
  for (std::size_t x = 0; x < s.size(); ++x)
    if ((s.down(x) & ~set) == 0) out |= singleton(x);
  return out;
}

/// Smallest closed superset: the upward closure.
inline PointSet closure(const FiniteSystem& s, PointSet set) {
  PointSet out = 0;
  for (std::size_t x = 0; x < s.size(); ++x)
    if (s.down(x) & set) out |= singleton(x);
  return out;
}

/// Truth set of f. Every atom of f must be in `val`.
inline PointSet evaluate(const FiniteSystem& s, const Valuation& val, const Formula& f) {
  const PointSet all = s.all();
  switch (f.op()) {
    case Op::Bottom:
      return 0;
    case Op::Atom: {
      auto it = val.find(f.name());
      if (it == val.end()) throw std::invalid_argument("valuation has no atom '" + f.name() + "'");
      return it->second & all;
    }
    case Op::And:
      return evaluate(s, val, f.left()) & evaluate(s, val, f.right());
    case Op::Or:
      return evaluate(s, val, f.left()) | evaluate(s, val, f.right());
    case Op::Implies: {
      const PointSet a = evaluate(s, val, f.left());
      const PointSet b = evaluate(s, val, f.right());
      return interior(s, (all & ~a) | b);
    }
    case Op::Next:
      return s.preimage(evaluate(s, val, f.body()));
    case Op::Eventually: {
      const PointSet a = evaluate(s, val, f.body());
      PointSet x = a;
      for (PointSet next = a | s.preimage(x); next != x; next = a | s.preimage(x)) x = next;
      return x;
    }
    case Op::Henceforth: {
      const PointSet a = evaluate(s, val, f.body());
      PointSet x = a;
      for (PointSet next = a & s.preimage(x); next != x; next = a & s.preimage(x)) x = next;
      return interior(s, x);
    }
    case Op::Forall:
      return evaluate(s, val, f.body()) == all ? all : 0;
    case Op::Exists:
      return evaluate(s, val, f.body()) != 0 ? all : 0;
  }
  throw InvariantError("unknown operator");
}

inline void collect_atoms(const Formula& f, std::set<std::string>& out) {
  if (f.op() == Op::Atom) {
    out.insert(f.name());
  } else if (is_binary(f.op())) {
    collect_atoms(f.left(), out);
    collect_atoms(f.right(), out);
  } else if (is_unary(f.op())) {
    collect_atoms(f.body(), out);
  }
}

inline std::vector<std::string> atoms_of(const Formula& f) {
  std::set<std::string> s;
  collect_atoms(f, s);
  return {s.begin(), s.end()};
}

/// All open (downward closed) sets, ascending as masks.
inline std::vector<PointSet> open_sets(const FiniteSystem& s) {
  // Visit points bottom-up so that x can join once everything below it has.
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return point_count(s.down(a)) < point_count(s.down(b));
  });
  std::vector<PointSet> out;
  auto rec = [&](auto&& self, std::size_t k, PointSet in) -> void {
    if (k == order.size()) {
      out.push_back(in);
      return;
    }
    const std::size_t x = order[k];
    self(self, k + 1, in);
    if ((s.down(x) & ~singleton(x) & ~in) == 0) self(self, k + 1, in | singleton(x));
  };
  rec(rec, 0, 0);
  std::sort(out.begin(), out.end());
  return out;
}

struct Falsification {
  Valuation valuation;
  std::size_t point;
};

inline constexpr std::size_t kDefaultValuationCap = std::size_t{1} << 20;

/// First valuation (in lexicographic order over sorted atoms and ascending
/// open sets) under which f fails somewhere, with the least failing point.
inline std::optional<Falsification> find_falsifying_valuation(
    const FiniteSystem& s, const Formula& f, std::size_t cap = kDefaultValuationCap) {
  const std::vector<std::string> atoms = atoms_of(f);
  const std::vector<PointSet> opens = open_sets(s);
  double total = 1;
  for (std::size_t i = 0; i < atoms.size(); ++i) total *= static_cast<double>(opens.size());
  if (total > static_cast<double>(cap))
    throw CapExceeded("valuation count " + std::to_string(static_cast<long double>(total)) +
                      " exceeds cap " + std::to_string(cap));
  std::vector<std::size_t> choice(atoms.size(), 0);
  Valuation val;
  while (true) {
    for (std::size_t i = 0; i < atoms.size(); ++i) val[atoms[i]] = opens[choice[i]];
    const PointSet missing = s.all() & ~evaluate(s, val, f);
    if (missing) return Falsification{val, static_cast<std::size_t>(std::countr_zero(missing))};
    std::size_t i = atoms.size();
    while (i > 0) {
      --i;
      if (++choice[i] < opens.size()) break;
      choice[i] = 0;
      if (i == 0) return std::nullopt;
    }
    if (atoms.empty()) return std::nullopt;
  }
}

inline bool is_valid_on_system(const FiniteSystem& s, const Formula& f,
                               std::size_t cap = kDefaultValuationCap) {
  return !find_falsifying_valuation(s, f, cap).has_value();
}

// ---------------------------------------------------------------------------
// Generation

namespace detail {

// Canonical key of (order, map) under relabelling: least over all
// permutations of the relabelled (down masks, map) sequence.
inline std::vector<std::uint64_t> canonical_key(const FiniteSystem& s) {
  const std::size_t n = s.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::uint64_t> best;
  do {
    // perm[new] = old
    std::vector<std::size_t> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[perm[i]] = i;
    std::vector<std::uint64_t> key;
    for (std::size_t i = 0; i < n; ++i) {
      PointSet d = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (s.leq(perm[j], perm[i])) d |= singleton(j);
      key.push_back(d);
    }
    for (std::size_t i = 0; i < n; ++i) key.push_back(inv[s.f(perm[i])]);
    if (best.empty() || key < best) best = std::move(key);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace detail

inline constexpr std::size_t kDefaultMaxEnumeratedPoints = 4;

/// Calls `visit(system)` for every labelled system on n points: orders by
/// increasing strict-relation bitmask, then maps in lexicographic order.
/// With `dedup`, only the first system of each isomorphism class is
/// visited. Returning false from `visit` stops the enumeration.
template <class Visit>
void for_each_system(std::size_t n, bool dedup, Visit&& visit,
                     std::size_t max_points = kDefaultMaxEnumeratedPoints) {
  if (n == 0) throw std::invalid_argument("systems need at least one point");
  if (n > max_points)
    throw CapExceeded("enumeration of " + std::to_string(n) + "-point systems exceeds cap " +
                      std::to_string(max_points));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (a, b): a ≼ b, a != b
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b) pairs.emplace_back(a, b);
  std::set<std::vector<std::uint64_t>> seen;
  for (std::uint64_t rel = 0; rel < (std::uint64_t{1} << pairs.size()); ++rel) {
    std::vector<PointSet> down(n);
    for (std::size_t x = 0; x < n; ++x) down[x] = singleton(x);
    for (std::size_t k = 0; k < pairs.size(); ++k)
      if ((rel >> k) & 1u) down[pairs[k].second] |= singleton(pairs[k].first);
    FiniteSystem order(down, std::vector<std::size_t>(n, 0));
    if (!is_antisymmetric(order) || !is_transitive(order)) continue;
    std::vector<std::size_t> map(n, 0);
    while (true) {
      FiniteSystem s(down, map);
      if (is_monotone(s)) {
        bool fresh = true;
        if (dedup) fresh = seen.insert(detail::canonical_key(s)).second;
        if (fresh && !visit(static_cast<const FiniteSystem&>(s))) return;
      }
      std::size_t i = n;
      while (i > 0) {
        --i;
        if (++map[i] < n) break;
        map[i] = 0;
        if (i == 0) goto next_relation;
      }
    }
  next_relation:;
  }
}

inline std::vector<FiniteSystem> enumerate_systems(
    std::size_t n, bool dedup = false, std::size_t max_points = kDefaultMaxEnumeratedPoints) {
  std::vector<FiniteSystem> out;
  for_each_system(
      n, dedup,
      [&](const FiniteSystem& s) {
        out.push_back(s);
        return true;
      },
      max_points);
  return out;
}

struct Countermodel {
  FiniteSystem system;
  Valuation valuation;
  std::size_t point;
};

/// First falsifying (system, valuation, point) over systems of 1..max_points
/// points; systems with three or more points are taken up to isomorphism.
inline std::optional<Countermodel> find_countermodel(const Formula& f, std::size_t max_points,
                                                     std::size_t valuation_cap =
                                                         kDefaultValuationCap) {
  std::optional<Countermodel> found;
  for (std::size_t n = 1; n <= max_points && !found; ++n) {
    for_each_system(
        n, n >= 3,
        [&](const FiniteSystem& s) {
          if (auto fal = find_falsifying_valuation(s, f, valuation_cap)) {
            found = Countermodel{s, fal->valuation, fal->point};
            return false;
          }
          return true;
        },
        std::max(max_points, kDefaultMaxEnumeratedPoints));
  }
  return found;
}

/// Deterministic in (n, seed). The map is sampled top-down so that each
/// point's image lies below the images of all points above it; if the
/// sweep gets stuck it is retried, and a constant map is the last resort.
inline FiniteSystem random_system(std::size_t n, std::uint64_t seed) {
  if (n == 0 || n > FiniteSystem::kMaxPoints)
    throw std::invalid_argument("random_system needs 1..64 points");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution edge(0.35);
  std::vector<PointSet> down(n);
  for (std::size_t x = 0; x < n; ++x) down[x] = singleton(x);
  // Edges only from lower to higher index: acyclic.
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t a = 0; a < b; ++a)
      if (edge(rng)) down[b] |= singleton(a);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t a = 0; a < b; ++a)
      if (has_point(down[b], a)) down[b] |= down[a];
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<PointSet> relabelled(n, 0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t a = 0; a < n; ++a)
      if (has_point(down[b], a)) relabelled[perm[b]] |= singleton(perm[a]);

  FiniteSystem order(relabelled, std::vector<std::size_t>(n, 0));
  std::vector<std::size_t> sweep(n);
  std::iota(sweep.begin(), sweep.end(), 0);
  std::stable_sort(sweep.begin(), sweep.end(), [&](std::size_t a, std::size_t b) {
    return point_count(order.up(a)) < point_count(order.up(b));
  });
  for (int attempt = 0; attempt < 32; ++attempt) {
    std::vector<std::size_t> map(n, 0);
    bool ok = true;
    for (std::size_t x : sweep) {
      PointSet allowed = order.all();
      for (std::size_t y = 0; y < n; ++y)
        if (y != x && order.leq(x, y)) allowed &= order.down(map[y]);
      if (!allowed) {
        ok = false;
        break;
      }
      std::vector<std::size_t> options;
      for (std::size_t z = 0; z < n; ++z)
        if (has_point(allowed, z)) options.push_back(z);
      map[x] = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
    }
    if (ok) return FiniteSystem(relabelled, map);
  }
  const std::size_t c = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  return FiniteSystem(relabelled, std::vector<std::size_t>(n, c));
}

inline Valuation random_valuation(const FiniteSystem& s, const std::vector<std::string>& atoms,
                                  std::mt19937_64& rng) {
  Valuation v;
  for (const std::string& a : atoms) {
    PointSet raw = 0;
    for (std::size_t x = 0; x < s.size(); ++x)
      if (std::bernoulli_distribution(0.5)(rng)) raw |= singleton(x);
    v[a] = interior(s, raw);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Dynamical properties

struct Analysis {
  bool minimal;
  bool recurrent;
  bool connected;
  friend bool operator==(const Analysis&, const Analysis&) = default;
};

inline PointSet orbit(const FiniteSystem& s, std::size_t x) {
  PointSet seen = 0;
  while (!has_point(seen, x)) {
    seen |= singleton(x);
    x = s.f(x);
  }
  return seen;
}

/// Every orbit is dense.
inline bool is_minimal(const FiniteSystem& s) {
  for (std::size_t x = 0; x < s.size(); ++x)
    if (closure(s, orbit(s, x)) != s.all()) return false;
  return true;
}

/// Every principal open ↓x contains a point that returns to ↓x.
inline bool is_recurrent(const FiniteSystem& s) {
  for (std::size_t x = 0; x < s.size(); ++x) {
    bool found = false;
    for (std::size_t y = 0; y < s.size() && !found; ++y) {
      if (!s.leq(y, x)) continue;
      std::size_t z = y;
      for (std::size_t k = 1; k <= s.size() && !found; ++k) {
        z = s.f(z);
        if (s.leq(z, x)) found = true;
      }
    }
    if (!found) return false;
  }
  return true;
}

/// The comparability graph is connected.
inline bool is_connected(const FiniteSystem& s) {
  PointSet reached = singleton(0), frontier = reached;
  while (frontier) {
    PointSet next = 0;
    for (std::size_t x = 0; x < s.size(); ++x)
      if (has_point(frontier, x)) next |= s.down(x) | s.up(x);
    frontier = next & ~reached;
    reached |= next;
  }
  return reached == s.all();
}

inline Analysis analyze(const FiniteSystem& s) {
  return {is_minimal(s), is_recurrent(s), is_connected(s)};
}

}  // namespace itlc
