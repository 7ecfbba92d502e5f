#pragma once

// Σ-moments: finite rooted trees of Σ-types, interned in canonical form.
//
// A moment is stored as (root label, multiset of child moments). Children are
// kept sorted by their canonical encoding, so isomorphic moments intern to
// the same id and a child's id is always smaller than its parent's.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "itlc/errors.hpp"
#include "itlc/types.hpp"

namespace itlc {

using MomentId = std::uint32_t;

class MomentStore {
 public:
  explicit MomentStore(SigmaContext sigma) : sigma_(std::move(sigma)) {}

  const SigmaContext& sigma() const { return sigma_; }
  std::size_t size() const { return data_.size(); }

  TypeSet label(MomentId m) const { return data_[m].label; }
  const std::vector<MomentId>& children(MomentId m) const { return data_[m].children; }
  const std::string& encoding(MomentId m) const { return data_[m].encoding; }
  /// A single node has height 1.
  std::size_t height(MomentId m) const { return data_[m].height; }
  std::size_t node_count(MomentId m) const { return data_[m].nodes; }

  /// Interns (label, children) without checking moment conditions.
  MomentId intern(TypeSet label, std::vector<MomentId> children) {
    std::sort(children.begin(), children.end(), [&](MomentId a, MomentId b) {
      return data_[a].encoding < data_[b].encoding;
    });
    std::string enc = encode_label(label);
    enc += '(';
    std::size_t height = 1, nodes = 1;
    for (MomentId c : children) {
      enc += data_[c].encoding;
      height = std::max(height, data_[c].height + 1);
      nodes += data_[c].nodes;
    }
    enc += ')';
    if (auto it = by_encoding_.find(enc); it != by_encoding_.end()) return it->second;
    MomentId id = static_cast<MomentId>(data_.size());
    by_encoding_.emplace(enc, id);
    data_.push_back(Data{label, std::move(children), std::move(enc), height, nodes});
    return id;
  }

  std::optional<MomentId> find(const std::string& encoding) const {
    auto it = by_encoding_.find(encoding);
    if (it == by_encoding_.end()) return std::nullopt;
    return it->second;
  }

  /// Canonical order: fewer nodes first, then encoding.
  bool canonical_less(MomentId a, MomentId b) const {
    if (data_[a].nodes != data_[b].nodes) return data_[a].nodes < data_[b].nodes;
    return data_[a].encoding < data_[b].encoding;
  }

  /// Distinct submoments of m (m included), ascending by id.
  std::vector<MomentId> submoments(MomentId m) const {
    std::vector<MomentId> out;
    std::vector<MomentId> stack{m};
    while (!stack.empty()) {
      MomentId x = stack.back();
      stack.pop_back();
      out.push_back(x);
      for (MomentId c : data_[x].children) stack.push_back(c);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Memo tables; a store is meant to be used from one thread at a time.
  std::unordered_map<MomentId, bool>& irreducible_memo() const { return irreducible_memo_; }
  std::unordered_map<std::uint64_t, bool>& successor_memo() const { return successor_memo_; }

 private:
  struct Data {
    TypeSet label;
    std::vector<MomentId> children;
    std::string encoding;
    std::size_t height;
    std::size_t nodes;
  };

  static std::string encode_label(TypeSet t) {
    static const char* hex = "0123456789abcdef";
    std::uint64_t b = t.bits();
    if (b == 0) return "0";
    std::string s;
    while (b) {
      s += hex[b & 15];
      b >>= 4;
    }
    return std::string(s.rbegin(), s.rend());
  }

  SigmaContext sigma_;
  std::vector<Data> data_;
  std::unordered_map<std::string, MomentId> by_encoding_;
  mutable std::unordered_map<MomentId, bool> irreducible_memo_;
  mutable std::unordered_map<std::uint64_t, bool> successor_memo_;
};

/// A moment unfolded into explicit nodes, in preorder with canonical child
/// order. Node 0 is the root.
struct Tree {
  std::vector<TypeSet> label;
  std::vector<int> parent;  // root has -1
  std::vector<std::vector<int>> children;
  std::vector<MomentId> sub;  // interned submoment rooted at each node

  std::size_t size() const { return label.size(); }

  /// True when a is a descendant-or-self of b, i.e. a ≼ b.
  bool below(int a, int b) const {
    for (int x = a; x != -1; x = parent[x])
      if (x == b) return true;
    return false;
  }

  /// Nodes of ↓a (a included), in preorder.
  std::vector<int> down(int a) const {
    std::vector<int> out;
    std::vector<int> stack{a};
    while (!stack.empty()) {
      int x = stack.back();
      stack.pop_back();
      out.push_back(x);
      for (auto it = children[x].rbegin(); it != children[x].rend(); ++it) stack.push_back(*it);
    }
    return out;
  }
};

inline Tree expand(const MomentStore& store, MomentId m) {
  Tree t;
  auto rec = [&](auto&& self, MomentId x, int parent) -> int {
    int id = static_cast<int>(t.size());
    t.label.push_back(store.label(x));
    t.parent.push_back(parent);
    t.children.emplace_back();
    t.sub.push_back(x);
    for (MomentId c : store.children(x)) {
      int child = self(self, c, id);
      t.children[id].push_back(child);
    }
    return id;
  };
  rec(rec, m, -1);
  return t;
}

/// Interns the subtree of `t` at `node`, keeping only nodes with keep[x];
/// a kept node's parent becomes its nearest kept ancestor.
inline MomentId intern_restricted(MomentStore& store, const Tree& t, const std::vector<bool>& keep,
                                  int node) {
  std::vector<MomentId> kids;
  std::vector<int> stack(t.children[node].rbegin(), t.children[node].rend());
  while (!stack.empty()) {
    int x = stack.back();
    stack.pop_back();
    if (keep[x]) {
      kids.push_back(intern_restricted(store, t, keep, x));
    } else {
      for (auto it = t.children[x].rbegin(); it != t.children[x].rend(); ++it)
        stack.push_back(*it);
    }
  }
  return store.intern(t.label[node], std::move(kids));
}

/// First violated moment condition, or nullopt for a valid Σ-moment.
inline std::optional<std::string> moment_violation(const SigmaContext& sigma, const Tree& t) {
  for (std::size_t x = 0; x < t.size(); ++x) {
    if (!is_type(sigma, t.label[x]))
      return "node " + std::to_string(x) + " label " + sigma.format_set(t.label[x]) +
             " is not a type";
    if (t.parent[x] >= 0 && !t.label[t.parent[x]].subset_of(t.label[x]))
      return "label of node " + std::to_string(x) + " does not contain its parent's label";
  }
  for (std::size_t x = 0; x < t.size(); ++x) {
    for (std::size_t d : defects(sigma, t.label[x]).indices()) {
      bool revoked = false;
      for (int y : t.down(static_cast<int>(x)))
        if (y != static_cast<int>(x) && revokes(sigma, t.label[y], d)) revoked = true;
      if (!revoked)
        return "defect " + format(sigma[d]) + " of node " + std::to_string(x) + " is not revoked";
    }
  }
  return std::nullopt;
}

/// Reason (Φ, U) is not a kit, or nullopt.
inline std::optional<std::string> kit_violation(const MomentStore& store, TypeSet phi,
                                                const std::vector<MomentId>& kids) {
  const SigmaContext& sigma = store.sigma();
  if (!is_type(sigma, phi)) return "root label " + sigma.format_set(phi) + " is not a type";
  for (MomentId u : kids)
    if (!phi.subset_of(store.label(u)))
      return "root label is not contained in child " + sigma.format_set(store.label(u));
  for (std::size_t d : defects(sigma, phi).indices()) {
    bool ok = false;
    for (MomentId u : kids)
      if (!store.label(u).contains(d)) ok = true;
    if (!ok) return "defect " + format(sigma[d]) + " is not revoked by any child";
  }
  return std::nullopt;
}

/// The moment Φ*U. Children form a multiset; repeated ids give repeated subtrees.
inline MomentId graft(MomentStore& store, TypeSet phi, std::vector<MomentId> kids) {
  if (auto why = kit_violation(store, phi, kids)) throw KitError("not a kit: " + *why);
  return store.intern(phi, std::move(kids));
}

/// The restriction of m to ↓node, where node is a preorder index.
inline MomentId submoment(const MomentStore& store, MomentId m, std::size_t node) {
  Tree t = expand(store, m);
  if (node >= t.size()) throw std::out_of_range("moment has no node " + std::to_string(node));
  return t.sub[node];
}

// ---------------------------------------------------------------------------
// Reductions

/// Calls `visit(pi)` for every reduction π of t: idempotent, monotone and
/// label-preserving. Stops early when `visit` returns false.
template <class Visit>
void for_each_reduction(const Tree& t, Visit&& visit) {
  const int n = static_cast<int>(t.size());
  std::vector<int> pi(n, -1);
  // image_count[y]: how many assigned x have pi[x] == y with x != y.
  std::vector<int> image_count(n, 0);
  bool stop = false;

  auto rec = [&](auto&& self, int x) -> void {
    if (stop) return;
    if (x == n) {
      if (!visit(static_cast<const std::vector<int>&>(pi))) stop = true;
      return;
    }
    const int bound = t.parent[x] < 0 ? 0 : pi[t.parent[x]];
    auto fixed_forced = image_count[x] > 0;
    for (int y : t.down(bound)) {
      if (stop) return;
      if (t.label[y] != t.label[x]) continue;
      if (fixed_forced && y != x) continue;
      if (y != x) {
        // y must be a fixed point; if already decided otherwise, reject.
        if (y < x && pi[y] != y) continue;
      }
      pi[x] = y;
      if (y != x) ++image_count[y];
      self(self, x + 1);
      if (y != x) --image_count[y];
      pi[x] = -1;
    }
  };
  rec(rec, 0);
}

namespace detail {

inline bool has_equal_label_edge(const Tree& t) {
  for (std::size_t x = 1; x < t.size(); ++x)
    if (t.label[x] == t.label[t.parent[x]]) return true;
  return false;
}

inline bool has_isomorphic_siblings(const Tree& t) {
  for (const auto& kids : t.children)
    for (std::size_t i = 1; i < kids.size(); ++i)
      if (t.sub[kids[i]] == t.sub[kids[i - 1]]) return true;
  return false;
}

}  // namespace detail

/// True when the identity is the only reduction of t.
inline bool is_irreducible(const Tree& t) {
  if (detail::has_equal_label_edge(t) || detail::has_isomorphic_siblings(t)) return false;
  bool proper = false;
  for_each_reduction(t, [&](const std::vector<int>& pi) {
    for (std::size_t x = 0; x < pi.size(); ++x)
      if (pi[x] != static_cast<int>(x)) {
        proper = true;
        return false;
      }
    return true;
  });
  return !proper;
}

inline bool is_irreducible(const MomentStore& store, MomentId m) {
  auto& memo = store.irreducible_memo();
  if (auto it = memo.find(m); it != memo.end()) return it->second;
  bool r = is_irreducible(expand(store, m));
  memo.emplace(m, r);
  return r;
}

/// An irreducible reduct of m with the same root label: the canonically
/// least among the reducts of minimum size.
inline MomentId reduce(MomentStore& store, MomentId m) {
  Tree t = expand(store, m);
  std::vector<std::vector<bool>> images;
  std::size_t best_size = t.size();
  for_each_reduction(t, [&](const std::vector<int>& pi) {
    std::vector<bool> image(pi.size(), false);
    for (int y : pi) image[y] = true;
    std::size_t sz = static_cast<std::size_t>(std::count(image.begin(), image.end(), true));
    if (sz < best_size) {
      best_size = sz;
      images.clear();
    }
    if (sz == best_size) images.push_back(std::move(image));
    return true;
  });
  if (images.empty()) return m;
  std::optional<MomentId> best;
  for (const auto& image : images) {
    int root = 0;
    while (!image[root]) ++root;  // preorder: the image's greatest node comes first
    MomentId r = intern_restricted(store, t, image, root);
    if (!best || store.canonical_less(r, *best)) best = r;
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Temporal successors

/// v S w: some sensible continuous relation between the nodes of v and w
/// relates the roots. Computed as the greatest such relation.
inline bool temporal_successor(const MomentStore& store, MomentId v, MomentId w) {
  auto& memo = store.successor_memo();
  const std::uint64_t key = (std::uint64_t{v} << 32) | w;
  if (auto it = memo.find(key); it != memo.end()) return it->second;

  const SigmaContext& sigma = store.sigma();
  Tree a = expand(store, v);
  Tree b = expand(store, w);
  const std::size_t na = a.size(), nb = b.size();
  std::vector<std::vector<int>> down_a(na), down_b(nb);
  for (std::size_t x = 0; x < na; ++x) down_a[x] = a.down(static_cast<int>(x));
  for (std::size_t y = 0; y < nb; ++y) down_b[y] = b.down(static_cast<int>(y));

  std::vector<std::vector<char>> alive(na, std::vector<char>(nb, 0));
  for (std::size_t x = 0; x < na; ++x)
    for (std::size_t y = 0; y < nb; ++y) alive[x][y] = sensible_pair(sigma, a.label[x], b.label[y]);

  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t x = 0; x < na; ++x)
      for (std::size_t y = 0; y < nb; ++y) {
        if (!alive[x][y]) continue;
        for (int x2 : down_a[x]) {
          bool matched = false;
          for (int y2 : down_b[y])
            if (alive[x2][y2]) {
              matched = true;
              break;
            }
          if (!matched) {
            alive[x][y] = 0;
            changed = true;
            break;
          }
        }
      }
  }
  bool r = alive[0][0] != 0;
  memo.emplace(key, r);
  return r;
}

/// S_Σ restricted to a set of moments, as one bitset row per member.
///
/// Uses: v S w iff the roots are sensible and every child c of v has
/// c S w' for some submoment w' of w.
class SuccessorMatrix {
 public:
  SuccessorMatrix() = default;

  /// `ids` must be closed under submoments and sorted ascending.
  SuccessorMatrix(const MomentStore& store, std::vector<MomentId> ids) : ids_(std::move(ids)) {
    const std::size_t n = ids_.size();
    pos_.assign(store.size(), kAbsent);
    for (std::size_t i = 0; i < n; ++i) pos_[ids_[i]] = static_cast<std::uint32_t>(i);
    kids_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      for (MomentId c : store.children(ids_[i])) {
        if (pos_[c] == kAbsent) throw InvariantError("moment set is not closed under submoments");
        kids_[i].push_back(pos_[c]);
      }

    std::unordered_map<std::uint64_t, boost::dynamic_bitset<>> sensible_to;
    succ_.assign(n, boost::dynamic_bitset<>(n));
    std::vector<boost::dynamic_bitset<>> up(n);
    for (std::size_t i = 0; i < n; ++i) {
      const TypeSet phi = store.label(ids_[i]);
      auto it = sensible_to.find(phi.bits());
      if (it == sensible_to.end()) {
        boost::dynamic_bitset<> row(n);
        for (std::size_t j = 0; j < n; ++j)
          if (sensible_pair(store.sigma(), phi, store.label(ids_[j]))) row.set(j);
        it = sensible_to.emplace(phi.bits(), std::move(row)).first;
      }
      succ_[i] = it->second;
      for (std::uint32_t c : kids_[i]) succ_[i] &= up[c];
      up[i] = up_closure(succ_[i]);
    }
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<MomentId>& ids() const { return ids_; }
  bool contains(MomentId m) const { return m < pos_.size() && pos_[m] != kAbsent; }
  std::size_t position(MomentId m) const { return pos_.at(m); }

  bool successor(MomentId v, MomentId w) const { return succ_[pos_.at(v)].test(pos_.at(w)); }
  /// Row of successors by position.
  const boost::dynamic_bitset<>& row(std::size_t i) const { return succ_[i]; }
  const std::vector<std::uint32_t>& child_positions(std::size_t i) const { return kids_[i]; }

 private:
  static constexpr std::uint32_t kAbsent = 0xffffffffu;

  // Members having a submoment in x.
  boost::dynamic_bitset<> up_closure(const boost::dynamic_bitset<>& x) const {
    boost::dynamic_bitset<> out = x;
    if (x.none()) return out;
    for (std::size_t i = x.find_first(); i < ids_.size(); ++i) {
      if (out.test(i)) continue;
      for (std::uint32_t c : kids_[i])
        if (out.test(c)) {
          out.set(i);
          break;
        }
    }
    return out;
  }

  std::vector<MomentId> ids_;
  std::vector<std::uint32_t> pos_;
  std::vector<std::vector<std::uint32_t>> kids_;
  std::vector<boost::dynamic_bitset<>> succ_;
};

// ---------------------------------------------------------------------------
// Enumeration of irreducible moments

struct EnumerationCaps {
  std::size_t max_moments = 50000;
  /// 0 means #Σ+1.
  std::size_t max_height = 0;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  /// Polled during generation; returning true stops it.
  std::function<bool()> cancelled;
};

struct Irreducibles {
  MomentStore store;
  /// False when a cap or the deadline cut the enumeration short, or the
  /// caller stopped it between layers.
  bool complete = true;
  std::size_t layers = 0;
};

/// Irreducible Σ-moments whose node labels all satisfy `allowed`, generated
/// height by height. After each height, `after_layer(store, height)` may
/// return false to stop. The store contains only irreducible moments.
template <class Allowed, class AfterLayer>
Irreducibles enumerate_irreducibles(const SigmaContext& sigma, const EnumerationCaps& caps,
                                    Allowed&& allowed, AfterLayer&& after_layer) {
  Irreducibles out{MomentStore(sigma)};
  MomentStore& store = out.store;
  const std::vector<TypeSet> types = enumerate_types(sigma, allowed);
  const std::size_t max_height = caps.max_height ? caps.max_height : sigma.size() + 1;

  auto out_of_budget = [&] {
    if (store.size() >= caps.max_moments) return true;
    if (caps.cancelled && caps.cancelled()) return true;
    return caps.deadline && std::chrono::steady_clock::now() > *caps.deadline;
  };

  // Builds the tree Φ*U directly; children are interned irreducibles.
  auto candidate_tree = [&](TypeSet phi, const std::vector<MomentId>& kids) {
    Tree t;
    t.label.push_back(phi);
    t.parent.push_back(-1);
    t.children.emplace_back();
    t.sub.push_back(0);
    std::vector<MomentId> sorted = kids;
    std::sort(sorted.begin(), sorted.end(), [&](MomentId a, MomentId b) {
      return store.encoding(a) < store.encoding(b);
    });
    for (MomentId k : sorted) {
      Tree c = expand(store, k);
      const int offset = static_cast<int>(t.size());
      t.children[0].push_back(offset);
      for (std::size_t x = 0; x < c.size(); ++x) {
        t.label.push_back(c.label[x]);
        t.parent.push_back(c.parent[x] < 0 ? 0 : c.parent[x] + offset);
        std::vector<int> ch;
        for (int y : c.children[x]) ch.push_back(y + offset);
        t.children.push_back(std::move(ch));
        t.sub.push_back(c.sub[x]);
      }
    }
    return t;
  };

  std::size_t layer_begin = 0;
  for (std::size_t h = 1; h <= max_height; ++h) {
    const std::size_t prev_end = store.size();
    if (h == 1) {
      for (TypeSet phi : types) {
        if (out_of_budget()) {
          out.complete = false;
          return out;
        }
        if (defects(sigma, phi).empty()) store.intern(phi, {});
      }
    } else {
      for (TypeSet phi : types) {
        std::vector<MomentId> pool;
        for (MomentId m = 0; m < prev_end; ++m)
          if (phi.strict_subset_of(store.label(m))) pool.push_back(m);
        std::vector<MomentId> chosen;
        bool aborted = false;
        // Reducibility is inherited by supersets of a child set, so a
        // reducible prefix prunes the whole branch.
        auto dfs = [&](auto&& self, std::size_t from, bool has_top) -> void {
          for (std::size_t i = from; i < pool.size() && !aborted; ++i) {
            if (out_of_budget()) {
              aborted = true;
              return;
            }
            chosen.push_back(pool[i]);
            Tree t = candidate_tree(phi, chosen);
            if (is_irreducible(t)) {
              const bool top = has_top || pool[i] >= layer_begin;
              if (top && !kit_violation(store, phi, chosen)) {
                MomentId id = store.intern(phi, chosen);
                store.irreducible_memo().emplace(id, true);
              }
              self(self, i + 1, top);
            }
            chosen.pop_back();
          }
        };
        dfs(dfs, 0, false);
        if (aborted) {
          out.complete = false;
          return out;
        }
      }
    }
    if (store.size() == prev_end) break;
    out.layers = h;
    if (!after_layer(static_cast<const MomentStore&>(store), h)) {
      out.complete = false;
      return out;
    }
    layer_begin = prev_end;
  }
  return out;
}

template <class Allowed>
Irreducibles enumerate_irreducibles(const SigmaContext& sigma, const EnumerationCaps& caps,
                                    Allowed&& allowed) {
  return enumerate_irreducibles(sigma, caps, std::forward<Allowed>(allowed),
                                [](const MomentStore&, std::size_t) { return true; });
}

inline Irreducibles enumerate_irreducibles(const SigmaContext& sigma,
                                           const EnumerationCaps& caps = {}) {
  return enumerate_irreducibles(sigma, caps, [](TypeSet) { return true; });
}

}  // namespace itlc
