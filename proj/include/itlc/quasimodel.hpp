#pragma once

// Quasimodels over irreducible moments: the validity decision procedure,
// falsification certificates and their verification, realizing paths, and
// extraction of a quasimodel from a finite model.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "itlc/alexandroff.hpp"
#include "itlc/errors.hpp"
#include "itlc/formula.hpp"
#include "itlc/moments.hpp"
#include "itlc/types.hpp"

namespace itlc {

/// Outcome of a structural check. Converts to true on success.
struct CheckResult {
  bool ok = true;
  std::string diagnostic;

  explicit operator bool() const { return ok; }
  static CheckResult pass() { return {}; }
  static CheckResult fail(std::string why) { return {false, std::move(why)}; }
};

/// Worlds are moments of `store`; edges and lassos refer to world indices.
struct Quasimodel {
  std::shared_ptr<MomentStore> store;
  std::vector<MomentId> worlds;
  std::vector<std::pair<std::size_t, std::size_t>> s_edges;
  /// The ∀-formulas present in every label.
  TypeSet profile;

  const SigmaContext& sigma() const { return store->sigma(); }
  TypeSet label(std::size_t w) const { return store->label(worlds[w]); }

  std::optional<std::size_t> index_of(MomentId m) const {
    for (std::size_t i = 0; i < worlds.size(); ++i)
      if (worlds[i] == m) return i;
    return std::nullopt;
  }

  std::vector<std::vector<std::size_t>> successors() const {
    std::vector<std::vector<std::size_t>> out(worlds.size());
    for (auto [a, b] : s_edges) out[a].push_back(b);
    for (auto& row : out) {
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    return out;
  }
};

/// Strict submoment pairs (a, b): world a is a proper submoment of world b.
inline std::vector<std::pair<std::size_t, std::size_t>> submoment_order(const Quasimodel& q) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::map<MomentId, std::size_t> index;
  for (std::size_t i = 0; i < q.worlds.size(); ++i) index.emplace(q.worlds[i], i);
  for (std::size_t b = 0; b < q.worlds.size(); ++b)
    for (MomentId s : q.store->submoments(q.worlds[b]))
      if (s != q.worlds[b])
        if (auto it = index.find(s); it != index.end()) out.emplace_back(it->second, b);
  std::sort(out.begin(), out.end());
  return out;
}

/// Sorts `ids` canonically and attaches the S_Σ edges among them.
/// `ids` must be closed under submoments.
inline Quasimodel restrict_to(std::shared_ptr<MomentStore> store, std::vector<MomentId> ids,
                              TypeSet profile) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  SuccessorMatrix sm(*store, ids);
  Quasimodel q{store, ids, {}, profile};
  std::sort(q.worlds.begin(), q.worlds.end(),
            [&](MomentId a, MomentId b) { return store->canonical_less(a, b); });
  for (std::size_t a = 0; a < q.worlds.size(); ++a)
    for (std::size_t b = 0; b < q.worlds.size(); ++b)
      if (sm.successor(q.worlds[a], q.worlds[b])) q.s_edges.emplace_back(a, b);
  return q;
}

/// Checks every quasimodel condition directly, independent of how the
/// edges were produced.
inline CheckResult check_quasimodel(const Quasimodel& q) {
  const SigmaContext& sigma = q.sigma();
  const MomentStore& store = *q.store;
  const std::size_t n = q.worlds.size();
  if (n == 0) return CheckResult::fail("no worlds");

  std::map<MomentId, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i)
    if (!index.emplace(q.worlds[i], i).second)
      return CheckResult::fail("world " + std::to_string(i) + " is listed twice");

  for (std::size_t i = 0; i < n; ++i) {
    if (auto why = moment_violation(sigma, expand(store, q.worlds[i])))
      return CheckResult::fail("world " + std::to_string(i) + " is not a moment: " + *why);
    for (MomentId c : store.children(q.worlds[i]))
      if (!index.count(c))
        return CheckResult::fail("downward closure: a submoment of world " + std::to_string(i) +
                                 " is not a world");
  }

  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (auto [a, b] : q.s_edges) {
    if (a >= n || b >= n) return CheckResult::fail("edge refers to an unknown world");
    if (!sensible_pair(sigma, q.label(a), q.label(b)))
      return CheckResult::fail("edge " + std::to_string(a) + " -> " + std::to_string(b) +
                               " is not sensible");
    edges.emplace(a, b);
  }
  for (auto [a, b] : edges) {
    std::vector<MomentId> below_b = store.submoments(q.worlds[b]);
    for (MomentId v : store.submoments(q.worlds[a])) {
      const std::size_t vi = index.at(v);
      bool ok = false;
      for (MomentId w : below_b)
        if (edges.count({vi, index.at(w)})) {
          ok = true;
          break;
        }
      if (!ok)
        return CheckResult::fail("continuity: edge " + std::to_string(a) + " -> " +
                                 std::to_string(b) + " has no edge from submoment world " +
                                 std::to_string(vi) + " into a submoment of " +
                                 std::to_string(b));
    }
  }

  const auto succ = q.successors();
  for (std::size_t i = 0; i < n; ++i)
    if (succ[i].empty()) return CheckResult::fail("seriality: world " + std::to_string(i));

  for (std::size_t e : sigma.with_op(Op::Eventually)) {
    const std::size_t body = sigma.left(e);
    std::vector<char> reach(n, 0);
    for (std::size_t i = 0; i < n; ++i) reach[i] = q.label(i).contains(body);
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t i = 0; i < n; ++i)
        if (!reach[i])
          for (std::size_t j : succ[i])
            if (reach[j]) {
              reach[i] = 1;
              changed = true;
              break;
            }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (q.label(i).contains(e) && !reach[i])
        return CheckResult::fail("omega-sensibility: " + format(sigma[e]) + " in world " +
                                 std::to_string(i) + " is never realized");
  }

  for (std::size_t a : sigma.with_op(Op::Forall)) {
    const std::size_t body = sigma.left(a);
    bool all_a = true, all_body = true;
    for (std::size_t i = 0; i < n; ++i) {
      all_a = all_a && q.label(i).contains(a);
      all_body = all_body && q.label(i).contains(body);
    }
    if (all_a != all_body) return CheckResult::fail("honesty: " + format(sigma[a]));
  }
  const TypeSet forall = forall_part(sigma);
  for (std::size_t i = 0; i < n; ++i)
    if ((q.label(i) & forall) != q.profile)
      return CheckResult::fail("profile: world " + std::to_string(i) +
                               " disagrees on universal formulas");
  return CheckResult::pass();
}

// ---------------------------------------------------------------------------
// Realizing paths

struct Lasso {
  std::vector<std::size_t> prefix;
  std::vector<std::size_t> loop;
  friend bool operator==(const Lasso&, const Lasso&) = default;
};

/// An ultimately periodic s-path from w0 realizing every eventuality along
/// it. Pending eventualities are served round-robin, each by a shortest path;
/// ties go to the least world index.
inline Lasso build_realizing_path(const Quasimodel& q, std::size_t w0) {
  const SigmaContext& sigma = q.sigma();
  const std::size_t n = q.worlds.size();
  const auto succ = q.successors();
  const std::vector<std::size_t>& evs = sigma.with_op(Op::Eventually);
  const std::size_t k = evs.size();
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();

  // dist[j][w]: steps from w to a world containing the body of evs[j].
  std::vector<std::vector<std::size_t>> dist(k, std::vector<std::size_t>(n, kInf));
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t body = sigma.left(evs[j]);
    for (std::size_t w = 0; w < n; ++w)
      if (q.label(w).contains(body)) dist[j][w] = 0;
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t w = 0; w < n; ++w)
        for (std::size_t v : succ[w])
          if (dist[j][v] != kInf && dist[j][v] + 1 < dist[j][w]) {
            dist[j][w] = dist[j][v] + 1;
            changed = true;
          }
    }
  }

  auto pending = [&](std::size_t w, std::size_t j) {
    return q.label(w).contains(evs[j]) && !q.label(w).contains(sigma.left(evs[j]));
  };

  // State: (world, index from which the round-robin search resumes).
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
  std::vector<std::size_t> path;
  std::size_t w = w0, cursor = 0;
  while (true) {
    auto key = std::make_pair(w, cursor);
    if (auto it = seen.find(key); it != seen.end()) {
      Lasso l;
      l.prefix.assign(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(it->second));
      l.loop.assign(path.begin() + static_cast<std::ptrdiff_t>(it->second), path.end());
      return l;
    }
    seen.emplace(key, path.size());
    path.push_back(w);
    if (succ[w].empty()) throw InvariantError("world without successor on a realizing path");

    std::optional<std::size_t> target;
    for (std::size_t s = 0; s < k && !target; ++s) {
      const std::size_t j = (cursor + s) % k;
      if (pending(w, j)) target = j;
    }
    if (!target) {
      w = succ[w].front();
      continue;
    }
    const std::size_t j = *target;
    if (dist[j][w] == kInf) throw InvariantError("eventuality cannot be realized");
    std::size_t next = kInf;
    for (std::size_t v : succ[w])
      if (dist[j][v] + 1 == dist[j][w]) {
        next = v;
        break;
      }
    if (next == kInf) throw InvariantError("no successor on a shortest realizing path");
    w = next;
    cursor = dist[j][next] == 0 ? (j + 1) % k : j;
  }
}

/// Given an s-path w0..wn and v0 below w0, an s-path v0..vn with each vi
/// below wi, choosing the least world index at every step.
inline std::vector<std::size_t> complete_path_below(const Quasimodel& q,
                                                    const std::vector<std::size_t>& path,
                                                    std::size_t v0) {
  if (path.empty()) throw std::invalid_argument("empty path");
  const auto succ = q.successors();
  auto below = [&](std::size_t a, std::size_t b) {
    const auto subs = q.store->submoments(q.worlds[b]);
    return std::binary_search(subs.begin(), subs.end(), q.worlds[a]);
  };
  if (!below(v0, path[0])) throw std::invalid_argument("start world is not below the path");
  for (std::size_t i = 0; i + 1 < path.size(); ++i)
    if (!std::binary_search(succ[path[i]].begin(), succ[path[i]].end(), path[i + 1]))
      throw std::invalid_argument("path is not an s-path");
  std::vector<std::size_t> out{v0};
  for (std::size_t i = 1; i < path.size(); ++i) {
    std::optional<std::size_t> next;
    for (std::size_t v : succ[out.back()])
      if (below(v, path[i])) {
        next = v;
        break;
      }
    if (!next) throw InvariantError("edge relation is not continuous");
    out.push_back(*next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pruning

enum class RuleOrder { Forward, Reverse };

struct PruneResult {
  SuccessorMatrix matrix;
  /// By matrix position.
  boost::dynamic_bitset<> alive;

  std::vector<MomentId> survivors() const {
    std::vector<MomentId> out;
    for (std::size_t i = alive.find_first(); i < alive.size(); i = alive.find_next(i))
      out.push_back(matrix.ids()[i]);
    return out;
  }
};

/// Types allowed under a universal profile A: agree with A on the
/// ∀-formulas and contain the body of each member of A.
inline bool fits_profile(const SigmaContext& sigma, TypeSet profile, TypeSet t) {
  if ((t & forall_part(sigma)) != profile) return false;
  for (std::size_t a : profile.indices())
    if (!t.contains(sigma.left(a))) return false;
  return true;
}

/// Greatest subset of all moments in `store` that fits the profile, is
/// closed under submoments, serial under S_Σ, and realizes every
/// eventuality along S_Σ inside the subset. `store` must hold a
/// submoment-closed set of moments.
inline PruneResult prune_profile(const MomentStore& store, TypeSet profile,
                                 RuleOrder order = RuleOrder::Forward) {
  const SigmaContext& sigma = store.sigma();
  std::vector<MomentId> ids(store.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<MomentId>(i);
  PruneResult r{SuccessorMatrix(store, ids), boost::dynamic_bitset<>(ids.size())};
  const std::size_t n = ids.size();
  boost::dynamic_bitset<>& alive = r.alive;

  for (std::size_t i = 0; i < n; ++i) {
    bool ok = fits_profile(sigma, profile, store.label(ids[i]));
    for (std::uint32_t c : r.matrix.child_positions(i)) ok = ok && alive.test(c);
    alive[i] = ok;
  }

  auto downward = [&] {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i)
      if (alive.test(i))
        for (std::uint32_t c : r.matrix.child_positions(i))
          if (!alive.test(c)) {
            alive.reset(i);
            changed = true;
            break;
          }
    return changed;
  };
  auto serial = [&] {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i)
      if (alive.test(i) && !r.matrix.row(i).intersects(alive)) {
        alive.reset(i);
        changed = true;
      }
    return changed;
  };
  auto eventual = [&] {
    bool changed = false;
    for (std::size_t e : sigma.with_op(Op::Eventually)) {
      const std::size_t body = sigma.left(e);
      boost::dynamic_bitset<> reach(n);
      for (std::size_t i = 0; i < n; ++i)
        if (alive.test(i) && store.label(ids[i]).contains(body)) reach.set(i);
      for (bool grew = true; grew;) {
        grew = false;
        for (std::size_t i = 0; i < n; ++i)
          if (alive.test(i) && !reach.test(i) && r.matrix.row(i).intersects(reach)) {
            reach.set(i);
            grew = true;
          }
      }
      for (std::size_t i = 0; i < n; ++i)
        if (alive.test(i) && store.label(ids[i]).contains(e) && !reach.test(i)) {
          alive.reset(i);
          changed = true;
        }
    }
    return changed;
  };

  for (bool changed = true; changed;) {
    if (order == RuleOrder::Forward) {
      changed = downward();
      changed = serial() || changed;
      changed = eventual() || changed;
    } else {
      changed = eventual();
      changed = serial() || changed;
      changed = downward() || changed;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Certificates

struct Certificate {
  std::vector<Formula> sigma;
  Quasimodel model;
  std::vector<std::pair<std::size_t, std::size_t>> order;
  std::size_t witness = 0;
  Formula target;
  /// One per world, by world index.
  std::vector<Lasso> lassos;
};

inline CheckResult check_lasso(const Quasimodel& q, std::size_t w, const Lasso& l) {
  const SigmaContext& sigma = q.sigma();
  const std::string where = "lasso of world " + std::to_string(w);
  if (l.loop.empty()) return CheckResult::fail(where + ": empty loop");
  std::vector<std::size_t> seq = l.prefix;
  seq.insert(seq.end(), l.loop.begin(), l.loop.end());
  for (std::size_t x : seq)
    if (x >= q.worlds.size()) return CheckResult::fail(where + ": unknown world");
  if (seq.front() != w) return CheckResult::fail(where + ": does not start at the world");
  std::set<std::pair<std::size_t, std::size_t>> edges(q.s_edges.begin(), q.s_edges.end());
  for (std::size_t i = 0; i + 1 < seq.size(); ++i)
    if (!edges.count({seq[i], seq[i + 1]}))
      return CheckResult::fail(where + ": step " + std::to_string(i) + " is not an s-edge");
  if (!edges.count({l.loop.back(), l.loop.front()}))
    return CheckResult::fail(where + ": loop does not close");

  auto loop_has = [&](std::size_t body) {
    for (std::size_t x : l.loop)
      if (q.label(x).contains(body)) return true;
    return false;
  };
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const bool in_loop = i >= l.prefix.size();
    for (std::size_t e : sigma.with_op(Op::Eventually)) {
      if (!q.label(seq[i]).contains(e)) continue;
      const std::size_t body = sigma.left(e);
      bool realized = loop_has(body);
      if (!in_loop)
        for (std::size_t j = i; j < l.prefix.size() && !realized; ++j)
          realized = q.label(seq[j]).contains(body);
      if (!realized)
        return CheckResult::fail(where + ": " + format(sigma[e]) + " at position " +
                                 std::to_string(i) + " is never realized");
    }
  }
  return CheckResult::pass();
}

/// Re-derives Σ from φ and checks every certificate condition from the
/// certificate's own data.
inline CheckResult verify_certificate(const Certificate& cert, const Formula& phi) {
  const Formula reduced = eliminate_exists(phi);
  if (!fragment_of(reduced).subset_of(kDecidableFragment))
    return CheckResult::fail("formula is outside the decidable fragment");
  const SigmaContext sigma(reduced);
  if (cert.sigma != sigma.formulas())
    return CheckResult::fail("sigma does not match the subformulas of the target");
  if (!cert.model.store || !(cert.model.sigma() == sigma))
    return CheckResult::fail("moments are not labelled over the target's sigma");
  if (!(cert.target == phi)) return CheckResult::fail("target differs from the given formula");

  const Quasimodel& q = cert.model;
  if (auto r = check_quasimodel(q); !r) return r;
  if (cert.order != submoment_order(q))
    return CheckResult::fail("order is not the submoment relation on worlds");
  if (cert.witness >= q.worlds.size()) return CheckResult::fail("witness is not a world");
  if (q.label(cert.witness).contains(sigma.at(reduced)))
    return CheckResult::fail("witness label contains the target");
  if (cert.lassos.size() != q.worlds.size())
    return CheckResult::fail("expected one lasso per world");
  for (std::size_t w = 0; w < q.worlds.size(); ++w)
    if (auto r = check_lasso(q, w, cert.lassos[w]); !r) return r;
  return CheckResult::pass();
}

namespace detail {

// Smallest part of a pruned fixpoint that is still a quasimodel with the
// required witnesses: close the witnesses under submoments, one successor
// per world, and a shortest path for every pending eventuality.
inline std::vector<MomentId> trim(const MomentStore& store, const PruneResult& pr,
                                  const std::vector<std::size_t>& required) {
  const SigmaContext& sigma = store.sigma();
  const SuccessorMatrix& sm = pr.matrix;
  const std::size_t n = sm.size();
  std::vector<char> in(n, 0);
  std::deque<std::size_t> work;
  auto add = [&](std::size_t i) {
    if (!in[i]) {
      in[i] = 1;
      work.push_back(i);
    }
  };
  for (std::size_t i : required) add(i);
  auto alive_succ = [&](std::size_t i) { return sm.row(i) & pr.alive; };

  while (!work.empty()) {
    const std::size_t i = work.front();
    work.pop_front();
    for (std::uint32_t c : sm.child_positions(i)) add(c);
    const auto row = alive_succ(i);
    if (row.none()) throw InvariantError("pruned moment without successor");
    add(row.find_first());
    const TypeSet lab = store.label(sm.ids()[i]);
    for (std::size_t e : sigma.with_op(Op::Eventually)) {
      const std::size_t body = sigma.left(e);
      if (!lab.contains(e) || lab.contains(body)) continue;
      // Breadth-first search in position order; the first hit is nearest.
      std::vector<std::size_t> parent(n, n);
      std::deque<std::size_t> queue{i};
      parent[i] = i;
      std::optional<std::size_t> hit;
      while (!queue.empty() && !hit) {
        const std::size_t x = queue.front();
        queue.pop_front();
        const auto r = alive_succ(x);
        for (std::size_t y = r.find_first(); y < n && !hit; y = r.find_next(y)) {
          if (parent[y] != n) continue;
          parent[y] = x;
          if (store.label(sm.ids()[y]).contains(body)) hit = y;
          queue.push_back(y);
        }
      }
      if (!hit) throw InvariantError("pruned moment with unrealized eventuality");
      for (std::size_t y = *hit; y != i; y = parent[y]) add(y);
    }
  }
  std::vector<MomentId> out;
  for (std::size_t i = 0; i < n; ++i)
    if (in[i]) out.push_back(sm.ids()[i]);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Decision procedure

enum class Verdict { Valid, Falsifiable, ResourceLimit };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Valid: return "VALID";
    case Verdict::Falsifiable: return "FALSIFIABLE";
    case Verdict::ResourceLimit: return "RESOURCE_LIMIT";
  }
  return "?";
}

struct DecideOptions {
  EnumerationCaps caps;
  unsigned threads = 1;
  std::optional<std::chrono::milliseconds> timeout;
  /// Prune and look for a falsifying quasimodel after every height layer.
  bool early_exit = true;
};

struct ProfileReport {
  TypeSet profile;
  std::size_t viable_types = 0;
  std::size_t moments = 0;
  bool complete = false;
  bool falsifiable = false;
  bool skipped = false;
};

struct DecideResult {
  Verdict verdict = Verdict::ResourceLimit;
  std::optional<Certificate> certificate;
  std::vector<ProfileReport> profiles;
};

/// Types that can label a node of some quasimodel built from `candidates`:
/// the greatest subset where every type has a sensible successor inside,
/// reaches every eventuality body along sensible pairs inside, and has a
/// revoking supertype inside for each of its defects.
inline std::vector<TypeSet> viable_types(const SigmaContext& sigma,
                                         std::vector<TypeSet> candidates) {
  const std::size_t n = candidates.size();
  std::vector<std::vector<std::size_t>> next(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (sensible_pair(sigma, candidates[a], candidates[b])) next[a].push_back(b);
  std::vector<char> alive(n, 1);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t a = 0; a < n; ++a) {
      if (!alive[a]) continue;
      bool ok = std::any_of(next[a].begin(), next[a].end(), [&](std::size_t b) { return alive[b]; });
      for (std::size_t d : defects(sigma, candidates[a]).indices()) {
        bool revoked = false;
        for (std::size_t b = 0; b < n && !revoked; ++b)
          revoked = alive[b] && candidates[a].subset_of(candidates[b]) &&
                    revokes(sigma, candidates[b], d);
        ok = ok && revoked;
      }
      if (!ok) {
        alive[a] = 0;
        changed = true;
      }
    }
    for (std::size_t e : sigma.with_op(Op::Eventually)) {
      const std::size_t body = sigma.left(e);
      std::vector<char> reach(n, 0);
      for (std::size_t a = 0; a < n; ++a) reach[a] = alive[a] && candidates[a].contains(body);
      for (bool grew = true; grew;) {
        grew = false;
        for (std::size_t a = 0; a < n; ++a)
          if (alive[a] && !reach[a])
            for (std::size_t b : next[a])
              if (reach[b]) {
                reach[a] = 1;
                grew = true;
                break;
              }
      }
      for (std::size_t a = 0; a < n; ++a)
        if (alive[a] && candidates[a].contains(e) && !reach[a]) {
          alive[a] = 0;
          changed = true;
        }
    }
  }
  std::vector<TypeSet> out;
  for (std::size_t a = 0; a < n; ++a)
    if (alive[a]) out.push_back(candidates[a]);
  return out;
}

namespace detail {

struct ProfileOutcome {
  ProfileReport report;
  std::optional<Certificate> certificate;
};

// World positions that witness falsification under `profile`: the least
// world lacking the target, then for each ∀ψ outside the profile the least
// world lacking ψ.
inline std::optional<std::vector<std::size_t>> find_witnesses(const MomentStore& store,
                                                              const PruneResult& pr,
                                                              std::size_t target,
                                                              TypeSet profile) {
  const SigmaContext& sigma = store.sigma();
  auto least_lacking = [&](std::size_t idx) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t i = pr.alive.find_first(); i < pr.alive.size(); i = pr.alive.find_next(i)) {
      const MomentId m = pr.matrix.ids()[i];
      if (store.label(m).contains(idx)) continue;
      if (!best || store.canonical_less(m, pr.matrix.ids()[*best])) best = i;
    }
    return best;
  };
  std::vector<std::size_t> out;
  auto w = least_lacking(target);
  if (!w) return std::nullopt;
  out.push_back(*w);
  for (std::size_t a : sigma.with_op(Op::Forall)) {
    if (profile.contains(a)) continue;
    auto v = least_lacking(sigma.left(a));
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  return out;
}

inline Certificate build_certificate(std::shared_ptr<MomentStore> store, const PruneResult& pr,
                                     const std::vector<std::size_t>& witnesses,
                                     const Formula& phi, TypeSet profile) {
  std::vector<MomentId> kept = trim(*store, pr, witnesses);
  Certificate cert;
  cert.sigma = store->sigma().formulas();
  cert.model = restrict_to(store, kept, profile);
  cert.order = submoment_order(cert.model);
  cert.witness = *cert.model.index_of(pr.matrix.ids()[witnesses.front()]);
  cert.target = phi;
  for (std::size_t w = 0; w < cert.model.worlds.size(); ++w)
    cert.lassos.push_back(build_realizing_path(cert.model, w));
  return cert;
}

inline ProfileOutcome run_profile(const SigmaContext& sigma, const Formula& phi,
                                  std::size_t target, TypeSet profile,
                                  const DecideOptions& options) {
  ProfileOutcome out;
  out.report.profile = profile;
  std::vector<TypeSet> viable = viable_types(
      sigma, enumerate_types(sigma, [&](TypeSet t) { return fits_profile(sigma, profile, t); }));
  out.report.viable_types = viable.size();

  // A falsifying quasimodel needs a viable label lacking the target and one
  // lacking the body of each universal formula outside the profile.
  auto some_lacks = [&](std::size_t idx) {
    return std::any_of(viable.begin(), viable.end(),
                       [&](TypeSet t) { return !t.contains(idx); });
  };
  bool possible = some_lacks(target);
  for (std::size_t a : sigma.with_op(Op::Forall))
    if (!profile.contains(a)) possible = possible && some_lacks(sigma.left(a));
  if (!possible) {
    out.report.complete = true;
    return out;
  }

  std::set<std::uint64_t> allowed;
  for (TypeSet t : viable) allowed.insert(t.bits());
  std::optional<PruneResult> found;
  std::optional<std::vector<std::size_t>> witnesses;
  auto check_layer = [&](const MomentStore& store, std::size_t) {
    PruneResult pr = prune_profile(store, profile);
    if (auto w = find_witnesses(store, pr, target, profile)) {
      witnesses = std::move(w);
      found = std::move(pr);
      return false;
    }
    return true;
  };
  Irreducibles irr =
      options.early_exit
          ? enumerate_irreducibles(sigma, options.caps,
                                   [&](TypeSet t) { return allowed.count(t.bits()) != 0; },
                                   check_layer)
          : enumerate_irreducibles(sigma, options.caps,
                                   [&](TypeSet t) { return allowed.count(t.bits()) != 0; });
  out.report.moments = irr.store.size();
  if (!found && !options.early_exit && irr.complete) check_layer(irr.store, irr.layers);
  if (found) {
    auto store = std::make_shared<MomentStore>(std::move(irr.store));
    out.report.falsifiable = true;
    out.report.complete = true;
    out.certificate = build_certificate(store, *found, *witnesses, phi, profile);
    return out;
  }
  out.report.complete = irr.complete;
  return out;
}

}  // namespace detail

inline DecideResult decide(const Formula& phi, const DecideOptions& options = {}) {
  const Formula reduced = eliminate_exists(phi);
  const Fragment frag = fragment_of(reduced);
  if (!frag.subset_of(kDecidableFragment))
    throw FragmentError("decision procedure does not handle []; formula: " + format(phi));
  const SigmaContext sigma(reduced);
  const std::size_t target = sigma.at(reduced);
  const std::vector<std::size_t>& foralls = sigma.with_op(Op::Forall);
  const std::size_t count = std::size_t{1} << foralls.size();

  DecideOptions opts = options;
  if (options.timeout) opts.caps.deadline = std::chrono::steady_clock::now() + *options.timeout;

  std::vector<std::optional<detail::ProfileOutcome>> outcomes(count);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> best{count};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&] {
    while (true) {
      const std::size_t p = next.fetch_add(1);
      if (p >= count) return;
      TypeSet profile;
      for (std::size_t b = 0; b < foralls.size(); ++b)
        if ((p >> b) & 1u) profile.insert(foralls[b]);
      if (p > best.load()) {
        detail::ProfileOutcome skipped;
        skipped.report.profile = profile;
        skipped.report.skipped = true;
        outcomes[p] = std::move(skipped);
        continue;
      }
      DecideOptions local = opts;
      auto outer = opts.caps.cancelled;
      local.caps.cancelled = [&, p, outer] { return best.load() < p || (outer && outer()); };
      try {
        auto o = detail::run_profile(sigma, phi, target, profile, local);
        if (o.report.falsifiable) {
          std::size_t cur = best.load();
          while (p < cur && !best.compare_exchange_weak(cur, p)) {
          }
        }
        outcomes[p] = std::move(o);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        best.store(0);
        return;
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, count));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  DecideResult result;
  bool all_complete = true;
  for (std::size_t p = 0; p < count; ++p) {
    if (!outcomes[p]) {
      all_complete = false;
      continue;
    }
    result.profiles.push_back(outcomes[p]->report);
    if (!result.certificate && outcomes[p]->certificate) {
      result.certificate = std::move(outcomes[p]->certificate);
      result.verdict = Verdict::Falsifiable;
    }
    if (!outcomes[p]->report.complete) all_complete = false;
  }
  if (result.certificate) {
    if (auto r = verify_certificate(*result.certificate, phi); !r)
      throw InvariantError("certificate failed verification: " + r.diagnostic);
    return result;
  }
  result.verdict = all_complete ? Verdict::Valid : Verdict::ResourceLimit;
  return result;
}

// ---------------------------------------------------------------------------
// Extraction from finite models

struct Extraction {
  Quasimodel model;
  /// For each world index, the points it simulates.
  std::vector<PointSet> simulation;
  /// Σ-label of each point.
  std::vector<TypeSet> point_labels;
};

/// The quasimodel of irreducible moments under the greatest label-preserving
/// continuous simulation into the model (X, val).
inline Extraction extract_quasimodel(const FiniteSystem& x, const Valuation& val,
                                     const SigmaContext& sigma, const EnumerationCaps& caps = {}) {
  for (const Formula& f : sigma.formulas())
    if (f.op() == Op::Henceforth || f.op() == Op::Exists)
      throw FragmentError("extraction needs a sigma over next, eventually and forall");
  const std::size_t np = x.size();
  std::vector<TypeSet> lab(np);
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const PointSet truth = evaluate(x, val, sigma[i]);
    for (std::size_t p = 0; p < np; ++p)
      if (has_point(truth, p)) lab[p].insert(i);
  }
  std::set<std::uint64_t> label_set;
  for (TypeSet t : lab) {
    if (!is_type(sigma, t)) throw InvariantError("point label is not a type");
    label_set.insert(t.bits());
  }

  Irreducibles irr = enumerate_irreducibles(
      sigma, caps, [&](TypeSet t) { return label_set.count(t.bits()) != 0; });
  if (!irr.complete) throw CapExceeded("irreducible enumeration hit its cap during extraction");
  auto store = std::make_shared<MomentStore>(std::move(irr.store));

  // Children precede parents in id order, so one pass computes the
  // greatest simulation.
  std::vector<PointSet> sim(store->size(), 0);
  for (MomentId m = 0; m < store->size(); ++m) {
    PointSet s = 0;
    for (std::size_t p = 0; p < np; ++p)
      if (lab[p] == store->label(m)) s |= singleton(p);
    for (MomentId c : store->children(m)) s &= closure(x, sim[c]);
    sim[m] = s;
  }

  std::vector<MomentId> dom;
  PointSet covered = 0;
  for (MomentId m = 0; m < store->size(); ++m)
    if (sim[m]) {
      dom.push_back(m);
      covered |= sim[m];
    }
  if (covered != x.all()) throw InvariantError("simulation is not surjective");

  TypeSet profile = lab.empty() ? TypeSet{} : (lab[0] & forall_part(sigma));
  Quasimodel q = restrict_to(store, dom, profile);

  SuccessorMatrix sm(*store, std::vector<MomentId>(dom));
  for (MomentId m : dom)
    for (std::size_t p = 0; p < np; ++p) {
      if (!has_point(sim[m], p)) continue;
      bool ok = false;
      for (MomentId m2 : dom)
        if (sm.successor(m, m2) && has_point(sim[m2], x.f(p))) {
          ok = true;
          break;
        }
      if (!ok) throw InvariantError("simulation is not dynamic");
    }

  if (auto r = check_quasimodel(q); !r)
    throw InvariantError("extracted structure is not a quasimodel: " + r.diagnostic);
  Extraction out{q, {}, lab};
  for (MomentId m : q.worlds) out.simulation.push_back(sim[m]);
  return out;
}

}  // namespace itlc
