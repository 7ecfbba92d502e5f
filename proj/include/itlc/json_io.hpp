#pragma once

// JSON forms of moments, certificates and finite models.

#include <algorithm>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "itlc/alexandroff.hpp"
#include "itlc/errors.hpp"
#include "itlc/moments.hpp"
#include "itlc/quasimodel.hpp"

namespace itlc {

using Json = nlohmann::ordered_json;

namespace detail {

inline const Json& field(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "." + key + ": missing");
  return *it;
}

inline std::size_t as_index(const Json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw SchemaError(path + ": expected a non-negative integer");
  return j.get<std::size_t>();
}

inline const Json& as_array(const Json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path + ": expected an array");
  return j;
}

inline std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path + ": expected a string");
  return j.get<std::string>();
}

inline std::pair<std::size_t, std::size_t> as_index_pair(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw SchemaError(path + ": expected a pair");
  return {as_index(j[0], path + "[0]"), as_index(j[1], path + "[1]")};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Moments

inline Json moment_to_json(const MomentStore& store, MomentId m) {
  Json j;
  j["label"] = store.label(m).indices();
  Json kids = Json::array();
  for (MomentId c : store.children(m)) kids.push_back(moment_to_json(store, c));
  j["children"] = std::move(kids);
  return j;
}

/// Interns the moment described by `j`. Children must already be in
/// canonical order, so the round trip is exact.
inline MomentId moment_from_json(MomentStore& store, const Json& j, const std::string& path) {
  const Json& label = detail::as_array(detail::field(j, "label", path), path + ".label");
  TypeSet t;
  for (std::size_t i = 0; i < label.size(); ++i) {
    const std::size_t idx = detail::as_index(label[i], path + ".label[" + std::to_string(i) + "]");
    if (idx >= store.sigma().size())
      throw SchemaError(path + ".label[" + std::to_string(i) + "]: index outside sigma");
    if (i > 0 && idx <= label[i - 1].get<std::size_t>())
      throw SchemaError(path + ".label: indices must be strictly increasing");
    t.insert(idx);
  }
  const Json& kids = detail::as_array(detail::field(j, "children", path), path + ".children");
  std::vector<MomentId> ids;
  for (std::size_t i = 0; i < kids.size(); ++i)
    ids.push_back(moment_from_json(store, kids[i], path + ".children[" + std::to_string(i) + "]"));
  for (std::size_t i = 1; i < ids.size(); ++i)
    if (store.encoding(ids[i]) < store.encoding(ids[i - 1]))
      throw SchemaError(path + ".children: not in canonical order");
  return store.intern(t, std::move(ids));
}

// ---------------------------------------------------------------------------
// Certificates

inline Json certificate_to_json(const Certificate& cert) {
  const Quasimodel& q = cert.model;
  Json j;
  Json sigma = Json::array();
  for (const Formula& f : cert.sigma) sigma.push_back(format(f));
  j["sigma"] = std::move(sigma);
  j["profile"] = q.profile.indices();
  Json worlds = Json::array();
  for (std::size_t w = 0; w < q.worlds.size(); ++w) {
    Json world;
    world["id"] = w;
    world["moment"] = moment_to_json(*q.store, q.worlds[w]);
    worlds.push_back(std::move(world));
  }
  j["worlds"] = std::move(worlds);
  Json order = Json::array();
  for (auto [a, b] : cert.order) order.push_back({a, b});
  j["order"] = std::move(order);
  Json edges = Json::array();
  for (auto [a, b] : q.s_edges) edges.push_back({a, b});
  j["s_edges"] = std::move(edges);
  j["witness"] = cert.witness;
  j["target"] = format(cert.target);
  Json lassos = Json::object();
  for (std::size_t w = 0; w < cert.lassos.size(); ++w) {
    Json l;
    l["prefix"] = cert.lassos[w].prefix;
    l["loop"] = cert.lassos[w].loop;
    lassos[std::to_string(w)] = std::move(l);
  }
  j["lassos"] = std::move(lassos);
  return j;
}

/// Reads a certificate without judging it; see verify_certificate.
inline Certificate certificate_from_json(const Json& j) {
  using namespace detail;
  Certificate cert;
  const Json& sigma = as_array(field(j, "sigma", "certificate"), "sigma");
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const std::string path = "sigma[" + std::to_string(i) + "]";
    try {
      cert.sigma.push_back(parse(as_string(sigma[i], path)));
    } catch (const ParseError& e) {
      throw SchemaError(path + ": " + e.what());
    }
  }
  auto store = std::make_shared<MomentStore>(SigmaContext(cert.sigma));
  if (store->sigma().formulas() != cert.sigma)
    throw SchemaError("sigma: not a subformula-closed list in post-order");

  TypeSet profile;
  const Json& prof = as_array(field(j, "profile", "certificate"), "profile");
  for (std::size_t i = 0; i < prof.size(); ++i) {
    const std::size_t idx = as_index(prof[i], "profile[" + std::to_string(i) + "]");
    if (idx >= cert.sigma.size()) throw SchemaError("profile: index outside sigma");
    profile.insert(idx);
  }

  const Json& worlds = as_array(field(j, "worlds", "certificate"), "worlds");
  std::vector<MomentId> ids;
  for (std::size_t i = 0; i < worlds.size(); ++i) {
    const std::string path = "worlds[" + std::to_string(i) + "]";
    if (as_index(field(worlds[i], "id", path), path + ".id") != i)
      throw SchemaError(path + ".id: expected " + std::to_string(i));
    ids.push_back(moment_from_json(*store, field(worlds[i], "moment", path), path + ".moment"));
  }
  const std::size_t n = ids.size();
  auto pairs = [&](const char* key) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const Json& arr = as_array(field(j, key, "certificate"), key);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = std::string(key) + "[" + std::to_string(i) + "]";
      auto p = as_index_pair(arr[i], path);
      if (p.first >= n || p.second >= n) throw SchemaError(path + ": unknown world");
      out.push_back(p);
    }
    return out;
  };
  cert.order = pairs("order");
  cert.model = Quasimodel{store, ids, pairs("s_edges"), profile};
  cert.witness = as_index(field(j, "witness", "certificate"), "witness");
  try {
    cert.target = parse(as_string(field(j, "target", "certificate"), "target"));
  } catch (const ParseError& e) {
    throw SchemaError(std::string("target: ") + e.what());
  }

  const Json& lassos = field(j, "lassos", "certificate");
  if (!lassos.is_object()) throw SchemaError("lassos: expected an object");
  for (std::size_t w = 0; w < n; ++w) {
    const std::string key = std::to_string(w);
    const std::string path = "lassos." + key;
    auto it = lassos.find(key);
    if (it == lassos.end()) throw SchemaError(path + ": missing");
    Lasso l;
    for (const char* part : {"prefix", "loop"}) {
      const Json& arr = as_array(field(*it, part, path), path + "." + part);
      auto& dst = std::string(part) == "prefix" ? l.prefix : l.loop;
      for (std::size_t i = 0; i < arr.size(); ++i)
        dst.push_back(as_index(arr[i], path + "." + part + "[" + std::to_string(i) + "]"));
    }
    cert.lassos.push_back(std::move(l));
  }
  if (lassos.size() != n) throw SchemaError("lassos: expected exactly one entry per world");
  return cert;
}

/// Schema problems are reported as a failed check rather than thrown.
inline CheckResult verify_certificate_json(const Json& j, const Formula& phi) {
  try {
    return verify_certificate(certificate_from_json(j), phi);
  } catch (const SchemaError& e) {
    return CheckResult::fail(std::string("schema: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Finite models

struct Model {
  FiniteSystem system;
  Valuation valuation;
};

inline Json system_to_json(const FiniteSystem& s, const Valuation& val = {}) {
  Json j;
  j["elements"] = s.names();
  Json order = Json::array();
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b)
      if (a != b && s.leq(a, b)) order.push_back({s.name(a), s.name(b)});
  j["order"] = std::move(order);
  Json map = Json::object();
  for (std::size_t x = 0; x < s.size(); ++x) map[s.name(x)] = s.name(s.f(x));
  j["map"] = std::move(map);
  Json v = Json::object();
  for (const auto& [atom, set] : val) {
    Json pts = Json::array();
    for (std::size_t x = 0; x < s.size(); ++x)
      if (has_point(set, x)) pts.push_back(s.name(x));
    v[atom] = std::move(pts);
  }
  j["valuation"] = std::move(v);
  return j;
}

inline Model model_from_json(const Json& j) {
  using namespace detail;
  const Json& elems = as_array(field(j, "elements", "system"), "elements");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < elems.size(); ++i) {
    std::string name = as_string(elems[i], "elements[" + std::to_string(i) + "]");
    if (std::find(names.begin(), names.end(), name) != names.end())
      throw SchemaError("elements[" + std::to_string(i) + "]: duplicate element " + name);
    names.push_back(std::move(name));
  }
  if (names.empty()) throw SchemaError("elements: a system needs at least one element");
  if (names.size() > FiniteSystem::kMaxPoints) throw SchemaError("elements: more than 64");
  auto lookup = [&](const Json& v, const std::string& path) {
    const std::string name = as_string(v, path);
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw SchemaError(path + ": unknown element " + name);
    return static_cast<std::size_t>(it - names.begin());
  };

  std::vector<std::pair<std::size_t, std::size_t>> leq;
  const Json& order = as_array(field(j, "order", "system"), "order");
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::string path = "order[" + std::to_string(i) + "]";
    if (!order[i].is_array() || order[i].size() != 2) throw SchemaError(path + ": expected a pair");
    leq.emplace_back(lookup(order[i][0], path + "[0]"), lookup(order[i][1], path + "[1]"));
  }

  const Json& map = field(j, "map", "system");
  if (!map.is_object()) throw SchemaError("map: expected an object");
  std::vector<std::size_t> f(names.size());
  for (std::size_t x = 0; x < names.size(); ++x) {
    auto it = map.find(names[x]);
    if (it == map.end()) throw SchemaError("map." + names[x] + ": missing");
    f[x] = lookup(*it, "map." + names[x]);
  }
  for (auto it = map.begin(); it != map.end(); ++it)
    if (std::find(names.begin(), names.end(), it.key()) == names.end())
      throw SchemaError("map." + it.key() + ": unknown element");

  Model m{FiniteSystem::from_pairs(names, leq, f), {}};
  if (j.contains("valuation")) {
    const Json& val = j["valuation"];
    if (!val.is_object()) throw SchemaError("valuation: expected an object");
    for (auto it = val.begin(); it != val.end(); ++it) {
      const std::string path = "valuation." + it.key();
      PointSet set = 0;
      const Json& pts = as_array(*it, path);
      for (std::size_t i = 0; i < pts.size(); ++i)
        set |= singleton(lookup(pts[i], path + "[" + std::to_string(i) + "]"));
      if (!m.system.is_open(set)) throw SchemaError(path + ": not downward closed");
      m.valuation[it.key()] = set;
    }
  }
  return m;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline Model load_system(const std::string& path) { return model_from_json(read_json_file(path)); }

inline Certificate load_certificate(const std::string& path) {
  return certificate_from_json(read_json_file(path));
}

inline void save_certificate(const std::string& path, const Certificate& cert) {
  write_json_file(path, certificate_to_json(cert));
}

}  // namespace itlc
