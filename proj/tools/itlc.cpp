// Command-line front end for the itlc library.
//
// Exit codes: 0 valid / holds / verified, 1 falsifiable / fails / found,
// 2 usage or parse error, 3 resource limit, 4 internal invariant violation.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "itlc/alexandroff.hpp"
#include "itlc/formula.hpp"
#include "itlc/json_io.hpp"
#include "itlc/moments.hpp"
#include "itlc/quasimodel.hpp"

namespace {

using namespace itlc;

enum Exit : int { kOk = 0, kNegative = 1, kUsage = 2, kLimit = 3, kInternal = 4 };

struct Config {
  std::string format = "text";
  unsigned threads = 1;
  std::size_t max_moments = 50000;
  double timeout = 0;
  std::size_t max_points = 3;
  std::uint64_t seed = 0;
  std::string certificate_out;
};

std::string point_list(const FiniteSystem& s, PointSet set) {
  std::string out = "{";
  bool first = true;
  for (std::size_t x = 0; x < s.size(); ++x)
    if (has_point(set, x)) {
      out += first ? "" : ", ";
      out += s.name(x);
      first = false;
    }
  return out + "}";
}

Json point_array(const FiniteSystem& s, PointSet set) {
  Json a = Json::array();
  for (std::size_t x = 0; x < s.size(); ++x)
    if (has_point(set, x)) a.push_back(s.name(x));
  return a;
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string quasimodel_dot(const Quasimodel& q, std::optional<std::size_t> witness) {
  std::ostringstream out;
  out << "digraph quasimodel {\n";
  for (std::size_t w = 0; w < q.worlds.size(); ++w) {
    out << "  w" << w << " [label=\"" << w << ": " << dot_escape(q.sigma().format_set(q.label(w)))
        << "\"";
    if (witness && *witness == w) out << ", peripheries=2";
    out << "];\n";
  }
  for (auto [a, b] : submoment_order(q)) out << "  w" << a << " -> w" << b << " [style=dashed];\n";
  for (auto [a, b] : q.s_edges) out << "  w" << a << " -> w" << b << ";\n";
  out << "}\n";
  return out.str();
}

std::string system_dot(const FiniteSystem& s) {
  std::ostringstream out;
  out << "digraph system {\n";
  for (std::size_t x = 0; x < s.size(); ++x)
    out << "  \"" << dot_escape(s.name(x)) << "\";\n";
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b)
      if (a != b && s.leq(a, b))
        out << "  \"" << dot_escape(s.name(a)) << "\" -> \"" << dot_escape(s.name(b))
            << "\" [style=dashed];\n";
  for (std::size_t x = 0; x < s.size(); ++x)
    out << "  \"" << dot_escape(s.name(x)) << "\" -> \"" << dot_escape(s.name(s.f(x)))
        << "\";\n";
  out << "}\n";
  return out.str();
}

EnumerationCaps caps_of(const Config& cfg) {
  EnumerationCaps caps;
  caps.max_moments = cfg.max_moments;
  if (cfg.timeout > 0)
    caps.deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(cfg.timeout));
  return caps;
}

int cmd_decide(const Config& cfg, const std::string& text) {
  const Formula phi = parse(text);
  DecideOptions opts;
  opts.caps = caps_of(cfg);
  opts.threads = cfg.threads;
  DecideResult r = decide(phi, opts);

  if (r.certificate) {
    Json j = certificate_to_json(*r.certificate);
    if (auto check = verify_certificate_json(j, phi); !check) {
      std::cerr << "certificate failed self-verification: " << check.diagnostic << '\n';
      return kInternal;
    }
    if (!cfg.certificate_out.empty()) write_json_file(cfg.certificate_out, j);
    if (cfg.format == "json") {
      std::cout << j.dump(2) << '\n';
    } else if (cfg.format == "dot") {
      std::cout << quasimodel_dot(r.certificate->model, r.certificate->witness);
    } else {
      const Certificate& c = *r.certificate;
      std::cout << "FALSIFIABLE\n";
      std::cout << "profile: " << c.model.sigma().format_set(c.model.profile) << '\n';
      std::cout << "worlds: " << c.model.worlds.size() << '\n';
      std::cout << "witness: world " << c.witness << ' '
                << c.model.sigma().format_set(c.model.label(c.witness)) << '\n';
    }
    return kNegative;
  }

  const char* name = verdict_name(r.verdict);
  if (cfg.format == "json") {
    Json j;
    j["verdict"] = name;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << name << '\n';
  }
  return r.verdict == Verdict::Valid ? kOk : kLimit;
}

int cmd_check(const Config& cfg, const std::string& path, const std::string& text) {
  const Model m = load_system(path);
  const Formula phi = parse(text);
  const PointSet truth = evaluate(m.system, m.valuation, phi);
  const PointSet failing = m.system.all() & ~truth;
  if (cfg.format == "json") {
    Json j;
    j["holds"] = failing == 0;
    j["truth"] = point_array(m.system, truth);
    j["failing"] = point_array(m.system, failing);
    std::cout << j.dump(2) << '\n';
  } else if (failing == 0) {
    std::cout << "holds\n";
  } else {
    std::cout << "fails at " << point_list(m.system, failing) << '\n';
  }
  return failing == 0 ? kOk : kNegative;
}

int cmd_valid(const Config& cfg, const std::string& path, const std::string& text) {
  const Model m = load_system(path);
  const Formula phi = parse(text);
  const auto fal = find_falsifying_valuation(m.system, phi);
  if (cfg.format == "json") {
    Json j;
    j["valid"] = !fal;
    if (fal) {
      j["valuation"] = system_to_json(m.system, fal->valuation)["valuation"];
      j["point"] = m.system.name(fal->point);
    }
    std::cout << j.dump(2) << '\n';
  } else if (!fal) {
    std::cout << "valid\n";
  } else {
    std::cout << "fails at " << m.system.name(fal->point) << " under";
    for (const auto& [atom, set] : fal->valuation)
      std::cout << ' ' << atom << '=' << point_list(m.system, set);
    std::cout << '\n';
  }
  return fal ? kNegative : kOk;
}

int cmd_countermodel(const Config& cfg, const std::string& text) {
  const Formula phi = parse(text);
  const auto cm = find_countermodel(phi, cfg.max_points);
  if (!cm) {
    std::cout << (cfg.format == "json" ? "null" : "none") << '\n';
    return kOk;
  }
  if (cfg.format == "dot") {
    std::cout << system_dot(cm->system);
  } else {
    Json j = system_to_json(cm->system, cm->valuation);
    j["point"] = cm->system.name(cm->point);
    std::cout << j.dump(2) << '\n';
  }
  return kNegative;
}

int cmd_analyze(const Config& cfg, const std::string& path) {
  const Model m = load_system(path);
  const Analysis a = analyze(m.system);
  if (cfg.format == "json") {
    Json j;
    j["minimal"] = a.minimal;
    j["recurrent"] = a.recurrent;
    j["connected"] = a.connected;
    std::cout << j.dump(2) << '\n';
  } else if (cfg.format == "dot") {
    std::cout << system_dot(m.system);
  } else {
    std::cout << "minimal: " << (a.minimal ? "true" : "false") << '\n'
              << "recurrent: " << (a.recurrent ? "true" : "false") << '\n'
              << "connected: " << (a.connected ? "true" : "false") << '\n';
  }
  return kOk;
}

int cmd_extract(const Config& cfg, const std::string& path, const std::string& text) {
  const Model m = load_system(path);
  const Formula phi = eliminate_exists(parse(text));
  const SigmaContext sigma(phi);
  const Extraction ex = extract_quasimodel(m.system, m.valuation, sigma, caps_of(cfg));
  const Quasimodel& q = ex.model;
  const std::size_t target = sigma.at(phi);
  std::optional<std::size_t> witness;
  for (std::size_t w = 0; w < q.worlds.size() && !witness; ++w)
    if (!q.label(w).contains(target)) witness = w;

  if (cfg.format == "json") {
    Json j;
    Json sig = Json::array();
    for (const Formula& f : sigma.formulas()) sig.push_back(format(f));
    j["sigma"] = std::move(sig);
    j["profile"] = q.profile.indices();
    Json worlds = Json::array();
    for (std::size_t w = 0; w < q.worlds.size(); ++w) {
      Json world;
      world["id"] = w;
      world["moment"] = moment_to_json(*q.store, q.worlds[w]);
      world["points"] = point_array(m.system, ex.simulation[w]);
      worlds.push_back(std::move(world));
    }
    j["worlds"] = std::move(worlds);
    Json order = Json::array();
    for (auto [a, b] : submoment_order(q)) order.push_back({a, b});
    j["order"] = std::move(order);
    Json edges = Json::array();
    for (auto [a, b] : q.s_edges) edges.push_back({a, b});
    j["s_edges"] = std::move(edges);
    j["witness"] = witness ? Json(*witness) : Json(nullptr);
    std::cout << j.dump(2) << '\n';
  } else if (cfg.format == "dot") {
    std::cout << quasimodel_dot(q, witness);
  } else {
    std::cout << "worlds: " << q.worlds.size() << '\n';
    for (std::size_t w = 0; w < q.worlds.size(); ++w)
      std::cout << "  " << w << ' ' << sigma.format_set(q.label(w)) << " simulates "
                << point_list(m.system, ex.simulation[w]) << '\n';
    if (witness)
      std::cout << "falsified at world " << *witness << '\n';
    else
      std::cout << "not falsified\n";
  }
  return witness ? kNegative : kOk;
}

int cmd_verify(const Config& cfg, const std::string& path, const std::string& text) {
  const Formula phi = parse(text);
  const CheckResult r = verify_certificate_json(read_json_file(path), phi);
  if (cfg.format == "json") {
    Json j;
    j["verified"] = r.ok;
    if (!r.ok) j["diagnostic"] = r.diagnostic;
    std::cout << j.dump(2) << '\n';
  } else if (r.ok) {
    std::cout << "verified\n";
  } else {
    std::cout << "rejected: " << r.diagnostic << '\n';
  }
  return r.ok ? kOk : kNegative;
}

int cmd_enumerate(const Config& cfg, const std::string& text) {
  const Formula phi = eliminate_exists(parse(text));
  const SigmaContext sigma(phi);
  const std::size_t types = enumerate_types(sigma).size();
  const Irreducibles irr = enumerate_irreducibles(sigma, caps_of(cfg));
  std::vector<std::size_t> per_height;
  std::size_t max_nodes = 0;
  for (MomentId m = 0; m < irr.store.size(); ++m) {
    const std::size_t h = irr.store.height(m);
    if (per_height.size() < h) per_height.resize(h, 0);
    ++per_height[h - 1];
    max_nodes = std::max(max_nodes, irr.store.node_count(m));
  }
  if (cfg.format == "json") {
    Json j;
    j["sigma_size"] = sigma.size();
    j["types"] = types;
    j["irreducibles"] = irr.store.size();
    j["per_height"] = per_height;
    j["max_nodes"] = max_nodes;
    j["complete"] = irr.complete;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "sigma: " << sigma.size() << " formulas\n"
              << "types: " << types << '\n'
              << "irreducibles: " << irr.store.size() << (irr.complete ? "" : " (incomplete)")
              << '\n';
    for (std::size_t h = 0; h < per_height.size(); ++h)
      std::cout << "  height " << h + 1 << ": " << per_height[h] << '\n';
    std::cout << "largest: " << max_nodes << " nodes\n";
  }
  return irr.complete ? kOk : kLimit;
}

int cmd_random_system(const Config& cfg, std::size_t n) {
  const FiniteSystem s = random_system(n, cfg.seed);
  if (cfg.format == "dot")
    std::cout << system_dot(s);
  else
    std::cout << system_to_json(s).dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision procedure and finite model checker for intuitionistic temporal logic"};
  app.require_subcommand(1);
  app.fallthrough();
  Config cfg;
  app.add_option("--format", cfg.format, "Output format")
      ->check(CLI::IsMember({"text", "json", "dot"}))
      ->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads for decide")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--max-moments", cfg.max_moments, "Cap on interned moments per search")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--timeout", cfg.timeout, "Seconds before giving up (0 = none)")
      ->check(CLI::NonNegativeNumber);

  std::string formula, path;
  std::size_t points = 0;

  auto* decide_cmd = app.add_subcommand("decide", "Decide validity of a formula");
  decide_cmd->add_option("formula", formula)->required();
  decide_cmd->add_option("--certificate", cfg.certificate_out, "Also write the certificate here");

  auto* check_cmd = app.add_subcommand("check", "Evaluate a formula on a model file");
  check_cmd->add_option("system", path)->required()->check(CLI::ExistingFile);
  check_cmd->add_option("formula", formula)->required();

  auto* valid_cmd = app.add_subcommand("valid", "Check a formula under every valuation");
  valid_cmd->add_option("system", path)->required()->check(CLI::ExistingFile);
  valid_cmd->add_option("formula", formula)->required();

  auto* cm_cmd = app.add_subcommand("countermodel", "Search small finite countermodels");
  cm_cmd->add_option("formula", formula)->required();
  cm_cmd->add_option("--max-points", cfg.max_points)->check(CLI::Range(1, 4))->capture_default_str();

  auto* analyze_cmd = app.add_subcommand("analyze", "Minimality, recurrence, connectedness");
  analyze_cmd->add_option("system", path)->required()->check(CLI::ExistingFile);

  auto* extract_cmd = app.add_subcommand("extract", "Quasimodel of a finite model");
  extract_cmd->add_option("system", path)->required()->check(CLI::ExistingFile);
  extract_cmd->add_option("formula", formula)->required();

  auto* verify_cmd = app.add_subcommand("verify", "Check a falsification certificate");
  verify_cmd->add_option("certificate", path)->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("formula", formula)->required();

  auto* enum_cmd = app.add_subcommand("enumerate", "Count irreducible moments");
  enum_cmd->add_option("--sigma", formula, "Formula whose subformulas form sigma")->required();

  auto* random_cmd = app.add_subcommand("random-system", "Generate a random finite system");
  random_cmd->add_option("points", points)->required()->check(CLI::Range(1, 64));
  random_cmd->add_option("--seed", cfg.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (decide_cmd->parsed()) return cmd_decide(cfg, formula);
    if (check_cmd->parsed()) return cmd_check(cfg, path, formula);
    if (valid_cmd->parsed()) return cmd_valid(cfg, path, formula);
    if (cm_cmd->parsed()) return cmd_countermodel(cfg, formula);
    if (analyze_cmd->parsed()) return cmd_analyze(cfg, path);
    if (extract_cmd->parsed()) return cmd_extract(cfg, path, formula);
    if (verify_cmd->parsed()) return cmd_verify(cfg, path, formula);
    if (enum_cmd->parsed()) return cmd_enumerate(cfg, formula);
    if (random_cmd->parsed()) return cmd_random_system(cfg, points);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kUsage;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kUsage;
  } catch (const FragmentError& e) {
    std::cerr << "unsupported formula: " << e.what() << '\n';
    return kUsage;
  } catch (const CapExceeded& e) {
    std::cerr << "resource limit: " << e.what() << '\n';
    return kLimit;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
