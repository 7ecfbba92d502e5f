#include <gtest/gtest.h>

#include "itlc/alexandroff.hpp"
#include "itlc/quasimodel.hpp"
#include "support.hpp"

namespace itlc {
namespace {

using testing::WorkedExample;

TEST(CheckQuasimodel, WorkedStructurePasses) {
  const WorkedExample ex;
  const Quasimodel q = ex.quasimodel();
  const CheckResult r = check_quasimodel(q);
  EXPECT_TRUE(r.ok) << r.diagnostic;
  EXPECT_FALSE(q.label(0).contains(ex.sigma().at(parse(testing::kFlagship))));
  EXPECT_EQ(submoment_order(q), (std::vector<std::pair<std::size_t, std::size_t>>{{1, 0}}));
}

TEST(CheckQuasimodel, DeletingTheRealizerBreaksOmegaSensibility) {
  const WorkedExample ex;
  Quasimodel q{ex.store, {ex.mu, ex.mv}, {{0, 0}, {1, 1}}, ex.quasimodel().profile};
  const CheckResult r = check_quasimodel(q);
  EXPECT_FALSE(r.ok);
  EXPECT_NE(r.diagnostic.find("omega-sensibility"), std::string::npos) << r.diagnostic;
}

TEST(CheckQuasimodel, UnrevokedDefectFails) {
  const WorkedExample ex;
  // Interned directly, bypassing the kit check.
  const MomentId bad = ex.store->intern(ex.lu, {});
  Quasimodel q{ex.store, {bad}, {{0, 0}}, ex.quasimodel().profile};
  const CheckResult r = check_quasimodel(q);
  EXPECT_FALSE(r.ok);
  EXPECT_NE(r.diagnostic.find("revoked"), std::string::npos) << r.diagnostic;
}

TEST(CheckQuasimodel, DiagnosesEachClause) {
  const WorkedExample ex;
  {
    Quasimodel q = ex.quasimodel();
    q.worlds.erase(q.worlds.begin() + 1);
    q.s_edges = {{0, 0}, {1, 1}};
    EXPECT_NE(check_quasimodel(q).diagnostic.find("downward closure"), std::string::npos);
  }
  {
    Quasimodel q = ex.quasimodel();
    q.s_edges.push_back({1, 0});
    EXPECT_NE(check_quasimodel(q).diagnostic.find("not sensible"), std::string::npos);
  }
  {
    Quasimodel q = ex.quasimodel();
    q.s_edges = {{1, 1}, {1, 2}, {2, 2}};
    EXPECT_NE(check_quasimodel(q).diagnostic.find("seriality"), std::string::npos);
  }
  {
    Quasimodel q = ex.quasimodel();
    q.profile = TypeSet{};
    EXPECT_NE(check_quasimodel(q).diagnostic.find("profile"), std::string::npos);
  }
  {
    // m_u S m_u needs an edge from m_v into a submoment of m_u.
    Quasimodel q = ex.quasimodel();
    q.s_edges = {{0, 0}, {1, 2}, {2, 2}};
    EXPECT_NE(check_quasimodel(q).diagnostic.find("continuity"), std::string::npos)
        << check_quasimodel(q).diagnostic;
  }
}

TEST(RealizingPath, Examples) {
  const WorkedExample ex;
  const Quasimodel q = ex.quasimodel();
  EXPECT_EQ(build_realizing_path(q, 0), (Lasso{{}, {0}}));
  EXPECT_EQ(build_realizing_path(q, 1), (Lasso{{1}, {2}}));
  EXPECT_EQ(build_realizing_path(q, 2), (Lasso{{}, {2}}));
  for (std::size_t w = 0; w < 3; ++w) EXPECT_TRUE(check_lasso(q, w, build_realizing_path(q, w)).ok);
}

TEST(RealizingPath, CheckLassoRejectsBrokenLoops) {
  const WorkedExample ex;
  const Quasimodel q = ex.quasimodel();
  EXPECT_FALSE(check_lasso(q, 1, Lasso{{}, {1}}).ok);      // ◊p never realized
  EXPECT_FALSE(check_lasso(q, 1, Lasso{{1}, {2, 1}}).ok);  // 2 -> 1 is not an edge
  EXPECT_FALSE(check_lasso(q, 0, Lasso{{}, {}}).ok);
  EXPECT_FALSE(check_lasso(q, 0, Lasso{{}, {2}}).ok);
}

TEST(CompletePathBelow, Examples) {
  const WorkedExample ex;
  const Quasimodel q = ex.quasimodel();
  EXPECT_EQ(complete_path_below(q, {0, 0}, 0), (std::vector<std::size_t>{0, 0}));
  EXPECT_EQ(complete_path_below(q, {0, 0}, 1), (std::vector<std::size_t>{1, 1}));
  EXPECT_EQ(complete_path_below(q, {2}, 2), (std::vector<std::size_t>{2}));
  EXPECT_THROW(complete_path_below(q, {0}, 2), std::invalid_argument);
  EXPECT_THROW(complete_path_below(q, {}, 0), std::invalid_argument);
}

TEST(PruneProfile, Examples) {
  {
    const Irreducibles irr = enumerate_irreducibles(SigmaContext(parse("Xp")));
    const PruneResult pr = prune_profile(irr.store, TypeSet{});
    EXPECT_EQ(pr.survivors().size(), irr.store.size());
  }
  {
    const Irreducibles irr = enumerate_irreducibles(SigmaContext(parse("<>#")));
    const std::size_t ev = irr.store.sigma().at(parse("<>#"));
    const PruneResult pr = prune_profile(irr.store, TypeSet{});
    ASSERT_FALSE(pr.survivors().empty());
    for (MomentId m : pr.survivors())
      for (MomentId s : irr.store.submoments(m)) EXPECT_FALSE(irr.store.label(s).contains(ev));
  }
}

TEST(PruneProfile, FlagshipFixpointContainsWorkedReducts) {
  const SigmaContext sigma(parse(testing::kFlagship));
  const Irreducibles irr = enumerate_irreducibles(
      sigma, EnumerationCaps{}, [](TypeSet) { return true; },
      [](const MomentStore&, std::size_t h) { return h < 3; });
  WorkedExample ex;
  TypeSet profile;
  profile.insert(sigma.at(parse("A(~p | <>p)")));
  const PruneResult pr = prune_profile(irr.store, profile);
  const auto survivors = pr.survivors();
  for (MomentId m : {ex.mu, ex.mv, ex.mw}) {
    const auto found = irr.store.find(ex.store->encoding(reduce(*ex.store, m)));
    ASSERT_TRUE(found.has_value());
    EXPECT_NE(std::find(survivors.begin(), survivors.end(), *found), survivors.end());
  }
  const std::size_t target = sigma.at(parse(testing::kFlagship));
  EXPECT_TRUE(detail::find_witnesses(irr.store, pr, target, profile).has_value());
}

TEST(PruneProfile, RuleOrderDoesNotMatter) {
  for (const char* text : {"Xp -> p", "<>p -> p", "A(~p | <>p) -> ~<>p | <>p", "~<>p | Xp",
                           "A(p | <>q) -> Xq"}) {
    const SigmaContext sigma(parse(text));
    EnumerationCaps caps;
    caps.max_moments = 3000;
    const Irreducibles irr = enumerate_irreducibles(sigma, caps);
    const auto& foralls = sigma.with_op(Op::Forall);
    for (std::size_t p = 0; p < (std::size_t{1} << foralls.size()); ++p) {
      TypeSet profile;
      for (std::size_t b = 0; b < foralls.size(); ++b)
        if ((p >> b) & 1u) profile.insert(foralls[b]);
      const auto fwd = prune_profile(irr.store, profile, RuleOrder::Forward).survivors();
      const auto rev = prune_profile(irr.store, profile, RuleOrder::Reverse).survivors();
      EXPECT_EQ(fwd, rev) << text;
      for (MomentId m : fwd)
        for (MomentId s : irr.store.submoments(m))
          EXPECT_NE(std::find(fwd.begin(), fwd.end(), s), fwd.end());
    }
  }
}

TEST(Decide, Examples) {
  EXPECT_EQ(decide(parse("p -> p")).verdict, Verdict::Valid);
  EXPECT_EQ(decide(parse("<>p <-> (p | X<>p)")).verdict, Verdict::Valid);
  const DecideResult flag = decide(parse(testing::kFlagship));
  ASSERT_EQ(flag.verdict, Verdict::Falsifiable);
  ASSERT_TRUE(flag.certificate);
  EXPECT_TRUE(verify_certificate(*flag.certificate, parse(testing::kFlagship)).ok);
  EXPECT_EQ(decide(parse("Xp -> p")).verdict, Verdict::Falsifiable);
  EXPECT_THROW(decide(parse("[]p -> p")), FragmentError);
}

TEST(Decide, FlagshipCertificateMatchesWorkedShape) {
  const DecideResult r = decide(parse(testing::kFlagship));
  ASSERT_TRUE(r.certificate);
  const Certificate& c = *r.certificate;
  const WorkedExample ex;
  ASSERT_EQ(c.model.worlds.size(), 3u);
  std::set<std::uint64_t> got, expected{ex.lu.bits(), ex.lv.bits(), ex.lw.bits()};
  for (std::size_t w = 0; w < 3; ++w) got.insert(c.model.label(w).bits());
  EXPECT_EQ(got, expected);
  EXPECT_EQ(c.model.label(c.witness), ex.lu);
}

TEST(Decide, ResourceLimitIsNeverValid) {
  DecideOptions opts;
  opts.caps.max_moments = 2;
  const DecideResult r = decide(parse("A(p | <>q) -> A<>q | Xp"), opts);
  EXPECT_NE(r.verdict, Verdict::Valid);
}

TEST(Decide, ThreadCountDoesNotChangeTheCertificate) {
  for (const char* text : {testing::kFlagship, "Xp -> p", "A(p | <>q) -> Xq"}) {
    DecideOptions one, four;
    four.threads = 4;
    const DecideResult a = decide(parse(text), one), b = decide(parse(text), four);
    ASSERT_EQ(a.verdict, b.verdict);
    if (!a.certificate) continue;
    EXPECT_EQ(a.certificate->model.worlds.size(), b.certificate->model.worlds.size());
    for (std::size_t w = 0; w < a.certificate->model.worlds.size(); ++w)
      EXPECT_EQ(a.certificate->model.store->encoding(a.certificate->model.worlds[w]),
                b.certificate->model.store->encoding(b.certificate->model.worlds[w]));
    EXPECT_EQ(a.certificate->model.s_edges, b.certificate->model.s_edges);
    EXPECT_EQ(a.certificate->witness, b.certificate->witness);
  }
}

TEST(Decide, EarlyExitAgreesWithFullEnumeration) {
  for (const char* text : {"Xp -> p", "<>p -> p", "p -> Xp", "~~p -> p", "X~p -> ~Xp"}) {
    DecideOptions full;
    full.early_exit = false;
    EXPECT_EQ(decide(parse(text)).verdict, decide(parse(text), full).verdict) << text;
  }
}

TEST(VerifyCertificate, TamperedCertificatesFail) {
  const Formula phi = parse(testing::kFlagship);
  const DecideResult r = decide(phi);
  ASSERT_TRUE(r.certificate);
  {
    Certificate c = *r.certificate;
    auto store = std::make_shared<MomentStore>(*c.model.store);
    TypeSet lab = store->label(c.model.worlds[c.witness]);
    lab.insert(store->sigma().at(phi));
    std::vector<MomentId> kids = store->children(c.model.worlds[c.witness]);
    c.model.store = store;
    c.model.worlds[c.witness] = store->intern(lab, kids);
    EXPECT_FALSE(verify_certificate(c, phi).ok);
  }
  {
    Certificate c = *r.certificate;
    const std::size_t w = c.model.s_edges.front().first;
    std::erase_if(c.model.s_edges, [&](auto e) { return e.first == w; });
    const CheckResult v = verify_certificate(c, phi);
    EXPECT_FALSE(v.ok);
    EXPECT_NE(v.diagnostic.find("seriality"), std::string::npos) << v.diagnostic;
  }
  {
    Certificate c = *r.certificate;
    EXPECT_FALSE(verify_certificate(c, parse("p -> p")).ok);
    c.lassos.pop_back();
    EXPECT_FALSE(verify_certificate(c, phi).ok);
  }
  {
    Certificate c = *r.certificate;
    c.order.clear();
    EXPECT_FALSE(verify_certificate(c, phi).ok);
  }
}

TEST(Extract, OnePointModel) {
  const FiniteSystem x({1}, {0});
  const SigmaContext sigma(parse("p"));
  const Extraction ex = extract_quasimodel(x, Valuation{{"p", 1}}, sigma);
  ASSERT_EQ(ex.model.worlds.size(), 1u);
  EXPECT_EQ(ex.model.label(0), TypeSet{1});
  EXPECT_EQ(ex.model.store->node_count(ex.model.worlds[0]), 1u);
}

TEST(Extract, CountermodelOfNext) {
  const Formula phi = parse("Xp -> p");
  const auto cm = find_countermodel(phi, 2);
  ASSERT_TRUE(cm);
  const SigmaContext sigma(phi);
  const Extraction ex = extract_quasimodel(cm->system, cm->valuation, sigma);
  EXPECT_TRUE(check_quasimodel(ex.model).ok);
  bool falsified = false;
  for (std::size_t w = 0; w < ex.model.worlds.size(); ++w)
    falsified = falsified || !ex.model.label(w).contains(sigma.at(phi));
  EXPECT_TRUE(falsified);
}

TEST(Extract, FalsifiesExactlyWhatTheModelFalsifies) {
  std::mt19937_64 rng(17);
  const std::vector<Op> ops{Op::And, Op::Or, Op::Implies, Op::Next, Op::Eventually, Op::Forall};
  int checked = 0;
  for (int i = 0; i < 60 && checked < 25; ++i) {
    const Formula f = testing::random_formula(rng, 3, {"p", "q"}, ops);
    const SigmaContext sigma(f);
    const FiniteSystem x = random_system(1 + i % 4, static_cast<std::uint64_t>(i));
    const Valuation val = random_valuation(x, {"p", "q"}, rng);
    EnumerationCaps caps;
    caps.max_moments = 20000;
    std::optional<Extraction> ex;
    try {
      ex = extract_quasimodel(x, val, sigma, caps);
    } catch (const CapExceeded&) {
      continue;
    }
    ++checked;
    for (std::size_t k = 0; k < sigma.size(); ++k) {
      const bool model_fails = evaluate(x, val, sigma[k]) != x.all();
      bool quasi_fails = false;
      for (std::size_t w = 0; w < ex->model.worlds.size(); ++w)
        quasi_fails = quasi_fails || !ex->model.label(w).contains(k);
      EXPECT_EQ(model_fails, quasi_fails) << format(f) << " at " << format(sigma[k]);
    }
  }
  EXPECT_GE(checked, 10);
}

TEST(Extract, RejectsHenceforth) {
  const FiniteSystem x({1}, {0});
  EXPECT_THROW(extract_quasimodel(x, Valuation{{"p", 1}}, SigmaContext(parse("[]p"))),
               FragmentError);
}

}  // namespace
}  // namespace itlc
