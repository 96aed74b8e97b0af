#include "term_printer.hpp"

#include <set>

#include "drc/protocols.hpp"
#include "drc/semantics.hpp"

using namespace drc;

namespace {

Term N(const char* s) { return Term::name(s); }

std::optional<std::pair<std::size_t, std::size_t>> find_sig(const Trace& tr, SigKind k,
                                                          const std::function<bool(const Signal&)>& pred) {
  for (std::size_t i = 0; i < tr.steps.size(); ++i)
    for (std::size_t j = 0; j < tr.steps[i].size(); ++j)
      if (tr.steps[i][j].kind == k && pred(tr.steps[i][j])) return std::make_pair(i, j);
  return std::nullopt;
}

bool before(std::pair<std::size_t, std::size_t> a, std::pair<std::size_t, std::size_t> b) { return a < b; }

Model model_for(const std::string& id, const Topology& base, int voters, int abstainers, Variant v,
                int injections = -1) {
  auto e = protocol_by_id(id);
  Bounds b;
  b.voters = voters;
  b.abstainers = abstainers;
  if (injections >= 0) b.injections = injections;
  return make_model(e.spec, variant(instantiate(base, voters, abstainers, 1), v), b);
}

std::set<Hash128> keys(const std::vector<Trace>& trs) {
  std::set<Hash128> out;
  for (const auto& t : trs) out.insert(trace_key(t));
  return out;
}

}  // namespace

TEST_SUITE("semantics") {

TEST_CASE("P6 publishes the undeniable submission before recording it") {
  // H is untrusted in the home topology, so the honest schedule needs H+.
  Model m = model_for("p6", catalog::possibility(6), 1, 0, Variant::H);
  Term b = pair(N("v1"), N("H1"));
  bool found = false;
  for (const auto& tr : collect_traces(m, Mode::Adversarial)) {
    auto pub = find_sig(tr, SigKind::Pub, [&](const Signal& s) { return s.args.size() == 3 && s.args[2] == b; });
    auto rec = find_sig(tr, SigKind::BB_rec, [&](const Signal& s) { return s.args[0] == Term::list({b}); });
    if (pub && rec && before(*pub, *rec)) found = true;
  }
  CHECK(found);
}

TEST_CASE("MixVote H+: evidence recorded for a ballot S never publishes") {
  Model m = model_for("mixvote", catalog::mixvote(), 1, 0, Variant::H, 2);
  Term skS = server_key();
  bool found = false;
  for (const auto& tr : collect_traces(m, Mode::Adversarial)) {
    auto ev = find_sig(tr, SigKind::Evidence, [&](const Signal& s) { return s.args[1] == sign(s.args[0], skS); });
    if (!ev) continue;
    const Term& b = tr.steps[ev->first][ev->second].args[0];
    auto listed = find_sig(tr, SigKind::BB_rec, [&](const Signal& s) {
      for (const auto& x : s.args[0].args())
        if (x == b) return true;
      return false;
    });
    auto rec = find_sig(tr, SigKind::BB_rec, [](const Signal&) { return true; });
    if (rec && !listed) found = true;
  }
  CHECK(found);
}

TEST_CASE("without injections every receive has a matching send") {
  for (int i = 1; i <= 7; ++i) {
    auto e = build_simple(i);
    Bounds b;
    b.injections = 0;
    Model m = make_model(e.spec, variant(instantiate(e.home, 1, 0, 1), Variant::SH), b);
    for (const auto& tr : collect_traces(m, Mode::Adversarial)) {
      std::multiset<std::vector<Term>> sent;
      tr.for_each([&](std::size_t, const Signal& s) {
        if (s.kind == SigKind::Send) sent.insert(s.args);
        if (s.kind == SigKind::Rec) {
          auto it = sent.find(s.args);
          CHECK_MESSAGE(it != sent.end(), "P" << i << " " << s.str());
          if (it != sent.end()) sent.erase(it);
        }
      });
    }
  }
}

TEST_CASE("honest-network runs") {
  SUBCASE("P4 records the ballot before End") {
    auto e = protocol_by_id("p4");
    Model m = make_model(e.spec, instantiate(e.home, 1, 0, 1), Bounds{});
    auto trs = honest_network_traces(m);
    REQUIRE(!trs.empty());
    Term b = pair(N("v1"), N("H1"));
    bool found = false;
    for (const auto& tr : trs) {
      CHECK(tr.honest_network);
      auto bal = find_sig(tr, SigKind::Ballot, [&](const Signal& s) { return s.args[1] == b; });
      auto rec = find_sig(tr, SigKind::BB_rec, [&](const Signal& s) {
        return std::count(s.args[0].args().begin(), s.args[0].args().end(), b) > 0;
      });
      auto end = tr.end_index();
      if (bal && rec && end && before(*bal, *rec) && rec->first < *end) found = true;
    }
    CHECK(found);
  }
  SUBCASE("MixVote abstainer only") {
    Model m = model_for("mixvote", catalog::mixvote(), 0, 1, Variant::SH);
    auto trs = honest_network_traces(m);
    REQUIRE(!trs.empty());
    for (const auto& tr : trs) {
      CHECK(tr.contains(Signal{SigKind::VfA, {N("H1"), Term::list({})}}));
      CHECK(tr.contains(Signal{SigKind::BB_rec, {Term::list({})}}));
    }
  }
  SUBCASE("subset of the adversarial enumeration") {
    for (int i = 1; i <= 7; ++i) {
      auto e = build_simple(i);
      Model m = make_model(e.spec, variant(instantiate(e.home, 1, 0, 1), Variant::SH), Bounds{});
      auto adv = keys(collect_traces(m, Mode::Adversarial));
      for (auto tr : honest_network_traces(m)) {
        tr.honest_network = false;
        CHECK_MESSAGE(adv.count(trace_key(tr)), "P" << i);
      }
    }
  }
}

TEST_CASE("forged evidence needs the signature") {
  Term skS = server_key();
  Term b = pair(N("v1"), N("H1"));
  auto f = forge_evidence_action({pair(b, sign(b, skS)), pk(skS)}, b, sign(b, skS), 6);
  REQUIRE(f.has_value());
  CHECK(f->kind == SigKind::Evidence);
  CHECK(f->args == std::vector<Term>{b, sign(b, skS)});
  CHECK_FALSE(forge_evidence_action({b, pk(skS)}, b, sign(b, skS), 6).has_value());
}

TEST_CASE("pubtr") {
  Term h = N("H1"), s = N("S"), b = pair(N("v1"), h);
  Trace tr;
  tr.steps = {{Signal{SigKind::Send, {h, s, b}}}, {Signal{SigKind::Pub, {h, s, b}}},
              {Signal{SigKind::BB_rec, {Term::list({b})}}}};
  Trace p = pubtr(tr);
  std::vector<Signal> flat;
  p.for_each([&](std::size_t, const Signal& x) { flat.push_back(x); });
  REQUIRE(flat.size() == 2);
  CHECK(flat[0].kind == SigKind::Pub);
  CHECK(flat[1].kind == SigKind::BB_rec);
  CHECK(trace_key(pubtr(p)) == trace_key(p));

  Trace other = tr;
  other.steps[0] = {Signal{SigKind::Rec, {h, s, b}}};
  CHECK(trace_key(pubtr(other)) == trace_key(pubtr(tr)));
  CHECK(trace_key(other) != trace_key(tr));
}

TEST_CASE("state merging preserves the trace set") {
  // Unreduced enumeration expands every interleaving; P4 is run in S+ to keep it short.
  for (int i = 1; i <= 7; ++i) {
    auto e = build_simple(i);
    Variant v = i == 4 ? Variant::S : Variant::H;
    Model m = make_model(e.spec, variant(instantiate(e.home, 1, 0, 1), v), Bounds{});
    EnumStats merged, full;
    auto a = keys(collect_traces(m, Mode::Adversarial, &merged));
    m.merge_states = false;
    auto b = keys(collect_traces(m, Mode::Adversarial, &full));
    CHECK_MESSAGE(a == b, "P" << i);
    CHECK(full.pruned == 0);
    CHECK(merged.states <= full.states);
  }
}

TEST_CASE("partitioned enumeration matches the serial one") {
  auto e = build_simple(5);
  Model m = make_model(e.spec, variant(instantiate(e.home, 1, 0, 1), Variant::H), Bounds{});
  auto serial = keys(collect_traces(m, Mode::Adversarial));
  for (int workers : {1, 3}) {
    for (int split : {0, 2, 5}) {
      std::vector<std::set<Hash128>> parts;
      enumerate_partitioned(
          m, Mode::Adversarial, ParallelPlan{split, workers},
          [&](std::size_t i) -> TraceVisitor {
            return [&, i](const Trace&, const Hash128& k) { parts[i].insert(k); };
          },
          [&](std::size_t n) { parts.resize(n); }, nullptr);
      std::set<Hash128> all;
      for (const auto& p : parts) all.insert(p.begin(), p.end());
      CHECK(all == serial);
    }
  }
}

TEST_CASE("bounds are validated") {
  auto e = build_simple(1);
  Bounds b;
  b.voters = 0;
  CHECK_THROWS_AS(make_model(e.spec, e.home, b), std::invalid_argument);
  b = Bounds{};
  b.injections = -1;
  CHECK_THROWS_AS(make_model(e.spec, instantiate(e.home, 1, 0, 1), b), std::invalid_argument);
}

}  // TEST_SUITE
