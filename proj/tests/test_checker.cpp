#include "term_printer.hpp"

#include "drc/checker.hpp"
#include "drc/protocols.hpp"

using namespace drc;

namespace {

Term N(const char* s) { return Term::name(s); }

Bounds small(const std::string& id, int voters = 1, int abstainers = 0) {
  Bounds b = default_bounds(id);
  b.voters = voters;
  b.abstainers = abstainers;
  return b;
}

Topology home(const ProtocolEntry& e, const Bounds& b) { return instantiate(e.home, b.voters, b.abstainers, 1); }

}  // namespace

TEST_SUITE("checker") {

TEST_CASE("P4 keeps TimelyP in H+") {
  auto e = build_simple(4);
  auto b = small("P4");
  auto o = check_security(e.spec, variant(home(e, b), Variant::H), Prop::TimelyP, b);
  CHECK(o.holds());
  CHECK(o.fired);
  CHECK_FALSE(o.trace.has_value());
  CHECK(o.traces > 0);
}

TEST_CASE("vacuous property holds") {
  auto e = build_simple(1);
  auto b = small("P1");
  auto o = check_security(e.spec, variant(home(e, b), Variant::SH), Prop::IndivVerif, b);
  CHECK(o.verdict == Verdict::Holds);
  CHECK_FALSE(o.fired);
}

TEST_CASE("MixVote with an untrusted authority loses TimelyP but not VoterC") {
  auto e = build_mixvote();
  auto b = small("MixVote");
  auto t = variant(home(e, b), Variant::H);
  t.vertex("S").trust = Trust::Untrusted;
  auto outs = check_properties(e.spec, t, {Prop::TimelyP, Prop::VoterC}, b);
  REQUIRE(outs.size() == 2);
  CHECK(outs[0].verdict == Verdict::Refuted);
  REQUIRE(outs[0].trace.has_value());
  std::vector<Term> cast;
  outs[0].trace->for_each([&](std::size_t, const Signal& s) {
    if (s.kind == SigKind::Ballot) cast.push_back(s.args[1]);
  });
  REQUIRE(!cast.empty());
  bool confirmed = false;
  outs[0].trace->for_each([&](std::size_t, const Signal& s) {
    if (s.kind != SigKind::Send || s.args[0] != N("S")) return;
    for (const auto& b : cast) confirmed = confirmed || s.args[2] == sign(b, server_key());
  });
  CHECK_FALSE(confirmed);
  CHECK(outs[1].holds());
}

TEST_CASE("functional witnesses") {
  auto p1 = build_simple(1);
  auto o = check_functional(p1.spec, variant(home(p1, small("P1")), Variant::SH), small("P1"));
  CHECK(o.verdict == Verdict::Holds);
  REQUIRE(o.trace.has_value());
  CHECK(func_property(*o.trace));

  auto mv = build_mixvote();
  auto bm = small("MixVote");
  CHECK(check_functional(mv.spec, variant(home(mv, bm), Variant::SH), bm).verdict == Verdict::Holds);
  auto ba = small("MixVote", 0, 1);
  auto none = check_functional(mv.spec, variant(home(mv, ba), Variant::SH), ba);
  CHECK(none.verdict == Verdict::NoWitness);
  CHECK_FALSE(none.trace.has_value());
}

TEST_CASE("check_dr on P4 and a weakened T4") {
  auto e = build_simple(4);
  auto b = small("P4");
  auto ok = check_dr(e.spec, home(e, b), {Prop::TimelyP}, {Prop::AuthP}, b);
  CHECK(ok.overall);
  CHECK(ok.parts.size() == 4);

  auto weak = home(e, b);
  weak.chan("H1", "P1").delivery = Delivery::Default;
  auto bad = check_dr(e.spec, weak, {Prop::TimelyP}, {Prop::AuthP}, b);
  CHECK_FALSE(bad.overall);
  bool refuted = false;
  for (const auto& p : bad.parts)
    for (const auto& o : p.outcomes)
      if (o.verdict == Verdict::Refuted) {
        refuted = true;
        CHECK(o.trace.has_value());
        CHECK(o.name == "TimelyP");
      }
  CHECK(refuted);
}

TEST_CASE("Uniqueness implies VoterA") {
  auto e = build_mixvote();
  auto b = small("MixVote");
  for (auto v : {Variant::SH, Variant::H}) {
    auto o = check_theorem2(e.spec, variant(home(e, b), v), b);
    CHECK(o.holds());
    CHECK(o.fired);
  }
  auto ba = small("MixVote", 0, 1);
  auto vac = check_theorem2(e.spec, variant(home(e, ba), Variant::SH), ba);
  CHECK(vac.holds());
  CHECK_FALSE(vac.fired);

  auto p1 = build_simple(1);
  auto revote = p1.spec;
  revote.revoting_allowed = true;
  CHECK_THROWS(check_theorem2(revote, variant(home(p1, small("P1")), Variant::SH), small("P1")));
}

TEST_CASE("Requirement 1 comparison runs on every trace") {
  auto e = build_simple(5);
  auto b = small("P5");
  CheckOptions opts;
  opts.check_requirement1 = true;
  auto o = check_security(e.spec, variant(home(e, b), Variant::SH), Prop::AuthP, b, opts);
  CHECK(o.req1_checked > o.traces);
  CHECK(o.req1_mismatches == 0);
}

TEST_CASE("reports do not depend on the worker count") {
  auto e = build_simple(5);
  auto b = small("P5");
  auto t = home(e, b);
  std::string ref;
  for (int w : {1, 2, 4}) {
    CheckOptions opts;
    opts.plan.workers = w;
    auto j = to_json(check_dr(e.spec, t, {Prop::TimelyP}, {Prop::AuthP}, b, opts)).dump();
    if (ref.empty()) ref = j;
    CHECK(j == ref);
  }
}

TEST_CASE("topology JSON") {
  auto t = instantiate(catalog::mixvote(), 2, 1, 1);
  auto j = to_json(t);
  CHECK(j.contains("nodes"));
  auto back = topology_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back == t);
  CHECK(back.name == t.name);

  auto legacy = nlohmann::json::parse(j.dump());
  legacy["vertices"] = legacy["nodes"];
  legacy.erase("nodes");
  CHECK(topology_from_json(legacy) == t);

  auto broken = nlohmann::json::parse(j.dump());
  broken["edges"][0]["from"] = "nowhere";
  CHECK_THROWS(topology_from_json(broken));
}

TEST_CASE("trace JSON uses signal objects") {
  Trace tr;
  tr.steps = {{Signal{SigKind::BB_rec, {Term::list({N("b")})}}}, {Signal{SigKind::End, {}}}};
  auto j = to_json(tr);
  REQUIRE(j.is_array());
  CHECK(j[0][0]["sig"] == "BB_rec");
  CHECK(j[0][0]["args"][0] == "(list b)");
  CHECK(j[1][0]["args"].empty());
}

TEST_CASE("suite names and bounds") {
  CHECK(suite_names() == std::vector<std::string>{"possibility", "impossibility", "mixvote", "theorem2"});
  auto b = default_bounds("MixVote");
  CHECK(b.voters == 2);
  CHECK(b.abstainers == 1);
  CHECK(b.injections == kMixVoteInjections);
  auto p = default_bounds("P3");
  CHECK(p.voters == 1);
  CHECK(p.deduce_depth == 6);
  CHECK(p.injections == 3);
  CHECK(p.max_steps == 40);
  CHECK_THROWS(run_suite("nope"));
  auto imp = run_suite("impossibility");
  CHECK(imp.pass);
}

}  // TEST_SUITE
