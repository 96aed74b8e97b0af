#include "drc/checker.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "drc/protocols.hpp"

namespace drc {

using nlohmann::ordered_json;

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::HoldsWithinBounds: return "holds within bounds";
    case Verdict::Refuted: return "refuted";
    case Verdict::NoWitness: return "no witness";
  }
  return "?";
}

namespace {

void require_class(const Topology& topo) {
  auto why = variant_class_violation(topo);
  if (!why.empty()) throw topology_error("topology '" + topo.name + "' not in class: " + why);
}

// Per-subtree accumulator; merged in subtree order after the parallel run.
struct Acc {
  std::vector<Hash128> keys;
  std::vector<char> fired;
  std::vector<std::optional<std::pair<Hash128, Trace>>> bad;
  std::uint64_t req1_checked = 0;
  std::uint64_t req1_mismatches = 0;
};

void keep_smallest(std::optional<std::pair<Hash128, Trace>>& slot, const Hash128& k, const Trace& tr) {
  if (!slot || k < slot->first) slot = std::make_pair(k, tr);
}

// Enumerates once and feeds every trace to `judge`, which returns for each of
// `n` checks whether the trace is bad and whether the antecedent fired.
using Judge = std::function<void(const Trace&, const TraceFacts*, std::vector<char>& bad,
                                 std::vector<char>& fired)>;

std::vector<CheckOutcome> run_checks(const ProtocolSpec& spec, const Topology& topo,
                                     const std::vector<std::string>& names, const Bounds& bounds,
                                     const CheckOptions& opts, const Judge& judge) {
  require_class(topo);
  const Model m = make_model(spec, topo, bounds);
  const std::size_t n = names.size();
  std::vector<Acc> accs;
  auto prepare = [&](std::size_t count) {
    accs.assign(count, Acc{});
    for (auto& a : accs) {
      a.fired.assign(n, 0);
      a.bad.resize(n);
    }
  };
  auto make_visitor = [&](std::size_t i) -> TraceVisitor {
    return [&, i](const Trace& tr, const Hash128& k) {
      Acc& a = accs[i];
      a.keys.push_back(k);
      std::optional<TraceFacts> facts;
      if (spec.faulty) facts.emplace(tr, *spec.faulty);
      std::vector<char> bad(n, 0), fired(n, 0);
      judge(tr, facts ? &*facts : nullptr, bad, fired);
      for (std::size_t j = 0; j < n; ++j) {
        if (fired[j]) a.fired[j] = 1;
        if (bad[j]) keep_smallest(a.bad[j], k, tr);
      }
      if (opts.check_requirement1 && spec.faulty) {
        Trace pub = pubtr(tr);
        for (const auto& b : ballot_candidates(tr)) {
          a.req1_checked++;
          if (eval_faulty(*spec.faulty, tr, b) != eval_faulty(*spec.faulty, pub, b)) a.req1_mismatches++;
        }
      }
    };
  };
  EnumStats stats;
  enumerate_partitioned(m, Mode::Adversarial, opts.plan, make_visitor, prepare, &stats);

  std::vector<Hash128> keys;
  for (auto& a : accs) keys.insert(keys.end(), a.keys.begin(), a.keys.end());
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  std::vector<CheckOutcome> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    CheckOutcome& o = out[j];
    o.name = names[j];
    o.topology = topo.name;
    o.stats = stats;
    o.traces = keys.size();
    std::optional<std::pair<Hash128, Trace>> worst;
    for (auto& a : accs) {
      o.fired = o.fired || a.fired[j];
      if (a.bad[j]) keep_smallest(worst, a.bad[j]->first, a.bad[j]->second);
      o.req1_checked += a.req1_checked;
      o.req1_mismatches += a.req1_mismatches;
    }
    if (worst) {
      o.verdict = Verdict::Refuted;
      o.trace = std::move(worst->second);
    } else {
      o.verdict = stats.truncated ? Verdict::HoldsWithinBounds : Verdict::Holds;
    }
  }
  return out;
}

}  // namespace

std::vector<CheckOutcome> check_properties(const ProtocolSpec& spec, const Topology& topo,
                                           const std::vector<Prop>& props, const Bounds& bounds,
                                           const CheckOptions& opts) {
  std::vector<std::string> names;
  for (auto p : props) {
    if (p == Prop::Func) throw std::invalid_argument("Func is a functional property; use check_functional");
    names.push_back(to_string(p));
  }
  PropContext ctx{&spec};
  return run_checks(spec, topo, names, bounds, opts,
                    [&](const Trace& tr, const TraceFacts* f, std::vector<char>& bad, std::vector<char>& fired) {
                      for (std::size_t j = 0; j < props.size(); ++j) {
                        bool fj = false;
                        bad[j] = !eval_prop(props[j], tr, f, ctx, &fj);
                        fired[j] = fj;
                      }
                    });
}

CheckOutcome check_security(const ProtocolSpec& spec, const Topology& topo, Prop prop, const Bounds& bounds,
                            const CheckOptions& opts) {
  return check_properties(spec, topo, {prop}, bounds, opts).at(0);
}

CheckOutcome check_functional(const ProtocolSpec& spec, const Topology& topo, const Bounds& bounds) {
  require_class(topo);
  const Model m = make_model(spec, topo, bounds);
  CheckOutcome o;
  o.name = "Func";
  o.topology = topo.name;
  std::optional<std::pair<Hash128, Trace>> best;
  o.stats = enumerate_traces(m, Mode::HonestNetwork, [&](const Trace& tr, const Hash128& k) {
    if (func_property(tr)) keep_smallest(best, k, tr);
  });
  o.traces = o.stats.traces;
  o.fired = best.has_value();
  if (best) {
    o.verdict = Verdict::Holds;
    o.trace = std::move(best->second);
  } else {
    o.verdict = Verdict::NoWitness;
  }
  return o;
}

DRReport check_dr(const ProtocolSpec& spec, const Topology& topo, const std::vector<Prop>& p_h,
                  const std::vector<Prop>& p_s, const Bounds& bounds, const CheckOptions& opts) {
  if (!topo.distinguished) throw topology_error("dispute resolution check needs a distinguished voter");
  DRReport r;
  r.protocol = spec.id;
  r.topology = topo.name;
  r.bounds = bounds;
  std::vector<Prop> both = p_h;
  for (auto p : p_s)
    if (std::find(both.begin(), both.end(), p) == both.end()) both.push_back(p);
  auto part = [&](const std::string& label, Variant v, const std::vector<Prop>& props) {
    DRPart d;
    d.label = label;
    d.variant = v;
    d.outcomes = check_properties(spec, variant(topo, v), props, bounds, opts);
    for (auto& o : d.outcomes) o.variant = to_string(v);
    for (const auto& o : d.outcomes) d.holds = d.holds && o.holds();
    return d;
  };
  r.parts.push_back(part("S+H+ voter and authority", Variant::SH, both));
  r.parts.push_back(part("H+ voter", Variant::H, p_h));
  r.parts.push_back(part("S+ authority", Variant::S, p_s));
  DRPart f;
  f.label = "S+H+ functional witness";
  f.variant = Variant::SH;
  f.outcomes.push_back(check_functional(spec, variant(topo, Variant::SH), bounds));
  f.outcomes[0].variant = to_string(Variant::SH);
  f.holds = f.outcomes[0].holds();
  r.parts.push_back(std::move(f));
  for (const auto& p : r.parts) r.overall = r.overall && p.holds;
  return r;
}

CheckOutcome check_theorem2(const ProtocolSpec& spec, const Topology& topo, const Bounds& bounds,
                            const CheckOptions& opts) {
  if (spec.revoting_allowed) throw std::invalid_argument("theorem check requires a protocol without re-voting");
  if (!spec.faulty) throw std::invalid_argument("theorem check needs a protocol verdict");
  auto out = run_checks(spec, topo, {"Uniqueness => VoterA"}, bounds, opts,
                        [&](const Trace&, const TraceFacts* f, std::vector<char>& bad, std::vector<char>& fired) {
                          bool fu = false;
                          bool u = uniqueness(*f, spec.castby, &fu);
                          bool va = voter_a(*f, spec.castby);
                          fired[0] = u && fu;
                          bad[0] = u && !va;
                        });
  return out.at(0);
}

// ---- serialization ------------------------------------------------------------

ordered_json to_json(const Bounds& b) {
  return {{"voters", b.voters},           {"abstainers", b.abstainers}, {"deduce_depth", b.deduce_depth},
          {"injections", b.injections}, {"max_steps", b.max_steps}};
}

ordered_json to_json(const EnumStats& s) {
  return {{"traces", s.traces},
          {"states", s.states},
          {"truncated", s.truncated},
          {"excluded", s.excluded},
          {"pruned", s.pruned}};
}

ordered_json to_json(const Signal& sig) {
  ordered_json args = ordered_json::array();
  for (const auto& a : sig.args) args.push_back(a.str());
  return {{"sig", to_string(sig.kind)}, {"args", std::move(args)}};
}

ordered_json to_json(const Trace& tr) {
  ordered_json steps = ordered_json::array();
  for (const auto& st : tr.steps) {
    ordered_json xs = ordered_json::array();
    for (const auto& s : st) xs.push_back(to_json(s));
    steps.push_back(std::move(xs));
  }
  return steps;
}

ordered_json to_json(const CheckOutcome& o) {
  ordered_json j{{"property", o.name},
                 {"variant", o.variant},
                 {"topology", o.topology},
                 {"result", to_string(o.verdict)},
                 {"holds", o.holds()},
                 {"traces_checked", o.traces},
                 {"antecedent_fired", o.fired},
                 {"stats", to_json(o.stats)}};
  if (o.req1_checked) j["requirement1"] = {{"checked", o.req1_checked}, {"mismatches", o.req1_mismatches}};
  const bool witness = o.name == "Func";
  j[witness ? "witness" : "counterexample"] = o.trace ? to_json(*o.trace) : ordered_json(nullptr);
  return j;
}

ordered_json to_json(const DRReport& r) {
  ordered_json parts = ordered_json::array();
  for (const auto& p : r.parts) {
    ordered_json os = ordered_json::array();
    for (const auto& o : p.outcomes) os.push_back(to_json(o));
    parts.push_back({{"label", p.label}, {"variant", to_string(p.variant)}, {"holds", p.holds}, {"checks", os}});
  }
  return {{"protocol", r.protocol},
          {"topology", r.topology},
          {"bounds", to_json(r.bounds)},
          {"overall", r.overall},
          {"parts", std::move(parts)}};
}

ordered_json to_json(const Topology& t) {
  ordered_json vs = ordered_json::array();
  for (const auto& [id, v] : t.vertices())
    vs.push_back({{"id", id}, {"role", to_string(v.role)}, {"trust", to_string(v.trust)}, {"instance", v.instance}});
  ordered_json es = ordered_json::array();
  for (const auto& [k, c] : t.edges())
    es.push_back({{"from", k.first},
                  {"to", k.second},
                  {"secrecy", to_string(c.secrecy)},
                  {"delivery", to_string(c.delivery)}});
  ordered_json j{{"name", t.name}};
  if (t.distinguished) j["distinguished"] = *t.distinguished;
  j["nodes"] = std::move(vs);
  j["edges"] = std::move(es);
  return j;
}

Topology topology_from_json(const nlohmann::json& j) {
  try {
    Topology t;
    t.name = j.value("name", std::string("custom"));
    for (const auto& v : j.at(j.contains("nodes") ? "nodes" : "vertices")) {
      Vertex x;
      x.id = v.at("id").get<std::string>();
      x.role = parse_role(v.at("role").get<std::string>());
      x.trust = parse_trust(v.value("trust", std::string("untrusted")));
      x.instance = v.value("instance", 0);
      t.add_vertex(x);
    }
    for (const auto& e : j.at("edges")) {
      Channel c;
      c.secrecy = parse_secrecy(e.value("secrecy", std::string("insecure")));
      c.delivery = parse_delivery(e.value("delivery", std::string("default")));
      t.add_edge(e.at("from").get<std::string>(), e.at("to").get<std::string>(), c);
    }
    if (j.contains("distinguished")) t.distinguished = j.at("distinguished").get<std::string>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw topology_error(std::string("topology json: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw topology_error(std::string("topology json: ") + e.what());
  }
}

// ---- suites -------------------------------------------------------------------

std::vector<std::string> suite_names() { return {"possibility", "impossibility", "mixvote", "theorem2"}; }

Bounds default_bounds(const std::string& protocol_id) {
  Bounds b;
  std::string id = protocol_id;
  std::transform(id.begin(), id.end(), id.begin(), ::tolower);
  if (id == "mixvote") {
    b.voters = 2;
    b.abstainers = 1;
    b.injections = kMixVoteInjections;
  }
  return b;
}

namespace {

std::string pass_fail(bool ok) { return ok ? "PASS" : "FAIL"; }

bool req1_clean(const DRReport& r) {
  for (const auto& p : r.parts)
    for (const auto& o : p.outcomes)
      if (o.req1_mismatches) return false;
  return true;
}

SuiteResult suite_possibility(const CheckOptions& base) {
  SuiteResult s{"possibility"};
  CheckOptions opts = base;
  opts.check_requirement1 = true;
  ordered_json reports = ordered_json::array();
  for (int i = 1; i <= 7; ++i) {
    auto e = build_simple(i);
    Bounds b = default_bounds(e.id);
    auto r = check_dr(e.spec, instantiate(e.home, b.voters, b.abstainers), {Prop::TimelyP}, {Prop::AuthP}, b, opts);
    bool ok = r.overall && req1_clean(r);
    s.pass = s.pass && ok;
    s.lines.push_back(pass_fail(ok) + " " + e.id + " on " + e.home.name + ": TimelyDR " +
                      (r.overall ? "holds" : "refuted") + (req1_clean(r) ? "" : ", verdict reads private signals"));
    reports.push_back(to_json(r));
  }
  s.report = {{"suite", s.name}, {"pass", s.pass}, {"reports", std::move(reports)}};
  return s;
}

SuiteResult suite_impossibility() {
  SuiteResult s{"impossibility"};
  ordered_json items = ordered_json::array();
  auto item = [&](const Topology& t, const std::string& from) {
    bool feasible = timely_feasible(t);
    s.pass = s.pass && !feasible;
    s.lines.push_back(pass_fail(!feasible) + " " + t.name + (from.empty() ? "" : " (weakening of " + from + ")") +
                      ": " + (feasible ? "feasible" : "infeasible"));
    items.push_back({{"topology", t.name}, {"weakening_of", from}, {"feasible", feasible}});
  };
  for (int i = 1; i <= 5; ++i) item(catalog::impossibility(i), "");
  for (int i = 1; i <= 7; ++i) {
    auto t = catalog::possibility(i);
    for (const auto& w : minimal_weakenings(t)) item(w, t.name);
  }
  s.report = {{"suite", s.name}, {"pass", s.pass}, {"items", std::move(items)}};
  return s;
}

}  // namespace

const std::vector<Prop>& mixvote_voter_props() {
  static const std::vector<Prop> p{Prop::VoterC,     Prop::TimelyP,           Prop::VoterA,   Prop::Uniqueness,
                                   Prop::IndivVerif, Prop::TalliedAsRecorded, Prop::EligVerif};
  return p;
}

namespace {

// Property name → whether it fired in some configuration, per variant.
using FiredMap = std::map<std::string, std::map<std::string, bool>>;

SuiteResult suite_mixvote(const CheckOptions& base) {
  SuiteResult s{"mixvote"};
  CheckOptions opts = base;
  opts.check_requirement1 = true;
  auto e = build_mixvote();
  Bounds b = default_bounds(e.id);
  ordered_json reports = ordered_json::array();
  FiredMap fired;
  // The casting voter and the abstainer each take the distinguished seat once.
  for (int seat : {1, b.voters + 1}) {
    auto t = instantiate(e.home, b.voters, b.abstainers, seat);
    auto r = check_dr(e.spec, t, mixvote_voter_props(), {Prop::AuthP}, b, opts);
    bool ok = r.overall && req1_clean(r);
    s.pass = s.pass && ok;
    s.lines.push_back(pass_fail(ok) + " MixVote, distinguished " + *t.distinguished + ": DR " +
                      (r.overall ? "holds" : "refuted"));
    for (const auto& p : r.parts)
      for (const auto& o : p.outcomes) fired[to_string(p.variant)][o.name] |= o.fired;
    reports.push_back(to_json(r));
  }
  ordered_json vac;
  for (const auto& [var, m] : fired)
    for (const auto& [name, f] : m) {
      vac[var][name] = f;
      if (name == "Func") continue;
      s.pass = s.pass && f;
      if (!f) s.lines.push_back("FAIL " + name + " in " + var + ": antecedent never fired");
    }
  s.report = {{"suite", s.name}, {"pass", s.pass}, {"antecedent_fired", vac}, {"reports", std::move(reports)}};
  return s;
}

SuiteResult suite_theorem2(const CheckOptions& opts) {
  SuiteResult s{"theorem2"};
  auto e = build_mixvote();
  Bounds b = default_bounds(e.id);
  ordered_json items = ordered_json::array();
  for (int seat : {1, b.voters + 1})
    for (Variant v : {Variant::SH, Variant::H}) {
      auto t = variant(instantiate(e.home, b.voters, b.abstainers, seat), v);
      auto o = check_theorem2(e.spec, t, b, opts);
      s.pass = s.pass && o.holds();
      s.lines.push_back(pass_fail(o.holds()) + " " + t.name + " distinguished " + *t.distinguished +
                        ": Uniqueness => VoterA " + to_string(o.verdict) +
                        (o.fired ? "" : " (vacuous)"));
      items.push_back(to_json(o));
    }
  s.report = {{"suite", s.name}, {"pass", s.pass}, {"checks", std::move(items)}};
  return s;
}

}  // namespace

SuiteResult run_suite(const std::string& name, const CheckOptions& opts) {
  SuiteResult s;
  if (name == "possibility")
    s = suite_possibility(opts);
  else if (name == "impossibility")
    s = suite_impossibility();
  else if (name == "mixvote")
    s = suite_mixvote(opts);
  else if (name == "theorem2")
    s = suite_theorem2(opts);
  else
    throw std::invalid_argument("unknown suite '" + name + "'");
  std::size_t passed = 0, total = 0;
  for (const auto& l : s.lines) {
    passed += l.rfind("PASS", 0) == 0;
    total += l.rfind("PASS", 0) == 0 || l.rfind("FAIL", 0) == 0;
  }
  s.lines.push_back(s.name + ": " + std::to_string(passed) + "/" + std::to_string(total) + " pass");
  return s;
}

}  // namespace drc
