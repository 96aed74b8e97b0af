#include "drc/properties.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace drc {

namespace v {

namespace {
VPtr node(VNode n) { return std::make_shared<const VNode>(std::move(n)); }
}  // namespace

VPtr yes() { return node({VOp::True}); }
VPtr no() { return node({VOp::False}); }
VPtr all(std::vector<VPtr> xs) {
  VNode n{VOp::And};
  n.kids = std::move(xs);
  return node(std::move(n));
}
VPtr any(std::vector<VPtr> xs) {
  VNode n{VOp::Or};
  n.kids = std::move(xs);
  return node(std::move(n));
}
VPtr neg(VPtr x) {
  VNode n{VOp::Not};
  n.kids = {std::move(x)};
  return node(std::move(n));
}
VPtr exists(SigKind k, std::vector<Term> pats, VPtr body) {
  VNode n{VOp::Exists};
  n.sig = k;
  n.pats = std::move(pats);
  n.kids = {std::move(body)};
  return node(std::move(n));
}
VPtr eq(Term a, Term b) {
  VNode n{VOp::Eq};
  n.a = std::move(a);
  n.b = std::move(b);
  return node(std::move(n));
}
VPtr neq(Term a, Term b) {
  VNode n{VOp::Neq};
  n.a = std::move(a);
  n.b = std::move(b);
  return node(std::move(n));
}
VPtr member(Term a, Term list) {
  VNode n{VOp::Member};
  n.a = std::move(a);
  n.b = std::move(list);
  return node(std::move(n));
}
VPtr matches(Term pattern, Term value) {
  VNode n{VOp::Match};
  n.a = std::move(pattern);
  n.b = std::move(value);
  return node(std::move(n));
}
VPtr builtin(drc::Builtin fn, std::vector<Term> args) {
  VNode n{VOp::Builtin};
  n.fn = fn;
  n.pats = std::move(args);
  return node(std::move(n));
}

}  // namespace v

bool requirement1_ok(const VNode& n, std::string* offending) {
  if (n.op == VOp::Exists && !is_public_signal(n.sig)) {
    if (offending) *offending = to_string(n.sig);
    return false;
  }
  for (const auto& k : n.kids)
    if (!requirement1_ok(*k, offending)) return false;
  return true;
}

namespace {

void collect_kinds(const VNode& n, std::set<SigKind>& out) {
  if (n.op == VOp::Exists) out.insert(n.sig);
  for (const auto& k : n.kids) collect_kinds(*k, out);
}

// Conjunctions thread bindings from Match nodes to their right siblings.
bool eval_node(const VNode& n, const Trace& tr, Bindings& env);

bool eval_conj(const std::vector<VPtr>& kids, std::size_t i, const Trace& tr, Bindings env) {
  if (i == kids.size()) return true;
  const VNode& k = *kids[i];
  if (k.op == VOp::Match) {
    Bindings e2 = env;
    if (!match(k.a, instantiate_expr(k.b, env), e2)) return false;
    return eval_conj(kids, i + 1, tr, std::move(e2));
  }
  if (k.op == VOp::Exists) {
    // ∃ binds over the rest of the conjunction.
    bool found = false;
    tr.for_each([&](std::size_t, const Signal& s) {
      if (found || s.kind != k.sig || s.args.size() != k.pats.size()) return;
      Bindings e2 = env;
      for (std::size_t j = 0; j < s.args.size(); ++j)
        if (!match(k.pats[j], s.args[j], e2)) return;
      if (!eval_node(*k.kids[0], tr, e2)) return;
      if (eval_conj(kids, i + 1, tr, e2)) found = true;
    });
    return found;
  }
  if (!eval_node(k, tr, env)) return false;
  return eval_conj(kids, i + 1, tr, std::move(env));
}

bool eval_node(const VNode& n, const Trace& tr, Bindings& env) {
  switch (n.op) {
    case VOp::True: return true;
    case VOp::False: return false;
    case VOp::And: return eval_conj(n.kids, 0, tr, env);
    case VOp::Or:
      for (const auto& k : n.kids) {
        Bindings e2 = env;
        if (eval_node(*k, tr, e2)) return true;
      }
      return false;
    case VOp::Not: {
      Bindings e2 = env;
      return !eval_node(*n.kids[0], tr, e2);
    }
    case VOp::Exists:
      return eval_conj({std::shared_ptr<const VNode>(std::shared_ptr<const VNode>{}, &n)}, 0, tr, env);
    case VOp::Eq: return instantiate_expr(n.a, env) == instantiate_expr(n.b, env);
    case VOp::Neq: return instantiate_expr(n.a, env) != instantiate_expr(n.b, env);
    case VOp::Member:
      return apply_builtin(Builtin::Member, {instantiate_expr(n.a, env), instantiate_expr(n.b, env)}) ==
             Term::truth(true);
    case VOp::Match: {
      Bindings e2 = env;
      return match(n.a, instantiate_expr(n.b, env), e2);
    }
    case VOp::Builtin: {
      std::vector<Term> args;
      for (const auto& p : n.pats) args.push_back(instantiate_expr(p, env));
      return apply_builtin(n.fn, args) == Term::truth(true);
    }
  }
  return false;
}

}  // namespace

VerdictDef::VerdictDef(std::string name, VPtr body, bool empty_for_bottom)
    : name_(std::move(name)), body_(std::move(body)), empty_for_bottom_(empty_for_bottom) {
  std::string bad;
  if (!requirement1_ok(*body_, &bad))
    throw requirement1_violation("verdict " + name_ + " inspects non-public signal " + bad);
}

bool VerdictDef::eval(const Trace& tr, const Term& b) const {
  if (empty_for_bottom_ && b.is_bottom()) return false;
  Bindings env{{"b", b}};
  return eval_node(*body_, tr, env);
}

std::set<SigKind> VerdictDef::referenced() const {
  std::set<SigKind> out;
  collect_kinds(*body_, out);
  return out;
}

bool eval_faulty(const VerdictDef& v, const Trace& tr, const Term& b) { return v.eval(tr, b); }

const Term& probe_ballot() {
  static const Term t = Term::fresh("probe", 999999999);
  return t;
}

std::vector<Term> ballot_candidates(const Trace& tr) {
  std::set<Term> out;
  tr.for_each([&](std::size_t, const Signal& s) {
    if (!is_public_signal(s.kind)) return;
    for (const auto& a : s.args)
      for (const auto& t : subterms(a)) out.insert(t);
  });
  out.insert(probe_ballot());
  out.insert(Term::bottom());
  return {out.begin(), out.end()};
}

// ---- per-trace facts --------------------------------------------------------

TraceFacts::TraceFacts(const Trace& tr, const VerdictDef& v) : tr_(tr), v_(v), cands_(ballot_candidates(tr)) {}

bool TraceFacts::faulty(const Term& b) const {
  auto it = cache_.find(b);
  if (it != cache_.end()) return it->second;
  bool r = v_.eval(tr_, b);
  cache_.emplace(b, r);
  return r;
}

bool TraceFacts::any_faulty() const {
  for (const auto& b : cands_)
    if (faulty(b)) return true;
  return false;
}

bool TraceFacts::some_clean_ballot() const {
  for (const auto& b : cands_)
    if (!b.is_bottom() && !faulty(b)) return true;
  return false;
}

namespace {

bool in_list(const Term& x, const Term& list) {
  return list.is_list() && std::find(list.args().begin(), list.args().end(), x) != list.args().end();
}

// b ∈ [b] for some BB_rec([b]) at a step before `limit`.
bool recorded(const Trace& tr, const Term& b, std::size_t limit) {
  for (std::size_t i = 0; i < tr.steps.size() && i < limit; ++i)
    for (const auto& s : tr.steps[i])
      if (s.kind == SigKind::BB_rec && in_list(b, s.args[0])) return true;
  return false;
}

void mark(bool* fired) {
  if (fired) *fired = true;
}

std::vector<Term> listed(const Trace& tr, SigKind k) {
  std::vector<Term> out;
  tr.for_each([&](std::size_t, const Signal& s) {
    if (s.kind == k && !s.args.empty() && s.args[0].is_list())
      for (const auto& x : s.args[0].args()) out.push_back(x);
  });
  return out;
}

// Candidate voter sets per index must admit a system of distinct
// representatives (bipartite matching by augmenting paths).
bool pairwise_distinct(const std::vector<std::set<Term>>& sets) {
  std::map<Term, std::size_t> owner;
  std::function<bool(std::size_t, std::set<Term>&)> augment = [&](std::size_t i, std::set<Term>& seen) {
    for (const auto& h : sets[i]) {
      if (!seen.insert(h).second) continue;
      auto it = owner.find(h);
      if (it == owner.end() || augment(it->second, seen)) {
        owner[h] = i;
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < sets.size(); ++i) {
    std::set<Term> seen;
    if (!augment(i, seen)) return false;
  }
  return true;
}

}  // namespace

bool voter_c(const TraceFacts& f, bool* fired) {
  const Trace& tr = f.trace();
  bool ok = true;
  tr.for_each([&](std::size_t, const Signal& s) {
    if (s.kind != SigKind::VfC) return;
    mark(fired);
    const Term& b = s.args[1];
    if (!recorded(tr, b, tr.steps.size()) && !f.faulty(b)) ok = false;
  });
  return ok;
}

bool timely_p(const TraceFacts& f, bool* fired) {
  const Trace& tr = f.trace();
  auto end = tr.end_index();
  if (!end) return true;
  for (std::size_t i = 0; i < *end; ++i)
    for (const auto& s : tr.steps[i]) {
      if (s.kind != SigKind::Ballot) continue;
      mark(fired);
      const Term& b = s.args[1];
      if (!recorded(tr, b, *end) && !f.faulty(b)) return false;
    }
  return true;
}

bool voter_a(const TraceFacts& f, const CastByFn& castby, bool* fired) {
  const Trace& tr = f.trace();
  bool ok = true;
  tr.for_each([&](std::size_t, const Signal& s) {
    if (s.kind != SigKind::VfA || !ok) return;
    mark(fired);
    const Term& h = s.args[0];
    const Term& mine = s.args[1];
    bool stuffed = false;
    for (const auto& b : listed(tr, SigKind::BB_rec)) {
      if (in_list(b, mine)) continue;
      auto who = castby(tr, b);
      if (std::find(who.begin(), who.end(), h) != who.end()) stuffed = true;
    }
    if (stuffed && !f.any_faulty()) ok = false;
  });
  return ok;
}

bool auth_p(const TraceFacts& f, const Term& authority, bool* fired) {
  if (!f.trace().contains(Signal{SigKind::Hon, {authority}})) return true;
  mark(fired);
  return !f.any_faulty();
}

bool uniqueness(const TraceFacts& f, const CastByFn& castby, bool* fired) {
  const Trace& tr = f.trace();
  bool has_rec = false;
  tr.for_each([&](std::size_t, const Signal& s) { has_rec = has_rec || (s.kind == SigKind::BB_rec && s.args[0].is_list() && !s.args[0].args().empty()); });
  if (!has_rec || !f.some_clean_ballot()) return true;
  auto voters = listed(tr, SigKind::BB_H);
  std::vector<std::pair<Term, Term>> sends;
  tr.for_each([&](std::size_t, const Signal& s) {
    if (s.kind == SigKind::Send) sends.emplace_back(s.args[0], s.args[2]);
  });
  bool ok = true;
  tr.for_each([&](std::size_t, const Signal& s) {
    if (s.kind != SigKind::BB_rec || !s.args[0].is_list() || s.args[0].args().empty()) return;
    mark(fired);
    std::vector<std::set<Term>> sets;
    for (const auto& bi : s.args[0].args()) {
      std::set<Term> vi;
      auto who = castby(tr, bi);
      for (const auto& h : who) {
        if (std::find(voters.begin(), voters.end(), h) == voters.end()) continue;
        for (const auto& [from, m] : sends)
          if (from == h && is_subterm(bi, m)) {
            vi.insert(h);
            break;
          }
      }
      sets.push_back(std::move(vi));
    }
    if (!pairwise_distinct(sets)) ok = false;
  });
  return ok;
}

bool func_property(const Trace& tr) {
  if (!tr.honest_network) return false;
  auto end = tr.end_index();
  if (!end) return false;
  for (std::size_t i = 0; i < *end; ++i)
    for (const auto& s : tr.steps[i])
      if (s.kind == SigKind::Ballot && recorded(tr, s.args[1], *end)) return true;
  return false;
}

bool indiv_verif(const Trace& tr, bool* fired) {
  bool ok = true;
  tr.for_each([&](std::size_t, const Signal& s) {
    if (s.kind != SigKind::VerifyIV || s.args[2] != Term::truth(true)) return;
    const Term& h = s.args[0];
    const Term& pred = s.args[1];
    if (pred.sym() != Sym::Pair) return;
    const Term& b = pred.args()[0];
    tr.for_each([&](std::size_t, const Signal& vs) {
      if (vs.kind != SigKind::Vote || vs.args[0] != h) return;
      mark(fired);
      Bindings env{{"v", vs.args[1]}};
      Term pat = sign(encp(Term::var("v"), Term::var("pk"), Term::var("r")), Term::var("sk"));
      bool shaped = match(pat, b, env);
      if (!shaped || !in_list(b, Term::list(listed(tr, SigKind::BB_rec)))) ok = false;
    });
  });
  return ok;
}

namespace {

struct AuditView {
  Term lb, lwos, pkd, proof, lv, pks;
};

// Pairs of successful auditor checks by the same agent over the same list.
std::vector<AuditView> audits(const Trace& tr) {
  std::vector<AuditView> out;
  tr.for_each([&](std::size_t, const Signal& a1) {
    if (a1.kind != SigKind::VerifyA1 || a1.args[2] != Term::truth(true)) return;
    Bindings e1;
    Term p1 = tuple({Term::var("lb"), Term::var("lwos"), Term::var("pkd")});
    if (!match(p1, a1.args[1], e1)) return;
    tr.for_each([&](std::size_t, const Signal& a2) {
      if (a2.kind != SigKind::VerifyProof || a2.args[0] != a1.args[0] || a2.args[2] != Term::truth(true))
        return;
      Bindings e2 = e1;
      Term p2 = tuple({Term::var("proof"), Term::var("lwos"), Term::var("lv"), Term::var("pks")});
      if (!match(p2, a2.args[1], e2)) return;
      out.push_back({e2["lb"], e2["lwos"], e2["pkd"], e2["proof"], e2["lv"], e2["pks"]});
    });
  });
  return out;
}

}  // namespace

bool tallied_as_recorded(const Trace& tr, bool* fired) {
  for (const auto& a : audits(tr)) {
    mark(fired);
    if (!tr.contains(Signal{SigKind::BB_rec, {a.lb}}) || !tr.contains(Signal{SigKind::BB_tal, {a.lv}}) ||
        !tr.contains(Signal{SigKind::BB_pkD, {a.pkd}}))
      return false;
    if (!a.lb.is_list() || !a.lv.is_list() || !a.pkd.is_list()) return false;
    std::vector<Term> votes, used;
    for (const auto& b : a.lb.args()) {
      Bindings env{{"pks", a.pks}};
      Term pat = sign(encp(Term::var("m"), Term::var("pks"), Term::var("r")), Term::var("sk"));
      if (!match(pat, b, env)) return false;
      votes.push_back(env["m"]);
      used.push_back(pk(env["sk"]));
    }
    if (!multiset_equal(votes, a.lv.args())) return false;
    if (!multiset_subset(used, a.pkd.args())) return false;
  }
  return true;
}

bool elig_verif(const Trace& tr, bool* fired) {
  auto checks = audits(tr);
  if (checks.empty()) return true;
  auto voters = listed(tr, SigKind::BB_H);
  for (const auto& a : checks) {
    mark(fired);
    if (!tr.contains(Signal{SigKind::BB_tal, {a.lv}})) return false;
    if (!a.lv.is_list()) return false;
    std::vector<std::set<Term>> sets;
    for (const auto& vote : a.lv.args()) {
      std::set<Term> vi;
      tr.for_each([&](std::size_t, const Signal& s) {
        if (s.kind == SigKind::Send && s.args[2] == vote &&
            std::find(voters.begin(), voters.end(), s.args[0]) != voters.end())
          vi.insert(s.args[0]);
      });
      sets.push_back(std::move(vi));
    }
    if (!pairwise_distinct(sets)) return false;
  }
  return true;
}

bool dr_equal(const Trace& a, const Trace& b, const Term& authority) {
  auto cast_before_end = [](const Trace& tr) {
    std::set<std::pair<Term, Term>> out;
    auto end = tr.end_index();
    if (!end) return out;
    for (std::size_t i = 0; i < *end; ++i)
      for (const auto& s : tr.steps[i])
        if (s.kind == SigKind::Ballot) out.emplace(s.args[0], s.args[1]);
    return out;
  };
  if (cast_before_end(a) != cast_before_end(b)) return false;
  Signal hon{SigKind::Hon, {authority}};
  if (a.contains(hon) != b.contains(hon)) return false;
  return pubtr(a).steps == pubtr(b).steps;
}

namespace {
constexpr std::pair<Prop, const char*> kPropNames[] = {
    {Prop::VoterC, "VoterC"},
    {Prop::TimelyP, "TimelyP"},
    {Prop::VoterA, "VoterA"},
    {Prop::AuthP, "AuthP"},
    {Prop::Uniqueness, "Uniqueness"},
    {Prop::Func, "Func"},
    {Prop::IndivVerif, "IndivVerif"},
    {Prop::TalliedAsRecorded, "TalliedAsRecorded"},
    {Prop::EligVerif, "EligVerif"},
};
}  // namespace

std::string to_string(Prop p) {
  for (const auto& [k, n] : kPropNames)
    if (k == p) return n;
  return "?";
}

Prop parse_prop(const std::string& s) {
  for (const auto& [k, n] : kPropNames) {
    std::string lower = n;
    std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
    std::string in = s;
    std::transform(in.begin(), in.end(), in.begin(), ::tolower);
    if (in == lower) return k;
  }
  throw std::invalid_argument("unknown property '" + s + "'");
}

bool eval_prop(Prop p, const Trace& tr, const PropContext& ctx, bool* fired) {
  if (ctx.spec && ctx.spec->faulty) {
    TraceFacts f(tr, *ctx.spec->faulty);
    return eval_prop(p, tr, &f, ctx, fired);
  }
  return eval_prop(p, tr, nullptr, ctx, fired);
}

bool eval_prop(Prop p, const Trace& tr, const TraceFacts* facts, const PropContext& ctx, bool* fired) {
  switch (p) {
    case Prop::Func:
      if (fired && func_property(tr)) *fired = true;
      return func_property(tr);
    case Prop::IndivVerif: return indiv_verif(tr, fired);
    case Prop::TalliedAsRecorded: return tallied_as_recorded(tr, fired);
    case Prop::EligVerif: return elig_verif(tr, fired);
    default: break;
  }
  if (!facts || !ctx.spec) throw std::invalid_argument("property needs a protocol verdict");
  const TraceFacts& f = *facts;
  switch (p) {
    case Prop::VoterC: return voter_c(f, fired);
    case Prop::TimelyP: return timely_p(f, fired);
    case Prop::VoterA: return voter_a(f, ctx.spec->castby, fired);
    case Prop::AuthP: return auth_p(f, ctx.authority, fired);
    case Prop::Uniqueness: return uniqueness(f, ctx.spec->castby, fired);
    default: return true;
  }
}

}  // namespace drc
