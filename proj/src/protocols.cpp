#include "drc/protocols.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <stdexcept>

namespace drc {

namespace {

Term V(const std::string& n, Shape s = Shape::Any) { return Term::var(n, s); }
Term N(const std::string& n) { return Term::name(n); }

Action emit(SigKind k, std::vector<Term> args) {
  Action a{ActKind::Emit};
  a.sig = k;
  a.exprs = std::move(args);
  return a;
}

Action compute(std::string var, Builtin fn, std::vector<Term> exprs) {
  Action a{ActKind::Compute};
  a.var = std::move(var);
  a.builtin = fn;
  a.exprs = std::move(exprs);
  return a;
}

Action fresh(std::string var) {
  Action a{ActKind::Fresh};
  a.var = std::move(var);
  return a;
}

Action send_to(Role r, Term m) {
  Action a{ActKind::Send};
  a.peer = r;
  a.exprs = {std::move(m)};
  return a;
}

Action send_all(Role r, Term m) {
  Action a{ActKind::SendAll};
  a.peer = r;
  a.exprs = {std::move(m)};
  return a;
}

Action reply(Term m) {
  Action a{ActKind::Send};
  a.reply = true;
  a.exprs = {std::move(m)};
  return a;
}

Transition step(int from, int to, std::vector<Action> acts, std::string label) {
  Transition t;
  t.from = from;
  t.to = to;
  t.actions = std::move(acts);
  t.label = std::move(label);
  return t;
}

Transition on_recv(int from, int to, Role peer, Term pattern, std::vector<Action> acts,
                   std::string label, Obligation ob = Obligation::None) {
  Transition t = step(from, to, std::move(acts), std::move(label));
  t.recv = Recv{peer, std::move(pattern)};
  t.obligation = ob;
  return t;
}

Guard guard_eq(Term a, Term b) {
  Guard g;
  g.kind = GuardKind::Eq;
  g.a = std::move(a);
  g.b = std::move(b);
  return g;
}

std::vector<std::string> ids_with_role(const Topology& t, Role r) {
  std::vector<std::pair<int, std::string>> xs;
  for (const auto& [id, v] : t.vertices())
    if (v.role == r) xs.emplace_back(v.instance, id);
  std::sort(xs.begin(), xs.end());
  std::vector<std::string> out;
  for (auto& [k, id] : xs) out.push_back(id);
  return out;
}

Term vote_of(int instance) { return N("v" + std::to_string(instance)); }

std::vector<Term> agent_terms(const Topology& t) {
  std::vector<Term> out;
  for (const auto& [id, v] : t.vertices()) out.push_back(N(id));
  return out;
}

std::vector<Term> voter_terms(const Topology& t) {
  std::vector<Term> out;
  for (const auto& [id, v] : t.vertices())
    if (is_voter_role(v.role)) out.push_back(N(id));
  return out;
}

const Term& server_name() {
  static const Term s = N("S");
  return s;
}

// ∃[b]. BB_rec([b]) ∧ b ∉ [b]
VPtr not_recorded() {
  return v::exists(SigKind::BB_rec, {V("lb")}, v::neg(v::member(V("b"), V("lb"))));
}

// A signature under a published key verifying to b.
VPtr signed_evidence(SigKind key_signal) {
  return v::all({v::exists(key_signal, {V("pk")}, v::yes()),
                 v::exists(SigKind::Evidence, {V("b"), V("c")}, v::yes()),
                 v::eq(ver(V("c"), V("pk")), V("b")), not_recorded()});
}

std::shared_ptr<const VerdictDef> simple_verdict(int i) {
  const Term pv = pair(V("v"), V("h"));
  switch (i) {
    case 1:
      return std::make_shared<VerdictDef>(
          "P1", v::all({v::exists(SigKind::Pub, {V("p"), server_name(), V("b")}, v::yes()), not_recorded(),
                        v::matches(pv, V("b"))}),
          false);
    case 2:
      return std::make_shared<VerdictDef>(
          "P2", v::all({v::exists(SigKind::Pub, {V("h"), V("p"), V("b")}, v::yes()),
                        v::exists(SigKind::BB_P, {V("p")}, v::yes()), not_recorded(), v::matches(pv, V("b"))}),
          false);
    case 3:
      return std::make_shared<VerdictDef>("P3", signed_evidence(SigKind::BB_pkP), true);
    case 4:
    case 7:
      return std::make_shared<VerdictDef>("P" + std::to_string(i), signed_evidence(SigKind::BB_pkS), true);
    case 5:
      return std::make_shared<VerdictDef>(
          "P5",
          v::all({v::exists(SigKind::BB_pkS, {V("pk")}, v::yes()),
                  v::exists(SigKind::Pub, {server_name(), V("p"), V("c")}, v::yes()),
                  v::eq(ver(V("c"), V("pk")), V("b")), not_recorded()}),
          true);
    case 6:
      return std::make_shared<VerdictDef>(
          "P6", v::all({v::exists(SigKind::Pub, {V("h"), server_name(), V("b")}, v::yes()), not_recorded(),
                        v::matches(pv, V("b"))}),
          false);
  }
  throw std::out_of_range("protocol index");
}

// Recorded-ballot lists a corrupted authority may publish.
std::vector<Term> simple_publications(const std::vector<Term>& an, const Model& m, int bound) {
  std::vector<Term> base;
  for (const auto& t : an)
    if (t.sym() == Sym::Pair) base.push_back(t);
  for (const auto& vt : m.setup.votes)
    for (const auto& h : voter_terms(m.topo)) base.push_back(pair(vt, h));
  std::vector<Term> out;
  for (const auto& lb : sub_multisets(base, bound))
    out.push_back(pair(lb, apply_builtin(Builtin::MapFst, {lb})));
  return out;
}

}  // namespace

Term server_key() { return Term::fresh("skS", 1); }
Term platform_key() { return Term::fresh("skP", 2); }
Term device_key(int instance) { return Term::fresh("skD", 10 + static_cast<std::uint64_t>(instance)); }

std::vector<Term> sub_multisets(std::vector<Term> base, int bound) {
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end()), base.end());
  std::vector<Term> out;
  std::vector<Term> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    out.push_back(Term::list(cur));
    if (static_cast<int>(cur.size()) >= bound) return;
    for (std::size_t i = from; i < base.size(); ++i) {
      cur.push_back(base[i]);
      rec(i);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

ProtocolEntry build_simple(int i) {
  if (i < 1 || i > 7) throw std::out_of_range("simple protocol index must be in 1..7");
  const bool direct = i >= 6;  // H talks to S without a platform
  const bool s_confirms = i == 4 || i == 5 || i == 7;
  const Role hop = direct ? Role::S : Role::P;
  const Term b = pair(V("v", Shape::Vote), V("h", Shape::Agent));

  ProtocolSpec spec;
  spec.id = "P" + std::to_string(i);
  spec.ballot_shape = Shape::Pair;

  RoleSpec h{Role::H};
  h.transitions.push_back(step(0, 1,
                               {emit(SigKind::Vote, {V("self"), V("v")}),
                                compute("b", Builtin::None, {pair(V("v"), V("self"))}),
                                emit(SigKind::Ballot, {V("self"), V("b")}), send_to(hop, V("b"))},
                               "cast"));
  if (i == 4 || i == 7) {
    Transition t = on_recv(1, 2, i == 4 ? Role::P : Role::S, V("c", Shape::Signed),
                           {emit(SigKind::Evidence, {V("b"), V("c")})}, "confirm");
    t.guards.push_back(guard_eq(ver(V("c"), V("pkS")), V("b")));
    h.transitions.push_back(std::move(t));
  }
  spec.roles[Role::H] = h;
  spec.roles[Role::HAbstain] = RoleSpec{Role::HAbstain};

  if (!direct) {
    RoleSpec p{Role::P};
    std::vector<Action> fwd{send_to(Role::S, V("b"))};
    if (i == 3) fwd.push_back(emit(SigKind::Evidence, {V("b"), sign(V("b"), V("skP"))}));
    p.transitions.push_back(on_recv(0, 0, Role::H, V("b", Shape::Pair), fwd, "forward", Obligation::Forward));
    if (i == 4)
      p.transitions.push_back(on_recv(0, 0, Role::S, V("c", Shape::Signed), {send_to(Role::H, V("c"))},
                                      "forward-back", Obligation::Forward));
    if (i == 5)
      p.transitions.push_back(on_recv(0, 0, Role::S, V("c", Shape::Signed), {}, "consume", Obligation::Forward));
    spec.roles[Role::P] = p;
  }

  RoleSpec s{Role::S};
  std::vector<Action> accept{compute("lb", Builtin::Append, {V("lb"), b})};
  if (s_confirms) accept.push_back(reply(sign(b, V("skS"))));
  s.transitions.push_back(on_recv(0, 0, direct ? Role::H : Role::P, b, accept, "record",
                                  s_confirms ? Obligation::Reply : Obligation::None));
  Transition close = step(0, 1,
                          {compute("lv", Builtin::MapFst, {V("lb")}),
                           send_to(Role::BB, pair(V("lb"), V("lv")))},
                          "close");
  close.close = true;
  s.transitions.push_back(close);
  spec.roles[Role::S] = s;

  RoleSpec bb{Role::BB};
  bb.transitions.push_back(on_recv(0, 1, Role::S, pair(V("lb", Shape::ListPair), V("lv", Shape::ListVote)),
                                   {emit(SigKind::BB_rec, {V("lb")}), emit(SigKind::BB_tal, {V("lv")}),
                                    emit(SigKind::End, {})},
                                   "publish"));
  spec.roles[Role::BB] = bb;
  spec.roles[Role::A] = RoleSpec{Role::A};
  if (direct) spec.roles[Role::D] = RoleSpec{Role::D};

  spec.setup = [i, s_confirms](const Topology& t) {
    Setup st;
    for (const auto& [id, vx] : t.vertices()) {
      auto& k = st.agents[id].knowledge;
      switch (vx.role) {
        case Role::H:
          k["v"] = vote_of(vx.instance);
          st.votes.push_back(vote_of(vx.instance));
          if (i == 4 || i == 7) k["pkS"] = pk(server_key());
          break;
        case Role::S:
          k["lb"] = Term::list({});
          if (s_confirms) k["skS"] = server_key();
          break;
        case Role::P:
          if (i == 3) k["skP"] = platform_key();
          break;
        default:
          break;
      }
    }
    st.agent_names = voter_terms(t);
    st.public_terms = agent_terms(t);
    for (const auto& vt : st.votes) st.public_terms.push_back(vt);
    if (s_confirms) {
      st.public_terms.push_back(pk(server_key()));
      st.bb_signals.push_back({SigKind::BB_pkS, {pk(server_key())}});
    }
    if (i == 3) {
      st.public_terms.push_back(pk(platform_key()));
      st.bb_signals.push_back({SigKind::BB_pkP, {pk(platform_key())}});
    }
    if (i == 2)
      for (const auto& p : ids_with_role(t, Role::P)) st.bb_signals.push_back({SigKind::BB_P, {N(p)}});
    return st;
  };
  spec.tally = [](const Term& ballot) { return normalize(fst(ballot)); };
  spec.castby = [](const Trace&, const Term& ballot) -> std::vector<Term> {
    if (ballot.sym() != Sym::Pair) return {};
    return {ballot.args()[1]};
  };
  spec.faulty = simple_verdict(i);
  spec.hooks[HookKey{Role::BB, Role::S}] = simple_publications;

  return {spec.id, std::move(spec), catalog::possibility(i)};
}

namespace {

std::shared_ptr<const VerdictDef> mixvote_verdict() {
  VPtr evidence = signed_evidence(SigKind::BB_pkS);
  VPtr bad_list = v::exists(
      SigKind::BB_rec, {V("lb")},
      v::exists(SigKind::BB_pkD, {V("pkd")},
                v::exists(SigKind::BB_woS, {V("lwos")},
                          v::neg(v::builtin(Builtin::UniqueKeyStrip, {V("lb"), V("lwos"), V("pkd")})))));
  return std::make_shared<VerdictDef>("MixVote", v::any({evidence, bad_list}), true);
}

Term find_fresh(const std::vector<Term>& an, const std::string& label) {
  for (const auto& t : an)
    if (t.sym() == Sym::Fresh && t.label() == label) return t;
  return Term::bottom();
}

// Publications by a corrupted authority: every recorded list up to the bound,
// with the honest strip or the unstripped list, and the correct or a wrong
// tally, each with a proof under the authority's key.
std::vector<Term> mixvote_publications(const std::vector<Term>& an, const Model& m, int bound) {
  Term sk = find_fresh(an, "skS");
  if (sk.is_bottom()) return {};
  std::vector<Term> base;
  for (const auto& t : an)
    if (t.sym() == Sym::Sign && t.args()[0].sym() == Sym::Encp) base.push_back(t);
  std::vector<Term> out;
  for (const auto& lb : sub_multisets(base, bound)) {
    std::vector<Term> strip;
    for (const auto& x : lb.args()) strip.push_back(x.args()[0]);
    for (const auto& lwos : {Term::list(strip), lb}) {
      Term lv = apply_builtin(Builtin::MixDecrypt, {lwos, sk});
      std::vector<Term> tallies;
      if (!lv.is_bottom()) tallies.push_back(lv);
      Term wrong = lv.is_list() && !lv.args().empty() ? Term::list({})
                                                      : Term::list({m.setup.votes.at(0)});
      tallies.push_back(wrong);
      for (const auto& t : tallies) out.push_back(tuple({lb, lwos, t, zkp(lwos, t, sk)}));
    }
  }
  return out;
}

}  // namespace

ProtocolEntry build_mixvote() {
  ProtocolSpec spec;
  spec.id = "MixVote";
  spec.ballot_shape = Shape::Signed;

  RoleSpec d{Role::D};
  d.transitions.push_back(on_recv(0, 1, Role::H, V("v", Shape::Vote),
                                  {fresh("r"), compute("b", Builtin::None, {sign(encp(V("v"), V("pkS"), V("r")), V("skD"))}),
                                   send_to(Role::H, V("b"))},
                                  "ballot"));
  spec.roles[Role::D] = d;

  RoleSpec h{Role::H};
  h.transitions.push_back(step(0, 1, {emit(SigKind::Vote, {V("self"), V("v")}), send_to(Role::D, V("v"))}, "vote"));
  h.transitions.push_back(on_recv(1, 2, Role::D, V("b", Shape::Signed),
                                  {emit(SigKind::Ballot, {V("self"), V("b")}), send_to(Role::P, V("b"))}, "cast"));
  {
    Transition t = on_recv(2, 3, Role::P, V("c", Shape::Signed), {emit(SigKind::Evidence, {V("b"), V("c")})},
                           "confirm");
    t.guards.push_back(guard_eq(ver(V("c"), V("pkS")), V("b")));
    h.transitions.push_back(std::move(t));
  }
  h.transitions.push_back(on_recv(3, 4, Role::BB, V("lb", Shape::ListSigned),
                                  {compute("ok", Builtin::Member, {V("b"), V("lb")}),
                                   emit(SigKind::VfC, {V("self"), V("b")}),
                                   emit(SigKind::VerifyIV, {V("self"), pair(V("b"), V("lb")), V("ok")})},
                                  "verify"));
  spec.roles[Role::H] = h;

  RoleSpec ab{Role::HAbstain};
  ab.transitions.push_back(on_recv(0, 1, Role::BB, V("lb", Shape::ListSigned),
                                   {emit(SigKind::VfA, {V("self"), Term::list({})})}, "verify-none"));
  spec.roles[Role::HAbstain] = ab;

  RoleSpec p{Role::P};
  p.transitions.push_back(on_recv(0, 0, Role::H, V("b", Shape::Signed), {send_to(Role::S, V("b"))}, "forward",
                                  Obligation::Forward));
  p.transitions.push_back(on_recv(0, 0, Role::S, V("c", Shape::Signed), {send_to(Role::H, V("c"))},
                                  "forward-back", Obligation::Forward));
  spec.roles[Role::P] = p;

  RoleSpec s{Role::S};
  {
    Transition t = on_recv(0, 0, Role::P, V("b", Shape::Signed),
                           {compute("lb", Builtin::Append, {V("lb"), V("b")}),
                            compute("used", Builtin::Append, {V("used"), V("k")}), reply(sign(V("b"), V("skS")))},
                           "record", Obligation::Reply);
    Guard g;
    g.kind = GuardKind::FindKey;
    g.a = V("b");
    g.b = V("pkDs");
    g.exclude = V("used");
    g.bind = "k";
    t.guards.push_back(g);
    s.transitions.push_back(std::move(t));
    // A ballot already on the record is confirmed again without being re-recorded.
    Transition again = on_recv(0, 0, Role::P, V("b", Shape::Signed), {reply(sign(V("b"), V("skS")))}, "reconfirm",
                               Obligation::Reply);
    Guard seen;
    seen.kind = GuardKind::Member;
    seen.a = V("b");
    seen.b = V("lb");
    again.guards.push_back(seen);
    s.transitions.push_back(std::move(again));
    Transition other = on_recv(0, 0, Role::P, V("x"), {}, "ignore");
    other.otherwise = true;
    s.transitions.push_back(std::move(other));
  }
  {
    Transition close = step(0, 1,
                            {compute("lwos", Builtin::None, {verlist(V("lb"), V("used"))}),
                             compute("lv", Builtin::MixDecrypt, {V("lwos"), V("skS")}),
                             compute("proof", Builtin::None, {zkp(V("lwos"), V("lv"), V("skS"))}),
                             send_to(Role::BB, tuple({V("lb"), V("lwos"), V("lv"), V("proof")}))},
                            "close");
    close.close = true;
    s.transitions.push_back(std::move(close));
  }
  spec.roles[Role::S] = s;

  RoleSpec bb{Role::BB};
  const Term pub = tuple({V("lb", Shape::ListSigned), V("lwos"), V("lv", Shape::ListVote), V("proof")});
  bb.transitions.push_back(on_recv(0, 1, Role::S, pub,
                                   {emit(SigKind::BB_rec, {V("lb")}), emit(SigKind::BB_woS, {V("lwos")}),
                                    emit(SigKind::BB_tal, {V("lv")}), emit(SigKind::BB_zk, {V("proof")}),
                                    emit(SigKind::End, {}), send_all(Role::H, V("lb")),
                                    send_to(Role::A, tuple({V("lb"), V("lwos"), V("lv"), V("proof")}))},
                                   "publish"));
  spec.roles[Role::BB] = bb;

  RoleSpec a{Role::A};
  a.transitions.push_back(on_recv(0, 1, Role::BB, pub,
                                  {compute("ok1", Builtin::UniqueKeyStrip, {V("lb"), V("lwos"), V("pkDs")}),
                                   compute("ok2", Builtin::None, {verzk(V("proof"), V("lwos"), V("lv"), V("pkS"))}),
                                   emit(SigKind::VerifyA1, {V("self"), tuple({V("lb"), V("lwos"), V("pkDs")}), V("ok1")}),
                                   emit(SigKind::VerifyProof,
                                        {V("self"), tuple({V("proof"), V("lwos"), V("lv"), V("pkS")}), V("ok2")})},
                                  "audit"));
  spec.roles[Role::A] = a;

  spec.setup = [](const Topology& t) {
    Setup st;
    std::vector<Term> pkds, corr, voters;
    for (const auto& id : ids_with_role(t, Role::D)) pkds.push_back(pk(device_key(t.vertex(id).instance)));
    for (const auto& [id, vx] : t.vertices())
      if (is_voter_role(vx.role)) {
        voters.push_back(N(id));
        corr.push_back(pair(N(id), pk(device_key(vx.instance))));
      }
    const Term pks = pk(server_key());
    for (const auto& [id, vx] : t.vertices()) {
      auto& k = st.agents[id].knowledge;
      switch (vx.role) {
        case Role::H:
          k["v"] = vote_of(vx.instance);
          k["pkS"] = pks;
          st.votes.push_back(vote_of(vx.instance));
          break;
        case Role::D:
          k["skD"] = device_key(vx.instance);
          k["pkS"] = pks;
          break;
        case Role::S:
          k["skS"] = server_key();
          k["pkDs"] = Term::list(pkds);
          k["lb"] = Term::list({});
          k["used"] = Term::list({});
          break;
        case Role::A:
          k["pkDs"] = Term::list(pkds);
          k["pkS"] = pks;
          break;
        default:
          break;
      }
    }
    st.agent_names = voters;
    st.public_terms = agent_terms(t);
    for (const auto& vt : st.votes) st.public_terms.push_back(vt);
    st.public_terms.push_back(pks);
    for (const auto& x : pkds) st.public_terms.push_back(x);
    st.bb_signals = {{SigKind::BB_H, {Term::list(voters)}},
                     {SigKind::BB_pkS, {pks}},
                     {SigKind::BB_pkD, {Term::list(pkds)}},
                     {SigKind::Corr, {Term::list(corr)}}};
    return st;
  };
  spec.tally = [](const Term& ballot) { return normalize(decp(ver(ballot, Term::bottom()), server_key())); };
  spec.castby = [](const Trace& tr, const Term& ballot) {
    std::vector<Term> out;
    tr.for_each([&](std::size_t, const Signal& s) {
      if (s.kind != SigKind::Corr || !s.args[0].is_list()) return;
      for (const auto& e : s.args[0].args())
        if (e.sym() == Sym::Pair && !normalize(ver(ballot, e.args()[1])).is_bottom()) out.push_back(e.args()[0]);
    });
    return out;
  };
  spec.faulty = mixvote_verdict();
  spec.hooks[HookKey{Role::BB, Role::S}] = mixvote_publications;

  return {spec.id, std::move(spec), catalog::mixvote()};
}

ProtocolEntry protocol_by_id(const std::string& id) {
  std::string s = id;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "mixvote") return build_mixvote();
  if (s.size() == 2 && s[0] == 'p' && s[1] >= '1' && s[1] <= '7') return build_simple(s[1] - '0');
  throw std::invalid_argument("unknown protocol id '" + id + "'");
}

std::vector<std::string> protocol_ids() { return {"p1", "p2", "p3", "p4", "p5", "p6", "p7", "mixvote"}; }

}  // namespace drc
