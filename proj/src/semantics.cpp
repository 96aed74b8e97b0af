#include "drc/semantics.hpp"

#include <omp.h>

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace drc {

// ---- signals and traces -----------------------------------------------------

namespace {

struct SigName {
  SigKind kind;
  const char* name;
};

constexpr SigName kSigNames[] = {
    {SigKind::Send, "send"},         {SigKind::Rec, "rec"},
    {SigKind::K, "K"},               {SigKind::Hon, "hon"},
    {SigKind::Knows, "knows"},       {SigKind::Vote, "Vote"},
    {SigKind::Ballot, "Ballot"},     {SigKind::BB_rec, "BB_rec"},
    {SigKind::BB_tal, "BB_tal"},     {SigKind::BB_H, "BB_H"},
    {SigKind::BB_pkS, "BB_pkS"},     {SigKind::BB_pkD, "BB_pkD"},
    {SigKind::BB_pkP, "BB_pkP"},     {SigKind::BB_P, "BB_P"},
    {SigKind::BB_woS, "BB_woS"},     {SigKind::BB_zk, "BB_zk"},
    {SigKind::Corr, "Corr"},         {SigKind::End, "End"},
    {SigKind::Pub, "Pub"},           {SigKind::Evidence, "Evidence"},
    {SigKind::VfC, "VfC"},           {SigKind::VfA, "VfA"},
    {SigKind::VerifyA1, "VerifyA1"}, {SigKind::VerifyProof, "VerifyProof"},
    {SigKind::VerifyIV, "VerifyIV"},
};

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct H128 {
  std::size_t operator()(const Hash128& h) const { return static_cast<std::size_t>(h.lo ^ (h.hi * 31)); }
};

class Hasher {
 public:
  void add(std::uint64_t v) {
    lo_ = mix64(lo_ ^ v);
    hi_ = mix64(hi_ + (v * 0xff51afd7ed558ccdULL) + 0x632be59bd9b4e019ULL);
  }
  Hash128 get() const { return {lo_, hi_}; }

 private:
  std::uint64_t lo_ = 0x243f6a8885a308d3ULL;
  std::uint64_t hi_ = 0x13198a2e03707344ULL;
};

}  // namespace

std::string to_string(SigKind k) {
  for (const auto& s : kSigNames)
    if (s.kind == k) return s.name;
  return "?";
}

SigKind parse_sig_kind(const std::string& s) {
  for (const auto& x : kSigNames)
    if (s == x.name) return x.kind;
  throw std::invalid_argument("unknown signal '" + s + "'");
}

bool is_bb_signal(SigKind k) {
  switch (k) {
    case SigKind::BB_rec:
    case SigKind::BB_tal:
    case SigKind::BB_H:
    case SigKind::BB_pkS:
    case SigKind::BB_pkD:
    case SigKind::BB_pkP:
    case SigKind::BB_P:
    case SigKind::BB_woS:
    case SigKind::BB_zk:
    case SigKind::Corr:
      return true;
    default:
      return false;
  }
}

bool is_public_signal(SigKind k) {
  return is_bb_signal(k) || k == SigKind::Evidence || k == SigKind::Pub;
}

std::string Signal::str() const {
  std::string out = to_string(kind) + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += args[i].str();
  }
  return out + ")";
}

std::uint64_t Signal::hash() const {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(kind) + 1);
  for (const auto& a : args) h = mix64(h ^ a.hash());
  return h;
}

bool operator<(const Signal& a, const Signal& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  return std::lexicographical_compare(a.args.begin(), a.args.end(), b.args.begin(), b.args.end());
}

bool Trace::contains(const Signal& s) const {
  for (const auto& st : steps)
    for (const auto& x : st)
      if (x == s) return true;
  return false;
}

std::optional<std::size_t> Trace::end_index() const {
  for (std::size_t i = 0; i < steps.size(); ++i)
    for (const auto& x : steps[i])
      if (x.kind == SigKind::End) return i;
  return std::nullopt;
}

std::size_t Trace::signal_count() const {
  std::size_t n = 0;
  for (const auto& st : steps) n += st.size();
  return n;
}

Trace pubtr(const Trace& tr) {
  Trace out;
  out.honest_network = tr.honest_network;
  for (const auto& st : tr.steps) {
    Step kept;
    for (const auto& s : st)
      if (is_public_signal(s.kind)) kept.push_back(s);
    if (!kept.empty()) out.steps.push_back(std::move(kept));
  }
  return out;
}

namespace {

Hash128 steps_key(const std::vector<Step>& steps, bool honest_network) {
  std::optional<std::size_t> end;
  for (std::size_t i = 0; i < steps.size() && !end; ++i)
    for (const auto& s : steps[i])
      if (s.kind == SigKind::End) {
        end = i;
        break;
      }
  Hasher h;
  std::vector<std::uint64_t> rest;
  rest.reserve(steps.size() * 2);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    bool before_end = !end || i < *end;
    for (const auto& s : steps[i]) {
      if (is_public_signal(s.kind)) {
        h.add(s.hash());
      } else {
        rest.push_back(mix64(s.hash() ^ (before_end ? 0x5bd1e995ULL : 0x1b873593ULL)));
      }
    }
  }
  std::sort(rest.begin(), rest.end());
  rest.erase(std::unique(rest.begin(), rest.end()), rest.end());
  h.add(0xabcdefULL);
  for (auto x : rest) h.add(x);
  h.add(honest_network ? 1 : 2);
  return h.get();
}

}  // namespace

Hash128 trace_key(const Trace& tr) { return steps_key(tr.steps, tr.honest_network); }

// ---- term helpers -----------------------------------------------------------

namespace {

bool fits_shape(const Term& t, Shape s) {
  auto all = [&](Shape e) {
    if (!t.is_list()) return false;
    for (const auto& x : t.args())
      if (!fits_shape(x, e)) return false;
    return true;
  };
  switch (s) {
    case Shape::Any: return true;
    case Shape::Agent:
    case Shape::Vote: return t.sym() == Sym::Name;
    case Shape::Pair: return t.sym() == Sym::Pair;
    case Shape::Signed: return t.sym() == Sym::Sign;
    case Shape::Cipher: return t.sym() == Sym::Encp;
    case Shape::Proof: return t.sym() == Sym::Zkp;
    case Shape::ListPair: return all(Shape::Pair);
    case Shape::ListSigned: return all(Shape::Signed);
    case Shape::ListCipher: return all(Shape::Cipher);
    case Shape::ListVote: return all(Shape::Vote);
  }
  return false;
}

Term substitute(const Term& expr, const Bindings& b) {
  if (!expr.has_vars()) return expr;
  if (expr.sym() == Sym::Var) {
    auto it = b.find(expr.label());
    if (it == b.end()) throw std::logic_error("unbound variable ?" + expr.label());
    return it->second;
  }
  std::vector<Term> args;
  args.reserve(expr.args().size());
  for (const auto& a : expr.args()) args.push_back(substitute(a, b));
  return Term::app(expr.sym(), std::move(args));
}

}  // namespace

// Variables of a receive pattern bind afresh on every receive.
static Bindings binders_cleared(Bindings vars, const Term& pattern) {
  if (!pattern.has_vars()) return vars;
  for (const auto& t : subterms(pattern))
    if (t.sym() == Sym::Var) vars.erase(t.label());
  return vars;
}

Term instantiate_expr(const Term& expr, const Bindings& b) { return normalize(substitute(expr, b)); }

bool match(const Term& pattern, const Term& t, Bindings& b) {
  if (pattern.sym() == Sym::Var) {
    auto it = b.find(pattern.label());
    if (it != b.end()) return it->second == t;
    if (!fits_shape(t, pattern.shape())) return false;
    b.emplace(pattern.label(), t);
    return true;
  }
  if (!pattern.has_vars()) return pattern == t;
  if (pattern.sym() != t.sym() || pattern.args().size() != t.args().size()) return false;
  for (std::size_t i = 0; i < t.args().size(); ++i)
    if (!match(pattern.args()[i], t.args()[i], b)) return false;
  return true;
}

Term apply_builtin(Builtin op, const std::vector<Term>& a) {
  switch (op) {
    case Builtin::None:
      return normalize(a.at(0));
    case Builtin::Append: {
      std::vector<Term> items = a.at(0).is_list() ? a[0].args() : std::vector<Term>{};
      items.push_back(a.at(1));
      return Term::list(std::move(items));
    }
    case Builtin::MixDecrypt: {
      if (!a.at(0).is_list()) return Term::bottom();
      std::vector<Term> out;
      for (const auto& c : a[0].args()) {
        Term m = normalize(decp(c, a.at(1)));
        if (m.sym() == Sym::Decp) return Term::bottom();
        out.push_back(m);
      }
      std::sort(out.begin(), out.end());
      return Term::list(std::move(out));
    }
    case Builtin::MapFst: {
      if (!a.at(0).is_list()) return Term::bottom();
      std::vector<Term> out;
      for (const auto& x : a[0].args()) out.push_back(normalize(fst(x)));
      return Term::list(std::move(out));
    }
    case Builtin::Member: {
      if (!a.at(1).is_list()) return Term::truth(false);
      const auto& xs = a[1].args();
      return Term::truth(std::find(xs.begin(), xs.end(), a.at(0)) != xs.end());
    }
    case Builtin::UniqueKeyStrip: {
      const Term& sigs = a.at(0);
      const Term& payloads = a.at(1);
      const Term& keys = a.at(2);
      if (!sigs.is_list() || !payloads.is_list() || !keys.is_list()) return Term::truth(false);
      if (sigs.args().size() != payloads.args().size()) return Term::truth(false);
      // A signature verifies only under pk of its own signing key, so the
      // used-key list is determined by the signatures themselves.
      std::vector<Term> used;
      for (const auto& s : sigs.args()) {
        if (s.sym() != Sym::Sign) return Term::truth(false);
        used.push_back(pk(s.args()[1]));
      }
      if (!multiset_subset(used, keys.args())) return Term::truth(false);
      Term stripped = verlist(sigs.args(), used);
      return Term::truth(!stripped.is_bottom() && stripped == payloads);
    }
  }
  return Term::bottom();
}

std::optional<Signal> forge_evidence_action(const KnowledgeSet& kb, const Term& b, const Term& e,
                                            int depth) {
  if (!deduce(kb, pair(b, e), depth)) return std::nullopt;
  return Signal{SigKind::Evidence, {normalize(b), normalize(e)}};
}

std::vector<std::string> check_static_deducibility(const RoleSpec& role, const Bindings& initial,
                                                   int depth) {
  std::vector<std::string> bad;
  // Variables act as opaque atoms known to the agent.
  KnowledgeSet kb;
  for (const auto& [k, v] : initial) kb.push_back(v);
  std::set<std::string> known;
  for (const auto& [k, v] : initial) known.insert(k);
  auto as_atom = [&](const Term& t) {
    Bindings b;
    for (const auto& [k, v] : initial) b.emplace(k, v);
    std::function<Term(const Term&)> sub = [&](const Term& x) -> Term {
      if (x.sym() == Sym::Var) {
        auto it = b.find(x.label());
        return it != b.end() ? it->second : Term::fresh("var_" + x.label(), 0);
      }
      if (x.args().empty()) return x;
      std::vector<Term> args;
      for (const auto& y : x.args()) args.push_back(sub(y));
      return Term::app(x.sym(), std::move(args));
    };
    return normalize(sub(t));
  };
  auto learn_vars = [&](const Term& p) {
    for (const auto& s : subterms(p))
      if (s.sym() == Sym::Var && !known.count(s.label())) {
        known.insert(s.label());
        kb.push_back(Term::fresh("var_" + s.label(), 0));
      }
  };
  for (const auto& t : role.transitions) {
    if (t.recv) {
      learn_vars(t.recv->pattern);
      kb.push_back(as_atom(t.recv->pattern));
    }
    for (const auto& g : t.guards)
      if (g.kind == GuardKind::FindKey) learn_vars(Term::var(g.bind));
    for (const auto& a : t.actions) {
      if (a.kind == ActKind::Fresh || a.kind == ActKind::Compute) learn_vars(Term::var(a.var));
      if (a.kind == ActKind::Send || a.kind == ActKind::SendAll) {
        Term m = as_atom(a.exprs.at(0));
        if (!deduce(kb, m, depth))
          bad.push_back(to_string(role.role) + ":" + (t.label.empty() ? std::to_string(t.from) : t.label));
      }
    }
  }
  return bad;
}

// ---- the enumerator ---------------------------------------------------------

namespace {

enum class Control { Honest, Partial, Dishonest };

struct AgentInfo {
  std::string id;
  Role role;
  Trust trust;
  Term name;
  Control control;
  bool leaks = false;  // not fully trusted: the adversary sees what it holds and receives
  const RoleSpec* spec = nullptr;
  std::vector<int> in;   // agents with an edge into this one
  std::vector<int> out;  // agents this one has an edge to
};

struct AgentState {
  int pc = 0;
  Bindings vars;
  std::uint32_t fresh = 0;
};

struct Pending {
  int from;
  int to;
  Term m;
  friend bool operator<(const Pending& a, const Pending& b) {
    if (a.from != b.from) return a.from < b.from;
    if (a.to != b.to) return a.to < b.to;
    return a.m < b.m;
  }
  friend bool operator==(const Pending& a, const Pending& b) {
    return a.from == b.from && a.to == b.to && a.m == b.m;
  }
};

struct State {
  std::vector<AgentState> agents;
  std::vector<Pending> pending;
  std::vector<Term> know;  // sorted, unique
  int injections = 0;
  int steps = 0;
  bool ended = false;
};

struct Outcome {
  State state;
  std::vector<Step> steps;
};

struct Action0 {
  // A scheduler choice; executing it yields one or more outcomes.
  enum Kind { Fire, Inject, Absorb, Forge } kind;
  int agent = -1;
  const Transition* tr = nullptr;
  int msg_from = -1;
  Term msg;
  Bindings vars;
  int pending_index = -1;
  Signal forged;
  bool mandatory = false;
};

const Term& adversary_name() {
  static const Term t = Term::name("adv");
  return t;
}

class Engine {
 public:
  Engine(const Model& m, Mode mode) : m_(m), mode_(mode) {
    const auto& verts = m.topo.vertices();
    std::map<std::string, int> index;
    for (const auto& [id, v] : verts) {
      index[id] = static_cast<int>(agents_.size());
      AgentInfo a{id, v.role, v.trust, Term::name(id), Control::Honest};
      a.leaks = v.trust != Trust::Trusted;
      if (mode == Mode::Adversarial) {
        if (v.trust == Trust::Untrusted)
          a.control = Control::Dishonest;
        else if (v.trust == Trust::TrustFwd || v.trust == Trust::TrustRpl)
          a.control = Control::Partial;
      }
      auto it = m.spec->roles.find(v.role);
      if (it == m.spec->roles.end())
        throw std::invalid_argument("protocol " + m.spec->id + " has no role for " + to_string(v.role));
      a.spec = &it->second;
      agents_.push_back(std::move(a));
    }
    for (const auto& [e, c] : m.topo.edges()) {
      int f = index.at(e.first), t = index.at(e.second);
      agents_[f].out.push_back(t);
      agents_[t].in.push_back(f);
    }
    public_terms_ = m.setup.public_terms;
    list_bound_ = 1;
    for (const auto& a : agents_)
      if (is_voter_role(a.role)) ++list_bound_;
  }

  State initial(std::vector<Step>& steps) {
    State s;
    s.agents.resize(agents_.size());
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      auto& st = s.agents[i];
      auto it = m_.setup.agents.find(agents_[i].id);
      if (it != m_.setup.agents.end()) st.vars = it->second.knowledge;
      st.vars["self"] = agents_[i].name;
    }
    for (const auto& a : agents_)
      if (a.trust == Trust::Trusted) steps.push_back({Signal{SigKind::Hon, {a.name}}});
    for (const auto& t : public_terms_) add_knowledge(s, t, nullptr);
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      const auto& a = agents_[i];
      auto it = m_.setup.agents.find(a.id);
      if (it == m_.setup.agents.end()) continue;
      for (const auto& [k, v] : it->second.knowledge) {
        if (!a.leaks)
          steps.push_back({Signal{SigKind::Knows, {a.name, v}}});
        else
          add_knowledge(s, v, &steps);
      }
    }
    for (const auto& sig : m_.setup.bb_signals) steps.push_back({sig});
    return s;
  }

  // Appends successor configurations of s; reports whether a mandatory
  // action is enabled.
  bool actions(const State& s, std::vector<Action0>& out, const std::vector<Step>& path) {
    bool mandatory = false;
    for (std::size_t ai = 0; ai < agents_.size(); ++ai) {
      const auto& a = agents_[ai];
      const auto& st = s.agents[ai];
      if (a.control == Control::Dishonest) continue;
      bool partial = a.control == Control::Partial;
      // Transitions from the current pc.
      for (const auto& t : a.spec->transitions) {
        if (t.from != st.pc) continue;
        if (partial && t.obligation == Obligation::None) continue;
        if (!t.recv) {
          Bindings vars = st.vars;
          if (!guards_hold(t, vars)) continue;
          out.push_back({Action0::Fire, static_cast<int>(ai), &t, -1, Term(), std::move(vars), -1});
          out.back().mandatory = true;
          mandatory = true;
        }
      }
      // Pending messages addressed to this agent.
      for (std::size_t pi = 0; pi < s.pending.size(); ++pi) {
        const auto& p = s.pending[pi];
        if (p.to != static_cast<int>(ai)) continue;
        if (pi > 0 && s.pending[pi - 1] == p) continue;  // identical copies are interchangeable
        bool consumed = false;
        const Transition* fallback = nullptr;
        for (const auto& t : a.spec->transitions) {
          if (t.from != st.pc || !t.recv) continue;
          if (partial && t.obligation == Obligation::None) continue;
          if (graph_role(agents_[p.from].role) != graph_role(t.recv->peer)) continue;
          if (t.otherwise) {
            fallback = &t;
            continue;
          }
          Bindings vars = binders_cleared(st.vars, t.recv->pattern);
          if (!match(t.recv->pattern, p.m, vars) || !guards_hold(t, vars)) continue;
          out.push_back({Action0::Fire, static_cast<int>(ai), &t, p.from, p.m, std::move(vars),
                         static_cast<int>(pi)});
          out.back().mandatory = true;
          consumed = true;
        }
        if (!consumed && fallback) {
          out.push_back({Action0::Fire, static_cast<int>(ai), fallback, p.from, p.m, st.vars,
                         static_cast<int>(pi)});
          out.back().mandatory = true;
          consumed = true;
        }
        if (!consumed && partial) {
          out.push_back({Action0::Absorb, static_cast<int>(ai), nullptr, p.from, p.m, {},
                         static_cast<int>(pi)});
          out.back().mandatory = true;
          consumed = true;
        }
        mandatory = mandatory || consumed;
      }
    }
    if (mode_ == Mode::Adversarial && s.injections < m_.bounds.injections) {
      injections(s, out);
      forgeries(s, out, path);
    }
    return mandatory;
  }

  std::vector<Outcome> execute(const State& s, const Action0& act) {
    State base = s;
    std::vector<Step> steps;
    switch (act.kind) {
      case Action0::Absorb: {
        base.pending.erase(base.pending.begin() + act.pending_index);
        record_receive(base, steps, act.msg_from, act.agent, act.msg, false);
        return {{std::move(base), std::move(steps)}};
      }
      case Action0::Forge: {
        base.injections++;
        steps.push_back({act.forged});
        return {{std::move(base), std::move(steps)}};
      }
      case Action0::Inject: {
        base.injections++;
        const int x = act.msg_from;
        bool as_agent = agents_[x].control != Control::Honest;
        bool undeniable = m_.topo.chan(agents_[x].id, agents_[act.agent].id).delivery == Delivery::Undeniable;
        if (as_agent) {
          Step st{Signal{SigKind::Send, {agents_[x].name, agents_[act.agent].name, act.msg}}};
          if (undeniable) st.push_back(pub(x, act.agent, act.msg));
          steps.push_back(std::move(st));
        }
        record_receive(base, steps, x, act.agent, act.msg, undeniable && !as_agent);
        break;
      }
      case Action0::Fire: {
        if (act.pending_index >= 0) {
          base.pending.erase(base.pending.begin() + act.pending_index);
          record_receive(base, steps, act.msg_from, act.agent, act.msg, false);
        }
        break;
      }
    }
    std::vector<Outcome> outs;
    State st = std::move(base);
    st.agents[act.agent].vars = act.vars;
    run_actions(std::move(st), std::move(steps), act, 0, outs);
    return outs;
  }

  bool restrictions_hold(const std::vector<Step>& path) const {
    std::unordered_set<std::uint64_t> recs;
    for (const auto& st : path)
      for (const auto& sig : st)
        if (sig.kind == SigKind::Rec) recs.insert(sig.hash());
    for (const auto& st : path)
      for (const auto& sig : st) {
        if (sig.kind != SigKind::Send) continue;
        const auto& from = sig.args[0].label();
        const auto& to = sig.args[1].label();
        if (!m_.topo.has_edge(from, to)) continue;
        Delivery d = m_.topo.chan(from, to).delivery;
        if (d == Delivery::Default) continue;
        bool covered = trusted_or_partial(to) && (trusted_or_partial(from) || d == Delivery::Undeniable);
        if (!covered) continue;
        Signal rec{SigKind::Rec, sig.args};
        if (!recs.count(rec.hash())) return false;
      }
    return true;
  }

  Hash128 state_key(const State& s, const std::vector<Step>& path) const {
    Hasher h;
    for (const auto& a : s.agents) {
      h.add(static_cast<std::uint64_t>(a.pc) + 7);
      h.add(a.fresh);
      for (const auto& [k, v] : a.vars) {
        h.add(std::hash<std::string>{}(k));
        h.add(v.hash());
      }
      h.add(0xfeed);
    }
    for (const auto& p : s.pending) {
      h.add(static_cast<std::uint64_t>(p.from) * 131 + static_cast<std::uint64_t>(p.to));
      h.add(p.m.hash());
    }
    h.add(0xbeef);
    for (const auto& k : s.know) h.add(k.hash());
    h.add(static_cast<std::uint64_t>(s.injections));
    h.add(s.ended ? 3 : 4);
    auto tk = steps_key(path, mode_ == Mode::HonestNetwork);
    h.add(tk.lo);
    h.add(tk.hi);
    return h.get();
  }

  const Model& model() const { return m_; }
  Mode mode() const { return mode_; }

 private:
  bool trusted_or_partial(const std::string& id) const {
    return m_.topo.vertex(id).trust != Trust::Untrusted;
  }

  Signal pub(int from, int to, const Term& m) const {
    return Signal{SigKind::Pub, {agents_[from].name, agents_[to].name, m}};
  }

  bool guards_hold(const Transition& t, Bindings& vars) const {
    for (const auto& g : t.guards) {
      switch (g.kind) {
        case GuardKind::Eq:
          if (instantiate_expr(g.a, vars) != instantiate_expr(g.b, vars)) return false;
          break;
        case GuardKind::Neq:
          if (instantiate_expr(g.a, vars) == instantiate_expr(g.b, vars)) return false;
          break;
        case GuardKind::Member: {
          Term x = instantiate_expr(g.a, vars);
          Term l = instantiate_expr(g.b, vars);
          if (!l.is_list() || std::find(l.args().begin(), l.args().end(), x) == l.args().end()) return false;
          break;
        }
        case GuardKind::FindKey: {
          Term sig = instantiate_expr(g.a, vars);
          Term keys = instantiate_expr(g.b, vars);
          Term used = instantiate_expr(g.exclude, vars);
          if (!keys.is_list()) return false;
          bool found = false;
          for (const auto& k : keys.args()) {
            if (normalize(ver(sig, k)).is_bottom()) continue;
            if (used.is_list() &&
                std::find(used.args().begin(), used.args().end(), k) != used.args().end())
              continue;
            vars[g.bind] = k;
            found = true;
            break;
          }
          if (!found) return false;
          break;
        }
      }
    }
    return true;
  }

  void add_knowledge(State& s, const Term& t, std::vector<Step>* steps) const {
    auto it = std::lower_bound(s.know.begin(), s.know.end(), t);
    if (it != s.know.end() && *it == t) return;
    s.know.insert(it, t);
    if (steps) steps->push_back({Signal{SigKind::K, {t}}});
  }

  // rec signal at the receiver plus the leak of a non-honest receiver.
  void record_receive(State& s, std::vector<Step>& steps, int from, int to, const Term& m,
                      bool pub_at_rec) const {
    Step st{Signal{SigKind::Rec, {agents_[from].name, agents_[to].name, m}}};
    if (pub_at_rec) st.push_back(pub(from, to, m));
    steps.push_back(std::move(st));
    if (agents_[to].leaks) {
      steps.push_back({Signal{SigKind::Send, {agents_[to].name, adversary_name(), m}}});
      add_knowledge(s, m, &steps);
    }
  }

  int partner(int ai, Role r) const {
    const auto& a = agents_[ai];
    int best = -1;
    for (int o : a.out) {
      if (graph_role(agents_[o].role) != graph_role(r)) continue;
      int inst = m_.topo.vertex(agents_[o].id).instance;
      int mine = m_.topo.vertex(a.id).instance;
      if (best < 0 || (inst == mine && inst != 0)) best = o;
    }
    if (best < 0) throw std::logic_error(a.id + " has no channel to a " + to_string(r));
    return best;
  }

  void send(State& s, std::vector<Step>& steps, int from, int to, const Term& m,
            std::vector<Outcome>& outs, const Action0& act, std::size_t next) {
    const Channel& c = m_.topo.chan(agents_[from].id, agents_[to].id);
    Step st{Signal{SigKind::Send, {agents_[from].name, agents_[to].name, m}}};
    if (c.delivery == Delivery::Undeniable) st.push_back(pub(from, to, m));
    steps.push_back(std::move(st));
    if (c.secrecy == Secrecy::Insecure || c.secrecy == Secrecy::Authentic)
      add_knowledge(s, m, &steps);
    const auto& rcv = agents_[to];
    if (rcv.control == Control::Dishonest) {
      record_receive(s, steps, from, to, m, false);
      run_actions(std::move(s), std::move(steps), act, next, outs);
      return;
    }
    if (mode_ == Mode::Adversarial && c.delivery == Delivery::Default) {
      // The adversary decides here whether the message is ever delivered.
      run_actions(s, steps, act, next, outs);
    }
    Pending p{from, to, m};
    s.pending.insert(std::upper_bound(s.pending.begin(), s.pending.end(), p), p);
    run_actions(std::move(s), std::move(steps), act, next, outs);
  }

  void run_actions(State s, std::vector<Step> steps, const Action0& act, std::size_t i,
                   std::vector<Outcome>& outs) {
    if (act.kind == Action0::Absorb || act.kind == Action0::Forge) {
      outs.push_back({std::move(s), std::move(steps)});
      return;
    }
    const Transition& t = *act.tr;
    const int ai = act.agent;
    for (; i < t.actions.size(); ++i) {
      const Action& a = t.actions[i];
      auto& st = s.agents[ai];
      switch (a.kind) {
        case ActKind::Fresh:
          st.vars[a.var] = Term::fresh(a.var, 1000ULL * (ai + 1) + st.fresh++);
          break;
        case ActKind::Compute: {
          std::vector<Term> vals;
          for (const auto& e : a.exprs) vals.push_back(instantiate_expr(e, st.vars));
          st.vars[a.var] = apply_builtin(a.builtin, vals);
          break;
        }
        case ActKind::Emit: {
          Signal sig{a.sig, {}};
          for (const auto& e : a.exprs) sig.args.push_back(instantiate_expr(e, st.vars));
          if (a.sig == SigKind::End) s.ended = true;
          steps.push_back({std::move(sig)});
          break;
        }
        case ActKind::Send: {
          int to = a.reply ? act.msg_from : partner(ai, a.peer);
          Term m = instantiate_expr(a.exprs.at(0), st.vars);
          send(s, steps, ai, to, m, outs, act, i + 1);
          return;
        }
        case ActKind::SendAll: {
          Term m = instantiate_expr(a.exprs.at(0), st.vars);
          std::vector<int> targets;
          for (int o : agents_[ai].out)
            if (graph_role(agents_[o].role) == graph_role(a.peer)) targets.push_back(o);
          send_all(std::move(s), std::move(steps), ai, targets, 0, m, outs, act, i + 1);
          return;
        }
      }
    }
    s.agents[ai].pc = t.to;
    outs.push_back({std::move(s), std::move(steps)});
  }

  void send_all(State s, std::vector<Step> steps, int from, const std::vector<int>& targets,
                std::size_t k, const Term& m, std::vector<Outcome>& outs, const Action0& act,
                std::size_t next) {
    if (k == targets.size()) {
      run_actions(std::move(s), std::move(steps), act, next, outs);
      return;
    }
    // Chain the remaining targets through a synthetic continuation.
    std::vector<Outcome> partial;
    Action0 stop = act;
    const int pc = s.agents[from].pc;
    Transition noop;
    noop.to = pc;
    stop.tr = &noop;
    stop.kind = Action0::Fire;
    send(s, steps, from, targets[k], m, partial, stop, 0);
    for (auto& o : partial) {
      o.state.agents[from].pc = pc;
      send_all(std::move(o.state), std::move(o.steps), from, targets, k + 1, m, outs, act, next);
    }
  }

  const std::vector<Term>& analyzed(const State& s) {
    Hasher h;
    for (const auto& k : s.know) h.add(k.hash());
    auto key = h.get();
    auto it = closure_cache_.find(key);
    if (it != closure_cache_.end()) return it->second;
    if (closure_cache_.size() > 20000) closure_cache_.clear();
    return closure_cache_[key] = analyze(s.know, m_.bounds.deduce_depth);
  }

  std::vector<Term> pool(const std::vector<Term>& an, Shape shape) const {
    std::vector<Term> out;
    auto of = [&](Shape sh) {
      std::vector<Term> r;
      for (const auto& t : an)
        if (fits_shape(t, sh) && t.sym() != Sym::Name) r.push_back(t);
      return r;
    };
    switch (shape) {
      case Shape::Agent:
        return m_.setup.agent_names;
      case Shape::Vote:
        return m_.setup.votes;
      case Shape::Signed: {
        out = of(Shape::Signed);
        std::vector<Term> keys;
        for (const auto& t : an)
          if (t.sym() == Sym::Fresh && signing_key_published(t)) keys.push_back(t);
        for (const auto& k : keys)
          for (const auto& m : an)
            if (m.sym() == Sym::Pair || m.sym() == Sym::Sign || m.sym() == Sym::Encp)
              out.push_back(sign(m, k));
        break;
      }
      case Shape::ListPair:
      case Shape::ListSigned:
      case Shape::ListCipher:
      case Shape::ListVote: {
        Shape elem = shape == Shape::ListPair     ? Shape::Pair
                     : shape == Shape::ListSigned ? Shape::Signed
                     : shape == Shape::ListCipher ? Shape::Cipher
                                                  : Shape::Vote;
        std::vector<Term> base = elem == Shape::Vote ? m_.setup.votes : of(elem);
        std::sort(base.begin(), base.end());
        base.erase(std::unique(base.begin(), base.end()), base.end());
        std::vector<Term> cur;
        sub_multisets(base, 0, cur, out);
        for (const auto& t : an)
          if (fits_shape(t, shape)) out.push_back(t);
        break;
      }
      default:
        out = of(shape);
        break;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  void sub_multisets(const std::vector<Term>& base, std::size_t from, std::vector<Term>& cur,
                     std::vector<Term>& out) const {
    out.push_back(Term::list(cur));
    if (static_cast<int>(cur.size()) >= list_bound_) return;
    for (std::size_t i = from; i < base.size(); ++i) {
      cur.push_back(base[i]);
      sub_multisets(base, i, cur, out);
      cur.pop_back();
    }
  }

  bool signing_key_published(const Term& k) const {
    Term p = pk(k);
    return std::find(public_terms_.begin(), public_terms_.end(), p) != public_terms_.end();
  }

  std::vector<Term> generate(const Term& pattern, const std::vector<Term>& an) const {
    if (pattern.sym() == Sym::Var) return pool(an, pattern.shape());
    if (!pattern.has_vars()) return {pattern};
    std::vector<std::vector<Term>> parts;
    std::size_t total = 1;
    for (const auto& a : pattern.args()) {
      parts.push_back(generate(a, an));
      total *= std::max<std::size_t>(parts.back().size(), 1);
      if (parts.back().empty() || total > 4096) return {};
    }
    std::vector<Term> out;
    std::vector<Term> cur(parts.size());
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == parts.size()) {
        out.push_back(Term::app(pattern.sym(), cur));
        return;
      }
      for (const auto& x : parts[i]) {
        cur[i] = x;
        rec(i + 1);
      }
    };
    rec(0);
    return out;
  }

  bool writable(int from, int to) const {
    if (agents_[from].control != Control::Honest) return true;
    Secrecy s = m_.topo.chan(agents_[from].id, agents_[to].id).secrecy;
    return s == Secrecy::Insecure || s == Secrecy::Confidential;
  }

  void injections(const State& s, std::vector<Action0>& out) {
    const auto& an = analyzed(s);
    for (std::size_t ai = 0; ai < agents_.size(); ++ai) {
      const auto& a = agents_[ai];
      if (a.control == Control::Dishonest) continue;
      const auto& st = s.agents[ai];
      for (const auto& t : a.spec->transitions) {
        if (t.from != st.pc || !t.recv || t.otherwise) continue;
        if (a.control == Control::Partial && t.obligation == Obligation::None) continue;
        for (int x : a.in) {
          if (graph_role(agents_[x].role) != graph_role(t.recv->peer)) continue;
          if (!writable(x, static_cast<int>(ai))) continue;
          std::vector<Term> cands;
          auto hook = m_.spec->hooks.find(HookKey{a.role, agents_[x].role});
          if (hook != m_.spec->hooks.end())
            cands = hook->second(an, m_, list_bound_);
          else
            cands = generate(t.recv->pattern, an);
          std::sort(cands.begin(), cands.end());
          cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
          for (const auto& c0 : cands) {
            Term c = normalize(c0);
            Bindings vars = binders_cleared(st.vars, t.recv->pattern);
            if (!match(t.recv->pattern, c, vars) || !guards_hold(t, vars)) continue;
            if (!deduce(s.know, c, m_.bounds.deduce_depth)) continue;
            out.push_back({Action0::Inject, static_cast<int>(ai), &t, x, c, std::move(vars), -1});
          }
        }
      }
    }
  }

  void forgeries(const State& s, std::vector<Action0>& out, const std::vector<Step>& path) {
    bool any_corrupt = false;
    for (const auto& a : agents_) any_corrupt = any_corrupt || a.control != Control::Honest;
    if (!any_corrupt) return;
    const auto& an = analyzed(s);
    std::set<std::pair<Term, Term>> seen;
    for (const auto& e : pool(an, Shape::Signed)) {
      if (!signing_key_published(e.args()[1])) continue;
      const Term& b = e.args()[0];
      if (!fits_shape(b, m_.spec->ballot_shape)) continue;
      if (!seen.insert({b, e}).second) continue;
      Signal sig{SigKind::Evidence, {b, e}};
      bool present = false;
      for (const auto& st : path)
        for (const auto& x : st) present = present || x == sig;
      if (present) continue;
      auto f = forge_evidence_action(s.know, b, e, m_.bounds.deduce_depth);
      if (!f) continue;
      Action0 act{Action0::Forge};
      act.forged = *f;
      out.push_back(std::move(act));
    }
  }

  const Model& m_;
  Mode mode_;
  std::vector<AgentInfo> agents_;
  std::vector<Term> public_terms_;
  int list_bound_ = 1;
  std::unordered_map<Hash128, std::vector<Term>, H128> closure_cache_;
};


class Explorer {
 public:
  Explorer(Engine& e, const TraceVisitor& visit, EnumStats& stats)
      : e_(e), visit_(visit), stats_(stats) {}

  // Frontier collection: nodes reached at exactly `split` actions are handed
  // to `frontier` instead of being expanded.
  struct Node {
    State state;
    std::vector<Step> path;
  };

  void run(State s, std::vector<Step>& path, int split, std::vector<Node>* frontier) {
    split_ = split;
    frontier_ = frontier;
    dfs(std::move(s), path);
  }

 private:
  void dfs(State s, std::vector<Step>& path) {
    if (e_.model().merge_states) {
      auto key = e_.state_key(s, path);
      auto it = memo_.find(key);
      if (it != memo_.end() && it->second <= s.steps) {
        stats_.pruned++;
        return;
      }
      memo_[key] = s.steps;
    }
    if (frontier_ && s.steps == split_) {
      frontier_->push_back({std::move(s), path});
      return;
    }
    stats_.states++;
    std::vector<Action0> acts;
    bool mandatory = e_.actions(s, acts, path);
    if (!mandatory) {
      if (e_.restrictions_hold(path)) {
        Trace tr;
        tr.steps = path;
        tr.honest_network = e_.mode() == Mode::HonestNetwork;
        auto k = trace_key(tr);
        if (yielded_.insert(k).second) {
          stats_.traces++;
          visit_(tr, k);
        }
      } else {
        stats_.excluded++;
      }
    }
    if (s.steps >= e_.model().bounds.max_steps) {
      if (!acts.empty()) stats_.truncated++;
      return;
    }
    for (const auto& act : acts) {
      for (auto& o : e_.execute(s, act)) {
        o.state.steps = s.steps + 1;
        std::size_t mark = path.size();
        for (auto& st : o.steps) path.push_back(std::move(st));
        dfs(std::move(o.state), path);
        path.resize(mark);
      }
    }
  }

  Engine& e_;
  const TraceVisitor& visit_;
  EnumStats& stats_;
  std::unordered_map<Hash128, int, H128> memo_;
  std::unordered_set<Hash128, H128> yielded_;
  int split_ = -1;
  std::vector<Node>* frontier_ = nullptr;
};

}  // namespace

Model make_model(const ProtocolSpec& spec, const Topology& topo, const Bounds& bounds) {
  if (bounds.voters + bounds.abstainers <= 0) throw std::invalid_argument("bound of zero voters");
  if (bounds.deduce_depth < 0 || bounds.injections < 0 || bounds.max_steps < 0)
    throw std::invalid_argument("bounds must be non-negative");
  Model m;
  m.topo = topo;
  m.spec = std::make_shared<const ProtocolSpec>(spec);
  m.bounds = bounds;
  for (const auto& [id, v] : topo.vertices())
    if (!spec.roles.count(v.role))
      throw std::invalid_argument("protocol " + spec.id + " has no role for vertex " + id);
  m.setup = spec.setup(topo);
  return m;
}

EnumStats enumerate_traces(const Model& m, Mode mode, const TraceVisitor& visit) {
  Engine e(m, mode);
  EnumStats stats;
  std::vector<Step> path;
  State s = e.initial(path);
  Explorer x(e, visit, stats);
  x.run(std::move(s), path, -1, nullptr);
  return stats;
}

std::size_t enumerate_partitioned(const Model& m, Mode mode, const ParallelPlan& plan,
                                  const std::function<TraceVisitor(std::size_t)>& make_visitor,
                                  const std::function<void(std::size_t)>& prepare,
                                  EnumStats* stats) {
  std::vector<Explorer::Node> frontier;
  EnumStats prefix_stats;
  {
    Engine e(m, mode);
    std::vector<Step> path;
    State s = e.initial(path);
    // Subtree 0 receives traces that end inside the prefix.
    TraceVisitor v0;
    std::vector<std::pair<Trace, Hash128>> early;
    TraceVisitor collect = [&](const Trace& tr, const Hash128& k) { early.emplace_back(tr, k); };
    Explorer x(e, collect, prefix_stats);
    x.run(std::move(s), path, plan.split_depth, &frontier);
    prepare(frontier.size() + 1);
    v0 = make_visitor(0);
    for (const auto& [tr, k] : early) v0(tr, k);
  }
  const int n = static_cast<int>(frontier.size());
  std::vector<EnumStats> sub(frontier.size());
  std::vector<TraceVisitor> visitors(frontier.size());
  for (int i = 0; i < n; ++i) visitors[i] = make_visitor(static_cast<std::size_t>(i) + 1);
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(plan.workers, 1))
  for (int i = 0; i < n; ++i) {
    Engine e(m, mode);
    auto& node = frontier[i];
    std::vector<Step> path = node.path;
    Explorer x(e, visitors[i], sub[i]);
    x.run(std::move(node.state), path, -1, nullptr);
  }
  if (stats) {
    *stats = prefix_stats;
    for (const auto& s : sub) {
      stats->traces += s.traces;
      stats->states += s.states;
      stats->truncated += s.truncated;
      stats->excluded += s.excluded;
      stats->pruned += s.pruned;
    }
  }
  return frontier.size() + 1;
}

std::vector<Trace> collect_traces(const Model& m, Mode mode, EnumStats* stats) {
  std::vector<std::pair<Hash128, Trace>> got;
  auto st = enumerate_traces(m, mode, [&](const Trace& tr, const Hash128& k) { got.emplace_back(k, tr); });
  if (stats) *stats = st;
  std::sort(got.begin(), got.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Trace> out;
  for (auto& [k, t] : got) out.push_back(std::move(t));
  return out;
}

std::vector<Trace> honest_network_traces(const Model& m, EnumStats* stats) {
  return collect_traces(m, Mode::HonestNetwork, stats);
}

}  // namespace drc
