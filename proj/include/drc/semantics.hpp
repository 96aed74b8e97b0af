// Execution semantics: signals, traces, role specifications and the
// bounded-exhaustive trace enumerator.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drc/terms.hpp"
#include "drc/topology.hpp"

namespace drc {

enum class SigKind : std::uint8_t {
  Send,
  Rec,
  K,
  Hon,
  Knows,
  Vote,
  Ballot,
  BB_rec,
  BB_tal,
  BB_H,
  BB_pkS,
  BB_pkD,
  BB_pkP,
  BB_P,
  BB_woS,
  BB_zk,
  Corr,
  End,
  Pub,
  Evidence,
  VfC,
  VfA,
  VerifyA1,
  VerifyProof,
  VerifyIV,
};

std::string to_string(SigKind k);
SigKind parse_sig_kind(const std::string& s);
bool is_bb_signal(SigKind k);
// BB_*, Evidence and Pub.
bool is_public_signal(SigKind k);

struct Signal {
  SigKind kind = SigKind::End;
  std::vector<Term> args;

  std::string str() const;
  std::uint64_t hash() const;
  friend bool operator==(const Signal& a, const Signal& b) {
    return a.kind == b.kind && a.args == b.args;
  }
  friend bool operator<(const Signal& a, const Signal& b);
};

using Step = std::vector<Signal>;

struct Trace {
  std::vector<Step> steps;
  bool honest_network = false;

  bool contains(const Signal& s) const;
  // Index of the step holding End, if any.
  std::optional<std::size_t> end_index() const;
  std::size_t signal_count() const;
  template <class F>
  void for_each(F&& f) const {
    for (std::size_t i = 0; i < steps.size(); ++i)
      for (const auto& s : steps[i]) f(i, s);
  }
};

Trace pubtr(const Trace& tr);

// Canonical identity of a trace for deduplication: the public projection in
// order plus the set of remaining signals, each flagged with whether it
// precedes End.
Hash128 trace_key(const Trace& tr);

// ---- role specifications ----------------------------------------------------

// Builtin computations available to roles beyond term normalization.
enum class Builtin : std::uint8_t {
  None,          // normalize(args[0])
  Append,        // list args[0] extended by args[1]
  MixDecrypt,    // sorted decryptions of list args[0] under key args[1]
  MapFst,        // fst of every element of list args[0]
  Member,        // true iff args[0] occurs in list args[1]
  UniqueKeyStrip // true iff list args[0] verifies under distinct keys drawn from
                 // list args[2] with payloads equal to list args[1]
};

Term apply_builtin(Builtin b, const std::vector<Term>& args);

enum class ActKind : std::uint8_t { Fresh, Compute, Emit, Send, SendAll };

struct Action {
  ActKind kind = ActKind::Compute;
  std::string var;          // Fresh/Compute target
  Builtin builtin = Builtin::None;
  std::vector<Term> exprs;  // Compute inputs, Emit args, Send payload (exprs[0])
  SigKind sig = SigKind::End;
  Role peer = Role::S;       // Send/SendAll target role
  bool reply = false;        // Send back to the sender of the received message
};

enum class GuardKind : std::uint8_t { Eq, Neq, FindKey, Member };  // Member: a occurs in list b

struct Guard {
  GuardKind kind = GuardKind::Eq;
  Term a;
  Term b;
  Term exclude;      // FindKey: keys already used
  std::string bind;  // FindKey: variable receiving the verifying key
};

enum class Obligation : std::uint8_t { None, Forward, Reply };

struct Recv {
  Role peer = Role::H;
  Term pattern;
};

struct Transition {
  int from = 0;
  int to = 0;
  std::optional<Recv> recv;
  bool close = false;      // scheduler action ending the voting phase
  bool otherwise = false;  // consumes a message no sibling transition accepts
  std::vector<Guard> guards;
  std::vector<Action> actions;
  Obligation obligation = Obligation::None;
  std::string label;
};

struct RoleSpec {
  Role role = Role::H;
  std::vector<Transition> transitions;
};

using Bindings = std::map<std::string, Term>;

struct AgentSetup {
  Bindings knowledge;  // initial variable bindings, leaked when dishonest
};

struct Setup {
  std::map<std::string, AgentSetup> agents;  // by vertex id
  std::vector<Signal> bb_signals;             // published before any step
  std::vector<Term> public_terms;             // adversary's initial knowledge
  std::vector<Term> votes;                    // vote constants
  std::vector<Term> agent_names;
};

struct Bounds {
  int voters = 1;
  int abstainers = 0;
  int deduce_depth = 6;
  int injections = 3;
  int max_steps = 40;
};

struct Model;

// Candidate terms a dishonest sender may offer to a waiting receiver; the
// engine still filters them through pattern matching, guards and deduce.
using CandidateHook = std::function<std::vector<Term>(const std::vector<Term>& analyzed,
                                                      const Model& model, int list_bound)>;

class VerdictDef;

// Voters a ballot is attributed to, given the public setup recorded in tr.
using CastByFn = std::function<std::vector<Term>(const Trace& tr, const Term& ballot)>;

struct HookKey {
  Role receiver;
  Role sender;
  friend auto operator<=>(const HookKey&, const HookKey&) = default;
};

struct ProtocolSpec {
  std::string id;
  std::map<Role, RoleSpec> roles;
  std::function<Setup(const Topology&)> setup;
  std::function<Term(const Term& ballot)> tally;
  CastByFn castby;
  std::shared_ptr<const VerdictDef> faulty;
  bool revoting_allowed = false;
  Shape ballot_shape = Shape::Pair;
  std::map<HookKey, CandidateHook> hooks;
};

struct Model {
  Topology topo;
  std::shared_ptr<const ProtocolSpec> spec;
  Setup setup;
  Bounds bounds;
  bool merge_states = true;  // false: no memo, every interleaving expanded
};

// Mode of enumeration.
enum class Mode { Adversarial, HonestNetwork };

struct EnumStats {
  std::uint64_t traces = 0;     // distinct traces yielded
  std::uint64_t states = 0;     // configurations expanded
  std::uint64_t truncated = 0;  // paths cut by max_steps
  std::uint64_t excluded = 0;   // maximal paths violating a channel restriction
  std::uint64_t pruned = 0;     // revisits merged by the memo
};

using TraceVisitor = std::function<void(const Trace&, const Hash128& key)>;

Model make_model(const ProtocolSpec& spec, const Topology& topo, const Bounds& bounds);

// Serial reference enumerator: one depth-first search with a global memo.
EnumStats enumerate_traces(const Model& m, Mode mode, const TraceVisitor& visit);

// Frontier partitioned at a fixed depth, subtrees explored by OpenMP workers.
// The visitor for subtree i is produced by make_visitor(i); subtrees are
// independent so the multiset of (subtree, trace) pairs does not depend on
// scheduling. Returns the number of subtrees.
struct ParallelPlan {
  int split_depth = 3;
  int workers = 1;
};
std::size_t enumerate_partitioned(const Model& m, Mode mode, const ParallelPlan& plan,
                                  const std::function<TraceVisitor(std::size_t)>& make_visitor,
                                  const std::function<void(std::size_t)>& prepare,
                                  EnumStats* stats);

// Collects all distinct traces, sorted by key.
std::vector<Trace> collect_traces(const Model& m, Mode mode, EnumStats* stats = nullptr);
std::vector<Trace> honest_network_traces(const Model& m, EnumStats* stats = nullptr);

// Evidence(b,e) when ⟨b,e⟩ is derivable from kb.
std::optional<Signal> forge_evidence_action(const KnowledgeSet& kb, const Term& b, const Term& e,
                                            int depth);

// Checks that every sent term is derivable from the role's initial knowledge
// plus earlier receives; returns the offending transitions.
std::vector<std::string> check_static_deducibility(const RoleSpec& role, const Bindings& initial,
                                                   int depth);

// Substitutes bindings into an expression and normalizes it.
Term instantiate_expr(const Term& expr, const Bindings& b);
// Syntactic matching of a pattern against a ground term, extending b.
bool match(const Term& pattern, const Term& t, Bindings& b);

}  // namespace drc
