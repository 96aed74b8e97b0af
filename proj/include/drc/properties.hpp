// Trace properties and the publicly evaluable verdict language.
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "drc/semantics.hpp"

namespace drc {

// ---- verdicts ---------------------------------------------------------------

class requirement1_violation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class VOp : std::uint8_t {
  True,
  False,
  And,
  Or,
  Not,
  Exists,   // some signal of kind `sig` matches `pats`, then kids[0]
  Eq,       // a == b after substitution
  Neq,
  Member,   // a occurs in list b
  Match,    // pattern a matches the value of b, binding its variables
  Builtin,  // apply_builtin(fn, args) == true
};

struct VNode;
using VPtr = std::shared_ptr<const VNode>;

struct VNode {
  VOp op = VOp::True;
  std::vector<VPtr> kids;
  SigKind sig = SigKind::End;
  std::vector<Term> pats;
  Term a;
  Term b;
  drc::Builtin fn = drc::Builtin::None;
};

namespace v {
VPtr yes();
VPtr no();
VPtr all(std::vector<VPtr> xs);
VPtr any(std::vector<VPtr> xs);
VPtr neg(VPtr x);
VPtr exists(SigKind k, std::vector<Term> pats, VPtr body);
VPtr eq(Term a, Term b);
VPtr neq(Term a, Term b);
VPtr member(Term a, Term list);
VPtr matches(Term pattern, Term value);
VPtr builtin(drc::Builtin fn, std::vector<Term> args);
}  // namespace v

// Faulty(S,b). The variable ?b carries the disputed ballot.
class VerdictDef {
 public:
  // Rejects any signal atom outside BB_*, Evidence and Pub.
  VerdictDef(std::string name, VPtr body, bool empty_for_bottom);

  const std::string& name() const { return name_; }
  bool eval(const Trace& tr, const Term& b) const;
  // Signal kinds the definition inspects.
  std::set<SigKind> referenced() const;

 private:
  std::string name_;
  VPtr body_;
  bool empty_for_bottom_;
};

bool requirement1_ok(const VNode& n, std::string* offending = nullptr);

bool eval_faulty(const VerdictDef& v, const Trace& tr, const Term& b);

// Ballots over which ∃b/∀b are evaluated: subterms of public payloads, a
// probe term that occurs nowhere, and ⊥.
std::vector<Term> ballot_candidates(const Trace& tr);
const Term& probe_ballot();

// ---- properties -------------------------------------------------------------

// Per-trace evaluation context caching verdicts over the candidate ballots.
class TraceFacts {
 public:
  TraceFacts(const Trace& tr, const VerdictDef& v);
  const Trace& trace() const { return tr_; }
  bool faulty(const Term& b) const;
  bool any_faulty() const;
  // Some b ≠ ⊥ the verdict does not flag.
  bool some_clean_ballot() const;

 private:
  const Trace& tr_;
  const VerdictDef& v_;
  std::vector<Term> cands_;
  mutable std::map<Term, bool> cache_;
};

// Each property returns its truth value; `fired` (when given) is set when the
// antecedent held for at least one instance.
bool voter_c(const TraceFacts& f, bool* fired = nullptr);
bool timely_p(const TraceFacts& f, bool* fired = nullptr);
bool voter_a(const TraceFacts& f, const CastByFn& castby, bool* fired = nullptr);
bool auth_p(const TraceFacts& f, const Term& authority, bool* fired = nullptr);
bool uniqueness(const TraceFacts& f, const CastByFn& castby, bool* fired = nullptr);
bool func_property(const Trace& tr);
bool indiv_verif(const Trace& tr, bool* fired = nullptr);
bool tallied_as_recorded(const Trace& tr, bool* fired = nullptr);
bool elig_verif(const Trace& tr, bool* fired = nullptr);
bool dr_equal(const Trace& a, const Trace& b, const Term& authority);

enum class Prop : std::uint8_t {
  VoterC,
  TimelyP,
  VoterA,
  AuthP,
  Uniqueness,
  Func,
  IndivVerif,
  TalliedAsRecorded,
  EligVerif,
};

std::string to_string(Prop p);
Prop parse_prop(const std::string& s);

struct PropContext {
  const ProtocolSpec* spec = nullptr;
  Term authority = Term::name("S");
};

bool eval_prop(Prop p, const Trace& tr, const PropContext& ctx, bool* fired = nullptr);
// Same, reusing verdict facts already computed for tr (may be null when the
// protocol has no verdict).
bool eval_prop(Prop p, const Trace& tr, const TraceFacts* facts, const PropContext& ctx,
               bool* fired = nullptr);

}  // namespace drc
