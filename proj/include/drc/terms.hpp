// Symbolic messages, the equational theory and Dolev-Yao deduction.
#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace drc {

enum class Sym : std::uint8_t {
  Name,   // public constant or agent id
  Fresh,  // nonce or key with a unique id
  Var,    // pattern variable, never part of a runtime message
  Pair,
  Fst,
  Snd,
  Pk,
  Sign,
  Ver,
  Encp,
  Decp,
  Zkp,
  Verzk,
  Verlist,
  List,
  Bottom,
  True,
  False,
};

// Hint restricting which adversary terms may instantiate a pattern variable.
enum class Shape : std::uint8_t {
  Any,
  Agent,
  Vote,
  Pair,
  Signed,
  Cipher,
  Proof,
  ListPair,
  ListSigned,
  ListCipher,
  ListVote,
};

class malformed_term : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Hash128 {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  friend bool operator==(const Hash128&, const Hash128&) = default;
  friend auto operator<=>(const Hash128&, const Hash128&) = default;
};

class Term;

namespace detail {
struct Node;
}

class Term {
 public:
  Term();  // the bottom constant

  static Term name(std::string n);
  static Term fresh(std::string n, std::uint64_t id);
  static Term var(std::string n, Shape shape = Shape::Any);
  static Term app(Sym s, std::vector<Term> args);
  static Term bottom();
  static Term truth(bool b);
  static Term list(std::vector<Term> items);

  Sym sym() const;
  const std::string& label() const;  // name of Name/Fresh/Var, empty otherwise
  std::uint64_t id() const;          // Fresh id
  Shape shape() const;               // Var hint
  const std::vector<Term>& args() const;
  std::uint64_t hash() const;

  bool is_atom() const;
  bool is_bottom() const { return sym() == Sym::Bottom; }
  bool is_list() const { return sym() == Sym::List; }
  bool has_vars() const;
  std::size_t size() const;  // node count
  std::size_t depth() const;

  std::string str() const;

  friend bool operator==(const Term& a, const Term& b);
  friend bool operator!=(const Term& a, const Term& b) { return !(a == b); }
  friend bool operator<(const Term& a, const Term& b) { return compare(a, b) < 0; }
  // Structural total order used for every canonical sort.
  static int compare(const Term& a, const Term& b);

 private:
  explicit Term(std::shared_ptr<const detail::Node> n) : n_(std::move(n)) {}
  std::shared_ptr<const detail::Node> n_;
};

struct TermHash {
  std::size_t operator()(const Term& t) const { return static_cast<std::size_t>(t.hash()); }
};

// Declared arity of a symbol; -1 means variadic.
int arity(Sym s);
std::string_view sym_name(Sym s);

// Convenience constructors.
Term pair(Term a, Term b);
Term fst(Term t);
Term snd(Term t);
Term pk(Term k);
Term sign(Term m, Term sk);
Term ver(Term s, Term k);
Term encp(Term m, Term k, Term r);
Term decp(Term c, Term k);
Term zkp(Term in, Term out, Term k);
Term verzk(Term proof, Term in, Term out, Term k);
Term verlist(Term sigs, Term keys);
// Right-nested tuple ⟨a,⟨b,...⟩⟩.
Term tuple(std::vector<Term> items);

Term normalize(const Term& t);
// Elementwise ver; ⊥ on any failure or length mismatch.
Term verlist(const std::vector<Term>& sigs, const std::vector<Term>& keys);
bool is_subterm(const Term& needle, const Term& haystack);
std::vector<Term> subterms(const Term& t);

bool multiset_equal(std::vector<Term> a, std::vector<Term> b);
// a ⊆ b as multisets.
bool multiset_subset(std::vector<Term> a, std::vector<Term> b);

Term parse_term(std::string_view text);

using KnowledgeSet = std::vector<Term>;

// Secrets must be fresh names: public names are derivable by anyone.
bool deduce(const KnowledgeSet& kb, const Term& goal, int depth);

// Terms reachable from kb by decomposition within depth steps.
std::vector<Term> analyze(const KnowledgeSet& kb, int depth);

// Adversary-minted names are fresh names with this label prefix.
inline constexpr std::string_view kAdversaryFreshPrefix = "adv";

}  // namespace drc
