#include "drc/terms.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace drc {

namespace detail {

struct Node {
  Sym sym;
  Shape shape = Shape::Any;
  std::string label;
  std::uint64_t id = 0;
  std::vector<Term> args;
  std::uint64_t hash = 0;
  std::size_t size = 1;
  std::size_t depth = 1;
  bool vars = false;
};

}  // namespace detail

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h * kFnvPrime;
}

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : s) h = (h ^ c) * kFnvPrime;
  return h;
}

const Term& bottom_term() {
  static const Term t = Term::app(Sym::Bottom, {});
  return t;
}

}  // namespace

int arity(Sym s) {
  switch (s) {
    case Sym::Name:
    case Sym::Fresh:
    case Sym::Var:
    case Sym::Bottom:
    case Sym::True:
    case Sym::False:
      return 0;
    case Sym::Fst:
    case Sym::Snd:
    case Sym::Pk:
      return 1;
    case Sym::Pair:
    case Sym::Sign:
    case Sym::Ver:
    case Sym::Decp:
    case Sym::Verlist:
      return 2;
    case Sym::Encp:
    case Sym::Zkp:
      return 3;
    case Sym::Verzk:
      return 4;
    case Sym::List:
      return -1;
  }
  return 0;
}

std::string_view sym_name(Sym s) {
  switch (s) {
    case Sym::Name: return "name";
    case Sym::Fresh: return "fresh";
    case Sym::Var: return "var";
    case Sym::Pair: return "pair";
    case Sym::Fst: return "fst";
    case Sym::Snd: return "snd";
    case Sym::Pk: return "pk";
    case Sym::Sign: return "sign";
    case Sym::Ver: return "ver";
    case Sym::Encp: return "encp";
    case Sym::Decp: return "decp";
    case Sym::Zkp: return "zkp";
    case Sym::Verzk: return "verzk";
    case Sym::Verlist: return "verlist";
    case Sym::List: return "list";
    case Sym::Bottom: return "bot";
    case Sym::True: return "true";
    case Sym::False: return "false";
  }
  return "?";
}

Term::Term() : Term(bottom_term()) {}

Term Term::name(std::string n) {
  auto node = std::make_shared<detail::Node>();
  node->sym = Sym::Name;
  node->hash = mix(mix(kFnvOffset, 1), hash_string(n));
  node->label = std::move(n);
  return Term(std::move(node));
}

Term Term::fresh(std::string n, std::uint64_t id) {
  auto node = std::make_shared<detail::Node>();
  node->sym = Sym::Fresh;
  node->hash = mix(mix(mix(kFnvOffset, 2), hash_string(n)), id);
  node->label = std::move(n);
  node->id = id;
  return Term(std::move(node));
}

Term Term::var(std::string n, Shape shape) {
  auto node = std::make_shared<detail::Node>();
  node->sym = Sym::Var;
  node->shape = shape;
  node->hash = mix(mix(kFnvOffset, 3), hash_string(n));
  node->label = std::move(n);
  node->vars = true;
  return Term(std::move(node));
}

Term Term::app(Sym s, std::vector<Term> args) {
  if (s == Sym::Name || s == Sym::Fresh || s == Sym::Var)
    throw malformed_term("atoms are built with name/fresh/var");
  int a = arity(s);
  if (a >= 0 && static_cast<std::size_t>(a) != args.size())
    throw malformed_term(std::string(sym_name(s)) + " expects " + std::to_string(a) +
                         " arguments, got " + std::to_string(args.size()));
  auto node = std::make_shared<detail::Node>();
  node->sym = s;
  std::uint64_t h = mix(kFnvOffset, 16 + static_cast<std::uint64_t>(s));
  std::size_t d = 0;
  for (const auto& x : args) {
    h = mix(h, x.hash());
    node->size += x.size();
    d = std::max(d, x.depth());
    node->vars = node->vars || x.has_vars();
  }
  node->depth = d + 1;
  node->hash = mix(h, args.size());
  node->args = std::move(args);
  return Term(std::move(node));
}

Term Term::bottom() { return bottom_term(); }

Term Term::truth(bool b) {
  static const Term t = Term::app(Sym::True, {});
  static const Term f = Term::app(Sym::False, {});
  return b ? t : f;
}

Term Term::list(std::vector<Term> items) { return app(Sym::List, std::move(items)); }

Sym Term::sym() const { return n_->sym; }
const std::string& Term::label() const { return n_->label; }
std::uint64_t Term::id() const { return n_->id; }
Shape Term::shape() const { return n_->shape; }
const std::vector<Term>& Term::args() const { return n_->args; }
std::uint64_t Term::hash() const { return n_->hash; }
bool Term::is_atom() const { return n_->args.empty() && n_->sym != Sym::List; }
bool Term::has_vars() const { return n_->vars; }
std::size_t Term::size() const { return n_->size; }
std::size_t Term::depth() const { return n_->depth; }

bool operator==(const Term& a, const Term& b) {
  if (a.n_ == b.n_) return true;
  if (a.hash() != b.hash()) return false;
  return Term::compare(a, b) == 0;
}

int Term::compare(const Term& a, const Term& b) {
  if (a.n_ == b.n_) return 0;
  if (a.sym() != b.sym()) return a.sym() < b.sym() ? -1 : 1;
  switch (a.sym()) {
    case Sym::Name:
    case Sym::Var:
      return a.label().compare(b.label()) < 0 ? -1 : (a.label() == b.label() ? 0 : 1);
    case Sym::Fresh:
      if (a.label() != b.label()) return a.label() < b.label() ? -1 : 1;
      if (a.id() != b.id()) return a.id() < b.id() ? -1 : 1;
      return 0;
    default:
      break;
  }
  const auto& x = a.args();
  const auto& y = b.args();
  if (x.size() != y.size()) return x.size() < y.size() ? -1 : 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    int c = compare(x[i], y[i]);
    if (c != 0) return c;
  }
  return 0;
}

namespace {

void print(const Term& t, std::string& out) {
  switch (t.sym()) {
    case Sym::Name:
      out += t.label();
      return;
    case Sym::Fresh:
      out += t.label();
      out += '#';
      out += std::to_string(t.id());
      return;
    case Sym::Var:
      out += '?';
      out += t.label();
      return;
    case Sym::Bottom:
    case Sym::True:
    case Sym::False:
      out += sym_name(t.sym());
      return;
    default:
      break;
  }
  out += '(';
  out += sym_name(t.sym());
  for (const auto& a : t.args()) {
    out += ' ';
    print(a, out);
  }
  out += ')';
}

}  // namespace

std::string Term::str() const {
  std::string out;
  print(*this, out);
  return out;
}

Term pair(Term a, Term b) { return Term::app(Sym::Pair, {std::move(a), std::move(b)}); }
Term fst(Term t) { return Term::app(Sym::Fst, {std::move(t)}); }
Term snd(Term t) { return Term::app(Sym::Snd, {std::move(t)}); }
Term pk(Term k) { return Term::app(Sym::Pk, {std::move(k)}); }
Term sign(Term m, Term sk) { return Term::app(Sym::Sign, {std::move(m), std::move(sk)}); }
Term ver(Term s, Term k) { return Term::app(Sym::Ver, {std::move(s), std::move(k)}); }
Term encp(Term m, Term k, Term r) {
  return Term::app(Sym::Encp, {std::move(m), std::move(k), std::move(r)});
}
Term decp(Term c, Term k) { return Term::app(Sym::Decp, {std::move(c), std::move(k)}); }
Term zkp(Term in, Term out, Term k) {
  return Term::app(Sym::Zkp, {std::move(in), std::move(out), std::move(k)});
}
Term verzk(Term proof, Term in, Term out, Term k) {
  return Term::app(Sym::Verzk, {std::move(proof), std::move(in), std::move(out), std::move(k)});
}
Term verlist(Term sigs, Term keys) {
  return Term::app(Sym::Verlist, {std::move(sigs), std::move(keys)});
}

Term tuple(std::vector<Term> items) {
  if (items.empty()) throw malformed_term("empty tuple");
  Term acc = items.back();
  for (std::size_t i = items.size() - 1; i-- > 0;) acc = pair(items[i], acc);
  return acc;
}

bool multiset_equal(std::vector<Term> a, std::vector<Term> b) {
  if (a.size() != b.size()) return false;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

bool multiset_subset(std::vector<Term> a, std::vector<Term> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

namespace {

// Root rewrite step; arguments are already in normal form.
Term reduce_root(const Term& t) {
  const auto& a = t.args();
  switch (t.sym()) {
    case Sym::Fst:
      if (a[0].sym() == Sym::Pair) return a[0].args()[0];
      return t;
    case Sym::Snd:
      if (a[0].sym() == Sym::Pair) return a[0].args()[1];
      return t;
    case Sym::Ver:
      if (a[0].sym() == Sym::Sign && a[1].sym() == Sym::Pk && a[0].args()[1] == a[1].args()[0])
        return a[0].args()[0];
      return Term::bottom();
    case Sym::Decp:
      if (a[0].sym() == Sym::Encp && a[0].args()[1].sym() == Sym::Pk &&
          a[0].args()[1].args()[0] == a[1])
        return a[0].args()[0];
      return t;
    case Sym::Verlist:
      if (!a[0].is_list() || !a[1].is_list()) return Term::bottom();
      return verlist(a[0].args(), a[1].args());
    case Sym::Verzk: {
      const Term& proof = a[0];
      if (proof.sym() != Sym::Zkp || a[3].sym() != Sym::Pk) return Term::truth(false);
      const Term& in = proof.args()[0];
      const Term& out = proof.args()[1];
      const Term& k = proof.args()[2];
      if (a[3].args()[0] != k) return Term::truth(false);
      if (!in.is_list() || !out.is_list() || !a[1].is_list() || !a[2].is_list())
        return Term::truth(false);
      if (!multiset_equal(in.args(), a[1].args())) return Term::truth(false);
      if (!multiset_equal(out.args(), a[2].args())) return Term::truth(false);
      std::vector<Term> dec;
      for (const auto& c : a[1].args()) {
        Term m = reduce_root(decp(c, k));
        if (m.sym() == Sym::Decp) return Term::truth(false);
        dec.push_back(m);
      }
      return Term::truth(multiset_equal(std::move(dec), a[2].args()));
    }
    default:
      return t;
  }
}

}  // namespace

Term verlist(const std::vector<Term>& sigs, const std::vector<Term>& keys) {
  if (sigs.size() != keys.size()) return Term::bottom();
  std::vector<Term> out;
  out.reserve(sigs.size());
  for (std::size_t i = 0; i < sigs.size(); ++i) {
    Term m = reduce_root(ver(sigs[i], keys[i]));
    if (m.is_bottom()) return Term::bottom();
    out.push_back(std::move(m));
  }
  return Term::list(std::move(out));
}

Term normalize(const Term& t) {
  if (t.args().empty()) return t;
  std::vector<Term> args;
  args.reserve(t.args().size());
  bool changed = false;
  for (const auto& a : t.args()) {
    Term n = normalize(a);
    changed = changed || n != a;
    args.push_back(std::move(n));
  }
  Term rebuilt = changed ? Term::app(t.sym(), std::move(args)) : t;
  return reduce_root(rebuilt);
}

bool is_subterm(const Term& needle, const Term& haystack) {
  if (needle == haystack) return true;
  if (needle.size() >= haystack.size()) return false;
  for (const auto& a : haystack.args())
    if (is_subterm(needle, a)) return true;
  return false;
}

std::vector<Term> subterms(const Term& t) {
  std::vector<Term> out;
  std::vector<Term> stack{t};
  while (!stack.empty()) {
    Term x = stack.back();
    stack.pop_back();
    out.push_back(x);
    for (const auto& a : x.args()) stack.push_back(a);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

struct Parser {
  std::string_view s;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw malformed_term("parse error at offset " + std::to_string(pos) + ": " + what);
  }
  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  std::string token() {
    skip();
    std::size_t b = pos;
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != '(' &&
           s[pos] != ')')
      ++pos;
    if (b == pos) fail("expected token");
    return std::string(s.substr(b, pos - b));
  }
  Term atom(const std::string& tok) {
    if (tok == "bot") return Term::bottom();
    if (tok == "true") return Term::truth(true);
    if (tok == "false") return Term::truth(false);
    if (tok[0] == '?') return Term::var(tok.substr(1));
    auto hashpos = tok.rfind('#');
    if (hashpos != std::string::npos && hashpos > 0 && hashpos + 1 < tok.size()) {
      auto digits = tok.substr(hashpos + 1);
      if (std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(c); }))
        return Term::fresh(tok.substr(0, hashpos), std::stoull(digits));
    }
    return Term::name(tok);
  }
  Term term() {
    skip();
    if (pos >= s.size()) fail("unexpected end");
    if (s[pos] != '(') return atom(token());
    ++pos;
    std::string head = token();
    static const std::map<std::string, Sym> syms = {
        {"pair", Sym::Pair},     {"fst", Sym::Fst},   {"snd", Sym::Snd},   {"pk", Sym::Pk},
        {"sign", Sym::Sign},     {"ver", Sym::Ver},   {"encp", Sym::Encp}, {"decp", Sym::Decp},
        {"zkp", Sym::Zkp},       {"verzk", Sym::Verzk}, {"verlist", Sym::Verlist},
        {"list", Sym::List}};
    auto it = syms.find(head);
    if (it == syms.end()) fail("unknown function symbol '" + head + "'");
    std::vector<Term> args;
    for (;;) {
      skip();
      if (pos >= s.size()) fail("missing ')'");
      if (s[pos] == ')') {
        ++pos;
        break;
      }
      args.push_back(term());
    }
    return Term::app(it->second, std::move(args));
  }
};

}  // namespace

Term parse_term(std::string_view text) {
  Parser p{text};
  Term t = p.term();
  p.skip();
  if (p.pos != text.size()) p.fail("trailing input");
  return t;
}

namespace {

bool publicly_known(const Term& t) {
  switch (t.sym()) {
    case Sym::Name:
    case Sym::Bottom:
    case Sym::True:
    case Sym::False:
      return true;
    case Sym::Fresh:
      return t.label().rfind(kAdversaryFreshPrefix, 0) == 0;
    default:
      return false;
  }
}

bool composable(Sym s) {
  switch (s) {
    case Sym::Pair:
    case Sym::Pk:
    case Sym::Sign:
    case Sym::Encp:
    case Sym::Zkp:
    case Sym::List:
      return true;
    default:
      return false;
  }
}

// Level d of the analysis closure is A_d; derivable(t, d) composes on top of A_d.
class Deducer {
 public:
  Deducer(const KnowledgeSet& kb, int depth) {
    std::vector<Term> base;
    for (const auto& t : kb) base.push_back(normalize(t));
    std::sort(base.begin(), base.end());
    base.erase(std::unique(base.begin(), base.end()), base.end());
    levels_.push_back(std::move(base));
    max_depth_ = std::max(depth, 0);
  }

  const std::vector<Term>& level(int d) {
    while (static_cast<int>(levels_.size()) <= d) extend();
    return levels_[d];
  }

  bool derivable(const Term& t, int d) {
    if (publicly_known(t)) return true;
    auto key = std::make_pair(t, d);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    memo_[key] = false;  // cycle guard
    bool ok = std::binary_search(level(d).begin(), level(d).end(), t);
    if (!ok && d > 0 && composable(t.sym())) {
      ok = true;
      for (const auto& a : t.args())
        if (!derivable(a, d - 1)) {
          ok = false;
          break;
        }
    }
    memo_[key] = ok;
    return ok;
  }

 private:
  struct KeyLess {
    bool operator()(const std::pair<Term, int>& a, const std::pair<Term, int>& b) const {
      if (a.second != b.second) return a.second < b.second;
      return a.first < b.first;
    }
  };

  void extend() {
    int d = static_cast<int>(levels_.size()) - 1;
    std::vector<Term> next = levels_[d];
    for (const auto& t : levels_[d]) {
      switch (t.sym()) {
        case Sym::Pair:
        case Sym::List:
          for (const auto& a : t.args()) next.push_back(a);
          break;
        case Sym::Encp:
          if (t.args()[1].sym() == Sym::Pk && derivable(t.args()[1].args()[0], d))
            next.push_back(t.args()[0]);
          break;
        case Sym::Sign:
          if (derivable(pk(t.args()[1]), d)) next.push_back(t.args()[0]);
          break;
        default:
          break;
      }
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    levels_.push_back(std::move(next));
  }

  std::vector<std::vector<Term>> levels_;
  std::map<std::pair<Term, int>, bool, KeyLess> memo_;
  int max_depth_ = 0;
};

}  // namespace

bool deduce(const KnowledgeSet& kb, const Term& goal, int depth) {
  if (depth < 0) return false;
  Deducer d(kb, depth);
  return d.derivable(normalize(goal), depth);
}

std::vector<Term> analyze(const KnowledgeSet& kb, int depth) {
  Deducer d(kb, depth);
  return d.level(std::max(depth, 0));
}

}  // namespace drc
