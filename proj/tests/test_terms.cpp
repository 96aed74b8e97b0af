#include "term_printer.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <random>
#include <set>

#include "drc/terms.hpp"

using namespace drc;

namespace {

Term N(const char* s) { return Term::name(s); }
Term F(const char* s, std::uint64_t id) { return Term::fresh(s, id); }

// ---- oracle: rewriting at arbitrary redex positions ----------------------------
// Rules are restated here from the equations, independently of the library.
// Default results (⊥, false) only apply once the arguments are irreducible.

bool oracle_irreducible(const Term& t);

bool verzk_by_permutation(const Term& proof, const Term& in, const Term& out, const Term& key) {
  if (proof.sym() != Sym::Zkp || key.sym() != Sym::Pk) return false;
  const Term& pin = proof.args()[0];
  const Term& pout = proof.args()[1];
  const Term& k = proof.args()[2];
  if (key.args()[0] != k) return false;
  if (!pin.is_list() || !pout.is_list() || !in.is_list() || !out.is_list()) return false;
  const auto& I = pin.args();
  const auto& O = pout.args();
  if (I.size() != in.args().size() || O.size() != out.args().size() || I.size() != O.size()) return false;
  // in' is a permutation of I and out' a permutation of O ...
  auto is_perm = [](const std::vector<Term>& a, const std::vector<Term>& b) {
    std::vector<std::size_t> idx(a.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    do {
      bool ok = true;
      for (std::size_t i = 0; ok && i < idx.size(); ++i) ok = a[idx[i]] == b[i];
      if (ok) return true;
    } while (std::next_permutation(idx.begin(), idx.end()));
    return false;
  };
  if (!is_perm(I, in.args()) || !is_perm(O, out.args())) return false;
  // ... and some permutation maps decryptions of in' onto out'.
  std::vector<Term> dec;
  for (const auto& c : in.args()) {
    if (c.sym() != Sym::Encp || c.args()[1] != pk(k)) return false;
    dec.push_back(c.args()[0]);
  }
  return is_perm(dec, out.args());
}

// Some rule applies at the root.
std::optional<Term> oracle_root(const Term& t) {
  const auto& a = t.args();
  switch (t.sym()) {
    case Sym::Fst:
      if (a[0].sym() == Sym::Pair) return a[0].args()[0];
      return std::nullopt;
    case Sym::Snd:
      if (a[0].sym() == Sym::Pair) return a[0].args()[1];
      return std::nullopt;
    case Sym::Ver:
      if (a[0].sym() == Sym::Sign && a[1] == pk(a[0].args()[1])) return a[0].args()[0];
      if (oracle_irreducible(a[0]) && oracle_irreducible(a[1])) return Term::bottom();
      return std::nullopt;
    case Sym::Decp:
      if (a[0].sym() == Sym::Encp && a[0].args()[1] == pk(a[1])) return a[0].args()[0];
      return std::nullopt;
    case Sym::Verlist: {
      if (!oracle_irreducible(a[0]) || !oracle_irreducible(a[1])) return std::nullopt;
      if (!a[0].is_list() || !a[1].is_list() || a[0].args().size() != a[1].args().size())
        return Term::bottom();
      std::vector<Term> out;
      for (std::size_t i = 0; i < a[0].args().size(); ++i) {
        const Term& s = a[0].args()[i];
        if (s.sym() != Sym::Sign || a[1].args()[i] != pk(s.args()[1])) return Term::bottom();
        if (s.args()[0].is_bottom()) return Term::bottom();
        out.push_back(s.args()[0]);
      }
      return Term::list(out);
    }
    case Sym::Verzk:
      for (const auto& x : a)
        if (!oracle_irreducible(x)) return std::nullopt;
      return Term::truth(verzk_by_permutation(a[0], a[1], a[2], a[3]));
    default:
      return std::nullopt;
  }
}

bool oracle_irreducible(const Term& t) {
  for (const auto& x : t.args())
    if (!oracle_irreducible(x)) return false;
  return !oracle_root(t).has_value();
}

// Positions are paths of argument indices.
void redexes(const Term& t, std::vector<std::size_t>& path, std::vector<std::vector<std::size_t>>& out) {
  if (oracle_root(t)) out.push_back(path);
  for (std::size_t i = 0; i < t.args().size(); ++i) {
    path.push_back(i);
    redexes(t.args()[i], path, out);
    path.pop_back();
  }
}

Term rewrite_at(const Term& t, const std::vector<std::size_t>& p, std::size_t d) {
  if (d == p.size()) return *oracle_root(t);
  auto args = t.args();
  args[p[d]] = rewrite_at(args[p[d]], p, d + 1);
  return Term::app(t.sym(), std::move(args));
}

Term oracle_normalize(Term t, std::mt19937_64& rng) {
  for (int guard = 0; guard < 10000; ++guard) {
    std::vector<std::vector<std::size_t>> rs;
    std::vector<std::size_t> path;
    redexes(t, path, rs);
    if (rs.empty()) return t;
    std::uniform_int_distribution<std::size_t> pick(0, rs.size() - 1);
    t = rewrite_at(t, rs[pick(rng)], 0);
  }
  FAIL("oracle rewriting did not terminate");
  return t;
}

// Random terms biased toward redexes: keys and messages come from small pools.
struct Gen {
  std::mt19937_64 rng;
  std::vector<Term> keys{F("k", 1), F("k", 2)};
  std::vector<Term> atoms{N("a"), N("b"), F("m", 3), F("r", 4)};

  int roll(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }
  Term key() { return keys[roll(2)]; }

  Term list(int d) {
    std::vector<Term> xs;
    int n = roll(3);
    for (int i = 0; i < n; ++i) xs.push_back(term(d - 1));
    return Term::list(xs);
  }

  Term term(int d) {
    if (d <= 0) return roll(4) == 0 ? key() : atoms[roll(4)];
    switch (roll(14)) {
      case 0: return pair(term(d - 1), term(d - 1));
      case 1: return fst(term(d - 1));
      case 2: return snd(term(d - 1));
      case 3: return sign(term(d - 1), key());
      case 4: return ver(term(d - 1), pk(key()));
      case 5: return encp(term(d - 1), pk(key()), atoms[3]);
      case 6: return decp(term(d - 1), key());
      case 7: return list(d);
      case 8: {
        std::vector<Term> s, k;
        int n = roll(3);
        for (int i = 0; i < n; ++i) {
          Term kk = key();
          s.push_back(roll(3) ? sign(term(d - 1), kk) : term(d - 1));
          k.push_back(pk(roll(4) ? kk : key()));
        }
        if (roll(5) == 0) k.push_back(pk(key()));
        return verlist(Term::list(s), Term::list(k));
      }
      case 9: {
        Term k = key();
        std::vector<Term> vs, cs;
        int n = 1 + roll(2);
        for (int i = 0; i < n; ++i) {
          vs.push_back(atoms[roll(3)]);
          cs.push_back(encp(vs.back(), pk(k), F("r", 20 + i)));
        }
        auto cs2 = cs;
        auto vs2 = vs;
        std::shuffle(cs2.begin(), cs2.end(), rng);
        std::shuffle(vs2.begin(), vs2.end(), rng);
        if (roll(4) == 0) vs2[0] = atoms[3];
        return verzk(zkp(Term::list(cs), Term::list(vs), k), Term::list(cs2), Term::list(vs2), pk(roll(5) ? k : key()));
      }
      case 10: return pair(fst(pair(term(d - 1), term(d - 1))), snd(term(d - 1)));
      case 11: {
        Term k = key();
        return ver(fst(pair(sign(term(d - 1), k), term(d - 1))), pk(k));
      }
      case 12: {
        Term k = key();
        return decp(snd(pair(term(d - 1), encp(term(d - 1), pk(k), atoms[3]))), k);
      }
      default: return term(d - 1);
    }
  }
};

// ---- oracle: unbounded saturation deduction ----------------------------------

bool oracle_public(const Term& t) {
  return t.sym() == Sym::Name || t.sym() == Sym::Bottom || t.sym() == Sym::True || t.sym() == Sym::False;
}

bool oracle_synth(const std::set<Term>& known, const Term& t) {
  if (oracle_public(t) || known.count(t)) return true;
  switch (t.sym()) {
    case Sym::Pair:
    case Sym::Pk:
    case Sym::Sign:
    case Sym::Encp:
    case Sym::Zkp:
    case Sym::List:
      return std::all_of(t.args().begin(), t.args().end(), [&](const Term& a) { return oracle_synth(known, a); });
    default:
      return false;
  }
}

std::set<Term> oracle_saturate(const std::vector<Term>& kb) {
  std::set<Term> known(kb.begin(), kb.end());
  for (bool grew = true; grew;) {
    grew = false;
    std::vector<Term> add;
    for (const auto& t : known) {
      if (t.sym() == Sym::Pair || t.sym() == Sym::List)
        for (const auto& a : t.args()) add.push_back(a);
      if (t.sym() == Sym::Encp && t.args()[1].sym() == Sym::Pk && oracle_synth(known, t.args()[1].args()[0]))
        add.push_back(t.args()[0]);
      if (t.sym() == Sym::Sign && oracle_synth(known, pk(t.args()[1]))) add.push_back(t.args()[0]);
    }
    for (auto& a : add) grew = known.insert(a).second || grew;
  }
  return known;
}

}  // namespace

TEST_SUITE("terms") {

TEST_CASE("normalize: destructor examples") {
  Term a = N("a"), b = N("b"), m = F("m", 1), skD = F("skD", 11), skX = F("skX", 12);
  CHECK(normalize(fst(pair(a, b))) == a);
  CHECK(normalize(snd(pair(a, b))) == b);
  CHECK(normalize(ver(sign(m, skD), pk(skD))) == m);
  CHECK(normalize(ver(sign(m, skD), pk(skX))).is_bottom());
  Term r = F("r", 5), k = F("k", 6);
  CHECK(normalize(decp(encp(m, pk(k), r), k)) == m);
  CHECK(normalize(decp(encp(m, pk(k), r), skX)) == decp(encp(m, pk(k), r), skX));
  CHECK(normalize(fst(a)) == fst(a));
}

TEST_CASE("normalize: verzk accepts permuted inputs") {
  Term k = F("k", 1), r1 = F("r", 2), r2 = F("r", 3), v1 = N("v1"), v2 = N("v2");
  Term c1 = encp(v1, pk(k), r1), c2 = encp(v2, pk(k), r2);
  Term proof = zkp(Term::list({c1, c2}), Term::list({v2, v1}), k);
  Term q = verzk(proof, Term::list({c2, c1}), Term::list({v2, v1}), pk(k));
  CHECK(verzk_by_permutation(proof, Term::list({c2, c1}), Term::list({v2, v1}), pk(k)));
  CHECK(normalize(q) == Term::truth(true));

  // every ordering of both lists, against the brute-force oracle
  std::vector<Term> cs{c1, c2}, vs{v1, v2};
  std::sort(cs.begin(), cs.end());
  do {
    std::sort(vs.begin(), vs.end());
    do {
      Term in = Term::list(cs), out = Term::list(vs);
      CHECK(normalize(verzk(proof, in, out, pk(k))) == Term::truth(verzk_by_permutation(proof, in, out, pk(k))));
    } while (std::next_permutation(vs.begin(), vs.end()));
  } while (std::next_permutation(cs.begin(), cs.end()));

  CHECK(normalize(verzk(proof, Term::list({c2, c1}), Term::list({v1, v1}), pk(k))) == Term::truth(false));
  CHECK(normalize(verzk(proof, Term::list({c2, c1}), Term::list({v2, v1}), pk(F("k", 9)))) == Term::truth(false));
  CHECK(normalize(verzk(proof, Term::list({c1}), Term::list({v1}), pk(k))) == Term::truth(false));
}

TEST_CASE("verlist examples") {
  Term x = N("x"), y = N("y"), k1 = F("k", 1), k2 = F("k", 2);
  CHECK(normalize(verlist(Term::list({sign(x, k1), sign(y, k2)}), Term::list({pk(k1), pk(k2)}))) ==
        Term::list({x, y}));
  CHECK(normalize(verlist(Term::list({}), Term::list({}))) == Term::list({}));
  CHECK(normalize(verlist(Term::list({sign(x, k1)}), Term::list({pk(k2)}))).is_bottom());
  CHECK(verlist(std::vector<Term>{sign(x, k1)}, std::vector<Term>{}).is_bottom());
}

TEST_CASE("is_subterm examples") {
  Term v = N("v"), k = F("k", 1), r = F("r", 2), skD = F("skD", 11);
  CHECK(is_subterm(v, sign(encp(v, pk(k), r), skD)));
  Term t = pair(N("a"), N("b"));
  CHECK(is_subterm(t, t));
  CHECK_FALSE(is_subterm(N("a"), pair(N("b"), N("c"))));
}

TEST_CASE("deduce examples") {
  Term a = F("a", 1), b = F("b", 2), m = F("m", 3), sk = F("sk", 4);
  CHECK(deduce({pair(a, b)}, a, 1));
  CHECK_FALSE(deduce({pair(a, b)}, a, 0));
  for (int d = 0; d <= 8; ++d) CHECK_FALSE(deduce({sign(m, sk)}, sk, d));
  Term k = F("k", 5), r = F("r", 6), v = F("v", 7);
  CHECK(deduce({encp(v, pk(k), r), k}, v, 1));
  CHECK_FALSE(deduce({encp(v, pk(k), r)}, v, 6));
  CHECK(deduce({}, N("public"), 0));
  CHECK_FALSE(deduce({}, F("x", 8), 6));
}

TEST_CASE("parse_term round trip") {
  Term t = pair(sign(N("m"), F("sk", 3)), Term::list({N("a"), Term::bottom()}));
  CHECK(parse_term(t.str()) == t);
  CHECK_THROWS_AS(parse_term("(pair a"), malformed_term);
  CHECK_THROWS_AS(Term::app(Sym::Pair, {N("a")}), malformed_term);
}

TEST_CASE("confluence: 1000 random terms against random-order rewriting") {
  Gen g{std::mt19937_64(20240611)};
  std::mt19937_64 order(7);
  int nontrivial = 0;
  for (int i = 0; i < 1000; ++i) {
    Term t = g.term(4);
    Term n = normalize(t);
    if (n != t) ++nontrivial;
    CHECK(oracle_irreducible(n));
    CHECK(normalize(n) == n);
    Term o1 = oracle_normalize(t, order);
    Term o2 = oracle_normalize(t, order);
    CHECK(o1 == n);
    CHECK(o2 == n);
  }
  CHECK(nontrivial > 300);
}

TEST_CASE("deduce agrees with saturation on random knowledge") {
  Gen g{std::mt19937_64(99)};
  int positive = 0;
  for (int i = 0; i < 300; ++i) {
    std::vector<Term> kb;
    int n = 1 + g.roll(3);
    for (int j = 0; j < n; ++j) kb.push_back(normalize(g.term(3)));
    if (g.roll(2)) kb.push_back(g.key());
    auto known = oracle_saturate(kb);
    std::vector<Term> goals(known.begin(), known.end());
    goals.push_back(g.key());
    goals.push_back(F("m", 3));
    goals.push_back(pair(F("m", 3), g.key()));
    for (const auto& goal : goals) {
      bool want = oracle_synth(known, goal);
      positive += want;
      CHECK(deduce(kb, goal, 12) == want);
    }
  }
  CHECK(positive > 0);
}

TEST_CASE("no-key-extraction invariant") {
  // Signing keys appear only in key position of sign and under pk.
  Gen g{std::mt19937_64(5)};
  for (int i = 0; i < 300; ++i) {
    Term sk = F("sk", 100 + i % 3);
    std::vector<Term> kb{pk(sk)};
    int n = 1 + g.roll(4);
    for (int j = 0; j < n; ++j) {
      Term m = g.roll(2) ? g.atoms[g.roll(4)] : pair(g.atoms[g.roll(4)], g.atoms[g.roll(4)]);
      Term s = sign(m, sk);
      kb.push_back(g.roll(2) ? s : pair(s, Term::list({s, pk(sk)})));
    }
    for (int d = 0; d <= 8; d += 4) CHECK_FALSE(deduce(kb, sk, d));
    // the signed payloads are still readable
    CHECK(deduce(kb, kb[1].sym() == Sym::Sign ? kb[1].args()[0] : kb[1].args()[0].args()[0], 8));
  }
}

TEST_CASE("analyze is monotone in depth") {
  Term a = F("a", 1), b = F("b", 2), c = F("c", 3);
  KnowledgeSet kb{pair(a, pair(b, c))};
  auto l1 = analyze(kb, 1), l2 = analyze(kb, 2);
  CHECK(std::includes(l2.begin(), l2.end(), l1.begin(), l1.end()));
  CHECK(std::binary_search(l2.begin(), l2.end(), c));
  CHECK_FALSE(std::binary_search(l1.begin(), l1.end(), c));
}

}  // TEST_SUITE
