#include "drc/topology.hpp"

#include <algorithm>
#include <set>

namespace drc {

bool trust_leq(Trust a, Trust b) {
  if (a == b || a == Trust::Untrusted || b == Trust::Trusted) return true;
  return false;
}

bool secrecy_leq(Secrecy a, Secrecy b) {
  if (a == b || a == Secrecy::Insecure || b == Secrecy::Secure) return true;
  return false;
}

bool delivery_leq(Delivery a, Delivery b) { return static_cast<int>(a) <= static_cast<int>(b); }

bool chan_leq(const Channel& a, const Channel& b) {
  return secrecy_leq(a.secrecy, b.secrecy) && delivery_leq(a.delivery, b.delivery);
}

std::vector<Trust> all_trusts() {
  return {Trust::Untrusted, Trust::TrustFwd, Trust::TrustRpl, Trust::Trusted};
}

std::vector<Channel> all_channels() {
  std::vector<Channel> out;
  for (auto s : {Secrecy::Insecure, Secrecy::Authentic, Secrecy::Confidential, Secrecy::Secure})
    for (auto d : {Delivery::Default, Delivery::Reliable, Delivery::Undeniable}) out.push_back({s, d});
  return out;
}

std::vector<Trust> trust_lower_covers(Trust t) {
  switch (t) {
    case Trust::Trusted: return {Trust::TrustFwd, Trust::TrustRpl};
    case Trust::TrustFwd:
    case Trust::TrustRpl: return {Trust::Untrusted};
    case Trust::Untrusted: return {};
  }
  return {};
}

std::vector<Channel> chan_lower_covers(const Channel& c) {
  std::vector<Channel> out;
  switch (c.secrecy) {
    case Secrecy::Secure:
      out.push_back({Secrecy::Authentic, c.delivery});
      out.push_back({Secrecy::Confidential, c.delivery});
      break;
    case Secrecy::Authentic:
    case Secrecy::Confidential:
      out.push_back({Secrecy::Insecure, c.delivery});
      break;
    case Secrecy::Insecure:
      break;
  }
  if (c.delivery != Delivery::Default)
    out.push_back({c.secrecy, static_cast<Delivery>(static_cast<int>(c.delivery) - 1)});
  return out;
}

std::string to_string(Trust t) {
  switch (t) {
    case Trust::Untrusted: return "untrusted";
    case Trust::TrustFwd: return "trustFwd";
    case Trust::TrustRpl: return "trustRpl";
    case Trust::Trusted: return "trusted";
  }
  return "?";
}

std::string to_string(Secrecy s) {
  switch (s) {
    case Secrecy::Insecure: return "insecure";
    case Secrecy::Authentic: return "authentic";
    case Secrecy::Confidential: return "confidential";
    case Secrecy::Secure: return "secure";
  }
  return "?";
}

std::string to_string(Delivery d) {
  switch (d) {
    case Delivery::Default: return "default";
    case Delivery::Reliable: return "reliable";
    case Delivery::Undeniable: return "undeniable";
  }
  return "?";
}

std::string to_string(Role r) {
  switch (r) {
    case Role::H: return "H";
    case Role::HAbstain: return "H_abstain";
    case Role::D: return "D";
    case Role::P: return "P";
    case Role::S: return "S";
    case Role::BB: return "BB";
    case Role::A: return "A";
  }
  return "?";
}

std::string to_string(const Channel& c) { return to_string(c.secrecy) + "/" + to_string(c.delivery); }

Trust parse_trust(const std::string& s) {
  for (auto t : all_trusts())
    if (to_string(t) == s) return t;
  throw topology_error("unknown trust type '" + s + "'");
}

Secrecy parse_secrecy(const std::string& s) {
  for (auto x : {Secrecy::Insecure, Secrecy::Authentic, Secrecy::Confidential, Secrecy::Secure})
    if (to_string(x) == s) return x;
  throw topology_error("unknown secrecy '" + s + "'");
}

Delivery parse_delivery(const std::string& s) {
  for (auto x : {Delivery::Default, Delivery::Reliable, Delivery::Undeniable})
    if (to_string(x) == s) return x;
  throw topology_error("unknown delivery '" + s + "'");
}

Role parse_role(const std::string& s) {
  for (auto r : {Role::H, Role::HAbstain, Role::D, Role::P, Role::S, Role::BB, Role::A})
    if (to_string(r) == s) return r;
  throw topology_error("unknown role '" + s + "'");
}

Role graph_role(Role r) { return r == Role::HAbstain ? Role::H : r; }
bool is_voter_role(Role r) { return r == Role::H || r == Role::HAbstain; }

namespace {

bool voter_side(Role r) { return is_voter_role(r) || r == Role::D || r == Role::P; }

std::string vertex_key(const Vertex& v) {
  return to_string(graph_role(v.role)) + (v.instance > 0 ? std::to_string(v.instance) : "");
}

}  // namespace

void Topology::add_vertex(Vertex v) {
  if (vertices_.count(v.id)) throw topology_error("duplicate vertex '" + v.id + "'");
  if (v.instance == 0 && voter_side(v.role)) {
    int n = 0;
    for (const auto& [id, w] : vertices_)
      if (graph_role(w.role) == graph_role(v.role)) ++n;
    v.instance = n + 1;
  }
  vertices_.emplace(v.id, std::move(v));
}

void Topology::add_edge(const std::string& from, const std::string& to, Channel c) {
  if (!has_vertex(from) || !has_vertex(to))
    throw topology_error("edge " + from + "->" + to + " references an unknown vertex");
  edges_[{from, to}] = c;
}

void Topology::remove_edge(const std::string& from, const std::string& to) { edges_.erase({from, to}); }

void Topology::remove_vertex(const std::string& id) {
  vertices_.erase(id);
  for (auto it = edges_.begin(); it != edges_.end();) {
    if (it->first.first == id || it->first.second == id)
      it = edges_.erase(it);
    else
      ++it;
  }
  if (distinguished == id) distinguished.reset();
}

const Vertex& Topology::vertex(const std::string& id) const {
  auto it = vertices_.find(id);
  if (it == vertices_.end()) throw topology_error("unknown vertex '" + id + "'");
  return it->second;
}

Vertex& Topology::vertex(const std::string& id) {
  auto it = vertices_.find(id);
  if (it == vertices_.end()) throw topology_error("unknown vertex '" + id + "'");
  return it->second;
}

bool Topology::has_edge(const std::string& from, const std::string& to) const {
  return edges_.count({from, to}) != 0;
}

const Channel& Topology::chan(const std::string& from, const std::string& to) const {
  auto it = edges_.find({from, to});
  if (it == edges_.end()) throw topology_error("no edge " + from + "->" + to);
  return it->second;
}

Channel& Topology::chan(const std::string& from, const std::string& to) {
  auto it = edges_.find({from, to});
  if (it == edges_.end()) throw topology_error("no edge " + from + "->" + to);
  return it->second;
}

std::vector<std::string> Topology::with_role(Role r) const {
  std::vector<std::string> out;
  for (const auto& [id, v] : vertices_)
    if (v.role == r) out.push_back(id);
  return out;
}

bool operator==(const Topology& a, const Topology& b) {
  if (a.vertices_.size() != b.vertices_.size() || a.edges_ != b.edges_) return false;
  for (const auto& [id, v] : a.vertices_) {
    auto it = b.vertices_.find(id);
    if (it == b.vertices_.end() || it->second.role != v.role || it->second.trust != v.trust) return false;
  }
  return a.distinguished == b.distinguished;
}

namespace {

using RolePair = std::pair<Role, Role>;

const std::set<RolePair>& graph_s() {
  static const std::set<RolePair> g = {
      {Role::H, Role::D},  {Role::D, Role::H},  {Role::H, Role::P},  {Role::P, Role::H},
      {Role::P, Role::S},  {Role::S, Role::P},  {Role::S, Role::BB}, {Role::BB, Role::H},
      {Role::BB, Role::A}};
  return g;
}

const std::set<RolePair>& graph_u() {
  static const std::set<RolePair> g = {{Role::H, Role::D},  {Role::D, Role::H},  {Role::H, Role::S},
                                       {Role::S, Role::H},  {Role::S, Role::BB}, {Role::BB, Role::H},
                                       {Role::BB, Role::A}};
  return g;
}

bool at_least_authentic(const Channel& c) {
  return chan_leq({Secrecy::Authentic, Delivery::Default}, c);
}

}  // namespace

std::string class_violation(const Topology& t) {
  bool fits_s = true, fits_u = true;
  for (const auto& [e, c] : t.edges()) {
    RolePair rp{graph_role(t.vertex(e.first).role), graph_role(t.vertex(e.second).role)};
    fits_s = fits_s && graph_s().count(rp);
    fits_u = fits_u && graph_u().count(rp);
  }
  if (!fits_s && !fits_u) return "role graph is contained in neither G_S nor G_U";
  auto bbs = t.with_role(Role::BB);
  auto as = t.with_role(Role::A);
  auto ss = t.with_role(Role::S);
  if (bbs.size() != 1) return "exactly one BB vertex required";
  if (as.empty()) return "auditor A missing";
  if (ss.size() != 1) return "exactly one S vertex required";
  const std::string& bb = bbs[0];
  if (t.vertex(bb).trust != Trust::Trusted) return "BB must be trusted";
  for (const auto& a : as) {
    if (t.vertex(a).trust != Trust::Trusted) return "A must be trusted";
    if (!t.has_edge(bb, a) || !at_least_authentic(t.chan(bb, a)))
      return "channel BB->" + a + " must exist and be at least authentic";
  }
  if (!t.has_edge(ss[0], bb) || !at_least_authentic(t.chan(ss[0], bb)))
    return "channel S->BB must exist and be at least authentic";
  bool any_voter = false;
  for (const auto& [id, v] : t.vertices()) {
    switch (v.role) {
      case Role::H:
      case Role::HAbstain:
        any_voter = true;
        if (v.trust == Trust::Trusted) return "voter " + id + " must not be trusted";
        if (!t.has_edge(bb, id) || !at_least_authentic(t.chan(bb, id)))
          return "channel BB->" + id + " must exist and be at least authentic";
        break;
      case Role::S:
        if (v.trust == Trust::Trusted || v.trust == Trust::TrustFwd)
          return "S must be untrusted or trustRpl";
        break;
      case Role::P:
        if (v.trust == Trust::TrustRpl) return "P may only be partially trusted as trustFwd";
        break;
      default:
        break;
    }
  }
  if (!any_voter) return "no voter vertex";
  return {};
}

std::string variant_class_violation(const Topology& t) {
  Topology base = t;
  if (base.distinguished && base.has_vertex(*base.distinguished))
    base.vertex(*base.distinguished).trust = Trust::Untrusted;
  auto ss = base.with_role(Role::S);
  if (ss.size() != 1 || base.vertex(ss[0]).trust != Trust::Trusted) return class_violation(base);
  std::string why;
  for (Trust lowered : {Trust::TrustRpl, Trust::Untrusted}) {
    base.vertex(ss[0]).trust = lowered;
    why = class_violation(base);
    if (why.empty()) return why;
  }
  return why;
}

bool in_class(const Topology& t) { return class_violation(t).empty(); }

bool topo_leq(const Topology& a, const Topology& b) {
  for (const auto* t : {&a, &b}) {
    auto why = class_violation(*t);
    if (!why.empty()) throw topology_error("topology '" + t->name + "' not in class: " + why);
  }
  std::map<std::string, const Vertex*> bv;
  std::map<std::string, std::string> bid;
  for (const auto& [id, v] : b.vertices()) {
    bv[vertex_key(v)] = &v;
    bid[id] = vertex_key(v);
  }
  std::map<std::string, std::string> akey;
  for (const auto& [id, v] : a.vertices()) {
    auto k = vertex_key(v);
    auto it = bv.find(k);
    if (it == bv.end() || it->second->role != v.role) return false;
    if (!trust_leq(v.trust, it->second->trust)) return false;
    akey[id] = k;
  }
  std::map<std::pair<std::string, std::string>, Channel> be;
  for (const auto& [e, c] : b.edges()) be[{bid[e.first], bid[e.second]}] = c;
  for (const auto& [e, c] : a.edges()) {
    auto it = be.find({akey[e.first], akey[e.second]});
    if (it == be.end() || !chan_leq(c, it->second)) return false;
  }
  return true;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::SH: return "S+H+";
    case Variant::H: return "H+";
    case Variant::S: return "S+";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "shp" || s == "S+H+") return Variant::SH;
  if (s == "hp" || s == "H+") return Variant::H;
  if (s == "sp" || s == "S+") return Variant::S;
  throw topology_error("unknown variant '" + s + "'");
}

Topology variant(const Topology& t, Variant v) {
  if (!t.distinguished) throw topology_error("variant requires a distinguished voter");
  Topology out = t;
  out.name = t.name + "^" + to_string(v);
  if (v == Variant::SH || v == Variant::S)
    for (const auto& id : out.with_role(Role::S)) out.vertex(id).trust = Trust::Trusted;
  if (v == Variant::SH || v == Variant::H) out.vertex(*t.distinguished).trust = Trust::Trusted;
  return out;
}

bool timely_feasible(const Topology& t) {
  auto why = class_violation(t);
  if (!why.empty()) throw topology_error("topology '" + t.name + "' not in class: " + why);
  for (int i = 1; i <= 7; ++i)
    if (topo_leq(catalog::possibility(i), t)) return true;
  return false;
}

namespace {

// Edges whose removal would break the voter's path to S.
bool mandatory_edge(const Topology& t, const EdgeKey& e) {
  Role a = graph_role(t.vertex(e.first).role);
  Role b = graph_role(t.vertex(e.second).role);
  if (a == Role::BB || b == Role::BB) return true;
  if (a == Role::H && b == Role::P) return true;
  if (a == Role::P && b == Role::S) return true;
  if (a == Role::H && b == Role::S) return true;
  return false;
}

bool fixed_vertex(Role r) { return r == Role::BB || r == Role::A; }

}  // namespace

std::vector<Topology> minimal_weakenings(const Topology& t) {
  std::vector<Topology> out;
  auto keep = [&](Topology w) {
    if (in_class(w)) out.push_back(std::move(w));
  };
  for (const auto& [e, c] : t.edges()) {
    Role a = graph_role(t.vertex(e.first).role);
    Role b = graph_role(t.vertex(e.second).role);
    if (a == Role::BB || b == Role::BB) continue;
    for (const auto& lower : chan_lower_covers(c)) {
      Topology w = t;
      w.chan(e.first, e.second) = lower;
      w.name = t.name + "[c(" + e.first + "," + e.second + ")=" + to_string(lower) + "]";
      keep(std::move(w));
    }
    if (!mandatory_edge(t, e)) {
      Topology w = t;
      w.remove_edge(e.first, e.second);
      w.name = t.name + "[-(" + e.first + "," + e.second + ")]";
      keep(std::move(w));
    }
  }
  for (const auto& [id, v] : t.vertices()) {
    if (fixed_vertex(v.role)) continue;
    for (auto lower : trust_lower_covers(v.trust)) {
      Topology w = t;
      w.vertex(id).trust = lower;
      w.name = t.name + "[t(" + id + ")=" + to_string(lower) + "]";
      keep(std::move(w));
    }
    if (v.role == Role::D) {
      Topology w = t;
      w.remove_vertex(id);
      w.name = t.name + "[-" + id + "]";
      keep(std::move(w));
    }
  }
  return out;
}

namespace catalog {

namespace {

constexpr Channel ins(Delivery d) { return {Secrecy::Insecure, d}; }
constexpr Channel sec(Delivery d) { return {Secrecy::Secure, d}; }
constexpr Delivery kD = Delivery::Default;
constexpr Delivery kR = Delivery::Reliable;
constexpr Delivery kU = Delivery::Undeniable;

Topology skeleton(const std::string& name, bool with_platform, Trust p, Trust s) {
  Topology t;
  t.name = name;
  t.add_vertex({"H", Role::H, Trust::Untrusted, 1});
  if (with_platform) t.add_vertex({"P", Role::P, p, 1});
  t.add_vertex({"S", Role::S, s, 0});
  t.add_vertex({"BB", Role::BB, Trust::Trusted, 0});
  t.add_vertex({"A", Role::A, Trust::Trusted, 0});
  Channel auth{Secrecy::Authentic, Delivery::Default};
  t.add_edge("S", "BB", auth);
  t.add_edge("BB", "H", auth);
  t.add_edge("BB", "A", auth);
  t.distinguished = "H";
  return t;
}

void add_device(Topology& t, Delivery d) {
  t.add_vertex({"D", Role::D, Trust::Trusted, 1});
  t.add_edge("H", "D", sec(d));
  t.add_edge("D", "H", sec(d));
}

}  // namespace

Topology possibility(int i) {
  switch (i) {
    case 1: {
      auto t = skeleton("T1", true, Trust::TrustFwd, Trust::Untrusted);
      t.add_edge("H", "P", ins(kR));
      t.add_edge("P", "S", ins(kU));
      return t;
    }
    case 2: {
      auto t = skeleton("T2", true, Trust::TrustFwd, Trust::Untrusted);
      t.add_edge("H", "P", ins(kU));
      t.add_edge("P", "S", ins(kR));
      return t;
    }
    case 3: {
      auto t = skeleton("T3", true, Trust::Trusted, Trust::Untrusted);
      t.add_edge("H", "P", ins(kR));
      t.add_edge("P", "S", ins(kR));
      return t;
    }
    case 4: {
      auto t = skeleton("T4", true, Trust::TrustFwd, Trust::TrustRpl);
      t.add_edge("H", "P", ins(kR));
      t.add_edge("P", "H", ins(kR));
      t.add_edge("P", "S", ins(kR));
      t.add_edge("S", "P", ins(kR));
      return t;
    }
    case 5: {
      auto t = skeleton("T5", true, Trust::TrustFwd, Trust::TrustRpl);
      t.add_edge("H", "P", ins(kR));
      t.add_edge("P", "S", ins(kR));
      t.add_edge("S", "P", ins(kU));
      return t;
    }
    case 6: {
      auto t = skeleton("T6", false, Trust::Untrusted, Trust::Untrusted);
      t.add_edge("H", "S", ins(kU));
      return t;
    }
    case 7: {
      auto t = skeleton("T7", false, Trust::Untrusted, Trust::TrustRpl);
      t.add_edge("H", "S", ins(kR));
      t.add_edge("S", "H", ins(kR));
      return t;
    }
    default:
      throw topology_error("possibility topology index out of range: " + std::to_string(i));
  }
}

Topology impossibility(int i) {
  switch (i) {
    case 1:
    case 2:
    case 3: {
      Trust s = i == 1 ? Trust::Untrusted : Trust::TrustRpl;
      auto t = skeleton("T_I" + std::to_string(i), true, Trust::TrustFwd, s);
      add_device(t, kU);
      t.add_edge("H", "P", sec(kR));
      t.add_edge("P", "H", sec(i == 3 ? kD : kU));
      t.add_edge("P", "S", sec(kR));
      t.add_edge("S", "P", sec(i == 1 ? kU : (i == 2 ? kD : kR)));
      return t;
    }
    case 4:
    case 5: {
      Trust s = i == 4 ? Trust::Untrusted : Trust::TrustRpl;
      auto t = skeleton("T_I" + std::to_string(i), false, Trust::Untrusted, s);
      add_device(t, kU);
      t.add_edge("H", "S", sec(kR));
      t.add_edge("S", "H", sec(i == 4 ? kU : kD));
      return t;
    }
    default:
      throw topology_error("impossibility topology index out of range: " + std::to_string(i));
  }
}

Topology mixvote() {
  auto t = possibility(4);
  t.name = "T_MV";
  add_device(t, kD);
  return t;
}

std::vector<std::string> ids() {
  return {"T1", "T2", "T3", "T4", "T5", "T6", "T7", "T_I1", "T_I2", "T_I3", "T_I4", "T_I5", "T_MV"};
}

Topology by_id(const std::string& id) {
  if (id == "T_MV") return mixvote();
  if (id.size() == 2 && id[0] == 'T' && id[1] >= '1' && id[1] <= '7') return possibility(id[1] - '0');
  if (id.size() == 4 && id.rfind("T_I", 0) == 0 && id[3] >= '1' && id[3] <= '5')
    return impossibility(id[3] - '0');
  throw topology_error("unknown topology id '" + id + "'");
}

}  // namespace catalog

Topology instantiate(const Topology& base, int voters, int abstainers,
                     std::optional<int> distinguished_index) {
  if (voters < 0 || abstainers < 0 || voters + abstainers == 0)
    throw topology_error("at least one voter or abstainer required");
  int n = voters + abstainers;
  Topology out;
  out.name = base.name;
  std::map<std::string, std::vector<std::string>> copies;
  for (const auto& [id, v] : base.vertices()) {
    if (!voter_side(v.role)) {
      out.add_vertex(v);
      copies[id] = {id};
      continue;
    }
    std::string stem = to_string(graph_role(v.role));
    for (int k = 1; k <= n; ++k) {
      Vertex w = v;
      w.id = stem + std::to_string(k);
      w.instance = k;
      if (is_voter_role(v.role)) w.role = k > voters ? Role::HAbstain : Role::H;
      out.add_vertex(w);
      copies[id].push_back(w.id);
    }
  }
  for (const auto& [e, c] : base.edges()) {
    const auto& from = copies[e.first];
    const auto& to = copies[e.second];
    if (from.size() > 1 && to.size() > 1) {
      for (std::size_t k = 0; k < from.size(); ++k) out.add_edge(from[k], to[k], c);
    } else {
      for (const auto& f : from)
        for (const auto& g : to) out.add_edge(f, g, c);
    }
  }
  if (distinguished_index) {
    std::string id = "H" + std::to_string(*distinguished_index);
    if (!out.has_vertex(id)) throw topology_error("distinguished voter index out of range");
    out.distinguished = id;
  }
  return out;
}

}  // namespace drc
