// Communication topologies, their partial orders and the feasibility decision.
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace drc {

enum class Trust { Untrusted, TrustFwd, TrustRpl, Trusted };
enum class Secrecy { Insecure, Authentic, Confidential, Secure };
enum class Delivery { Default, Reliable, Undeniable };
enum class Role { H, HAbstain, D, P, S, BB, A };

struct Channel {
  Secrecy secrecy = Secrecy::Insecure;
  Delivery delivery = Delivery::Default;
  friend bool operator==(const Channel&, const Channel&) = default;
};

bool trust_leq(Trust a, Trust b);
bool secrecy_leq(Secrecy a, Secrecy b);
bool delivery_leq(Delivery a, Delivery b);
bool chan_leq(const Channel& a, const Channel& b);

std::vector<Trust> all_trusts();
std::vector<Channel> all_channels();
// Immediate predecessors in the respective lattice.
std::vector<Trust> trust_lower_covers(Trust t);
std::vector<Channel> chan_lower_covers(const Channel& c);

std::string to_string(Trust t);
std::string to_string(Secrecy s);
std::string to_string(Delivery d);
std::string to_string(Role r);
std::string to_string(const Channel& c);
Trust parse_trust(const std::string& s);
Secrecy parse_secrecy(const std::string& s);
Delivery parse_delivery(const std::string& s);
Role parse_role(const std::string& s);

// H_abstain occupies the position of H in the role graph.
Role graph_role(Role r);
bool is_voter_role(Role r);

struct Vertex {
  std::string id;
  Role role = Role::H;
  Trust trust = Trust::Untrusted;
  int instance = 0;  // 0 for shared roles, k for the k-th voter-side instance
};

using EdgeKey = std::pair<std::string, std::string>;

class topology_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Topology {
 public:
  std::string name;
  std::optional<std::string> distinguished;

  void add_vertex(Vertex v);
  void add_edge(const std::string& from, const std::string& to, Channel c);
  void remove_edge(const std::string& from, const std::string& to);
  void remove_vertex(const std::string& id);

  const std::map<std::string, Vertex>& vertices() const { return vertices_; }
  const std::map<EdgeKey, Channel>& edges() const { return edges_; }
  const Vertex& vertex(const std::string& id) const;
  Vertex& vertex(const std::string& id);
  bool has_vertex(const std::string& id) const { return vertices_.count(id) != 0; }
  bool has_edge(const std::string& from, const std::string& to) const;
  const Channel& chan(const std::string& from, const std::string& to) const;
  Channel& chan(const std::string& from, const std::string& to);
  std::vector<std::string> with_role(Role r) const;

  friend bool operator==(const Topology& a, const Topology& b);

 private:
  std::map<std::string, Vertex> vertices_;
  std::map<EdgeKey, Channel> edges_;
};

// Reason for class failure, empty when t is in the class.
std::string class_violation(const Topology& t);
bool in_class(const Topology& t);
// Class check for S+H+, H+ and S+ variants: the distinguished voter and S are
// compared at the trust the variant raised them from.
std::string variant_class_violation(const Topology& t);

bool topo_leq(const Topology& a, const Topology& b);

enum class Variant { SH, H, S };  // S+H+, H+, S+
std::string to_string(Variant v);
Variant parse_variant(const std::string& s);  // shp|hp|sp or S+H+|H+|S+
Topology variant(const Topology& t, Variant v);

bool timely_feasible(const Topology& t);
std::vector<Topology> minimal_weakenings(const Topology& t);

namespace catalog {
Topology possibility(int i);     // T1..T7
Topology impossibility(int i);   // T_I1..T_I5
Topology mixvote();              // T_MV
std::vector<std::string> ids();  // all 13 catalog ids
Topology by_id(const std::string& id);
}  // namespace catalog

// Replicates the voter-side roles (H, D, P) per voter and adds abstainers.
// Catalog vertex ids H, D, P become H1.., D1.., P1..; abstainers follow the voters.
Topology instantiate(const Topology& base, int voters, int abstainers,
                     std::optional<int> distinguished_index = 1);

}  // namespace drc
