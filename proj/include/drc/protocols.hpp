// Built-in protocols: the seven minimal possibility protocols and MixVote.
#pragma once

#include <string>
#include <vector>

#include "drc/properties.hpp"
#include "drc/semantics.hpp"
#include "drc/topology.hpp"

namespace drc {

struct ProtocolEntry {
  std::string id;
  ProtocolSpec spec;
  Topology home;
};

// i in 1..7; ballot ⟨v,H⟩ with one voter.
ProtocolEntry build_simple(int i);
ProtocolEntry build_mixvote();

// p1..p7, mixvote (case-insensitive).
ProtocolEntry protocol_by_id(const std::string& id);
std::vector<std::string> protocol_ids();

// All sub-multisets of `base` with at most `bound` elements, as list terms.
std::vector<Term> sub_multisets(std::vector<Term> base, int bound);

// Deterministic key material used by the built-in setups.
Term server_key();
Term platform_key();
Term device_key(int instance);

}  // namespace drc
