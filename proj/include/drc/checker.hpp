// Bounded checks of trace properties, the four-part dispute-resolution check
// and the named suites.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drc/properties.hpp"
#include "drc/semantics.hpp"
#include "drc/topology.hpp"

namespace drc {

struct CheckOptions {
  ParallelPlan plan{};
  bool check_requirement1 = false;  // compare verdicts on tr and pubtr(tr)
};

enum class Verdict { Holds, HoldsWithinBounds, Refuted, NoWitness };
std::string to_string(Verdict v);

struct CheckOutcome {
  std::string name;
  std::string variant;  // S+H+, H+, S+ or empty
  std::string topology;
  Verdict verdict = Verdict::Holds;
  bool fired = false;  // some trace met the property's antecedent
  std::uint64_t traces = 0;
  EnumStats stats;
  std::optional<Trace> trace;  // counterexample, or witness for Func
  std::uint64_t req1_checked = 0;
  std::uint64_t req1_mismatches = 0;

  bool holds() const { return verdict == Verdict::Holds || verdict == Verdict::HoldsWithinBounds; }
};

// One enumeration, one outcome per property. The counterexample reported is
// the failing trace with the smallest key, so it does not depend on workers.
std::vector<CheckOutcome> check_properties(const ProtocolSpec& spec, const Topology& topo,
                                           const std::vector<Prop>& props, const Bounds& bounds,
                                           const CheckOptions& opts = {});
CheckOutcome check_security(const ProtocolSpec& spec, const Topology& topo, Prop prop,
                            const Bounds& bounds, const CheckOptions& opts = {});
CheckOutcome check_functional(const ProtocolSpec& spec, const Topology& topo, const Bounds& bounds);

struct DRPart {
  std::string label;
  Variant variant = Variant::SH;
  std::vector<CheckOutcome> outcomes;
  bool holds = true;
};

struct DRReport {
  std::string protocol;
  std::string topology;
  Bounds bounds;
  std::vector<DRPart> parts;  // S+H+ both, H+ voter side, S+ authority side, Func witness
  bool overall = true;
};

DRReport check_dr(const ProtocolSpec& spec, const Topology& topo, const std::vector<Prop>& p_h,
                  const std::vector<Prop>& p_s, const Bounds& bounds, const CheckOptions& opts = {});

// Pointwise Uniqueness ⇒ VoterA over every enumerated trace.
CheckOutcome check_theorem2(const ProtocolSpec& spec, const Topology& topo, const Bounds& bounds,
                            const CheckOptions& opts = {});

// ---- serialization ------------------------------------------------------------

nlohmann::ordered_json to_json(const Bounds& b);
nlohmann::ordered_json to_json(const EnumStats& s);
nlohmann::ordered_json to_json(const Signal& s);
nlohmann::ordered_json to_json(const Trace& tr);
nlohmann::ordered_json to_json(const CheckOutcome& o);
nlohmann::ordered_json to_json(const DRReport& r);
nlohmann::ordered_json to_json(const Topology& t);
Topology topology_from_json(const nlohmann::json& j);

// ---- suites -------------------------------------------------------------------

struct SuiteResult {
  std::string name;
  bool pass = true;
  std::vector<std::string> lines;  // human summary, one per item
  nlohmann::ordered_json report;
};

// Injection bound of the MixVote suites.
inline constexpr int kMixVoteInjections = 2;
// Voter-side properties checked for MixVote in S+H+ and H+.
const std::vector<Prop>& mixvote_voter_props();

std::vector<std::string> suite_names();
Bounds default_bounds(const std::string& protocol_id);
SuiteResult run_suite(const std::string& name, const CheckOptions& opts = {});

}  // namespace drc
