// drc: command-line front end for topology decisions and bounded checks.
#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "drc/checker.hpp"
#include "drc/protocols.hpp"

using namespace drc;
using nlohmann::ordered_json;

namespace {

struct Common {
  bool json = false;
  int voters = -1;
  int abstainers = -1;
  int deduce_depth = -1;
  int injections = -1;
  int max_steps = -1;
  int workers = 1;
  int split_depth = 3;
  int distinguished = 1;
  std::string variant;
  std::string topology_file;
};

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Topology load_topology(const std::string& ref) {
  if (std::filesystem::exists(ref)) {
    std::ifstream in(ref);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw usage_error(ref + ": " + e.what());
    }
    return topology_from_json(j);
  }
  return catalog::by_id(ref);
}

// Catalog-shaped topologies (a vertex named H) are replicated per voter.
Topology prepare(const Topology& t, const Bounds& b, int distinguished) {
  if (t.has_vertex("H")) return instantiate(t, b.voters, b.abstainers, distinguished);
  return t;
}

Bounds bounds_for(const std::string& protocol, const Common& c) {
  Bounds b = default_bounds(protocol);
  if (c.voters >= 0) b.voters = c.voters;
  if (c.abstainers >= 0) b.abstainers = c.abstainers;
  if (c.deduce_depth >= 0) b.deduce_depth = c.deduce_depth;
  if (c.injections >= 0) b.injections = c.injections;
  if (c.max_steps >= 0) b.max_steps = c.max_steps;
  return b;
}

CheckOptions options(const Common& c) {
  CheckOptions o;
  o.plan.workers = c.workers;
  o.plan.split_depth = c.split_depth;
  return o;
}

std::vector<Prop> parse_props(const std::string& csv) {
  std::vector<Prop> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_prop(item));
  if (out.empty()) throw usage_error("empty property list");
  return out;
}

void print(const ordered_json& j) { std::cout << j.dump(2) << "\n"; }

void print_trace(const Trace& tr) {
  for (std::size_t i = 0; i < tr.steps.size(); ++i)
    for (const auto& s : tr.steps[i]) std::cout << "    " << i << "  " << s.str() << "\n";
}

void print_outcome(const CheckOutcome& o) {
  std::cout << "  " << o.name << " on " << o.topology << ": " << to_string(o.verdict) << " (" << o.traces
            << " traces" << (o.fired ? "" : ", antecedent never fired") << ")\n";
  if (o.trace && o.verdict == Verdict::Refuted) {
    std::cout << "  counterexample:\n";
    print_trace(*o.trace);
  }
}

void add_common(CLI::App* app, Common& c, bool with_bounds) {
  app->add_flag("--json", c.json, "Machine-readable output");
  if (!with_bounds) return;
  app->add_option("--voters", c.voters, "Voters casting a ballot")->check(CLI::NonNegativeNumber);
  app->add_option("--abstainers", c.abstainers, "Voters abstaining")->check(CLI::NonNegativeNumber);
  app->add_option("--deduce-depth", c.deduce_depth, "Adversary derivation depth")->check(CLI::NonNegativeNumber);
  app->add_option("--injections", c.injections, "Adversary injections per trace")->check(CLI::NonNegativeNumber);
  app->add_option("--max-steps", c.max_steps, "Steps per trace")->check(CLI::NonNegativeNumber);
  app->add_option("--workers", c.workers, "OpenMP workers")->check(CLI::PositiveNumber);
  app->add_option("--split-depth", c.split_depth, "Frontier depth for work partitioning")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--distinguished", c.distinguished, "Index of the distinguished voter")
      ->check(CLI::PositiveNumber);
  app->add_option("--topology-file", c.topology_file, "Topology JSON overriding the topology argument");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dispute-resolution topology and protocol checker"};
  app.require_subcommand(1);
  Common c;

  std::string a, b;
  auto* compare = app.add_subcommand("topo-compare", "Decide A ⊑ B");
  compare->add_option("a", a)->required();
  compare->add_option("b", b)->required();
  add_common(compare, c, false);

  auto* feasible = app.add_subcommand("topo-feasible", "Decide whether TimelyDR is achievable");
  feasible->add_option("topology", a)->required();
  add_common(feasible, c, false);

  auto* weaken = app.add_subcommand("topo-weaken", "List the minimal weakenings");
  weaken->add_option("topology", a)->required();
  add_common(weaken, c, false);

  std::string protocol, props, ph, ps, mode = "adversarial";
  int limit = 20;
  auto* check = app.add_subcommand("check", "Check security properties");
  check->add_option("protocol", protocol)->required();
  check->add_option("topology", a)->required();
  check->add_option("properties", props, "Comma-separated property names")->required();
  check->add_option("--variant", c.variant, "shp|hp|sp");
  add_common(check, c, true);

  auto* dr = app.add_subcommand("check-dr", "Check the dispute-resolution property");
  dr->add_option("protocol", protocol)->required();
  dr->add_option("topology", a)->required();
  dr->add_option("--ph", ph, "Voter-side properties");
  dr->add_option("--ps", ps, "Authority-side properties");
  add_common(dr, c, true);

  std::string suite;
  auto* suite_cmd = app.add_subcommand("suite", "Run a named suite");
  suite_cmd->add_option("name", suite)->required()->check(CLI::IsMember(suite_names()));
  add_common(suite_cmd, c, true);

  auto* dump = app.add_subcommand("trace-dump", "Print enumerated traces");
  dump->add_option("protocol", protocol)->required();
  dump->add_option("topology", a)->required();
  dump->add_option("--mode", mode, "adversarial|honest")->check(CLI::IsMember({"adversarial", "honest"}));
  dump->add_option("--variant", c.variant, "shp|hp|sp");
  dump->add_option("--limit", limit, "Traces to print")->check(CLI::NonNegativeNumber);
  add_common(dump, c, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (compare->parsed()) {
      auto ta = load_topology(a), tb = load_topology(b);
      bool r = topo_leq(ta, tb);
      if (c.json)
        print({{"a", ta.name}, {"b", tb.name}, {"leq", r}});
      else
        std::cout << ta.name << " ⊑ " << tb.name << ": " << (r ? "true" : "false") << "\n";
      return r ? 0 : 1;
    }
    if (feasible->parsed()) {
      auto t = load_topology(a);
      bool r = timely_feasible(t);
      if (c.json)
        print({{"topology", t.name}, {"feasible", r}});
      else
        std::cout << t.name << ": " << (r ? "feasible" : "infeasible") << "\n";
      return r ? 0 : 1;
    }
    if (weaken->parsed()) {
      auto t = load_topology(a);
      auto ws = minimal_weakenings(t);
      if (c.json) {
        ordered_json arr = ordered_json::array();
        for (const auto& w : ws) arr.push_back({{"topology", to_json(w)}, {"feasible", timely_feasible(w)}});
        print({{"topology", t.name}, {"weakenings", arr}});
      } else {
        for (const auto& w : ws) std::cout << w.name << ": " << (timely_feasible(w) ? "feasible" : "infeasible") << "\n";
      }
      return 0;
    }

    if (suite_cmd->parsed()) {
      auto r = run_suite(suite, options(c));
      if (c.json)
        print(r.report);
      else
        for (const auto& l : r.lines) std::cout << l << "\n";
      return r.pass ? 0 : 1;
    }

    auto entry = protocol_by_id(protocol.empty() ? "p1" : protocol);
    Bounds bounds = bounds_for(entry.id, c);
    Topology base = load_topology(c.topology_file.empty() ? (a.empty() ? entry.home.name : a) : c.topology_file);
    Topology topo = prepare(base, bounds, c.distinguished);
    if (!c.variant.empty()) topo = variant(topo, parse_variant(c.variant));
    auto why = variant_class_violation(topo);
    if (!why.empty()) throw topology_error("topology '" + topo.name + "' not in class: " + why);

    if (check->parsed()) {
      auto outs = check_properties(entry.spec, topo, parse_props(props), bounds, options(c));
      bool ok = std::all_of(outs.begin(), outs.end(), [](const CheckOutcome& o) { return o.holds(); });
      if (c.json) {
        ordered_json arr = ordered_json::array();
        for (const auto& o : outs) arr.push_back(to_json(o));
        print({{"protocol", entry.id}, {"bounds", to_json(bounds)}, {"holds", ok}, {"checks", arr}});
      } else {
        for (const auto& o : outs) print_outcome(o);
      }
      return ok ? 0 : 1;
    }
    if (dr->parsed()) {
      bool mix = entry.id == "MixVote";
      auto p_h = ph.empty() ? (mix ? std::vector<Prop>{Prop::VoterC, Prop::TimelyP, Prop::VoterA}
                                   : std::vector<Prop>{Prop::TimelyP})
                            : parse_props(ph);
      auto p_s = ps.empty() ? std::vector<Prop>{Prop::AuthP} : parse_props(ps);
      auto r = check_dr(entry.spec, topo, p_h, p_s, bounds, options(c));
      if (c.json) {
        print(to_json(r));
      } else {
        std::cout << r.protocol << " on " << r.topology << ": dispute resolution "
                  << (r.overall ? "holds within bounds" : "refuted") << "\n";
        for (const auto& p : r.parts) {
          std::cout << " " << p.label << ": " << (p.holds ? "ok" : "FAILED") << "\n";
          for (const auto& o : p.outcomes) print_outcome(o);
        }
      }
      return r.overall ? 0 : 1;
    }
    if (dump->parsed()) {
      Model m = make_model(entry.spec, topo, bounds);
      EnumStats st;
      auto trs = collect_traces(m, mode == "honest" ? Mode::HonestNetwork : Mode::Adversarial, &st);
      if (static_cast<int>(trs.size()) > limit) trs.resize(limit);
      if (c.json) {
        ordered_json arr = ordered_json::array();
        for (const auto& t : trs) arr.push_back(to_json(t));
        print({{"protocol", entry.id}, {"topology", topo.name}, {"stats", to_json(st)}, {"traces", arr}});
      } else {
        std::cout << st.traces << " traces, showing " << trs.size() << "\n";
        for (std::size_t i = 0; i < trs.size(); ++i) {
          std::cout << "trace " << i << ":\n";
          print_trace(trs[i]);
        }
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  return 2;
}
