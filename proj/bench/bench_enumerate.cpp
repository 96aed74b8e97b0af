// Serial reference enumerator against the partitioned OpenMP one.
#include <benchmark/benchmark.h>

#include <omp.h>

#include "drc/protocols.hpp"
#include "drc/semantics.hpp"

using namespace drc;

namespace {

Model model(const std::string& id, Variant v) {
  auto e = protocol_by_id(id);
  Bounds b;
  if (e.id == "MixVote") {
    b.voters = 1;
    b.injections = 2;
  }
  return make_model(e.spec, variant(instantiate(e.home, b.voters, b.abstainers, 1), v), b);
}

void BM_Serial(benchmark::State& st, const std::string& id, Variant v) {
  Model m = model(id, v);
  for (auto _ : st) {
    std::uint64_t n = 0;
    auto stats = enumerate_traces(m, Mode::Adversarial, [&](const Trace&, const Hash128&) { ++n; });
    benchmark::DoNotOptimize(n);
    st.counters["traces"] = static_cast<double>(stats.traces);
  }
}

void BM_Partitioned(benchmark::State& st, const std::string& id, Variant v) {
  Model m = model(id, v);
  ParallelPlan plan{static_cast<int>(st.range(0)), omp_get_max_threads()};
  for (auto _ : st) {
    std::vector<std::uint64_t> counts;
    EnumStats stats;
    std::size_t parts = enumerate_partitioned(
        m, Mode::Adversarial, plan,
        [&](std::size_t i) -> TraceVisitor { return [&, i](const Trace&, const Hash128&) { ++counts[i]; }; },
        [&](std::size_t n) { counts.assign(n, 0); }, &stats);
    benchmark::DoNotOptimize(counts.data());
    st.counters["subtrees"] = static_cast<double>(parts);
    st.counters["workers"] = plan.workers;
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_Serial, P5_H, std::string("p5"), Variant::H)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Partitioned, P5_H, std::string("p5"), Variant::H)
    ->Arg(2)
    ->Arg(4)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Serial, MixVote_SH, std::string("mixvote"), Variant::SH)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Partitioned, MixVote_SH, std::string("mixvote"), Variant::SH)
    ->Arg(3)
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
