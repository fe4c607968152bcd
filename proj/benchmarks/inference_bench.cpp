#include <benchmark/benchmark.h>

#include <vector>

#include "softq/confidence.hpp"
#include "softq/dataset.hpp"
#include "softq/error.hpp"
#include "softq/inference.hpp"
#include "softq/oracle.hpp"
#include "softq/synthetic.hpp"

namespace {

struct Workload {
  softq::UncertainKG kg;
  std::vector<softq::SoftQuery> queries;
};

// Template queries of one type over a random KG with `entities` entities.
Workload make_workload(std::size_t entities, softq::QueryType type) {
  softq::SyntheticKGConfig kc;
  kc.entities = entities;
  kc.relations = 4;
  kc.train_facts = 4 * entities;
  kc.seed = 31;
  Workload w{softq::random_kg(kc), {}};
  softq::Rng rng(32);
  softq::SyntheticQueryConfig qc;
  for (int attempts = 0; w.queries.size() < 16 && attempts < 1000; ++attempts) {
    try {
      w.queries.push_back(softq::random_template_query(w.kg, type, qc, rng));
    } catch (const softq::Error&) {
    }
  }
  return w;
}

template <bool kOracle>
void answer(benchmark::State& state, softq::QueryType type) {
  const auto w = make_workload(static_cast<std::size_t>(state.range(0)), type);
  const auto backend = softq::lookup_backend(w.kg, softq::Split::kTrain);
  const softq::InferenceContext ctx(backend);
  for (auto _ : state) {
    for (const auto& q : w.queries) {
      if constexpr (kOracle) {
        benchmark::DoNotOptimize(softq::brute_force_utility(q, backend));
      } else {
        benchmark::DoNotOptimize(softq::answer_query(q, ctx));
      }
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.queries.size()));
}

void BM_Src2P(benchmark::State& s) { answer<false>(s, softq::QueryType::k2P); }
void BM_Oracle2P(benchmark::State& s) { answer<true>(s, softq::QueryType::k2P); }
void BM_SrcIP(benchmark::State& s) { answer<false>(s, softq::QueryType::kIP); }
void BM_OracleIP(benchmark::State& s) { answer<true>(s, softq::QueryType::kIP); }
void BM_SrcIM(benchmark::State& s) { answer<false>(s, softq::QueryType::kIM); }
void BM_OracleIM(benchmark::State& s) { answer<true>(s, softq::QueryType::kIM); }

}  // namespace

BENCHMARK(BM_Src2P)->Arg(32)->Arg(128)->Arg(512);
BENCHMARK(BM_Oracle2P)->Arg(32)->Arg(128);
BENCHMARK(BM_SrcIP)->Arg(32)->Arg(128)->Arg(512);
BENCHMARK(BM_OracleIP)->Arg(32)->Arg(128);
BENCHMARK(BM_SrcIM)->Arg(32)->Arg(128)->Arg(512);
BENCHMARK(BM_OracleIM)->Arg(32)->Arg(128);
