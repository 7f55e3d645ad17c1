/*
 Copyright 2026 The MoEPlan Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

     http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "moeplan/commcost.hpp"
#include "moeplan/config.hpp"
#include "moeplan/numerics.hpp"
#include "moeplan/planner.hpp"
#include "moeplan/routing.hpp"
#include "moeplan/simsched.hpp"

namespace {

using namespace moeplan;

ModelConfig mixtral() {
    ModelConfig m;
    m.name = "mixtral-8x7b";
    m.num_layers = 32;
    m.hidden_size = 4096;
    m.num_heads = 32;
    m.query_kv_ratio = 4;
    m.ffn_hidden_size = 14336;
    m.num_experts = 8;
    m.top_k = 2;
    m.vocab_size = 32000;
    m.seq_len = 4096;
    m.micro_batch = 1;
    m.global_batch = 512;
    return m;
}

Config base_config() {
    Config c;
    c.model = mixtral();
    c.cluster.name = "h800";
    c.cluster.num_nodes = 8;
    c.job.microbatches = 8;
    c.job.zero_stage = 1;
    return c;
}

ParallelismPlan sp_ep_plan() {
    ParallelismPlan p;
    p.attn = AttnStrategy::sp;
    p.ffn = FfnStrategy::ep;
    p.ep_pattern = commcost::EpPattern::ag_rs;
    p.n = 8;
    p.pp = 1;
    p.dp = 8;
    p.zero_stage = 1;
    return p;
}

void BM_VolumeFormulas(benchmark::State& state) {
    long long n = 2;
    for (auto _ : state) {
        benchmark::DoNotOptimize(commcost::attention_sp_volume(1, 4096, 4096, n, 4));
        benchmark::DoNotOptimize(commcost::ffn_ep_volume(1, 4096, 4096, n, 2));
        n = n == 64 ? 2 : n * 2;
    }
}
BENCHMARK(BM_VolumeFormulas);

void BM_BuildAndCostLayerGraph(benchmark::State& state) {
    const Config c = base_config();
    const auto plan = sp_ep_plan();
    const auto link = commcost::LinkModel::from_cluster(c.cluster);
    const simsched::EfficiencyTable eff;
    for (auto _ : state) {
        auto g = simsched::build_layer_graph(plan, c.model, c.precision);
        simsched::cost_graph(g, c.cluster, eff, link);
        benchmark::DoNotOptimize(g.nodes.size());
    }
}
BENCHMARK(BM_BuildAndCostLayerGraph);

void BM_InterOpSchedule(benchmark::State& state) {
    const Config c = base_config();
    const auto plan = sp_ep_plan();
    const auto link = commcost::LinkModel::from_cluster(c.cluster);
    const simsched::EfficiencyTable eff;
    auto g = simsched::build_layer_graph(plan, c.model, c.precision);
    simsched::cost_graph(g, c.cluster, eff, link);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            simsched::schedule(g, simsched::ScheduleMode::inter_op).makespan);
    }
}
BENCHMARK(BM_InterOpSchedule);

void BM_SimulateIteration(benchmark::State& state) {
    const Config c = base_config();
    const auto plan = sp_ep_plan();
    simsched::SimOptions opts;
    opts.fuse = true;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            simsched::simulate_iteration(plan, c, opts).iteration_time);
    }
}
BENCHMARK(BM_SimulateIteration);

void BM_EnumeratePlans(benchmark::State& state) {
    const Config c = base_config();
    for (auto _ : state) {
        benchmark::DoNotOptimize(planner::enumerate_plans(c, 8, 1, 1, 8).size());
    }
}
BENCHMARK(BM_EnumeratePlans);

void BM_RoutingAndScatterMap(benchmark::State& state) {
    routing::RoutingSpec spec;
    spec.mode = routing::RoutingMode::random;
    spec.seed = 42;
    const long long tokens = state.range(0);
    for (auto _ : state) {
        const auto a = routing::simulate_routing(tokens, 8, 2, spec, 1.0, 8);
        const auto map = routing::build_scatter_map(a, 8, 0);
        benchmark::DoNotOptimize(routing::sort_tokens_for_tiles(map, a, 128).tiles.size());
    }
}
BENCHMARK(BM_RoutingAndScatterMap)->Arg(4096)->Arg(16384);

void BM_QuantizePerToken(benchmark::State& state) {
    const long long rows = 256;
    const long long cols = 1024;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(rows * cols));
    for (double& v : x) v = dist(rng);
    numerics::QuantScheme scheme;
    scheme.granularity = numerics::Granularity::per_token;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            numerics::quantize(x, rows, cols, scheme, Format::fp8_e4m3).codes.size());
    }
    state.SetItemsProcessed(state.iterations() * rows * cols);
}
BENCHMARK(BM_QuantizePerToken);

void BM_EmulateRingReduce(benchmark::State& state) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<std::vector<double>> v(16, std::vector<double>(4096));
    for (auto& rank : v) {
        for (double& e : rank) e = dist(rng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            numerics::emulate_reduce(v, numerics::ReduceKind::ring_bf16).size());
    }
}
BENCHMARK(BM_EmulateRingReduce);

}  // namespace

BENCHMARK_MAIN();
