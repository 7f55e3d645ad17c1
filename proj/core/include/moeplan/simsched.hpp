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
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "moeplan/commcost.hpp"
#include "moeplan/config.hpp"
#include "moeplan/memmodel.hpp"
#include "moeplan/plan_types.hpp"
#include "moeplan/routing.hpp"

namespace moeplan::simsched {

enum class OpKind {
    gemm,
    grouped_gemm,
    attention_core,
    norm,
    swiglu,
    router,
    scatter,
    gather,
    weighted_sum,
    collective,
    fused,
};

enum class StreamClass { compute, comm_intra, comm_inter };
enum class Phase { forward, backward };

const char* op_kind_name(OpKind k);

struct OpNode {
    int id = 0;
    OpKind kind = OpKind::gemm;
    std::string name;
    double flops = 0.0;
    double bytes_moved = 0.0;          // memory-bound kinds
    commcost::CommVolume volume;       // collective kinds
    long long participants = 1;        // collective kinds
    bool is_remat = false;             // rematerialization node (backward only)
    std::vector<int> deps;
    StreamClass stream = StreamClass::compute;
    double cost = 0.0;                 // seconds, filled by cost_graph
    bool consumed = false;             // absorbed into a fused node
    long long token_rows = 0;          // rows processed (tiling granularity)
};

struct OpGraph {
    Phase phase = Phase::forward;
    ParallelismPlan plan;
    std::vector<OpNode> nodes;

    int add(OpNode node);
    const OpNode& at(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
    std::size_t live_count() const;
    std::vector<int> count_by_kind(OpKind kind) const;
};

// Per-kind utilization factors for the analytic operator cost model.
// Defaults are deliberately uncalibrated desk-scale estimates.
struct EfficiencyTable {
    double gemm = 0.75;
    double grouped_gemm = 0.65;
    double attention_core = 0.6;
    double memory_bound = 0.8;  // norm, swiglu, router, scatter, gather, weighted_sum

    double for_kind(OpKind kind) const;
};

// Forward operator DAG for one MoE layer under the plan's strategies.
OpGraph build_layer_graph(const ParallelismPlan& plan, const ModelConfig& model,
                          const PrecisionConfig& precision);

// Backward DAG: mirrored collectives, monolithic dgrad+wgrad compute nodes
// at 2x forward cost, plus (when enabled) three rematerialization nodes
// for the FFN block: re-run RMSNorm, re-all-gather ffn_in, and re-apply
// SwiGLU to the retained fc1_out. Remat nodes carry no dependency on the
// incoming gradient chain, so the scheduler may hide them under gradient
// communication.
OpGraph build_backward_graph(const ParallelismPlan& plan, const ModelConfig& model,
                             const PrecisionConfig& precision,
                             const memmodel::RematPolicy& remat);

double op_time(const OpNode& node, const ClusterConfig& cluster,
               const EfficiencyTable& eff, const commcost::LinkModel& link);

void cost_graph(OpGraph& g, const ClusterConfig& cluster, const EfficiencyTable& eff,
                const commcost::LinkModel& link);

enum class ScheduleMode { serial, inter_op };

struct TimelineEvent {
    int node = 0;
    std::string name;
    double start = 0.0;
    double end = 0.0;
    StreamClass resource = StreamClass::compute;
};

struct Timeline {
    std::vector<TimelineEvent> events;
    double makespan = 0.0;
    double exposed_comm = 0.0;   // makespan minus busy compute, >= 0
    double busy_compute = 0.0;
};

// serial: one resource, topological order. inter_op: list scheduling over
// three resources (compute / intra comm / inter comm), priority = longest
// remaining critical path, ties broken by node id.
Timeline schedule(const OpGraph& g, ScheduleMode mode);

// Post-hoc validation used by tests and the trace exporter: events must
// not overlap per resource and must respect dependencies.
void validate_timeline(const OpGraph& g, const Timeline& t);

enum class OrderPolicy { natural, swizzle };

struct FusedPair {
    int comm_node = -1;
    int compute_node = -1;
    std::vector<int> absorbed;        // scatter/gather between the two, if any
    long long sm_for_comm = 16;       // c, all-to-all paths only
    long long tiles = 1;
    OrderPolicy order = OrderPolicy::natural;
    std::optional<routing::TileLayout> layout;  // per-tile dependent-rank sets
};

// Tile-pipelined execution time of a fused communication+computation pair.
// All-to-all paths steal c SMs from compute (compute scales by S/(S-c))
// and move data at a c/16 share of link bandwidth (16 SMs saturate the
// link); AG/RS paths ride the copy engines at full bandwidth with no
// compute scaling. Tiles become ready as their source data arrives; with
// a TileLayout, tile t is ready once every rank in its dependency set has
// streamed in. swizzle processes tiles in arrival order; natural keeps
// the layout order. The result is never worse than the unfused pair (the
// runtime falls back to the unfused kernels otherwise).
double fused_overlap_time(const OpGraph& g, const FusedPair& pair,
                          const ClusterConfig& cluster);

// Finds the four fusible patterns of the layer graph: A2A+GEMM, GEMM+A2A,
// AG+scatter+GroupedGEMM, GroupedGEMM+gather+RS.
std::vector<FusedPair> default_fusions(const OpGraph& g);

// default_fusions restricted to pairs whose fused time strictly beats the
// unfused kernels. A pair at the fallback cap gains nothing and would only
// serialize communication onto the compute stream, which can cost overlap
// elsewhere in the graph (e.g. hidden rematerialization).
std::vector<FusedPair> beneficial_fusions(const OpGraph& g, const ClusterConfig& cluster);

// Greedy schedule-aware selection: accepts a candidate pair only when
// applying it does not increase the inter-op makespan of the whole graph
// (a pair with a small local gain can still lose more overlap elsewhere).
// The selected set therefore never schedules worse than the unfused graph.
std::vector<FusedPair> select_fusions(const OpGraph& g, std::vector<FusedPair> candidates,
                                      const ClusterConfig& cluster);
std::vector<FusedPair> select_fusions(const OpGraph& g, const ClusterConfig& cluster);

// Searches c in [1, S-1] minimizing the fused time of each pair.
void tune_sm_allocation(const OpGraph& g, std::vector<FusedPair>& fusions,
                        const ClusterConfig& cluster);

// Replaces each (comm, compute) pair with one fused node costed by
// fused_overlap_time. Errors on pattern mismatch, non-adjacent nodes, or
// nodes already consumed by an earlier fusion.
OpGraph apply_intra_op(const OpGraph& g, const std::vector<FusedPair>& fusions,
                       const ClusterConfig& cluster);

// Closed-form interleaved 1F1B iteration time. per_mb_fwd/bwd are the
// per-micro-batch times of one device's full stage (all its layers);
// each of the vpp virtual stages takes 1/vpp of that.
//   iteration = microbatches*(f+w) + (pp-1)*(f+w)/vpp + dp_sync
// vpp > 1 requires microbatches divisible by pp (interleaving constraint).
double pipeline_iteration_time(double per_mb_fwd, double per_mb_bwd, long long pp,
                               long long vpp, long long microbatches, double dp_sync);

double mfu(double iteration_time, const ModelConfig& model, const ClusterConfig& cluster,
           long long total_gpus, const PrecisionConfig& precision);

// Per-layer and per-iteration summary used by the planner and CLI.
struct LayerSim {
    double fwd_serial = 0.0;
    double fwd = 0.0;           // chosen mode
    double bwd = 0.0;
    double fwd_exposed_comm = 0.0;
    double bwd_exposed_comm = 0.0;
};

struct SimOptions {
    ScheduleMode mode = ScheduleMode::inter_op;
    bool remat = true;
    bool fuse = false;
    bool tune_sms = false;
};

LayerSim simulate_layer(const ParallelismPlan& plan, const ModelConfig& model,
                        const ClusterConfig& cluster, const PrecisionConfig& precision,
                        const SimOptions& options);

struct IterationSim {
    LayerSim layer;
    double per_mb_fwd = 0.0;
    double per_mb_bwd = 0.0;
    double dp_sync = 0.0;
    double iteration_time = 0.0;
    double mfu = 0.0;
};

IterationSim simulate_iteration(const ParallelismPlan& plan, const Config& config,
                                const SimOptions& options);

// Chrome trace-event JSON (schema_version 1): one complete event per
// timeline entry, one lane per resource class.
nlohmann::json trace_events_json(const OpGraph& g, const Timeline& t);

}  // namespace moeplan::simsched
