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
#include <stdexcept>

#include "moeplan/simsched.hpp"

namespace moeplan::simsched {

using commcost::Collective;
using commcost::Tier;

const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::gemm: return "gemm";
        case OpKind::grouped_gemm: return "grouped_gemm";
        case OpKind::attention_core: return "attention_core";
        case OpKind::norm: return "norm";
        case OpKind::swiglu: return "swiglu";
        case OpKind::router: return "router";
        case OpKind::scatter: return "scatter";
        case OpKind::gather: return "gather";
        case OpKind::weighted_sum: return "weighted_sum";
        case OpKind::collective: return "collective";
        case OpKind::fused: return "fused";
    }
    return "?";
}

int OpGraph::add(OpNode node) {
    node.id = static_cast<int>(nodes.size());
    nodes.push_back(std::move(node));
    return nodes.back().id;
}

std::size_t OpGraph::live_count() const {
    std::size_t count = 0;
    for (const OpNode& n : nodes) {
        if (!n.consumed) count++;
    }
    return count;
}

std::vector<int> OpGraph::count_by_kind(OpKind kind) const {
    std::vector<int> ids;
    for (const OpNode& n : nodes) {
        if (!n.consumed && n.kind == kind) ids.push_back(n.id);
    }
    return ids;
}

double EfficiencyTable::for_kind(OpKind kind) const {
    double e = 0.0;
    switch (kind) {
        case OpKind::gemm: e = gemm; break;
        case OpKind::grouped_gemm: e = grouped_gemm; break;
        case OpKind::attention_core: e = attention_core; break;
        case OpKind::norm:
        case OpKind::swiglu:
        case OpKind::router:
        case OpKind::scatter:
        case OpKind::gather:
        case OpKind::weighted_sum: e = memory_bound; break;
        case OpKind::collective:
        case OpKind::fused: e = 1.0; break;
    }
    if (e <= 0.0 || e > 1.0) {
        throw std::runtime_error(std::string("efficiency entry for ") + op_kind_name(kind) +
                                 " must lie in (0, 1]");
    }
    return e;
}

namespace {

// Incremental chain builder: each chained node depends on the previous one.
struct ChainBuilder {
    OpGraph& g;
    int prev = -1;
    double cost_scale = 1.0;  // 2x in backward (dgrad + wgrad convention)

    int chain(OpNode node) {
        node.flops *= cost_scale;
        node.bytes_moved *= cost_scale;
        if (prev >= 0) node.deps.push_back(prev);
        prev = g.add(std::move(node));
        return prev;
    }

    // Adds without attaching to the chain.
    int free_node(OpNode node) { return g.add(std::move(node)); }
};

struct LayerGeometry {
    long long b, s, h, n, m, k, h_ffn, num_experts;
    int act_bpe;   // compute-format bytes per activation element
    int comm_bpe;  // tp_comm_format bytes on the wire

    double attn_rows() const {
        return static_cast<double>(b) * static_cast<double>(s) / static_cast<double>(n);
    }
    double expert_rows() const { return attn_rows() * static_cast<double>(k); }
};

LayerGeometry geometry(const ParallelismPlan& plan, const ModelConfig& model,
                       const PrecisionConfig& precision) {
    return LayerGeometry{model.micro_batch, model.seq_len,     model.hidden_size,
                         plan.n,            model.query_kv_ratio, model.top_k,
                         model.ffn_hidden_size, model.num_experts,
                         bytes_per_element(precision.compute_format),
                         bytes_per_element(precision.tp_comm_format)};
}

OpNode compute_node(OpKind kind, std::string name, double flops, double rows) {
    OpNode n;
    n.kind = kind;
    n.name = std::move(name);
    n.flops = flops;
    n.token_rows = static_cast<long long>(rows);
    n.stream = StreamClass::compute;
    return n;
}

OpNode memory_node(OpKind kind, std::string name, double bytes, double rows) {
    OpNode n;
    n.kind = kind;
    n.name = std::move(name);
    n.bytes_moved = bytes;
    n.token_rows = static_cast<long long>(rows);
    n.stream = StreamClass::compute;
    return n;
}

OpNode collective_node(std::string name, Collective coll, const Rat& payload_elements,
                       long long participants, int bpe) {
    OpNode n;
    n.kind = OpKind::collective;
    n.name = std::move(name);
    n.volume = commcost::make_volume(payload_elements, bpe, Tier::intra, coll);
    n.participants = participants;
    n.stream = StreamClass::comm_intra;
    return n;
}

// Appends the attention block to the chain. In backward order the same
// node sequence is emitted reversed by the caller via `reverse`.
void add_attention(ChainBuilder& cb, const LayerGeometry& geo, const ParallelismPlan& plan,
                   bool backward) {
    const double h = static_cast<double>(geo.h);
    const double rows = geo.attn_rows();
    const double qkv_width = h * (1.0 + 2.0 / static_cast<double>(geo.m));
    const double qkv_flops = 2.0 * rows * h * qkv_width;
    const double out_flops = 2.0 * rows * h * h;
    const double core_flops = 2.0 * static_cast<double>(geo.b) *
                              static_cast<double>(geo.s) * static_cast<double>(geo.s) * h /
                              static_cast<double>(geo.n);
    const bool comm = geo.n > 1;
    const char* suffix = backward ? "_bwd" : "";

    // Payloads are normalized so the totals across the block's collectives
    // reproduce the closed-form volumes in commcost.
    const Rat a2a_qkv_payload =
        rat(2) * geo.b * geo.s * geo.h * (rat(1) + rat(2, geo.m)) / geo.n;
    const Rat a2a_out_payload = rat(2) * geo.b * geo.s * rat(geo.h, geo.n);
    const Rat full_payload = rat(geo.b) * geo.s * geo.h;
    const Rat kv_payload = rat(geo.b) * geo.s * rat(geo.h, geo.m);

    struct Step {
        OpNode node;
    };
    std::vector<OpNode> steps;
    auto push = [&](OpNode n) { steps.push_back(std::move(n)); };

    push(memory_node(OpKind::norm, std::string("attn_norm") + suffix,
                     2.0 * rows * h * geo.act_bpe, rows));
    switch (plan.attn) {
        case AttnStrategy::sp:
            push(compute_node(OpKind::gemm, std::string("qkv_proj") + suffix, qkv_flops, rows));
            if (comm)
                push(collective_node(std::string("a2a_qkv") + suffix, Collective::all_to_all,
                                     a2a_qkv_payload, geo.n, geo.comm_bpe));
            push(compute_node(OpKind::attention_core, std::string("attention") + suffix,
                              core_flops, rows));
            if (comm)
                push(collective_node(std::string("a2a_attn_out") + suffix,
                                     Collective::all_to_all, a2a_out_payload, geo.n,
                                     geo.comm_bpe));
            push(compute_node(OpKind::gemm, std::string("out_proj") + suffix, out_flops, rows));
            break;
        case AttnStrategy::tp:
            if (comm)
                push(collective_node(std::string("ag_attn_in") + suffix, Collective::all_gather,
                                     full_payload, geo.n, geo.comm_bpe));
            push(compute_node(OpKind::gemm, std::string("qkv_proj") + suffix, qkv_flops, rows));
            push(compute_node(OpKind::attention_core, std::string("attention") + suffix,
                              core_flops, rows));
            push(compute_node(OpKind::gemm, std::string("out_proj") + suffix, out_flops, rows));
            if (comm)
                push(collective_node(std::string("rs_attn_out") + suffix,
                                     Collective::reduce_scatter, full_payload, geo.n,
                                     geo.comm_bpe));
            break;
        case AttnStrategy::cp: {
            // Volume estimate only: K and V all-gathered across ranks.
            // Contiguous sequence blocks leave the causal attention core
            // imbalanced; the last rank holds the step at (2n-1)/n of the
            // balanced share.
            const double imbalance =
                comm ? static_cast<double>(2 * geo.n - 1) / static_cast<double>(geo.n) : 1.0;
            push(compute_node(OpKind::gemm, std::string("qkv_proj") + suffix, qkv_flops, rows));
            if (comm) {
                push(collective_node(std::string("ag_k") + suffix, Collective::all_gather,
                                     kv_payload, geo.n, geo.comm_bpe));
                push(collective_node(std::string("ag_v") + suffix, Collective::all_gather,
                                     kv_payload, geo.n, geo.comm_bpe));
            }
            push(compute_node(OpKind::attention_core, std::string("attention") + suffix,
                              core_flops * imbalance, rows));
            if (backward && comm) {
                // The gathered K/V are not retained; the gradient pass
                // gathers them again before the attention core.
                push(collective_node("ag_k_regather", Collective::all_gather, kv_payload,
                                     geo.n, geo.comm_bpe));
                push(collective_node("ag_v_regather", Collective::all_gather, kv_payload,
                                     geo.n, geo.comm_bpe));
            }
            push(compute_node(OpKind::gemm, std::string("out_proj") + suffix, out_flops, rows));
            break;
        }
        case AttnStrategy::dp:
            throw std::runtime_error(
                "attention DP is enumerated only to be rejected; no operator graph exists");
    }

    if (backward) {
        for (auto it = steps.rbegin(); it != steps.rend(); ++it) cb.chain(std::move(*it));
    } else {
        for (auto& s : steps) cb.chain(std::move(s));
    }
}

void add_ffn_forward_steps(std::vector<OpNode>& steps, const LayerGeometry& geo,
                           const ParallelismPlan& plan) {
    const double h = static_cast<double>(geo.h);
    const double h_ffn = static_cast<double>(geo.h_ffn);
    const double rows = geo.attn_rows();
    const double erows = geo.expert_rows();
    const double fc1_flops = 2.0 * erows * h * 2.0 * h_ffn;  // gate + up projections
    const double fc2_flops = 2.0 * erows * h_ffn * h;
    const bool comm = geo.n > 1;

    const Rat full_payload = rat(geo.b) * geo.s * geo.h;
    const Rat a2a_payload = rat(geo.k, geo.n) * geo.b * geo.s * geo.h;

    steps.push_back(memory_node(OpKind::norm, "ffn_norm", 2.0 * rows * h * geo.act_bpe, rows));
    steps.push_back(memory_node(OpKind::router, "router",
                                rows * (h + static_cast<double>(geo.num_experts)) *
                                    geo.act_bpe,
                                rows));

    const bool a2a_pattern =
        plan.ffn == FfnStrategy::ep && plan.ep_pattern == commcost::EpPattern::a2a;
    if (a2a_pattern) {
        steps.push_back(
            memory_node(OpKind::scatter, "scatter", 2.0 * erows * h * geo.act_bpe, erows));
        if (comm)
            steps.push_back(collective_node("a2a_dispatch", Collective::all_to_all,
                                            a2a_payload, geo.n, geo.comm_bpe));
    } else {
        if (comm)
            steps.push_back(collective_node("ag_ffn_in", Collective::all_gather, full_payload,
                                            geo.n, geo.comm_bpe));
        steps.push_back(
            memory_node(OpKind::scatter, "scatter", 2.0 * erows * h * geo.act_bpe, erows));
    }

    steps.push_back(compute_node(OpKind::grouped_gemm, "fc1", fc1_flops, erows));
    steps.push_back(
        memory_node(OpKind::swiglu, "swiglu", 3.0 * erows * h_ffn * geo.act_bpe, erows));
    // Gating weights applied right after SwiGLU so fc2 output needs no
    // separate weighted-sum buffer.
    steps.push_back(memory_node(OpKind::weighted_sum, "weighted_sum",
                                2.0 * erows * h_ffn * geo.act_bpe, erows));
    steps.push_back(compute_node(OpKind::grouped_gemm, "fc2", fc2_flops, erows));

    if (a2a_pattern) {
        if (comm)
            steps.push_back(collective_node("a2a_combine", Collective::all_to_all, a2a_payload,
                                            geo.n, geo.comm_bpe));
        steps.push_back(
            memory_node(OpKind::gather, "gather", 2.0 * erows * h * geo.act_bpe, erows));
    } else {
        steps.push_back(
            memory_node(OpKind::gather, "gather", 2.0 * erows * h * geo.act_bpe, erows));
        if (comm)
            steps.push_back(collective_node("rs_ffn_out", Collective::reduce_scatter,
                                            full_payload, geo.n, geo.comm_bpe));
    }
}

}  // namespace

OpGraph build_layer_graph(const ParallelismPlan& plan, const ModelConfig& model,
                          const PrecisionConfig& precision) {
    model.validate();
    if (plan.ffn == FfnStrategy::ep && model.num_experts % plan.n != 0) {
        throw std::runtime_error("EP requires num_experts divisible by n");
    }
    OpGraph g;
    g.phase = Phase::forward;
    g.plan = plan;
    const LayerGeometry geo = geometry(plan, model, precision);
    ChainBuilder cb{g};
    add_attention(cb, geo, plan, /*backward=*/false);
    std::vector<OpNode> ffn;
    add_ffn_forward_steps(ffn, geo, plan);
    for (auto& s : ffn) cb.chain(std::move(s));
    return g;
}

OpGraph build_backward_graph(const ParallelismPlan& plan, const ModelConfig& model,
                             const PrecisionConfig& precision,
                             const memmodel::RematPolicy& remat) {
    model.validate();
    OpGraph g;
    g.phase = Phase::backward;
    g.plan = plan;
    const LayerGeometry geo = geometry(plan, model, precision);

    // Backward = forward reversed with monolithic dgrad+wgrad nodes at 2x
    // cost; collectives keep their payloads and swap AG <-> RS.
    ChainBuilder cb{g};
    cb.cost_scale = 2.0;

    std::vector<OpNode> ffn;
    add_ffn_forward_steps(ffn, geo, plan);

    int remat_swiglu = -1;
    int remat_ag = -1;
    if (remat.enabled) {
        const double rows = geo.attn_rows();
        const double erows = geo.expert_rows();
        OpNode rnorm = memory_node(OpKind::norm, "remat_ffn_norm",
                                   2.0 * rows * static_cast<double>(geo.h) * geo.act_bpe,
                                   rows);
        rnorm.is_remat = true;
        const int rnorm_id = g.add(std::move(rnorm));

        OpNode rag = collective_node("remat_ag_ffn_in", Collective::all_gather,
                                     rat(geo.b) * geo.s * geo.h, geo.n, geo.comm_bpe);
        rag.is_remat = true;
        rag.deps.push_back(rnorm_id);
        remat_ag = g.add(std::move(rag));

        // fc2_in is re-derived from the retained fc1_out by re-applying
        // SwiGLU and the gating weights; fc1 itself is not re-run.
        OpNode rsw = memory_node(OpKind::swiglu, "remat_fc2_in",
                                 3.0 * erows * static_cast<double>(geo.h_ffn) * geo.act_bpe,
                                 erows);
        rsw.is_remat = true;
        remat_swiglu = g.add(std::move(rsw));
    }

    for (auto it = ffn.rbegin(); it != ffn.rend(); ++it) {
        OpNode node = std::move(*it);
        if (node.kind == OpKind::collective) {
            // mirror the collective for the gradient flow
            auto coll = node.volume.collective;
            if (coll == Collective::all_gather) {
                node.volume.collective = Collective::reduce_scatter;
            } else if (coll == Collective::reduce_scatter) {
                node.volume.collective = Collective::all_gather;
            }
            node.name += "_bwd";
        } else {
            node.name += "_bwd";
        }
        const int id = cb.chain(std::move(node));
        if (remat.enabled) {
            if (g.nodes[static_cast<std::size_t>(id)].name == "fc2_bwd") {
                g.nodes[static_cast<std::size_t>(id)].deps.push_back(remat_swiglu);
            } else if (g.nodes[static_cast<std::size_t>(id)].name == "fc1_bwd") {
                g.nodes[static_cast<std::size_t>(id)].deps.push_back(remat_ag);
            }
        }
    }
    add_attention(cb, geo, plan, /*backward=*/true);
    return g;
}

double op_time(const OpNode& node, const ClusterConfig& cluster, const EfficiencyTable& eff,
               const commcost::LinkModel& link) {
    switch (node.kind) {
        case OpKind::gemm:
        case OpKind::grouped_gemm:
        case OpKind::attention_core:
            return node.flops / (cluster.peak_flops * eff.for_kind(node.kind));
        case OpKind::norm:
        case OpKind::swiglu:
        case OpKind::router:
        case OpKind::scatter:
        case OpKind::gather:
        case OpKind::weighted_sum:
            return node.bytes_moved / (cluster.mem_bw * eff.for_kind(node.kind));
        case OpKind::collective:
            return commcost::collective_time(node.volume, node.participants, link);
        case OpKind::fused:
            return node.cost;  // assigned by apply_intra_op
    }
    throw std::logic_error("unknown op kind");
}

void cost_graph(OpGraph& g, const ClusterConfig& cluster, const EfficiencyTable& eff,
                const commcost::LinkModel& link) {
    for (OpNode& node : g.nodes) {
        if (!node.consumed) node.cost = op_time(node, cluster, eff, link);
    }
}

}  // namespace moeplan::simsched
