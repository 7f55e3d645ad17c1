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
#include "moeplan/memmodel.hpp"

#include <algorithm>
#include <stdexcept>

namespace moeplan::memmodel {

RematPolicy RematPolicy::off() { return RematPolicy{}; }

RematPolicy RematPolicy::selective() {
    RematPolicy p;
    p.enabled = true;
    p.retained_set = {"attn_in", "qkv_out", "attn_out", "fc1_out", "weighted_fc1"};
    p.recompute_set = {"ffn_norm", "ffn_in_gathered", "fc2_in", "ffn_out"};
    return p;
}

namespace {
void require_ranks(long long v, const char* what) {
    if (v < 1) throw std::domain_error(std::string(what) + " must be >= 1");
}
}  // namespace

Rat activation_full(long long b, long long s, long long h, long long n, long long k,
                    const Rat& f, long long m) {
    require_ranks(n, "n");
    require_ranks(m, "m");
    if (k < 0) throw std::domain_error("k must be >= 0");
    const Rat coeff = rat(2) * n + rat(2) * k + rat(3) * k * f + rat(12) + rat(5, m);
    return coeff * b * s * rat(h, n);
}

Rat activation_remat(long long b, long long s, long long h, long long n, long long k,
                     const Rat& f, long long m) {
    require_ranks(n, "n");
    require_ranks(m, "m");
    if (k < 0) throw std::domain_error("k must be >= 0");
    const Rat coeff = rat(2) * k * f + rat(4) + rat(2, m);
    return coeff * b * s * rat(h, n);
}

ParamStateBytes param_state_memory(const ParallelismPlan& plan, const ModelConfig& model,
                                   const PrecisionConfig& precision) {
    const long long h = model.hidden_size;
    const long long m = model.query_kv_ratio;
    const long long n = plan.n;
    require_ranks(n, "plan.n");

    // Elements per layer, before sharding.
    const Rat attn_elems = rat(h) * h * (rat(2) + rat(2, m));
    const Rat expert_elems = rat(3) * h * model.ffn_hidden_size * model.num_experts;
    const Rat router_elems = rat(h) * model.num_experts;
    const Rat norm_elems = rat(2) * h;  // two RMSNorms per layer

    // Attention weights: replicated under SP/CP, sharded under TP. DP for
    // attention also replicates. Experts shard by n under both EP and TP.
    const bool attn_sharded = plan.attn == AttnStrategy::tp;
    const Rat attn_per_gpu = attn_sharded ? attn_elems / n : attn_elems;
    const Rat expert_per_gpu = expert_elems / n;

    const Rat layers_per_stage = rat(model.num_layers, plan.pp);
    const Rat elems_per_gpu =
        (attn_per_gpu + expert_per_gpu + router_elems + norm_elems) * layers_per_stage;

    ParamStateBytes out;
    out.params = elems_per_gpu * bytes_per_element(precision.compute_format);
    out.grads = elems_per_gpu * 4;  // FP32 main gradients
    // FP32 main params + two Adam moments.
    Rat opt = elems_per_gpu * 12;
    if (plan.zero_stage >= 1) opt /= plan.dp;
    out.optimizer = opt;
    return out;
}

MemoryBreakdown peak_memory(const ParallelismPlan& plan, const ModelConfig& model,
                            const PrecisionConfig& precision, const JobConfig& job,
                            const RematPolicy& remat, DpCompress dp_compress) {
    const DerivedQuantities d = derive(model, precision);
    ParamStateBytes state = param_state_memory(plan, model, precision);

    const Rat act_elems_per_layer =
        remat.enabled
            ? activation_remat(model.micro_batch, model.seq_len, model.hidden_size, plan.n,
                               model.top_k, d.f, model.query_kv_ratio)
            : activation_full(model.micro_batch, model.seq_len, model.hidden_size, plan.n,
                              model.top_k, d.f, model.query_kv_ratio);

    const Rat layers_per_stage = rat(model.num_layers, plan.pp);
    const long long in_flight = std::min(plan.pp, job.microbatches);

    MemoryBreakdown mem;
    mem.params = state.params;
    mem.grads = state.grads;
    mem.optimizer = state.optimizer;
    mem.activations = act_elems_per_layer * bytes_per_element(precision.compute_format) *
                      layers_per_stage * in_flight;
    if (dp_compress == DpCompress::naive) {
        mem.transient_peak = state.grads / 2;
    }
    mem.total = mem.params + mem.grads + mem.optimizer + mem.activations + mem.transient_peak;
    return mem;
}

}  // namespace moeplan::memmodel
