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

#include <string>
#include <vector>

#include "moeplan/config.hpp"
#include "moeplan/plan_types.hpp"

namespace moeplan::testing {

// The reference MoE model zoo used across the test suite:
// (layers, h, heads, m, h_ffn, experts, top_k).
inline ModelConfig make_model(const std::string& name) {
    struct Row {
        const char* name;
        long long layers, h, heads, m, h_ffn, experts, top_k;
    };
    static const Row rows[] = {
        {"mixtral-8x7b", 32, 4096, 32, 4, 14336, 8, 2},
        {"mixtral-8x22b", 56, 6144, 48, 6, 16384, 8, 2},
        {"hunyuan-large", 64, 6400, 80, 10, 18304, 16, 1},
        {"phi-3.5-moe", 32, 4096, 32, 4, 6400, 16, 2},
        {"deepseekmoe", 28, 2048, 16, 1, 1408, 64, 6},
        {"internal-352b", 60, 4096, 32, 4, 14336, 32, 3},
    };
    for (const Row& r : rows) {
        if (name == r.name) {
            ModelConfig m;
            m.name = r.name;
            m.num_layers = r.layers;
            m.hidden_size = r.h;
            m.num_heads = r.heads;
            m.query_kv_ratio = r.m;
            m.ffn_hidden_size = r.h_ffn;
            m.num_experts = r.experts;
            m.top_k = r.top_k;
            m.vocab_size = 32000;
            m.seq_len = 4096;
            m.micro_batch = 1;
            m.global_batch = 512;
            return m;
        }
    }
    throw std::runtime_error("unknown test model: " + name);
}

inline std::vector<std::string> model_zoo() {
    return {"mixtral-8x7b", "mixtral-8x22b", "hunyuan-large",
            "phi-3.5-moe", "deepseekmoe",   "internal-352b"};
}

inline ClusterConfig h800_cluster(long long num_nodes = 8) {
    ClusterConfig c;
    c.name = "h800";
    c.gpus_per_node = 8;
    c.num_nodes = num_nodes;
    c.intra_bw = 400e9;
    c.inter_bw = 50e9;
    c.peak_flops = 989e12;
    c.sm_count = 132;
    c.mem_capacity = 80.0 * 1073741824.0;
    c.mem_bw = 3.4e12;
    return c;
}

inline Config make_config(const std::string& model_name, long long num_nodes = 8) {
    Config c;
    c.model = make_model(model_name);
    c.cluster = h800_cluster(num_nodes);
    c.precision.compute_format = Format::bf16;
    c.precision.grad_sync_format = Format::fp32;
    c.precision.tp_comm_format = Format::bf16;
    c.job.pp = 1;
    c.job.vpp = 1;
    c.job.microbatches = 8;
    c.job.zero_stage = 1;
    return c;
}

inline ParallelismPlan make_plan(AttnStrategy attn, FfnStrategy ffn,
                                 commcost::EpPattern pattern, long long n, long long pp,
                                 long long dp) {
    ParallelismPlan p;
    p.attn = attn;
    p.ffn = ffn;
    p.ep_pattern = pattern;
    p.n = n;
    p.pp = pp;
    p.vpp = 1;
    p.dp = dp;
    p.zero_stage = 1;
    return p;
}

}  // namespace moeplan::testing
