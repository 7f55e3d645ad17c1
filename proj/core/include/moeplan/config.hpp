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

#include <cstdint>
#include <stdexcept>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "moeplan/rational.hpp"

namespace moeplan {

// Thrown when a config file violates the schema or an invariant.
// `field` carries the dotted path of the offending key (e.g. "model.top_k").
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class Format { fp32, bf16, fp8_e4m3 };

inline int bytes_per_element(Format f) {
    switch (f) {
        case Format::fp32: return 4;
        case Format::bf16: return 2;
        case Format::fp8_e4m3: return 1;
    }
    throw std::logic_error("unknown format");
}

std::string format_name(Format f);
Format format_from_name(const std::string& name);

// MoE transformer architecture plus the per-iteration token geometry.
struct ModelConfig {
    std::string name;
    long long num_layers = 1;
    long long hidden_size = 1;       // h
    long long num_heads = 1;
    long long query_kv_ratio = 1;    // m: query heads per key-value head
    long long ffn_hidden_size = 1;   // h_ffn, per expert
    long long num_experts = 1;
    long long top_k = 1;             // k
    long long vocab_size = 1;
    long long seq_len = 1;           // s, tokens per sequence
    long long micro_batch = 1;       // b, sequences per micro-batch
    long long global_batch = 1;      // sequences per iteration

    void validate() const;
};

// Hardware description of one homogeneous GPU cluster, two bandwidth tiers.
struct ClusterConfig {
    std::string name;
    long long gpus_per_node = 8;
    long long num_nodes = 1;
    double intra_bw = 400e9;        // bytes/s, NVLink tier
    double inter_bw = 50e9;         // bytes/s, NIC tier
    double peak_flops = 989e12;     // per GPU
    long long sm_count = 132;
    double mem_capacity = 80.0 * (1ull << 30);  // bytes per GPU
    double mem_bw = 3.4e12;         // bytes/s, HBM
    double copy_engine_bw = 0.0;    // bytes/s; 0 means "defaults to intra_bw"
    // alpha-beta collective model knobs
    double alpha_intra = 2e-6;      // seconds per collective step, intra tier
    double alpha_inter = 1e-5;      // seconds per collective step, inter tier
    double a2a_penalty = 1.4;       // all-to-all inefficiency vs ring AG/RS

    long long total_gpus() const { return gpus_per_node * num_nodes; }
    double effective_copy_engine_bw() const {
        return copy_engine_bw > 0.0 ? copy_engine_bw : intra_bw;
    }
    void validate() const;
};

struct PrecisionConfig {
    Format compute_format = Format::bf16;
    Format grad_sync_format = Format::fp32;   // fp32 or bf16 (compressed DP)
    Format tp_comm_format = Format::bf16;     // bf16 or fp8_e4m3
    // Required when any fp8 format is selected.
    std::string quant_granularity;            // per_tensor|per_token|per_channel|grouped
    long long quant_group_size = 128;

    void validate() const;
};

// Job-level knobs that are inputs rather than searched quantities.
struct JobConfig {
    long long pp = 1;               // pipeline stages
    long long vpp = 1;              // virtual stages per device
    long long microbatches = 1;     // per pipeline per iteration
    int zero_stage = 0;             // 0 or 1
    double capacity_factor = 1.0;   // token-drop capacity
    std::uint64_t seed = 0;

    void validate() const;
};

struct Config {
    ModelConfig model;
    ClusterConfig cluster;
    PrecisionConfig precision;
    JobConfig job;
};

// Quantities derived once from the model and consumed everywhere else.
//
// FLOP convention (used throughout the project): every GEMM of shape
// M x N x K costs 2*M*N*K FLOPs (multiply + add). Causal attention core
// costs 2*b*s^2*h per layer (two s x s x head_dim matmuls per head,
// halved for the causal mask). Backward GEMMs cost 2x forward (dgrad +
// wgrad). MFU is model FLOPs per iteration over aggregate peak.
struct DerivedQuantities {
    Rat f;                          // h_ffn / h, exact
    Rat attn_param_elements;        // QKV + output projection, per layer
    long long attn_param_bytes = 0; // the above at compute precision
    double flops_per_token = 0.0;   // dense-equivalent, activated path, all layers
    double model_flops_per_iter = 0.0;
};

DerivedQuantities derive(const ModelConfig& model, const PrecisionConfig& precision);

// Parses and validates a config file (JSON; sections model/cluster/job/
// precision). Unknown keys are hard errors. Missing optional keys take the
// defaults above.
Config load_config(const std::string& path);
Config parse_config(const nlohmann::json& doc);

nlohmann::json serialize(const Config& config);

// Applies a "section.key=value" override on top of a parsed config.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Stable digest of the canonicalized config, for report envelopes.
std::string config_digest(const Config& config);

}  // namespace moeplan
