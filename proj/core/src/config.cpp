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
#include "moeplan/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace moeplan {

using nlohmann::json;

std::string format_name(Format f) {
    switch (f) {
        case Format::fp32: return "fp32";
        case Format::bf16: return "bf16";
        case Format::fp8_e4m3: return "fp8_e4m3";
    }
    return "?";
}

Format format_from_name(const std::string& name) {
    if (name == "fp32") return Format::fp32;
    if (name == "bf16") return Format::bf16;
    if (name == "fp8_e4m3" || name == "e4m3") return Format::fp8_e4m3;
    throw ConfigError("", "unknown format '" + name + "'");
}

namespace {

void require_positive(long long v, const std::string& field) {
    if (v < 1) throw ConfigError(field, "must be >= 1, got " + std::to_string(v));
}

void check_known_keys(const json& obj, const std::set<std::string>& known,
                      const std::string& section) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key())) {
            throw ConfigError(section + "." + it.key(), "unknown key");
        }
    }
}

template <typename T>
void read(const json& obj, const std::string& section, const std::string& key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(section + "." + key, e.what());
    }
}

void read_format(const json& obj, const std::string& section, const std::string& key,
                 Format& out) {
    if (!obj.contains(key)) return;
    std::string name;
    read(obj, section, key, name);
    try {
        out = format_from_name(name);
    } catch (const ConfigError& e) {
        throw ConfigError(section + "." + key, e.what());
    }
}

}  // namespace

void ModelConfig::validate() const {
    require_positive(num_layers, "model.num_layers");
    require_positive(hidden_size, "model.hidden_size");
    require_positive(num_heads, "model.num_heads");
    require_positive(query_kv_ratio, "model.query_kv_ratio");
    require_positive(ffn_hidden_size, "model.ffn_hidden_size");
    require_positive(num_experts, "model.num_experts");
    require_positive(top_k, "model.top_k");
    require_positive(vocab_size, "model.vocab_size");
    require_positive(seq_len, "model.seq_len");
    require_positive(micro_batch, "model.micro_batch");
    require_positive(global_batch, "model.global_batch");
    if (num_heads % query_kv_ratio != 0) {
        throw ConfigError("model.query_kv_ratio",
                          "num_heads (" + std::to_string(num_heads) +
                              ") not divisible by query_kv_ratio (" +
                              std::to_string(query_kv_ratio) + ")");
    }
    if (top_k > num_experts) {
        throw ConfigError("model.top_k", "top_k (" + std::to_string(top_k) +
                                             ") exceeds num_experts (" +
                                             std::to_string(num_experts) + ")");
    }
}

void ClusterConfig::validate() const {
    require_positive(gpus_per_node, "cluster.gpus_per_node");
    require_positive(num_nodes, "cluster.num_nodes");
    require_positive(sm_count, "cluster.sm_count");
    if (inter_bw <= 0.0) throw ConfigError("cluster.inter_bw_gbps", "must be > 0");
    if (intra_bw < inter_bw) {
        throw ConfigError("cluster.intra_bw_gbps", "must be >= inter_bw_gbps");
    }
    if (peak_flops <= 0.0) throw ConfigError("cluster.peak_tflops", "must be > 0");
    if (mem_bw <= 0.0) throw ConfigError("cluster.mem_bw_gbps", "must be > 0");
    if (mem_capacity <= 0.0) throw ConfigError("cluster.mem_capacity_gib", "must be > 0");
    if (alpha_intra < 0.0 || alpha_inter < 0.0) {
        throw ConfigError("cluster.alpha", "latencies must be >= 0");
    }
    if (a2a_penalty < 1.0) throw ConfigError("cluster.a2a_penalty", "must be >= 1");
}

void PrecisionConfig::validate() const {
    if (grad_sync_format == Format::fp8_e4m3) {
        throw ConfigError("precision.grad_sync_format", "must be fp32 or bf16");
    }
    bool any_fp8 = compute_format == Format::fp8_e4m3 || tp_comm_format == Format::fp8_e4m3;
    if (any_fp8) {
        static const std::set<std::string> schemes = {"per_tensor", "per_token",
                                                      "per_channel", "grouped"};
        if (!schemes.count(quant_granularity)) {
            throw ConfigError("precision.quant_granularity",
                              "fp8 formats require a quantization scheme "
                              "(per_tensor|per_token|per_channel|grouped)");
        }
        require_positive(quant_group_size, "precision.quant_group_size");
    }
}

void JobConfig::validate() const {
    require_positive(pp, "job.pp");
    require_positive(vpp, "job.vpp");
    require_positive(microbatches, "job.microbatches");
    if (zero_stage != 0 && zero_stage != 1) {
        throw ConfigError("job.zero_stage", "must be 0 or 1");
    }
    if (capacity_factor <= 0.0) {
        throw ConfigError("job.capacity_factor", "must be > 0");
    }
}

DerivedQuantities derive(const ModelConfig& model, const PrecisionConfig& precision) {
    model.validate();
    DerivedQuantities d;
    d.f = rat(model.ffn_hidden_size, model.hidden_size);

    // QKV projection h x (h + 2h/m) plus output projection h x h.
    const long long h = model.hidden_size;
    const long long m = model.query_kv_ratio;
    d.attn_param_elements = rat(h) * h * (rat(2) + rat(2, m));
    d.attn_param_bytes = to_integer(d.attn_param_elements *
                                    bytes_per_element(precision.compute_format));

    // Dense-equivalent FLOPs along the activated path; see the convention
    // note on DerivedQuantities.
    const double h_d = static_cast<double>(h);
    const double per_layer_params = to_double(d.attn_param_elements) +
                                    3.0 * h_d * static_cast<double>(model.ffn_hidden_size) *
                                        static_cast<double>(model.top_k) +
                                    h_d * static_cast<double>(model.num_experts);
    const double attn_core_per_token = 2.0 * static_cast<double>(model.seq_len) * h_d;
    d.flops_per_token =
        static_cast<double>(model.num_layers) * (2.0 * per_layer_params + attn_core_per_token);
    d.model_flops_per_iter = d.flops_per_token * static_cast<double>(model.global_batch) *
                             static_cast<double>(model.seq_len);
    return d;
}

Config parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("", "top level must be an object");
    check_known_keys(doc, {"model", "cluster", "job", "precision"}, "config");

    Config c;
    if (doc.contains("model")) {
        const json& j = doc.at("model");
        check_known_keys(j,
                         {"name", "num_layers", "hidden_size", "num_heads", "query_kv_ratio",
                          "ffn_hidden_size", "num_experts", "top_k", "vocab_size", "seq_len",
                          "micro_batch", "global_batch"},
                         "model");
        read(j, "model", "name", c.model.name);
        read(j, "model", "num_layers", c.model.num_layers);
        read(j, "model", "hidden_size", c.model.hidden_size);
        read(j, "model", "num_heads", c.model.num_heads);
        read(j, "model", "query_kv_ratio", c.model.query_kv_ratio);
        read(j, "model", "ffn_hidden_size", c.model.ffn_hidden_size);
        read(j, "model", "num_experts", c.model.num_experts);
        read(j, "model", "top_k", c.model.top_k);
        read(j, "model", "vocab_size", c.model.vocab_size);
        read(j, "model", "seq_len", c.model.seq_len);
        read(j, "model", "micro_batch", c.model.micro_batch);
        read(j, "model", "global_batch", c.model.global_batch);
    }
    if (doc.contains("cluster")) {
        const json& j = doc.at("cluster");
        check_known_keys(j,
                         {"name", "gpus_per_node", "num_nodes", "intra_bw_gbps",
                          "inter_bw_gbps", "peak_tflops", "sm_count", "mem_capacity_gib",
                          "mem_bw_gbps", "copy_engine_bw_gbps", "alpha_intra_us",
                          "alpha_inter_us", "a2a_penalty"},
                         "cluster");
        read(j, "cluster", "name", c.cluster.name);
        read(j, "cluster", "gpus_per_node", c.cluster.gpus_per_node);
        read(j, "cluster", "num_nodes", c.cluster.num_nodes);
        read(j, "cluster", "sm_count", c.cluster.sm_count);
        double v;
        if (j.contains("intra_bw_gbps")) { read(j, "cluster", "intra_bw_gbps", v); c.cluster.intra_bw = v * 1e9; }
        if (j.contains("inter_bw_gbps")) { read(j, "cluster", "inter_bw_gbps", v); c.cluster.inter_bw = v * 1e9; }
        if (j.contains("peak_tflops")) { read(j, "cluster", "peak_tflops", v); c.cluster.peak_flops = v * 1e12; }
        if (j.contains("mem_capacity_gib")) { read(j, "cluster", "mem_capacity_gib", v); c.cluster.mem_capacity = v * 1073741824.0; }
        if (j.contains("mem_bw_gbps")) { read(j, "cluster", "mem_bw_gbps", v); c.cluster.mem_bw = v * 1e9; }
        if (j.contains("copy_engine_bw_gbps")) { read(j, "cluster", "copy_engine_bw_gbps", v); c.cluster.copy_engine_bw = v * 1e9; }
        if (j.contains("alpha_intra_us")) { read(j, "cluster", "alpha_intra_us", v); c.cluster.alpha_intra = v * 1e-6; }
        if (j.contains("alpha_inter_us")) { read(j, "cluster", "alpha_inter_us", v); c.cluster.alpha_inter = v * 1e-6; }
        read(j, "cluster", "a2a_penalty", c.cluster.a2a_penalty);
    }
    if (doc.contains("job")) {
        const json& j = doc.at("job");
        check_known_keys(j,
                         {"pp", "vpp", "microbatches", "zero_stage", "capacity_factor", "seed"},
                         "job");
        read(j, "job", "pp", c.job.pp);
        read(j, "job", "vpp", c.job.vpp);
        read(j, "job", "microbatches", c.job.microbatches);
        read(j, "job", "zero_stage", c.job.zero_stage);
        read(j, "job", "capacity_factor", c.job.capacity_factor);
        read(j, "job", "seed", c.job.seed);
    }
    if (doc.contains("precision")) {
        const json& j = doc.at("precision");
        check_known_keys(j,
                         {"compute_format", "grad_sync_format", "tp_comm_format",
                          "quant_granularity", "quant_group_size"},
                         "precision");
        read_format(j, "precision", "compute_format", c.precision.compute_format);
        read_format(j, "precision", "grad_sync_format", c.precision.grad_sync_format);
        read_format(j, "precision", "tp_comm_format", c.precision.tp_comm_format);
        read(j, "precision", "quant_granularity", c.precision.quant_granularity);
        read(j, "precision", "quant_group_size", c.precision.quant_group_size);
    }

    c.model.validate();
    c.cluster.validate();
    c.precision.validate();
    c.job.validate();
    return c;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", "parse error in '" + path + "': " + e.what());
    }
    return parse_config(doc);
}

json serialize(const Config& c) {
    json doc;
    doc["model"] = {{"name", c.model.name},
                    {"num_layers", c.model.num_layers},
                    {"hidden_size", c.model.hidden_size},
                    {"num_heads", c.model.num_heads},
                    {"query_kv_ratio", c.model.query_kv_ratio},
                    {"ffn_hidden_size", c.model.ffn_hidden_size},
                    {"num_experts", c.model.num_experts},
                    {"top_k", c.model.top_k},
                    {"vocab_size", c.model.vocab_size},
                    {"seq_len", c.model.seq_len},
                    {"micro_batch", c.model.micro_batch},
                    {"global_batch", c.model.global_batch}};
    doc["cluster"] = {{"name", c.cluster.name},
                      {"gpus_per_node", c.cluster.gpus_per_node},
                      {"num_nodes", c.cluster.num_nodes},
                      {"intra_bw_gbps", c.cluster.intra_bw / 1e9},
                      {"inter_bw_gbps", c.cluster.inter_bw / 1e9},
                      {"peak_tflops", c.cluster.peak_flops / 1e12},
                      {"sm_count", c.cluster.sm_count},
                      {"mem_capacity_gib", c.cluster.mem_capacity / 1073741824.0},
                      {"mem_bw_gbps", c.cluster.mem_bw / 1e9},
                      {"copy_engine_bw_gbps", c.cluster.copy_engine_bw / 1e9},
                      {"alpha_intra_us", c.cluster.alpha_intra * 1e6},
                      {"alpha_inter_us", c.cluster.alpha_inter * 1e6},
                      {"a2a_penalty", c.cluster.a2a_penalty}};
    doc["job"] = {{"pp", c.job.pp},
                  {"vpp", c.job.vpp},
                  {"microbatches", c.job.microbatches},
                  {"zero_stage", c.job.zero_stage},
                  {"capacity_factor", c.job.capacity_factor},
                  {"seed", c.job.seed}};
    doc["precision"] = {{"compute_format", format_name(c.precision.compute_format)},
                        {"grad_sync_format", format_name(c.precision.grad_sync_format)},
                        {"tp_comm_format", format_name(c.precision.tp_comm_format)},
                        {"quant_granularity", c.precision.quant_granularity},
                        {"quant_group_size", c.precision.quant_group_size}};
    return doc;
}

void apply_override(json& doc, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("", "override '" + assignment + "' is not of the form key=value");
    }
    std::string path = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    json* node = &doc;
    std::stringstream ss(path);
    std::string part;
    std::string last;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.size() < 2) {
        throw ConfigError("", "override key '" + path + "' must be section.key");
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        node = &(*node)[parts[i]];
    }
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded() || parsed.is_object() || parsed.is_array()) {
        (*node)[parts.back()] = value;  // treat as string
    } else {
        (*node)[parts.back()] = parsed;
    }
}

std::string config_digest(const Config& config) {
    // FNV-1a over the canonical (sorted-key) dump.
    const std::string dump = serialize(config).dump();
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char ch : dump) {
        hash ^= ch;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return std::string(buf);
}

}  // namespace moeplan
