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
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace moeplan::routing {

enum class RoutingMode { uniform, random, skewed };

struct RoutingSpec {
    RoutingMode mode = RoutingMode::uniform;
    std::uint64_t seed = 0;
    double zipf_s = 1.0;  // skew exponent, skewed mode only
};

// Token -> expert assignment for one micro-batch, with token-drop flags.
// Experts are placed on ranks contiguously: expert j lives on rank
// j / (num_experts / n_groups).
struct RoutingAssignment {
    long long num_experts = 1;
    long long top_k = 1;
    long long n_groups = 1;
    std::vector<std::vector<int>> experts;  // per token, top_k distinct ids
    std::vector<int> source_rank;           // per token, origin rank
    std::vector<char> dropped;              // per token

    long long tokens() const { return static_cast<long long>(experts.size()); }
    long long retained_slots() const;
    int group_of_expert(int expert) const;
};

// Simulates routing of `tokens` tokens. uniform: round-robin, exactly
// balanced. random: i.i.d. top_k draws without replacement. skewed:
// Zipf-weighted expert popularity. Tokens beyond the per-group capacity
// ceil(capacity_factor * tokens * top_k / n_groups) are dropped whole,
// highest token index first.
RoutingAssignment simulate_routing(long long tokens, long long num_experts, long long top_k,
                                   const RoutingSpec& spec, double capacity_factor,
                                   long long n_groups);

// Precomputed row mapping for the local scatter on one rank. Input rows
// are (token, slot) pairs numbered token*top_k + slot; output rows are
// contiguous per local expert, ordered by (source_rank, token index).
struct ScatterMap {
    long long my_rank = 0;
    long long rows = 0;                      // retained rows on this rank
    std::vector<long long> row_map_in;       // input row ids, parallel arrays
    std::vector<long long> row_map_out;      // output row ids (0..rows-1)
    std::vector<long long> inverse_map;      // output row -> input row
    std::vector<long long> per_expert_counts;  // e_j over all experts, global
    std::vector<int> out_expert;             // output row -> expert id
    std::vector<int> out_source_rank;        // output row -> source rank
};

ScatterMap build_scatter_map(const RoutingAssignment& a, long long n, long long my_rank);

struct Tile {
    int expert = 0;
    long long row_begin = 0;
    long long row_end = 0;  // exclusive
    std::vector<int> dependent_ranks;  // distinct source ranks, ascending
};

struct TileLayout {
    long long tile_rows = 1;
    std::vector<Tile> tiles;
};

// Slices each expert's rows (already sorted by source rank) into tiles of
// `tile_rows` rows and records each tile's dependent source-rank set.
TileLayout sort_tokens_for_tiles(const ScatterMap& map, const RoutingAssignment& a,
                                 long long tile_rows);

struct BalanceStats {
    std::vector<long long> per_group_load;  // retained token-slots per group
    double balance_loss_value = 1.0;
    long long capacity = 0;                 // tokens per group
    double drop_rate = 0.0;                 // fraction of tokens dropped
};

// Group-granular switch-style balance loss, normalized to 1 at uniform
// load: groups * sum_g load_frac_g * assign_frac_g. A stand-in metric;
// assign_frac counts all router assignments including dropped tokens.
BalanceStats balance_metrics(const RoutingAssignment& a, long long n);

// Versioned JSON serialization consumed by the simulator surface.
nlohmann::json to_json(const RoutingAssignment& a);
nlohmann::json to_json(const TileLayout& t);
RoutingAssignment assignment_from_json(const nlohmann::json& j);

}  // namespace moeplan::routing
