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
#include "moeplan/routing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace moeplan::routing {

namespace {
constexpr int kRoutingSchemaVersion = 1;

void require(bool cond, const char* msg) {
    if (!cond) throw std::domain_error(msg);
}
}  // namespace

long long RoutingAssignment::retained_slots() const {
    long long slots = 0;
    for (std::size_t t = 0; t < experts.size(); ++t) {
        if (!dropped[t]) slots += static_cast<long long>(experts[t].size());
    }
    return slots;
}

int RoutingAssignment::group_of_expert(int expert) const {
    const long long per_rank = num_experts / n_groups;
    return static_cast<int>(expert / per_rank);
}

RoutingAssignment simulate_routing(long long tokens, long long num_experts, long long top_k,
                                   const RoutingSpec& spec, double capacity_factor,
                                   long long n_groups) {
    require(tokens >= 0, "tokens must be >= 0");
    require(num_experts >= 1 && top_k >= 1, "counts must be >= 1");
    require(top_k <= num_experts, "top_k must not exceed num_experts");
    require(n_groups >= 1, "n_groups must be >= 1");
    require(num_experts % n_groups == 0, "num_experts must divide evenly across groups");
    require(capacity_factor > 0.0, "capacity_factor must be > 0");
    if (spec.mode == RoutingMode::skewed) {
        require(spec.zipf_s >= 0.0, "zipf_s must be >= 0");
    }

    RoutingAssignment a;
    a.num_experts = num_experts;
    a.top_k = top_k;
    a.n_groups = n_groups;
    a.experts.resize(tokens);
    a.source_rank.resize(tokens);
    a.dropped.assign(tokens, 0);

    std::mt19937_64 rng(spec.seed);
    std::vector<double> weights;
    if (spec.mode == RoutingMode::skewed) {
        weights.resize(num_experts);
        for (long long e = 0; e < num_experts; ++e) {
            weights[e] = std::pow(static_cast<double>(e + 1), -spec.zipf_s);
        }
    }

    std::vector<int> pool(num_experts);
    for (long long t = 0; t < tokens; ++t) {
        a.source_rank[t] = static_cast<int>(t * n_groups / std::max<long long>(tokens, 1));
        auto& chosen = a.experts[t];
        chosen.reserve(top_k);
        switch (spec.mode) {
            case RoutingMode::uniform:
                for (long long j = 0; j < top_k; ++j) {
                    chosen.push_back(static_cast<int>((t * top_k + j) % num_experts));
                }
                break;
            case RoutingMode::random: {
                std::iota(pool.begin(), pool.end(), 0);
                // partial Fisher-Yates: first top_k entries
                for (long long j = 0; j < top_k; ++j) {
                    std::uniform_int_distribution<long long> pick(j, num_experts - 1);
                    std::swap(pool[j], pool[pick(rng)]);
                    chosen.push_back(pool[j]);
                }
                break;
            }
            case RoutingMode::skewed: {
                std::vector<double> w = weights;
                for (long long j = 0; j < top_k; ++j) {
                    std::discrete_distribution<int> pick(w.begin(), w.end());
                    int e = pick(rng);
                    chosen.push_back(e);
                    w[e] = 0.0;
                }
                break;
            }
        }
    }

    // Per-group capacity in token-slots; over-capacity tokens dropped
    // whole, highest index first.
    const long long capacity = static_cast<long long>(std::ceil(
        capacity_factor * static_cast<double>(tokens) * static_cast<double>(top_k) /
        static_cast<double>(n_groups)));
    std::vector<long long> load(n_groups, 0);
    for (long long t = 0; t < tokens; ++t) {
        for (int e : a.experts[t]) load[a.group_of_expert(e)]++;
    }
    for (long long t = tokens - 1; t >= 0; --t) {
        bool over = false;
        for (int e : a.experts[t]) {
            if (load[a.group_of_expert(e)] > capacity) over = true;
        }
        if (over) {
            a.dropped[t] = 1;
            for (int e : a.experts[t]) load[a.group_of_expert(e)]--;
        }
    }
    return a;
}

ScatterMap build_scatter_map(const RoutingAssignment& a, long long n, long long my_rank) {
    require(n >= 1, "n must be >= 1");
    require(my_rank >= 0 && my_rank < n, "my_rank out of range");
    require(a.num_experts % n == 0, "num_experts must be divisible by n");
    const long long experts_per_rank = a.num_experts / n;
    const int first = static_cast<int>(my_rank * experts_per_rank);
    const int last = static_cast<int>((my_rank + 1) * experts_per_rank);  // exclusive

    ScatterMap map;
    map.my_rank = my_rank;
    map.per_expert_counts.assign(a.num_experts, 0);

    struct Entry {
        int expert;
        int source_rank;
        long long token;
        long long input_row;
    };
    std::vector<Entry> local;
    for (long long t = 0; t < a.tokens(); ++t) {
        if (a.dropped[t]) continue;
        for (std::size_t slot = 0; slot < a.experts[t].size(); ++slot) {
            const int e = a.experts[t][slot];
            map.per_expert_counts[e]++;
            if (e >= first && e < last) {
                local.push_back({e, a.source_rank[t], t,
                                 t * a.top_k + static_cast<long long>(slot)});
            }
        }
    }
    // Contiguous per expert, stable by (source rank, token index).
    std::stable_sort(local.begin(), local.end(), [](const Entry& x, const Entry& y) {
        if (x.expert != y.expert) return x.expert < y.expert;
        if (x.source_rank != y.source_rank) return x.source_rank < y.source_rank;
        return x.token < y.token;
    });

    map.rows = static_cast<long long>(local.size());
    map.row_map_in.reserve(local.size());
    map.row_map_out.reserve(local.size());
    map.inverse_map.reserve(local.size());
    map.out_expert.reserve(local.size());
    map.out_source_rank.reserve(local.size());
    for (long long out = 0; out < map.rows; ++out) {
        const Entry& e = local[out];
        map.row_map_in.push_back(e.input_row);
        map.row_map_out.push_back(out);
        map.inverse_map.push_back(e.input_row);
        map.out_expert.push_back(e.expert);
        map.out_source_rank.push_back(e.source_rank);
    }
    return map;
}

TileLayout sort_tokens_for_tiles(const ScatterMap& map, const RoutingAssignment& a,
                                 long long tile_rows) {
    (void)a;
    require(tile_rows >= 1, "tile_rows must be >= 1");
    TileLayout layout;
    layout.tile_rows = tile_rows;

    long long row = 0;
    while (row < map.rows) {
        const int expert = map.out_expert[row];
        long long expert_end = row;
        while (expert_end < map.rows && map.out_expert[expert_end] == expert) expert_end++;
        for (long long begin = row; begin < expert_end; begin += tile_rows) {
            Tile tile;
            tile.expert = expert;
            tile.row_begin = begin;
            tile.row_end = std::min(begin + tile_rows, expert_end);
            for (long long r = tile.row_begin; r < tile.row_end; ++r) {
                const int src = map.out_source_rank[r];
                if (tile.dependent_ranks.empty() || tile.dependent_ranks.back() != src) {
                    tile.dependent_ranks.push_back(src);
                }
            }
            layout.tiles.push_back(std::move(tile));
        }
        row = expert_end;
    }
    return layout;
}

BalanceStats balance_metrics(const RoutingAssignment& a, long long n) {
    require(n >= 1, "n must be >= 1");
    require(a.n_groups == n || a.num_experts % n == 0, "incompatible group count");

    BalanceStats stats;
    stats.per_group_load.assign(n, 0);
    std::vector<long long> assigned(n, 0);
    const long long per_rank = a.num_experts / n;

    long long dropped_tokens = 0;
    for (long long t = 0; t < a.tokens(); ++t) {
        if (a.dropped[t]) dropped_tokens++;
        for (int e : a.experts[t]) {
            const long long g = e / per_rank;
            assigned[g]++;
            if (!a.dropped[t]) stats.per_group_load[g]++;
        }
    }
    const long long total_load =
        std::accumulate(stats.per_group_load.begin(), stats.per_group_load.end(), 0ll);
    const long long total_assigned = std::accumulate(assigned.begin(), assigned.end(), 0ll);

    double loss = 0.0;
    if (total_load > 0 && total_assigned > 0) {
        for (long long g = 0; g < n; ++g) {
            const double load_frac =
                static_cast<double>(stats.per_group_load[g]) / static_cast<double>(total_load);
            const double assign_frac =
                static_cast<double>(assigned[g]) / static_cast<double>(total_assigned);
            loss += load_frac * assign_frac;
        }
        loss *= static_cast<double>(n);
    }
    stats.balance_loss_value = loss;
    stats.capacity = a.tokens() > 0
                         ? static_cast<long long>(std::ceil(
                               static_cast<double>(a.tokens()) *
                               static_cast<double>(a.top_k) / static_cast<double>(n)))
                         : 0;
    stats.drop_rate = a.tokens() > 0 ? static_cast<double>(dropped_tokens) /
                                           static_cast<double>(a.tokens())
                                     : 0.0;
    return stats;
}

nlohmann::json to_json(const RoutingAssignment& a) {
    nlohmann::json j;
    j["schema_version"] = kRoutingSchemaVersion;
    j["num_experts"] = a.num_experts;
    j["top_k"] = a.top_k;
    j["n_groups"] = a.n_groups;
    j["experts"] = a.experts;
    j["source_rank"] = a.source_rank;
    std::vector<int> dropped(a.dropped.begin(), a.dropped.end());
    j["dropped"] = dropped;
    return j;
}

nlohmann::json to_json(const TileLayout& t) {
    nlohmann::json j;
    j["schema_version"] = kRoutingSchemaVersion;
    j["tile_rows"] = t.tile_rows;
    j["tiles"] = nlohmann::json::array();
    for (const Tile& tile : t.tiles) {
        j["tiles"].push_back({{"expert", tile.expert},
                              {"row_begin", tile.row_begin},
                              {"row_end", tile.row_end},
                              {"dependent_ranks", tile.dependent_ranks}});
    }
    return j;
}

RoutingAssignment assignment_from_json(const nlohmann::json& j) {
    if (j.at("schema_version").get<int>() != kRoutingSchemaVersion) {
        throw std::runtime_error("unsupported routing schema version");
    }
    RoutingAssignment a;
    a.num_experts = j.at("num_experts").get<long long>();
    a.top_k = j.at("top_k").get<long long>();
    a.n_groups = j.at("n_groups").get<long long>();
    a.experts = j.at("experts").get<std::vector<std::vector<int>>>();
    a.source_rank = j.at("source_rank").get<std::vector<int>>();
    auto dropped = j.at("dropped").get<std::vector<int>>();
    a.dropped.assign(dropped.begin(), dropped.end());
    return a;
}

}  // namespace moeplan::routing
