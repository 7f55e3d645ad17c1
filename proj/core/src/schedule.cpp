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
#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "moeplan/simsched.hpp"

namespace moeplan::simsched {

namespace {

bool is_compute_kind(OpKind k) {
    return k == OpKind::gemm || k == OpKind::grouped_gemm || k == OpKind::attention_core;
}

std::vector<std::vector<int>> successors_of(const OpGraph& g) {
    std::vector<std::vector<int>> succ(g.nodes.size());
    for (const OpNode& n : g.nodes) {
        if (n.consumed) continue;
        for (int d : n.deps) {
            if (!g.at(d).consumed) succ[static_cast<std::size_t>(d)].push_back(n.id);
        }
    }
    return succ;
}

std::vector<int> topo_order(const OpGraph& g) {
    std::vector<int> indeg(g.nodes.size(), 0);
    auto succ = successors_of(g);
    std::size_t live = 0;
    for (const OpNode& n : g.nodes) {
        if (n.consumed) continue;
        live++;
        for (int d : n.deps) {
            if (!g.at(d).consumed) indeg[static_cast<std::size_t>(n.id)]++;
        }
    }
    std::set<int> ready;
    for (const OpNode& n : g.nodes) {
        if (!n.consumed && indeg[static_cast<std::size_t>(n.id)] == 0) ready.insert(n.id);
    }
    std::vector<int> order;
    order.reserve(live);
    while (!ready.empty()) {
        const int id = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(id);
        for (int s : succ[static_cast<std::size_t>(id)]) {
            if (--indeg[static_cast<std::size_t>(s)] == 0) ready.insert(s);
        }
    }
    if (order.size() != live) throw std::runtime_error("operator graph has a cycle");
    return order;
}

// Longest remaining path including the node's own cost.
std::vector<double> critical_path(const OpGraph& g, const std::vector<int>& order) {
    auto succ = successors_of(g);
    std::vector<double> prio(g.nodes.size(), 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        double tail = 0.0;
        for (int s : succ[static_cast<std::size_t>(*it)]) {
            tail = std::max(tail, prio[static_cast<std::size_t>(s)]);
        }
        prio[static_cast<std::size_t>(*it)] = g.at(*it).cost + tail;
    }
    return prio;
}

}  // namespace

Timeline schedule(const OpGraph& g, ScheduleMode mode) {
    const std::vector<int> order = topo_order(g);
    Timeline t;
    t.events.reserve(order.size());

    if (mode == ScheduleMode::serial) {
        double clock = 0.0;
        for (int id : order) {
            const OpNode& n = g.at(id);
            t.events.push_back({id, n.name, clock, clock + n.cost, n.stream});
            clock += n.cost;
        }
        t.makespan = clock;
    } else {
        const std::vector<double> prio = critical_path(g, order);
        auto succ = successors_of(g);
        std::vector<int> pending(g.nodes.size(), 0);
        std::vector<double> ready_at(g.nodes.size(), 0.0);
        for (int id : order) {
            for (int d : g.at(id).deps) {
                if (!g.at(d).consumed) pending[static_cast<std::size_t>(id)]++;
            }
        }
        auto better = [&](int a, int b) {
            const double pa = prio[static_cast<std::size_t>(a)];
            const double pb = prio[static_cast<std::size_t>(b)];
            if (pa != pb) return pa > pb;
            return a < b;
        };
        std::vector<int> ready;
        for (int id : order) {
            if (pending[static_cast<std::size_t>(id)] == 0) ready.push_back(id);
        }
        std::map<StreamClass, double> resource_free = {
            {StreamClass::compute, 0.0},
            {StreamClass::comm_intra, 0.0},
            {StreamClass::comm_inter, 0.0},
        };
        std::size_t scheduled = 0;
        while (scheduled < order.size()) {
            // Among ready nodes pick the highest priority; start it on its
            // resource at max(data ready, resource free).
            std::sort(ready.begin(), ready.end(), better);
            const int id = ready.front();
            ready.erase(ready.begin());
            const OpNode& n = g.at(id);
            const double start =
                std::max(ready_at[static_cast<std::size_t>(id)], resource_free[n.stream]);
            const double end = start + n.cost;
            resource_free[n.stream] = end;
            t.events.push_back({id, n.name, start, end, n.stream});
            t.makespan = std::max(t.makespan, end);
            scheduled++;
            for (int s : succ[static_cast<std::size_t>(id)]) {
                ready_at[static_cast<std::size_t>(s)] =
                    std::max(ready_at[static_cast<std::size_t>(s)], end);
                if (--pending[static_cast<std::size_t>(s)] == 0) ready.push_back(s);
            }
        }
    }

    for (const TimelineEvent& e : t.events) {
        if (g.at(e.node).stream == StreamClass::compute) t.busy_compute += e.end - e.start;
    }
    t.exposed_comm = std::max(0.0, t.makespan - t.busy_compute);
    return t;
}

void validate_timeline(const OpGraph& g, const Timeline& t) {
    std::map<StreamClass, std::vector<const TimelineEvent*>> by_resource;
    std::vector<const TimelineEvent*> by_node(g.nodes.size(), nullptr);
    for (const TimelineEvent& e : t.events) {
        if (e.end < e.start) throw std::runtime_error("event ends before it starts");
        by_resource[e.resource].push_back(&e);
        by_node[static_cast<std::size_t>(e.node)] = &e;
    }
    for (auto& [res, events] : by_resource) {
        std::sort(events.begin(), events.end(),
                  [](const TimelineEvent* a, const TimelineEvent* b) {
                      return a->start < b->start;
                  });
        for (std::size_t i = 1; i < events.size(); ++i) {
            if (events[i]->start < events[i - 1]->end - 1e-12) {
                throw std::runtime_error("overlapping events on one resource: " +
                                         events[i - 1]->name + " and " + events[i]->name);
            }
        }
    }
    for (const TimelineEvent& e : t.events) {
        for (int d : g.at(e.node).deps) {
            if (g.at(d).consumed) continue;
            const TimelineEvent* dep = by_node[static_cast<std::size_t>(d)];
            if (dep == nullptr) throw std::runtime_error("dependency never scheduled");
            if (dep->end > e.start + 1e-12) {
                throw std::runtime_error("dependency violated: " + dep->name + " -> " +
                                         e.name);
            }
        }
    }
}

namespace {

struct Adjacency {
    std::vector<std::vector<int>> succ;

    explicit Adjacency(const OpGraph& g) : succ(successors_of(g)) {}

    // The unique live successor, or -1.
    int sole_succ(int id) const {
        const auto& s = succ[static_cast<std::size_t>(id)];
        return s.size() == 1 ? s[0] : -1;
    }
};

}  // namespace

std::vector<FusedPair> default_fusions(const OpGraph& g) {
    Adjacency adj(g);
    std::vector<FusedPair> pairs;
    std::set<int> taken;

    auto claim = [&](FusedPair p) {
        if (taken.count(p.comm_node) || taken.count(p.compute_node)) return;
        for (int a : p.absorbed) {
            if (taken.count(a)) return;
        }
        taken.insert(p.comm_node);
        taken.insert(p.compute_node);
        for (int a : p.absorbed) taken.insert(a);
        pairs.push_back(std::move(p));
    };

    for (const OpNode& n : g.nodes) {
        if (n.consumed || n.kind != OpKind::collective || n.is_remat) continue;
        const commcost::Collective coll = n.volume.collective;

        if (coll == commcost::Collective::all_to_all ||
            coll == commcost::Collective::all_gather) {
            // comm feeding compute, optionally through one scatter
            int next = adj.sole_succ(n.id);
            std::vector<int> absorbed;
            if (next >= 0 && g.at(next).kind == OpKind::scatter) {
                absorbed.push_back(next);
                next = adj.sole_succ(next);
            }
            if (next >= 0 && is_compute_kind(g.at(next).kind)) {
                FusedPair p;
                p.comm_node = n.id;
                p.compute_node = next;
                p.absorbed = absorbed;
                p.tiles = n.participants;
                claim(std::move(p));
                continue;
            }
        }
        if (coll == commcost::Collective::all_to_all ||
            coll == commcost::Collective::reduce_scatter) {
            // compute feeding comm, optionally through one gather
            int prev = -1;
            for (int d : n.deps) {
                if (!g.at(d).consumed) prev = d;
            }
            std::vector<int> absorbed;
            if (prev >= 0 && g.at(prev).kind == OpKind::gather) {
                absorbed.push_back(prev);
                int pp = -1;
                for (int d : g.at(prev).deps) {
                    if (!g.at(d).consumed) pp = d;
                }
                prev = pp;
            }
            if (prev >= 0 && is_compute_kind(g.at(prev).kind) &&
                adj.sole_succ(prev) >= 0) {
                FusedPair p;
                p.comm_node = n.id;
                p.compute_node = prev;
                p.absorbed = absorbed;
                p.tiles = n.participants;
                claim(std::move(p));
            }
        }
    }
    return pairs;
}

std::vector<FusedPair> beneficial_fusions(const OpGraph& g, const ClusterConfig& cluster) {
    std::vector<FusedPair> kept;
    for (const FusedPair& pair : default_fusions(g)) {
        double unfused = g.at(pair.comm_node).cost + g.at(pair.compute_node).cost;
        for (int a : pair.absorbed) unfused += g.at(a).cost;
        if (fused_overlap_time(g, pair, cluster) < unfused * (1.0 - 1e-12)) {
            kept.push_back(pair);
        }
    }
    return kept;
}

std::vector<FusedPair> select_fusions(const OpGraph& g, std::vector<FusedPair> candidates,
                                      const ClusterConfig& cluster) {
    std::vector<FusedPair> selected;
    double best = schedule(g, ScheduleMode::inter_op).makespan;
    for (FusedPair& pair : candidates) {
        std::vector<FusedPair> trial = selected;
        trial.push_back(std::move(pair));
        const double t =
            schedule(apply_intra_op(g, trial, cluster), ScheduleMode::inter_op).makespan;
        if (t <= best) {
            selected = std::move(trial);
            best = t;
        }
    }
    return selected;
}

std::vector<FusedPair> select_fusions(const OpGraph& g, const ClusterConfig& cluster) {
    return select_fusions(g, beneficial_fusions(g, cluster), cluster);
}

double fused_overlap_time(const OpGraph& g, const FusedPair& pair,
                          const ClusterConfig& cluster) {
    const OpNode& comm = g.at(pair.comm_node);
    const OpNode& compute = g.at(pair.compute_node);
    if (comm.kind != OpKind::collective || !is_compute_kind(compute.kind)) {
        throw std::runtime_error("fusion pair must join one collective with one GEMM-class op");
    }
    double compute_base = compute.cost;
    for (int a : pair.absorbed) compute_base += g.at(a).cost;
    const double unfused = comm.cost + compute_base;

    double comm_scaled = comm.cost;
    double compute_scaled = compute_base;
    if (comm.volume.collective == commcost::Collective::all_to_all) {
        const long long S = cluster.sm_count;
        const long long c = pair.sm_for_comm;
        if (c < 1 || c >= S) throw std::runtime_error("sm_for_comm must lie in [1, sm_count)");
        compute_scaled = compute_base * static_cast<double>(S) / static_cast<double>(S - c);
        const double bw_share = std::min(1.0, static_cast<double>(c) / 16.0);
        comm_scaled = comm.cost / bw_share;
    } else {
        // AG/RS ride the copy engines; compute keeps all SMs.
        comm_scaled = comm.cost * cluster.intra_bw / cluster.effective_copy_engine_bw();
    }

    // Does data flow comm -> compute, or compute -> comm?
    bool comm_first = false;
    {
        std::set<int> members(pair.absorbed.begin(), pair.absorbed.end());
        members.insert(pair.comm_node);
        for (int d : compute.deps) {
            if (members.count(d)) comm_first = true;
        }
        for (int a : pair.absorbed) {
            for (int d : g.at(a).deps) {
                if (d == pair.comm_node) comm_first = true;
            }
        }
    }

    const long long tiles = std::max<long long>(1, pair.tiles);
    const double producer_total = comm_first ? comm_scaled : compute_scaled;
    const double consumer_total = comm_first ? compute_scaled : comm_scaled;
    const double per_tile_consume = consumer_total / static_cast<double>(tiles);

    // Arrival time of each tile's input.
    std::vector<double> arrival;
    arrival.reserve(static_cast<std::size_t>(tiles));
    if (comm_first && pair.layout.has_value() && !pair.layout->tiles.empty()) {
        const long long ranks = std::max<long long>(1, comm.participants);
        const double per_rank = producer_total / static_cast<double>(ranks);
        for (const routing::Tile& tile : pair.layout->tiles) {
            int last_rank = 0;
            for (int r : tile.dependent_ranks) last_rank = std::max(last_rank, r);
            arrival.push_back(static_cast<double>(last_rank + 1) * per_rank);
        }
    } else {
        for (long long i = 0; i < tiles; ++i) {
            arrival.push_back(static_cast<double>(i + 1) * producer_total /
                              static_cast<double>(tiles));
        }
    }
    if (pair.order == OrderPolicy::swizzle) {
        std::sort(arrival.begin(), arrival.end());
    }

    double done = 0.0;
    for (double a : arrival) {
        done = std::max(done, a) + consumer_total *
                                       (1.0 / static_cast<double>(arrival.size()));
    }
    (void)per_tile_consume;
    return std::min(done, unfused);
}

void tune_sm_allocation(const OpGraph& g, std::vector<FusedPair>& fusions,
                        const ClusterConfig& cluster) {
    for (FusedPair& pair : fusions) {
        const OpNode& comm = g.at(pair.comm_node);
        if (comm.volume.collective != commcost::Collective::all_to_all) continue;
        double best = std::numeric_limits<double>::infinity();
        long long best_c = pair.sm_for_comm;
        for (long long c = 1; c < cluster.sm_count; ++c) {
            FusedPair trial = pair;
            trial.sm_for_comm = c;
            const double t = fused_overlap_time(g, trial, cluster);
            if (t < best) {
                best = t;
                best_c = c;
            }
        }
        pair.sm_for_comm = best_c;
    }
}

OpGraph apply_intra_op(const OpGraph& g, const std::vector<FusedPair>& fusions,
                       const ClusterConfig& cluster) {
    OpGraph out = g;
    for (const FusedPair& pair : fusions) {
        std::set<int> members(pair.absorbed.begin(), pair.absorbed.end());
        members.insert(pair.comm_node);
        members.insert(pair.compute_node);
        for (int id : members) {
            if (id < 0 || id >= static_cast<int>(out.nodes.size())) {
                throw std::runtime_error("fusion references a node outside the graph");
            }
            if (out.at(id).consumed) {
                throw std::runtime_error("fusion reuses a node already fused: " +
                                         out.at(id).name);
            }
        }
        const double cost = fused_overlap_time(out, pair, cluster);

        OpNode fused;
        fused.kind = OpKind::fused;
        fused.name = out.at(pair.comm_node).name + "+" + out.at(pair.compute_node).name;
        fused.cost = cost;
        fused.stream = StreamClass::compute;
        fused.token_rows = out.at(pair.compute_node).token_rows;
        fused.flops = out.at(pair.compute_node).flops;
        fused.bytes_moved = out.at(pair.comm_node).volume.bytes;
        std::set<int> external;
        for (int id : members) {
            for (int d : out.at(id).deps) {
                if (!members.count(d)) external.insert(d);
            }
        }
        fused.deps.assign(external.begin(), external.end());
        const int fid = out.add(std::move(fused));

        for (int id : members) out.nodes[static_cast<std::size_t>(id)].consumed = true;
        for (OpNode& n : out.nodes) {
            if (n.id == fid || n.consumed) continue;
            bool touched = false;
            for (int& d : n.deps) {
                if (members.count(d)) {
                    d = fid;
                    touched = true;
                }
            }
            if (touched) {
                std::sort(n.deps.begin(), n.deps.end());
                n.deps.erase(std::unique(n.deps.begin(), n.deps.end()), n.deps.end());
            }
        }
    }
    return out;
}

}  // namespace moeplan::simsched
