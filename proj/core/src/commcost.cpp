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
#include "moeplan/commcost.hpp"

#include <stdexcept>

namespace moeplan::commcost {

const char* tier_name(Tier t) { return t == Tier::intra ? "intra" : "inter"; }

const char* collective_name(Collective c) {
    switch (c) {
        case Collective::all_gather: return "all_gather";
        case Collective::reduce_scatter: return "reduce_scatter";
        case Collective::all_to_all: return "all_to_all";
    }
    return "?";
}

const char* ep_pattern_name(EpPattern p) { return p == EpPattern::a2a ? "a2a" : "ag_rs"; }

LinkModel LinkModel::from_cluster(const ClusterConfig& cluster) {
    LinkModel link;
    link.alpha_intra = cluster.alpha_intra;
    link.beta_intra = 1.0 / cluster.intra_bw;
    link.alpha_inter = cluster.alpha_inter;
    link.beta_inter = 1.0 / cluster.inter_bw;
    link.a2a_penalty = cluster.a2a_penalty;
    return link;
}

CommVolume make_volume(const Rat& elements, int bytes_per_elem, Tier tier, Collective coll) {
    if (elements < Rat(0)) throw std::domain_error("negative communication volume");
    CommVolume v;
    v.elements = elements;
    v.bytes = to_integer(elements * bytes_per_elem);
    v.tier = tier;
    v.collective = coll;
    return v;
}

namespace {
void require_ranks(long long n, const char* what) {
    if (n < 1) throw std::domain_error(std::string(what) + " must be >= 1");
}
}  // namespace

Rat attention_tp_volume(long long b, long long s, long long h, long long n) {
    require_ranks(n, "n");
    return rat(2) * b * s * h * rat(n - 1, n);
}

Rat attention_sp_volume(long long b, long long s, long long h, long long n, long long m) {
    require_ranks(n, "n");
    require_ranks(m, "m");
    return attention_tp_volume(b, s, h, n) * (rat(2) + rat(2, m)) / n;
}

Rat attention_cp_volume(long long b, long long s, long long h, long long n, long long m) {
    require_ranks(n, "n");
    require_ranks(m, "m");
    return rat(2) * b * s * rat(h, m) * rat(n - 1, n);
}

Rat ffn_ep_volume(long long b, long long s, long long h, long long n, long long k) {
    require_ranks(n, "n");
    require_ranks(k, "k");
    return rat(2) * rat(k, n) * b * s * h * rat(n - 1, n);
}

Rat ffn_tp_volume(long long b, long long s, long long h, long long n) {
    return attention_tp_volume(b, s, h, n);
}

double collective_time(Collective coll, Tier tier, double bytes, long long participants,
                       const LinkModel& link) {
    require_ranks(participants, "participants");
    if (participants == 1) return 0.0;
    const double alpha = tier == Tier::intra ? link.alpha_intra : link.alpha_inter;
    const double beta = tier == Tier::intra ? link.beta_intra : link.beta_inter;
    const double p = static_cast<double>(participants);
    const double wire = bytes * beta * (p - 1.0) / p;
    switch (coll) {
        case Collective::all_gather:
        case Collective::reduce_scatter:
            return alpha * (p - 1.0) + wire;
        case Collective::all_to_all:
            return (alpha + wire) * link.a2a_penalty;
    }
    throw std::logic_error("unknown collective");
}

double collective_time(const CommVolume& v, long long participants, const LinkModel& link) {
    return collective_time(v.collective, v.tier, static_cast<double>(v.bytes), participants,
                           link);
}

double ep_dispatch_time(EpPattern pattern, long long b, long long s, long long h,
                        long long n, long long k, const LinkModel& link,
                        int bytes_per_elem) {
    require_ranks(n, "n");
    require_ranks(k, "k");
    if (pattern == EpPattern::a2a) {
        const double payload = to_double(rat(k, n) * b * s * h) * bytes_per_elem;
        return 2.0 *
               collective_time(Collective::all_to_all, Tier::intra, payload, n, link);
    }
    const double payload =
        static_cast<double>(b) * static_cast<double>(s) * static_cast<double>(h) *
        bytes_per_elem;
    return collective_time(Collective::all_gather, Tier::intra, payload, n, link) +
           collective_time(Collective::reduce_scatter, Tier::intra, payload, n, link);
}

SyncPlan hierarchical_sync_plan(long long param_bytes, long long n, long long d,
                                SyncStrategy strategy) {
    require_ranks(n, "n");
    require_ranks(d, "d");
    SyncPlan plan;
    const Rat shard = rat(param_bytes, n);
    const Rat inter_per_step = shard * rat(d - 1, d);

    // With n = 1 the SP plan degenerates to the TP plan: the intra steps
    // would be self-communications.
    const bool sp = strategy == SyncStrategy::sp && n > 1;
    if (sp) {
        plan.steps.push_back({Collective::reduce_scatter, Tier::intra, rat(param_bytes), n});
    }
    plan.steps.push_back({Collective::reduce_scatter, Tier::inter, shard, d});
    plan.steps.push_back({Collective::all_gather, Tier::inter, shard, d});
    if (sp) {
        plan.steps.push_back({Collective::all_gather, Tier::intra, rat(param_bytes), n});
    }

    plan.inter_volume = Rat(2) * inter_per_step;
    plan.intra_volume = sp ? Rat(2) * rat(param_bytes) * rat(n - 1, n) : Rat(0);
    return plan;
}

double sync_plan_time(const SyncPlan& plan, const LinkModel& link) {
    double total = 0.0;
    for (const SyncStep& step : plan.steps) {
        total += collective_time(step.collective, step.tier, to_double(step.bytes),
                                 step.participants, link);
    }
    return total;
}

Rat hierarchical_ratio(long long n, long long d, const Rat& intra_over_inter_bw) {
    if (n < 2) throw std::domain_error("hierarchical_ratio requires n >= 2");
    if (d < 2) throw std::domain_error("hierarchical_ratio requires d >= 2");
    return rat(1, n) * intra_over_inter_bw * rat(n * (d - 1), d * (n - 1));
}

double hierarchical_ratio(long long n, long long d, double intra_bw, double inter_bw) {
    if (inter_bw <= 0.0) throw std::domain_error("inter_bw must be > 0");
    if (n < 2) throw std::domain_error("hierarchical_ratio requires n >= 2");
    if (d < 2) throw std::domain_error("hierarchical_ratio requires d >= 2");
    return (1.0 / static_cast<double>(n)) * (intra_bw / inter_bw) *
           (static_cast<double>(n) * static_cast<double>(d - 1)) /
           (static_cast<double>(d) * static_cast<double>(n - 1));
}

Rat hierarchical_ratio_limit(long long n, const Rat& intra_over_inter_bw) {
    if (n < 2) throw std::domain_error("hierarchical_ratio_limit requires n >= 2");
    return intra_over_inter_bw / rat(n - 1);
}

DpSyncCost dp_sync_time(long long grad_bytes_fp32, long long d, const LinkModel& link,
                        bool compressed) {
    require_ranks(d, "d");
    DpSyncCost cost;
    if (d == 1) return cost;
    if (compressed) {
        const double half = static_cast<double>(grad_bytes_fp32) / 2.0;
        cost.bytes_on_wire = grad_bytes_fp32;  // two collectives of half size each
        cost.seconds =
            collective_time(Collective::all_to_all, Tier::inter, half, d, link) +
            collective_time(Collective::all_gather, Tier::inter, half, d, link);
    } else {
        const double full = static_cast<double>(grad_bytes_fp32);
        cost.bytes_on_wire = 2 * grad_bytes_fp32;
        cost.seconds =
            collective_time(Collective::reduce_scatter, Tier::inter, full, d, link) +
            collective_time(Collective::all_gather, Tier::inter, full, d, link);
    }
    return cost;
}

}  // namespace moeplan::commcost
