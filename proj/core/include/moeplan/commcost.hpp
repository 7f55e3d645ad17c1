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

#include <vector>

#include "moeplan/config.hpp"
#include "moeplan/rational.hpp"

namespace moeplan::commcost {

enum class Tier { intra, inter };
enum class Collective { all_gather, reduce_scatter, all_to_all };

const char* tier_name(Tier t);
const char* collective_name(Collective c);

// Alpha-beta latency model over the two bandwidth tiers. AG/RS are costed
// as ring collectives; all-to-all carries a calibratable penalty factor
// (default 1.4, chosen so the a2a vs ag_rs dispatch crossover for
// Mixtral-8x7B geometry lands near top-k = 6).
struct LinkModel {
    double alpha_intra = 2e-6;   // seconds
    double beta_intra = 1.0 / 400e9;  // seconds/byte
    double alpha_inter = 1e-5;
    double beta_inter = 1.0 / 50e9;
    double a2a_penalty = 1.4;

    static LinkModel from_cluster(const ClusterConfig& cluster);
};

struct CommVolume {
    Rat elements = Rat(0);
    long long bytes = 0;
    Tier tier = Tier::intra;
    Collective collective = Collective::all_gather;
};

CommVolume make_volume(const Rat& elements, int bytes_per_elem, Tier tier, Collective coll);

// Closed-form activation communication volumes, in elements, exact.
// All take the per-rank parallel size n; n = 1 means no communication.

// TP attention: 2*b*s*h*(n-1)/n (one all-gather + one reduce-scatter).
Rat attention_tp_volume(long long b, long long s, long long h, long long n);

// SP (Ulysses) attention: the TP volume scaled by (2+2/m)/n.
Rat attention_sp_volume(long long b, long long s, long long h, long long n, long long m);

// CP attention, volume estimate only: K and V all-gathered across ranks,
// 2*b*s*(h/m)*(n-1)/n. Reports must carry the `estimate` marker.
Rat attention_cp_volume(long long b, long long s, long long h, long long n, long long m);

// EP token dispatch + combine: 2*(k/n)*b*s*h*(n-1)/n.
Rat ffn_ep_volume(long long b, long long s, long long h, long long n, long long k);

// TP FFN: same expression as TP attention.
Rat ffn_tp_volume(long long b, long long s, long long h, long long n);

// Time for one collective moving `bytes` of payload among `participants`
// ranks on the selected tier. Payload is the per-rank data size the
// collective operates on; the ring factor (p-1)/p is applied here.
double collective_time(Collective coll, Tier tier, double bytes, long long participants,
                       const LinkModel& link);

double collective_time(const CommVolume& v, long long participants, const LinkModel& link);

enum class EpPattern { a2a, ag_rs };
const char* ep_pattern_name(EpPattern p);

// Token dispatch + combine time for one MoE layer under the chosen EP
// communication pattern, intra tier.
//   a2a:   two all-to-alls, each with per-rank payload k*b*s*h/n elements
//          (total moved volume element-exact with ffn_ep_volume).
//   ag_rs: one all-gather plus one reduce-scatter, each of the full
//          b*s*h activation (total matches ffn_tp_volume).
double ep_dispatch_time(EpPattern pattern, long long b, long long s, long long h,
                        long long n, long long k, const LinkModel& link,
                        int bytes_per_elem);

struct SyncStep {
    Collective collective;
    Tier tier;
    Rat bytes;            // per-rank payload handed to the collective
    long long participants;
};

// Parameter-synchronization plan for attention weights of size P bytes,
// model-parallel size n, data-parallel size d.
struct SyncPlan {
    std::vector<SyncStep> steps;
    Rat inter_volume = Rat(0);  // bytes moved on the inter tier
    Rat intra_volume = Rat(0);  // bytes moved on the intra tier
};

enum class SyncStrategy { tp, sp };

// TP: inter RS(P/n) + inter AG(P/n) over d ranks.
// SP: intra RS(P) over n, then the TP steps, then intra AG(P) over n.
// Both strategies move exactly 2*(P/n)*(d-1)/d bytes on the inter tier.
SyncPlan hierarchical_sync_plan(long long param_bytes, long long n, long long d,
                                SyncStrategy strategy);

// Unpipelined wall time of a sync plan: its steps priced sequentially.
double sync_plan_time(const SyncPlan& plan, const LinkModel& link);

// Ratio of inter-node to intra-node latency in the pipelined hierarchical
// synchronization: (1/n)*(intra_bw/inter_bw)*(n*(d-1))/(d*(n-1)).
Rat hierarchical_ratio(long long n, long long d, const Rat& intra_over_inter_bw);
double hierarchical_ratio(long long n, long long d, double intra_bw, double inter_bw);

// The d -> infinity limit of the above: (intra/inter)/(n-1).
Rat hierarchical_ratio_limit(long long n, const Rat& intra_over_inter_bw);

struct DpSyncCost {
    double seconds = 0.0;
    long long bytes_on_wire = 0;  // per-rank payload handed to collectives
};

// DP gradient synchronization per stage. Uncompressed: FP32 reduce-scatter
// + all-gather. Compressed: BF16 all-to-all + all-gather, exactly half the
// bytes.
DpSyncCost dp_sync_time(long long grad_bytes_fp32, long long d, const LinkModel& link,
                        bool compressed);

}  // namespace moeplan::commcost
