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

#include "moeplan/commcost.hpp"
#include "moeplan/config.hpp"
#include "moeplan/plan_types.hpp"
#include "moeplan/simsched.hpp"

namespace moeplan::planner {

struct PlanScore {
    ParallelismPlan plan;
    bool feasible = false;
    std::string rejection;           // why, when infeasible
    Rat attn_volume = Rat(0);        // elements per layer, exact
    Rat ffn_volume = Rat(0);
    bool volume_estimate = false;    // CP attention volume is an estimate
    double layer_comm_time = 0.0;    // analytic, unoverlapped, seconds
    double peak_mem_bytes = 0.0;     // with selective rematerialization
    double iteration_time = 0.0;     // simulated, feasible plans only
    double mfu = 0.0;
};

// Analytic activation communication volume per layer for one side of the
// plan, in elements.
Rat attention_volume(AttnStrategy attn, const ModelConfig& model, long long n);
Rat ffn_volume(FfnStrategy ffn, commcost::EpPattern pattern, const ModelConfig& model,
               long long n);

// Scores one plan: checks divisibility and memory-capacity constraints,
// then simulates an iteration. Attention DP is always rejected: it
// duplicates the FFN input activations and gradients n-fold for no
// communication saving over SP.
PlanScore score_plan(const ParallelismPlan& plan, const Config& config);

// All attention x FFN strategy combinations (and both EP dispatch
// patterns) at the given parallel sizes, scored. Rejected candidates are
// included with their rejection reason.
std::vector<PlanScore> enumerate_plans(const Config& config, long long n, long long pp,
                                       long long vpp, long long dp);

// Cheaper EP dispatch pattern under the cluster's link model; exact ties
// go to a2a, which moves strictly fewer bytes on the wire.
commcost::EpPattern select_ep_pattern(const Config& config, long long n);

// Compute-to-communication balance of the scale-up domain for the MoE FFN.
struct ScaleUpReport {
    double comm_time = 0.0;    // dispatch + combine, seconds per layer
    double comp_time = 0.0;    // expert GEMMs, seconds per layer
    double ratio = 0.0;        // comp / comm
    double ratio_approx = 0.0; // n-independent approximation 1.5*h_ffn*bw/peak
};

ScaleUpReport scale_up_ratio(const Config& config, long long n);

// Lowest simulated iteration time among feasible candidates with
// n = gpus_per_node, pp/vpp from the job config and dp covering the rest.
// Throws when nothing is feasible.
PlanScore best_plan(const Config& config);

}  // namespace moeplan::planner
