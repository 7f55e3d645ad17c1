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

#include "moeplan/commcost.hpp"

namespace moeplan {

enum class AttnStrategy { tp, sp, cp, dp };
enum class FfnStrategy { tp, ep };

const char* attn_strategy_name(AttnStrategy s);
const char* ffn_strategy_name(FfnStrategy s);
AttnStrategy attn_strategy_from_name(const std::string& name);
FfnStrategy ffn_strategy_from_name(const std::string& name);

// One point in the parallelism design space: intra-node strategies for
// attention and FFN, the EP communication pattern, and the outer PP/DP
// split. n * pp * dp must equal the total GPU count.
struct ParallelismPlan {
    AttnStrategy attn = AttnStrategy::sp;
    FfnStrategy ffn = FfnStrategy::ep;
    commcost::EpPattern ep_pattern = commcost::EpPattern::a2a;
    long long n = 1;    // intra-node model-parallel size
    long long pp = 1;
    long long vpp = 1;
    long long dp = 1;
    int zero_stage = 0;

    std::string label() const;
};

}  // namespace moeplan
