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
#include "moeplan/rational.hpp"

namespace moeplan::memmodel {

struct MemoryBreakdown {
    Rat params = Rat(0);          // bytes
    Rat grads = Rat(0);
    Rat optimizer = Rat(0);
    Rat activations = Rat(0);
    Rat transient_peak = Rat(0);
    Rat total = Rat(0);

    double total_bytes() const { return to_double(total); }
};

// Which activations are kept across forward and which are re-derived
// during backward. The default split retains the expensive GroupedGEMM
// inputs/outputs and recomputes the norm, gather and SwiGLU products.
struct RematPolicy {
    bool enabled = false;
    std::vector<std::string> retained_set;
    std::vector<std::string> recompute_set;

    static RematPolicy off();
    static RematPolicy selective();
};

enum class DpCompress { off, naive, inplace };

// Full activation footprint of one MoE layer, in elements:
// (2n + 2k + 3kf + 12 + 5/m) * b*s*h / n.
Rat activation_full(long long b, long long s, long long h, long long n, long long k,
                    const Rat& f, long long m);

// Footprint with selective rematerialization: (2kf + 4 + 2/m) * b*s*h / n.
Rat activation_remat(long long b, long long s, long long h, long long n, long long k,
                     const Rat& f, long long m);

struct ParamStateBytes {
    Rat params = Rat(0);
    Rat grads = Rat(0);
    Rat optimizer = Rat(0);
};

// Per-GPU parameter, gradient, and optimizer-state bytes for one pipeline
// stage of the model. Attention weights are replicated under SP/CP and
// sharded under TP; expert weights are sharded by EP or TP identically in
// volume. Optimizer states are FP32 main params plus two moments, divided
// by d under ZeRO stage 1. Gradients are accumulated in FP32.
ParamStateBytes param_state_memory(const ParallelismPlan& plan, const ModelConfig& model,
                                   const PrecisionConfig& precision);

// Peak per-GPU memory under the plan. Activation bytes multiply by layers
// per stage and by the in-flight micro-batch depth min(pp, microbatches)
// of the interleaved 1F1B schedule. DP compression adds grad/2 transient
// bytes in the naive variant and nothing in the in-place variant.
MemoryBreakdown peak_memory(const ParallelismPlan& plan, const ModelConfig& model,
                            const PrecisionConfig& precision, const JobConfig& job,
                            const RematPolicy& remat, DpCompress dp_compress);

}  // namespace moeplan::memmodel
