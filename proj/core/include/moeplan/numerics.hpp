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
#include <string>
#include <vector>

#include "moeplan/config.hpp"

namespace moeplan::numerics {

// Software emulation of low-precision rounding, round-to-nearest-even.
// BF16 = (8 exponent, 7 mantissa) bits, overflow goes to infinity.
// E4M3 = (4, 3) with max finite 448; overflow saturates (no infinities in
// the format's training use). fp32 rounds through a float cast. NaN
// passes through. Subnormals are honored.
double round_to(Format fmt, double x);

double max_finite(Format fmt);

enum class Granularity { per_tensor, per_token, per_channel, grouped };

Granularity granularity_from_name(const std::string& name);
const char* granularity_name(Granularity g);

// Block layout: per_tensor = one block; per_token = one block per row;
// per_channel = one block per column (channel = hidden-dimension column);
// grouped = each row split into ceil(cols/group_size) column groups.
struct QuantScheme {
    Granularity granularity = Granularity::per_token;
    long long group_size = 128;  // grouped only
};

struct Quantized {
    long long rows = 0;
    long long cols = 0;
    QuantScheme scheme;
    Format fmt = Format::fp8_e4m3;
    std::vector<double> codes;   // representable values of fmt, x/scale rounded
    std::vector<double> scales;  // one per block; 1 for all-zero blocks

    long long block_of(long long r, long long c) const;
    std::vector<double> dequantize() const;  // codes * block scale
};

// scale = absmax(block) / max_finite(fmt); codes = round_to(fmt, x/scale).
Quantized quantize(const std::vector<double>& x, long long rows, long long cols,
                   const QuantScheme& scheme, Format fmt);

enum class ReduceKind { ring_bf16, a2a_fp32 };

ReduceKind reduce_kind_from_name(const std::string& name);
const char* reduce_kind_name(ReduceKind k);

// Elementwise reduction of one gradient shard across ranks. Every input
// is first rounded to BF16 (it arrives in BF16 either way).
//   ring_bf16: sequential adds; every partial sum that travels another
//              hop is rounded back to BF16, so ranks-2 intermediate
//              roundings. Two ranks therefore match a2a_fp32 exactly.
//   a2a_fp32:  the rounded inputs are summed in a wide accumulator
//              (binary64 here; the fp32-vs-fp64 accumulator difference is
//              negligible at this scale).
std::vector<double> emulate_reduce(const std::vector<std::vector<double>>& vectors,
                                   ReduceKind kind);

// Relative L2 error of a reduction emulation against the exact binary64
// sum of the unrounded inputs.
double reduce_rel_error(const std::vector<std::vector<double>>& vectors, ReduceKind kind);

// Whether the token-wise expert gating weights multiply into the FC2
// input (before quantization) or are deferred past the FC2 output.
enum class GateOrder { before_fc2_in, after_fc2_out };

GateOrder gate_order_from_name(const std::string& name);
const char* gate_order_name(GateOrder g);

struct RangeReport {
    double in_absmax = 0.0;
    double out_absmax = 0.0;
    // absmax over smallest nonzero magnitude of the block; 1 when the
    // block is all zero.
    double in_dynamic_range = 1.0;
    double out_dynamic_range = 1.0;
    double range_ratio = 1.0;      // out over in dynamic range
    double per_token_mse = 0.0;    // E4M3 quantization error of the FC2 input
    double per_tensor_mse = 0.0;
};

// SwiGLU(a, b) = a * silu(b) over rows of x = [a | b] (cols must be
// even). before_fc2_in additionally multiplies each row by a seeded
// gating weight in (0, 1] before measuring, widening the dynamic range
// the quantizer must cover. Deterministic given seed.
RangeReport swiglu_range_probe(const std::vector<double>& x, long long rows, long long cols,
                               GateOrder order, std::uint64_t seed);

}  // namespace moeplan::numerics
