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
#include "moeplan/numerics.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace moeplan::numerics {

namespace {

struct FloatSpec {
    int mantissa_bits;
    int min_exponent;   // unbiased exponent of the smallest normal
    double max_finite;
    bool saturate;      // E4M3 has no infinities in training use
};

FloatSpec spec_of(Format fmt) {
    switch (fmt) {
        case Format::bf16:
            return {7, -126, std::ldexp(2.0 - std::ldexp(1.0, -7), 127), false};
        case Format::fp8_e4m3:
            return {3, -6, 448.0, true};
        case Format::fp32:
            return {23, -126, static_cast<double>(std::numeric_limits<float>::max()), false};
    }
    throw std::logic_error("unknown format");
}

}  // namespace

double max_finite(Format fmt) { return spec_of(fmt).max_finite; }

double round_to(Format fmt, double x) {
    if (std::isnan(x)) return x;
    if (fmt == Format::fp32) return static_cast<double>(static_cast<float>(x));
    if (x == 0.0 || std::isinf(x)) return x;
    const FloatSpec spec = spec_of(fmt);

    int e = 0;
    std::frexp(std::fabs(x), &e);  // |x| = f * 2^e with f in [0.5, 1)
    int unbiased = e - 1;
    if (unbiased < spec.min_exponent) unbiased = spec.min_exponent;  // subnormal range
    const double quantum = std::ldexp(1.0, unbiased - spec.mantissa_bits);
    // nearbyint under the default rounding mode is round-to-nearest-even.
    const double r = std::nearbyint(x / quantum) * quantum;
    if (std::fabs(r) > spec.max_finite) {
        return spec.saturate ? std::copysign(spec.max_finite, x)
                             : std::copysign(std::numeric_limits<double>::infinity(), x);
    }
    return r;
}

Granularity granularity_from_name(const std::string& name) {
    if (name == "per_tensor") return Granularity::per_tensor;
    if (name == "per_token") return Granularity::per_token;
    if (name == "per_channel") return Granularity::per_channel;
    if (name == "grouped") return Granularity::grouped;
    throw std::runtime_error("unknown quantization granularity: " + name);
}

const char* granularity_name(Granularity g) {
    switch (g) {
        case Granularity::per_tensor: return "per_tensor";
        case Granularity::per_token: return "per_token";
        case Granularity::per_channel: return "per_channel";
        case Granularity::grouped: return "grouped";
    }
    return "?";
}

long long Quantized::block_of(long long r, long long c) const {
    switch (scheme.granularity) {
        case Granularity::per_tensor: return 0;
        case Granularity::per_token: return r;
        case Granularity::per_channel: return c;
        case Granularity::grouped: {
            const long long groups_per_row =
                (cols + scheme.group_size - 1) / scheme.group_size;
            return r * groups_per_row + c / scheme.group_size;
        }
    }
    throw std::logic_error("unknown granularity");
}

std::vector<double> Quantized::dequantize() const {
    std::vector<double> out(codes.size());
    for (long long r = 0; r < rows; ++r) {
        for (long long c = 0; c < cols; ++c) {
            const std::size_t i = static_cast<std::size_t>(r * cols + c);
            out[i] = codes[i] * scales[static_cast<std::size_t>(block_of(r, c))];
        }
    }
    return out;
}

Quantized quantize(const std::vector<double>& x, long long rows, long long cols,
                   const QuantScheme& scheme, Format fmt) {
    if (rows < 0 || cols < 0 ||
        x.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw std::domain_error("tensor shape does not match data size");
    }
    if (scheme.granularity == Granularity::grouped && scheme.group_size < 1) {
        throw std::domain_error("group_size must be >= 1");
    }

    Quantized q;
    q.rows = rows;
    q.cols = cols;
    q.scheme = scheme;
    q.fmt = fmt;

    long long num_blocks = 1;
    switch (scheme.granularity) {
        case Granularity::per_tensor: num_blocks = 1; break;
        case Granularity::per_token: num_blocks = rows; break;
        case Granularity::per_channel: num_blocks = cols; break;
        case Granularity::grouped:
            num_blocks = rows * ((cols + scheme.group_size - 1) / scheme.group_size);
            break;
    }
    std::vector<double> absmax(static_cast<std::size_t>(std::max<long long>(num_blocks, 1)),
                               0.0);
    for (long long r = 0; r < rows; ++r) {
        for (long long c = 0; c < cols; ++c) {
            const double v = std::fabs(x[static_cast<std::size_t>(r * cols + c)]);
            auto& m = absmax[static_cast<std::size_t>(q.block_of(r, c))];
            if (v > m) m = v;
        }
    }
    q.scales.resize(absmax.size());
    for (std::size_t b = 0; b < absmax.size(); ++b) {
        q.scales[b] = absmax[b] > 0.0 ? absmax[b] / max_finite(fmt) : 1.0;
    }
    q.codes.resize(x.size());
    for (long long r = 0; r < rows; ++r) {
        for (long long c = 0; c < cols; ++c) {
            const std::size_t i = static_cast<std::size_t>(r * cols + c);
            q.codes[i] =
                round_to(fmt, x[i] / q.scales[static_cast<std::size_t>(q.block_of(r, c))]);
        }
    }
    return q;
}

ReduceKind reduce_kind_from_name(const std::string& name) {
    if (name == "ring_bf16") return ReduceKind::ring_bf16;
    if (name == "a2a_fp32") return ReduceKind::a2a_fp32;
    throw std::runtime_error("unknown reduce scheme: " + name);
}

const char* reduce_kind_name(ReduceKind k) {
    return k == ReduceKind::ring_bf16 ? "ring_bf16" : "a2a_fp32";
}

std::vector<double> emulate_reduce(const std::vector<std::vector<double>>& vectors,
                                   ReduceKind kind) {
    if (vectors.size() < 2) throw std::domain_error("reduction needs at least 2 ranks");
    const std::size_t dim = vectors.front().size();
    for (const auto& v : vectors) {
        if (v.size() != dim) throw std::domain_error("rank vectors differ in dimension");
    }
    const std::size_t ranks = vectors.size();
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        double acc = round_to(Format::bf16, vectors[0][i]);
        for (std::size_t r = 1; r < ranks; ++r) {
            acc += round_to(Format::bf16, vectors[r][i]);
            if (kind == ReduceKind::ring_bf16 && r + 1 < ranks) {
                acc = round_to(Format::bf16, acc);
            }
        }
        out[i] = acc;
    }
    return out;
}

double reduce_rel_error(const std::vector<std::vector<double>>& vectors, ReduceKind kind) {
    const std::vector<double> approx = emulate_reduce(vectors, kind);
    double err2 = 0.0;
    double ref2 = 0.0;
    for (std::size_t i = 0; i < approx.size(); ++i) {
        double exact = 0.0;
        for (const auto& v : vectors) exact += v[i];
        const double d = approx[i] - exact;
        err2 += d * d;
        ref2 += exact * exact;
    }
    return ref2 > 0.0 ? std::sqrt(err2 / ref2) : std::sqrt(err2);
}

GateOrder gate_order_from_name(const std::string& name) {
    if (name == "before_fc2_in") return GateOrder::before_fc2_in;
    if (name == "after_fc2_out") return GateOrder::after_fc2_out;
    throw std::runtime_error("unknown gate order: " + name);
}

const char* gate_order_name(GateOrder g) {
    return g == GateOrder::before_fc2_in ? "before_fc2_in" : "after_fc2_out";
}

namespace {

double silu(double v) { return v / (1.0 + std::exp(-v)); }

void absmax_and_range(const std::vector<double>& v, double& absmax, double& range) {
    absmax = 0.0;
    double min_nonzero = std::numeric_limits<double>::infinity();
    for (double e : v) {
        const double a = std::fabs(e);
        if (a > absmax) absmax = a;
        if (a > 0.0 && a < min_nonzero) min_nonzero = a;
    }
    range = (absmax > 0.0 && std::isfinite(min_nonzero)) ? absmax / min_nonzero : 1.0;
}

double quant_mse(const std::vector<double>& v, long long rows, long long cols,
                 Granularity g) {
    QuantScheme scheme;
    scheme.granularity = g;
    const Quantized q = quantize(v, rows, cols, scheme, Format::fp8_e4m3);
    const std::vector<double> back = q.dequantize();
    double mse = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = back[i] - v[i];
        mse += d * d;
    }
    return v.empty() ? 0.0 : mse / static_cast<double>(v.size());
}

}  // namespace

RangeReport swiglu_range_probe(const std::vector<double>& x, long long rows, long long cols,
                               GateOrder order, std::uint64_t seed) {
    if (cols % 2 != 0) throw std::domain_error("cols must be even: rows are [a | b] pairs");
    if (x.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw std::domain_error("tensor shape does not match data size");
    }
    const long long half = cols / 2;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> gate_weight(0.01, 1.0);

    std::vector<double> out(static_cast<std::size_t>(rows) *
                            static_cast<std::size_t>(half));
    for (long long r = 0; r < rows; ++r) {
        const double w = gate_weight(rng);  // drawn per row regardless of order
        for (long long c = 0; c < half; ++c) {
            const double a = x[static_cast<std::size_t>(r * cols + c)];
            const double b = x[static_cast<std::size_t>(r * cols + half + c)];
            double v = a * silu(b);
            if (order == GateOrder::before_fc2_in) v *= w;
            out[static_cast<std::size_t>(r * half + c)] = v;
        }
    }

    RangeReport report;
    absmax_and_range(x, report.in_absmax, report.in_dynamic_range);
    absmax_and_range(out, report.out_absmax, report.out_dynamic_range);
    report.range_ratio =
        report.out_absmax > 0.0 ? report.out_dynamic_range / report.in_dynamic_range : 1.0;
    report.per_token_mse = quant_mse(out, rows, half, Granularity::per_token);
    report.per_tensor_mse = quant_mse(out, rows, half, Granularity::per_tensor);
    return report;
}

}  // namespace moeplan::numerics
