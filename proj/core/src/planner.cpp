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
#include <stdexcept>

#include "moeplan/memmodel.hpp"
#include "moeplan/planner.hpp"

namespace moeplan {

const char* attn_strategy_name(AttnStrategy s) {
    switch (s) {
        case AttnStrategy::tp: return "tp";
        case AttnStrategy::sp: return "sp";
        case AttnStrategy::cp: return "cp";
        case AttnStrategy::dp: return "dp";
    }
    return "?";
}

const char* ffn_strategy_name(FfnStrategy s) {
    switch (s) {
        case FfnStrategy::tp: return "tp";
        case FfnStrategy::ep: return "ep";
    }
    return "?";
}

AttnStrategy attn_strategy_from_name(const std::string& name) {
    if (name == "tp") return AttnStrategy::tp;
    if (name == "sp") return AttnStrategy::sp;
    if (name == "cp") return AttnStrategy::cp;
    if (name == "dp") return AttnStrategy::dp;
    throw std::runtime_error("unknown attention strategy: " + name);
}

FfnStrategy ffn_strategy_from_name(const std::string& name) {
    if (name == "tp") return FfnStrategy::tp;
    if (name == "ep") return FfnStrategy::ep;
    throw std::runtime_error("unknown FFN strategy: " + name);
}

std::string ParallelismPlan::label() const {
    std::string s = "attn=";
    s += attn_strategy_name(attn);
    s += ",ffn=";
    s += ffn_strategy_name(ffn);
    if (ffn == FfnStrategy::ep) {
        s += "(";
        s += commcost::ep_pattern_name(ep_pattern);
        s += ")";
    }
    s += ",n=" + std::to_string(n);
    s += ",pp=" + std::to_string(pp);
    s += ",vpp=" + std::to_string(vpp);
    s += ",dp=" + std::to_string(dp);
    s += ",zero=" + std::to_string(zero_stage);
    return s;
}

}  // namespace moeplan

namespace moeplan::planner {

Rat attention_volume(AttnStrategy attn, const ModelConfig& model, long long n) {
    const long long b = model.micro_batch;
    const long long s = model.seq_len;
    const long long h = model.hidden_size;
    switch (attn) {
        case AttnStrategy::tp:
            return commcost::attention_tp_volume(b, s, h, n);
        case AttnStrategy::sp:
            return commcost::attention_sp_volume(b, s, h, n, model.query_kv_ratio);
        case AttnStrategy::cp:
            return commcost::attention_cp_volume(b, s, h, n, model.query_kv_ratio);
        case AttnStrategy::dp:
            return Rat(0);
    }
    throw std::logic_error("unknown attention strategy");
}

Rat ffn_volume(FfnStrategy ffn, commcost::EpPattern pattern, const ModelConfig& model,
               long long n) {
    const long long b = model.micro_batch;
    const long long s = model.seq_len;
    const long long h = model.hidden_size;
    if (ffn == FfnStrategy::tp) return commcost::ffn_tp_volume(b, s, h, n);
    if (pattern == commcost::EpPattern::a2a) {
        return commcost::ffn_ep_volume(b, s, h, n, model.top_k);
    }
    // The AG/RS dispatch moves the full activation, same as TP.
    return commcost::ffn_tp_volume(b, s, h, n);
}

namespace {

double analytic_comm_time(const ParallelismPlan& plan, const Config& config) {
    const ModelConfig& m = config.model;
    const auto link = commcost::LinkModel::from_cluster(config.cluster);
    const int bpe = bytes_per_element(config.precision.tp_comm_format);
    const long long n = plan.n;
    const long long b = m.micro_batch;
    const long long s = m.seq_len;
    const long long h = m.hidden_size;

    double attn = 0.0;
    if (n > 1) {
        switch (plan.attn) {
            case AttnStrategy::tp: {
                const double payload = static_cast<double>(b) * s * h * bpe;
                attn = commcost::collective_time(commcost::Collective::all_gather,
                                                 commcost::Tier::intra, payload, n, link) +
                       commcost::collective_time(commcost::Collective::reduce_scatter,
                                                 commcost::Tier::intra, payload, n, link);
                break;
            }
            case AttnStrategy::sp: {
                const Rat qkv = rat(2) * b * s * h *
                                (rat(1) + rat(2, m.query_kv_ratio)) / n;
                const Rat out = rat(2) * b * s * rat(h, n);
                attn = commcost::collective_time(commcost::Collective::all_to_all,
                                                 commcost::Tier::intra,
                                                 to_double(qkv) * bpe, n, link) +
                       commcost::collective_time(commcost::Collective::all_to_all,
                                                 commcost::Tier::intra,
                                                 to_double(out) * bpe, n, link);
                break;
            }
            case AttnStrategy::cp: {
                const double payload =
                    static_cast<double>(b) * s * h / m.query_kv_ratio * bpe;
                attn = 2.0 * commcost::collective_time(commcost::Collective::all_gather,
                                                       commcost::Tier::intra, payload, n,
                                                       link);
                break;
            }
            case AttnStrategy::dp:
                attn = 0.0;
                break;
        }
    }

    double ffn = 0.0;
    if (plan.ffn == FfnStrategy::ep) {
        ffn = commcost::ep_dispatch_time(plan.ep_pattern, b, s, h, n, m.top_k, link, bpe);
    } else if (n > 1) {
        const double payload = static_cast<double>(b) * s * h * bpe;
        ffn = commcost::collective_time(commcost::Collective::all_gather,
                                        commcost::Tier::intra, payload, n, link) +
              commcost::collective_time(commcost::Collective::reduce_scatter,
                                        commcost::Tier::intra, payload, n, link);
    }
    // Backward mirrors forward volume for volume accounting purposes.
    return 2.0 * (attn + ffn);
}

}  // namespace

PlanScore score_plan(const ParallelismPlan& plan, const Config& config) {
    const ModelConfig& m = config.model;
    PlanScore score;
    score.plan = plan;
    score.attn_volume = attention_volume(plan.attn, m, plan.n);
    score.ffn_volume = ffn_volume(plan.ffn, plan.ep_pattern, m, plan.n);
    score.volume_estimate = plan.attn == AttnStrategy::cp;

    auto reject = [&](const std::string& why) {
        score.feasible = false;
        score.rejection = why;
        return score;
    };

    if (plan.n < 1 || plan.pp < 1 || plan.vpp < 1 || plan.dp < 1) {
        return reject("parallel sizes must be >= 1");
    }
    if (plan.n * plan.pp * plan.dp != config.cluster.total_gpus()) {
        return reject("n*pp*dp does not equal the total GPU count");
    }
    if (m.num_layers % plan.pp != 0) {
        return reject("num_layers not divisible by pp");
    }
    if (plan.vpp > 1 && config.job.microbatches % plan.pp != 0) {
        return reject("interleaving requires microbatches divisible by pp");
    }
    if (plan.attn == AttnStrategy::dp) {
        return reject(
            "attention DP duplicates FFN input activations and gradients across ranks; "
            "strictly dominated by SP");
    }
    if ((plan.attn == AttnStrategy::tp || plan.attn == AttnStrategy::sp) &&
        m.num_heads % plan.n != 0) {
        return reject("num_heads not divisible by n");
    }
    if (plan.attn == AttnStrategy::cp && m.seq_len % plan.n != 0) {
        return reject("seq_len not divisible by n");
    }
    if (plan.ffn == FfnStrategy::ep && m.num_experts % plan.n != 0) {
        return reject("num_experts not divisible by n");
    }
    if (plan.ffn == FfnStrategy::tp && m.ffn_hidden_size % plan.n != 0) {
        return reject("ffn_hidden_size not divisible by n");
    }

    const auto mem = memmodel::peak_memory(plan, m, config.precision, config.job,
                                           memmodel::RematPolicy::selective(),
                                           memmodel::DpCompress::inplace);
    score.peak_mem_bytes = mem.total_bytes();
    if (score.peak_mem_bytes > config.cluster.mem_capacity) {
        return reject("exceeds per-GPU memory capacity");
    }

    score.layer_comm_time = analytic_comm_time(plan, config);
    simsched::SimOptions options;
    const auto sim = simsched::simulate_iteration(plan, config, options);
    score.iteration_time = sim.iteration_time;
    score.mfu = sim.mfu;
    score.feasible = true;
    return score;
}

std::vector<PlanScore> enumerate_plans(const Config& config, long long n, long long pp,
                                       long long vpp, long long dp) {
    std::vector<PlanScore> scores;
    for (AttnStrategy attn :
         {AttnStrategy::tp, AttnStrategy::sp, AttnStrategy::cp, AttnStrategy::dp}) {
        for (FfnStrategy ffn : {FfnStrategy::tp, FfnStrategy::ep}) {
            std::vector<commcost::EpPattern> patterns =
                ffn == FfnStrategy::ep
                    ? std::vector<commcost::EpPattern>{commcost::EpPattern::a2a,
                                                       commcost::EpPattern::ag_rs}
                    : std::vector<commcost::EpPattern>{commcost::EpPattern::a2a};
            for (commcost::EpPattern pattern : patterns) {
                ParallelismPlan plan;
                plan.attn = attn;
                plan.ffn = ffn;
                plan.ep_pattern = pattern;
                plan.n = n;
                plan.pp = pp;
                plan.vpp = vpp;
                plan.dp = dp;
                plan.zero_stage = config.job.zero_stage;
                scores.push_back(score_plan(plan, config));
            }
        }
    }
    return scores;
}

commcost::EpPattern select_ep_pattern(const Config& config, long long n) {
    const ModelConfig& m = config.model;
    const auto link = commcost::LinkModel::from_cluster(config.cluster);
    const int bpe = bytes_per_element(config.precision.tp_comm_format);
    const double a2a = commcost::ep_dispatch_time(commcost::EpPattern::a2a, m.micro_batch,
                                                  m.seq_len, m.hidden_size, n, m.top_k,
                                                  link, bpe);
    const double ag_rs = commcost::ep_dispatch_time(commcost::EpPattern::ag_rs,
                                                    m.micro_batch, m.seq_len, m.hidden_size,
                                                    n, m.top_k, link, bpe);
    return a2a <= ag_rs ? commcost::EpPattern::a2a : commcost::EpPattern::ag_rs;
}

ScaleUpReport scale_up_ratio(const Config& config, long long n) {
    if (n < 2) throw std::domain_error("scale-up ratio needs n >= 2");
    const ModelConfig& m = config.model;
    const ClusterConfig& c = config.cluster;
    const double tokens = static_cast<double>(m.micro_batch) * m.seq_len;
    const double bpe = bytes_per_element(config.precision.compute_format);

    // Dispatch+combine elements over the intra link, bandwidth term only;
    // the link moves intra_bw/bpe elements per second.
    const double comm_elems = to_double(
        commcost::ffn_ep_volume(m.micro_batch, m.seq_len, m.hidden_size, n, m.top_k));
    // Expert GEMMs: fc1 (gate+up) + fc2, counted as MACs against peak.
    const double macs = 3.0 * m.top_k * tokens * m.hidden_size * m.ffn_hidden_size /
                        static_cast<double>(n);

    ScaleUpReport r;
    r.comm_time = comm_elems / (c.intra_bw / bpe);
    r.comp_time = macs / c.peak_flops;
    r.ratio = r.comp_time / r.comm_time;
    r.ratio_approx = 1.5 * static_cast<double>(m.ffn_hidden_size) *
                     (c.intra_bw / bpe) / c.peak_flops;
    return r;
}

PlanScore best_plan(const Config& config) {
    const ClusterConfig& c = config.cluster;
    const long long n = c.gpus_per_node;
    const long long pp = config.job.pp;
    if (c.total_gpus() % (n * pp) != 0) {
        throw std::runtime_error("total GPUs not divisible by gpus_per_node * pp");
    }
    const long long dp = c.total_gpus() / (n * pp);
    const auto scores = enumerate_plans(config, n, pp, config.job.vpp, dp);

    const PlanScore* best = nullptr;
    for (const PlanScore& s : scores) {
        if (!s.feasible) continue;
        if (best == nullptr || s.iteration_time < best->iteration_time) best = &s;
    }
    if (best == nullptr) throw std::runtime_error("no feasible plan for this configuration");
    return *best;
}

}  // namespace moeplan::planner
