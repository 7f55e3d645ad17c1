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
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "moeplan/commcost.hpp"
#include "moeplan/config.hpp"
#include "moeplan/memmodel.hpp"
#include "moeplan/numerics.hpp"
#include "moeplan/planner.hpp"
#include "moeplan/simsched.hpp"

using nlohmann::json;
using namespace moeplan;

namespace {

constexpr int kReportSchemaVersion = 1;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string format = "text";  // text | json
    std::optional<std::uint64_t> seed;
};

json load_doc(const CommonOpts& opts) {
    std::ifstream in(opts.config_path);
    if (!in) {
        throw ConfigError("", "cannot open config file '" + opts.config_path + "'");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", "parse error in '" + opts.config_path + "': " + e.what());
    }
    // Seed precedence: --seed flag > config file > MOEPLAN_SEED > 0.
    if (const char* env = std::getenv("MOEPLAN_SEED")) {
        if (!doc.contains("job") || !doc["job"].contains("seed")) {
            doc["job"]["seed"] = std::stoull(env);
        }
    }
    for (const std::string& s : opts.sets) apply_override(doc, s);
    if (opts.seed.has_value()) doc["job"]["seed"] = *opts.seed;
    return doc;
}

Config load(const CommonOpts& opts) { return parse_config(load_doc(opts)); }

json envelope(const std::string& command, const Config& config, json results) {
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["command"] = command;
    j["config_digest"] = config_digest(config);
    j["results"] = std::move(results);
    return j;
}

std::string explain_attention(const planner::PlanScore& s, const ModelConfig& m) {
    std::ostringstream os;
    const long long n = s.plan.n;
    switch (s.plan.attn) {
        case AttnStrategy::tp:
            os << "2*b*s*h*(n-1)/n = 2*" << m.micro_batch << "*" << m.seq_len << "*"
               << m.hidden_size << "*(" << n << "-1)/" << n;
            break;
        case AttnStrategy::sp:
            os << "2*b*s*h*(n-1)/n * (2+2/m)/n = 2*" << m.micro_batch << "*" << m.seq_len
               << "*" << m.hidden_size << "*(" << n << "-1)/" << n << " * (2+2/"
               << m.query_kv_ratio << ")/" << n;
            break;
        case AttnStrategy::cp:
            os << "2*b*s*(h/m)*(n-1)/n = 2*" << m.micro_batch << "*" << m.seq_len << "*("
               << m.hidden_size << "/" << m.query_kv_ratio << ")*(" << n << "-1)/" << n
               << " [estimate]";
            break;
        case AttnStrategy::dp:
            os << "0 (no attention communication; rejected on memory duplication)";
            break;
    }
    os << " = " << to_double(s.attn_volume) << " elements";
    return os.str();
}

std::string explain_ffn(const planner::PlanScore& s, const ModelConfig& m) {
    std::ostringstream os;
    const long long n = s.plan.n;
    if (s.plan.ffn == FfnStrategy::tp) {
        os << "2*b*s*h*(n-1)/n = 2*" << m.micro_batch << "*" << m.seq_len << "*"
           << m.hidden_size << "*(" << n << "-1)/" << n;
    } else if (s.plan.ep_pattern == commcost::EpPattern::a2a) {
        os << "2*(k/n)*b*s*h*(n-1)/n = 2*(" << m.top_k << "/" << n << ")*" << m.micro_batch
           << "*" << m.seq_len << "*" << m.hidden_size << "*(" << n << "-1)/" << n;
    } else {
        os << "2*b*s*h*(n-1)/n (dispatch as all-gather + reduce-scatter of the full "
              "activation) = 2*"
           << m.micro_batch << "*" << m.seq_len << "*" << m.hidden_size << "*(" << n
           << "-1)/" << n;
    }
    os << " = " << to_double(s.ffn_volume) << " elements";
    return os.str();
}

json score_to_json(const planner::PlanScore& s, const ModelConfig& m, bool explain) {
    json j;
    j["plan"] = s.plan.label();
    j["feasible"] = s.feasible;
    if (!s.feasible) j["rejection"] = s.rejection;
    j["attn_volume_elements"] = to_double(s.attn_volume);
    j["ffn_volume_elements"] = to_double(s.ffn_volume);
    j["volume_estimate"] = s.volume_estimate;
    j["layer_comm_time_s"] = s.layer_comm_time;
    j["peak_mem_gib"] = s.peak_mem_bytes / 1073741824.0;
    if (s.feasible) {
        j["iteration_time_s"] = s.iteration_time;
        j["mfu"] = s.mfu;
    }
    if (explain) {
        j["attn_volume_formula"] = explain_attention(s, m);
        j["ffn_volume_formula"] = explain_ffn(s, m);
    }
    return j;
}

int cmd_plan(const CommonOpts& common, long long n_override, bool explain) {
    const Config config = load(common);
    const ClusterConfig& c = config.cluster;
    const long long n = n_override > 0 ? n_override : c.gpus_per_node;
    const long long pp = config.job.pp;
    if (n < 1 || c.total_gpus() % (n * pp) != 0) {
        throw ConfigError("cluster", "total GPUs not divisible by n * pp");
    }
    const long long dp = c.total_gpus() / (n * pp);

    auto scores = planner::enumerate_plans(config, n, pp, config.job.vpp, dp);
    std::stable_sort(scores.begin(), scores.end(),
                     [](const planner::PlanScore& a, const planner::PlanScore& b) {
                         if (a.feasible != b.feasible) return a.feasible;
                         if (!a.feasible) return false;
                         return a.iteration_time < b.iteration_time;
                     });

    if (common.format == "json") {
        json results;
        results["plans"] = json::array();
        for (const auto& s : scores) results["plans"].push_back(score_to_json(s, config.model, explain));
        std::cout << envelope("plan", config, results).dump(2) << "\n";
        return 0;
    }
    std::cout << "rank  plan                                    iter_time_s   mfu     "
                 "comm_s/layer  peak_mem_gib\n";
    int rank = 1;
    for (const auto& s : scores) {
        std::ostringstream row;
        row << rank++ << "\t" << s.plan.label() << "\t";
        if (s.feasible) {
            row << s.iteration_time << "\t" << s.mfu << "\t" << s.layer_comm_time << "\t"
                << s.peak_mem_bytes / 1073741824.0;
        } else {
            row << "infeasible: " << s.rejection;
        }
        std::cout << row.str() << "\n";
        if (explain) {
            std::cout << "      attn: " << explain_attention(s, config.model) << "\n";
            std::cout << "      ffn:  " << explain_ffn(s, config.model) << "\n";
        }
    }
    return 0;
}

ParallelismPlan plan_from_flags(const Config& config, const std::string& attn,
                                const std::string& ffn, const std::string& pattern,
                                long long n_override) {
    ParallelismPlan plan;
    plan.attn = attn_strategy_from_name(attn);
    plan.ffn = ffn_strategy_from_name(ffn);
    plan.n = n_override > 0 ? n_override : config.cluster.gpus_per_node;
    if (pattern == "auto") {
        plan.ep_pattern = planner::select_ep_pattern(config, plan.n);
    } else if (pattern == "a2a") {
        plan.ep_pattern = commcost::EpPattern::a2a;
    } else if (pattern == "ag_rs") {
        plan.ep_pattern = commcost::EpPattern::ag_rs;
    } else {
        throw ConfigError("", "unknown EP pattern '" + pattern + "'");
    }
    plan.pp = config.job.pp;
    plan.vpp = config.job.vpp;
    if (config.cluster.total_gpus() % (plan.n * plan.pp) != 0) {
        throw ConfigError("cluster", "total GPUs not divisible by n * pp");
    }
    plan.dp = config.cluster.total_gpus() / (plan.n * plan.pp);
    plan.zero_stage = config.job.zero_stage;
    return plan;
}

int cmd_simulate(const CommonOpts& common, const std::string& attn, const std::string& ffn,
                 const std::string& pattern, long long n_override, const std::string& mode,
                 bool remat, const std::string& fuse, bool tune_sms,
                 const std::string& trace_path) {
    const Config config = load(common);
    const ParallelismPlan plan = plan_from_flags(config, attn, ffn, pattern, n_override);

    simsched::SimOptions options;
    if (mode == "serial") {
        options.mode = simsched::ScheduleMode::serial;
    } else if (mode == "inter-op") {
        options.mode = simsched::ScheduleMode::inter_op;
    } else {
        throw ConfigError("", "unknown mode '" + mode + "' (serial | inter-op)");
    }
    options.remat = remat;
    if (fuse == "all") {
        options.fuse = true;
    } else if (fuse != "none") {
        throw ConfigError("", "unknown fuse setting '" + fuse + "' (none | all)");
    }
    options.tune_sms = tune_sms;

    const simsched::IterationSim sim = simsched::simulate_iteration(plan, config, options);

    // Rebuild the layer timelines for the breakdown buckets and the trace.
    const auto link = commcost::LinkModel::from_cluster(config.cluster);
    const simsched::EfficiencyTable eff;
    simsched::OpGraph fwd = simsched::build_layer_graph(plan, config.model, config.precision);
    simsched::OpGraph bwd = simsched::build_backward_graph(
        plan, config.model, config.precision,
        options.remat ? memmodel::RematPolicy::selective() : memmodel::RematPolicy::off());
    simsched::cost_graph(fwd, config.cluster, eff, link);
    simsched::cost_graph(bwd, config.cluster, eff, link);
    if (options.fuse) {
        auto ff = simsched::default_fusions(fwd);
        auto fb = simsched::default_fusions(bwd);
        if (options.tune_sms) {
            simsched::tune_sm_allocation(fwd, ff, config.cluster);
            simsched::tune_sm_allocation(bwd, fb, config.cluster);
        }
        fwd = simsched::apply_intra_op(fwd, ff, config.cluster);
        bwd = simsched::apply_intra_op(bwd, fb, config.cluster);
    }
    const simsched::Timeline tf = simsched::schedule(fwd, options.mode);
    const simsched::Timeline tb = simsched::schedule(bwd, options.mode);
    simsched::validate_timeline(fwd, tf);
    simsched::validate_timeline(bwd, tb);

    double gemm_attention = 0.0;
    double other_compute = 0.0;
    auto bucket = [&](const simsched::OpGraph& g, const simsched::Timeline& t) {
        for (const auto& e : t.events) {
            const auto& node = g.at(e.node);
            const double dur = e.end - e.start;
            switch (node.kind) {
                case simsched::OpKind::gemm:
                case simsched::OpKind::grouped_gemm:
                case simsched::OpKind::attention_core:
                case simsched::OpKind::fused:
                    gemm_attention += dur;
                    break;
                case simsched::OpKind::collective:
                    break;
                default:
                    other_compute += dur;
            }
        }
    };
    bucket(fwd, tf);
    bucket(bwd, tb);

    if (!trace_path.empty()) {
        json trace;
        trace["schema_version"] = 1;
        trace["forward"] = simsched::trace_events_json(fwd, tf);
        trace["backward"] = simsched::trace_events_json(bwd, tb);
        std::ofstream out(trace_path);
        if (!out) throw ConfigError("", "cannot write trace file '" + trace_path + "'");
        out << trace.dump(2) << "\n";
    }

    json results;
    results["plan"] = plan.label();
    results["mode"] = mode;
    results["remat"] = options.remat;
    results["fuse"] = options.fuse;
    results["layer_fwd_s"] = sim.layer.fwd;
    results["layer_bwd_s"] = sim.layer.bwd;
    results["layer_fwd_serial_s"] = sim.layer.fwd_serial;
    results["exposed_comm_s"] = sim.layer.fwd_exposed_comm + sim.layer.bwd_exposed_comm;
    results["breakdown"] = {{"gemm_attention_s", gemm_attention},
                            {"exposed_comm_s", tf.exposed_comm + tb.exposed_comm},
                            {"other_s", other_compute}};
    results["per_mb_fwd_s"] = sim.per_mb_fwd;
    results["per_mb_bwd_s"] = sim.per_mb_bwd;
    results["dp_sync_s"] = sim.dp_sync;
    results["iteration_time_s"] = sim.iteration_time;
    results["mfu"] = sim.mfu;

    if (common.format == "json") {
        std::cout << envelope("simulate", config, results).dump(2) << "\n";
    } else {
        std::cout << "plan:            " << plan.label() << "\n"
                  << "layer fwd:       " << sim.layer.fwd << " s\n"
                  << "layer bwd:       " << sim.layer.bwd << " s\n"
                  << "exposed comm:    " << tf.exposed_comm + tb.exposed_comm << " s/layer\n"
                  << "gemm+attention:  " << gemm_attention << " s/layer\n"
                  << "other compute:   " << other_compute << " s/layer\n"
                  << "dp sync:         " << sim.dp_sync << " s\n"
                  << "iteration time:  " << sim.iteration_time << " s\n"
                  << "mfu:             " << sim.mfu << "\n";
    }
    return 0;
}

int cmd_memory(const CommonOpts& common, const std::string& attn, const std::string& ffn,
               const std::string& pattern, long long n_override, bool remat) {
    const Config config = load(common);
    const ParallelismPlan plan = plan_from_flags(config, attn, ffn, pattern, n_override);

    const auto policy_on = memmodel::RematPolicy::selective();
    const auto policy_off = memmodel::RematPolicy::off();
    const auto chosen = memmodel::peak_memory(plan, config.model, config.precision,
                                              config.job, remat ? policy_on : policy_off,
                                              memmodel::DpCompress::inplace);
    const auto full = memmodel::peak_memory(plan, config.model, config.precision, config.job,
                                            policy_off, memmodel::DpCompress::inplace);
    const auto lean = memmodel::peak_memory(plan, config.model, config.precision, config.job,
                                            policy_on, memmodel::DpCompress::inplace);
    const double reduction_pct =
        to_double(full.activations) > 0.0
            ? 100.0 * (to_double(full.activations) - to_double(lean.activations)) /
                  to_double(full.activations)
            : 0.0;

    const double gib = 1073741824.0;
    json results;
    results["plan"] = plan.label();
    results["remat"] = remat;
    results["params_gib"] = to_double(chosen.params) / gib;
    results["grads_gib"] = to_double(chosen.grads) / gib;
    results["optimizer_gib"] = to_double(chosen.optimizer) / gib;
    results["activations_gib"] = to_double(chosen.activations) / gib;
    results["transient_gib"] = to_double(chosen.transient_peak) / gib;
    results["total_gib"] = to_double(chosen.total) / gib;
    results["capacity_gib"] = config.cluster.mem_capacity / gib;
    results["fits"] = chosen.total_bytes() <= config.cluster.mem_capacity;
    results["remat_activation_reduction_pct"] = reduction_pct;

    if (common.format == "json") {
        std::cout << envelope("memory", config, results).dump(2) << "\n";
    } else {
        std::cout << "plan:        " << plan.label() << "\n"
                  << "params:      " << results["params_gib"].get<double>() << " GiB\n"
                  << "grads:       " << results["grads_gib"].get<double>() << " GiB\n"
                  << "optimizer:   " << results["optimizer_gib"].get<double>() << " GiB\n"
                  << "activations: " << results["activations_gib"].get<double>() << " GiB\n"
                  << "transient:   " << results["transient_gib"].get<double>() << " GiB\n"
                  << "total:       " << results["total_gib"].get<double>() << " GiB of "
                  << results["capacity_gib"].get<double>() << " GiB\n"
                  << "remat saves: " << reduction_pct << "% of activations\n";
    }
    return 0;
}

struct Axis {
    std::string key;  // "n" or "section.key"
    long long begin = 0;
    long long end = -1;  // inclusive
    long long step = 1;
};

Axis parse_axis(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("", "axis '" + text + "' is not of the form key=begin..end[:step]");
    }
    Axis axis;
    axis.key = text.substr(0, eq);
    std::string range = text.substr(eq + 1);
    long long step = 1;
    const auto colon = range.find(':');
    if (colon != std::string::npos) {
        step = std::stoll(range.substr(colon + 1));
        range = range.substr(0, colon);
    }
    const auto dots = range.find("..");
    if (dots == std::string::npos) {
        throw ConfigError("", "axis range '" + range + "' must be begin..end");
    }
    axis.begin = std::stoll(range.substr(0, dots));
    axis.end = std::stoll(range.substr(dots + 2));
    axis.step = step;
    if (axis.step < 1) throw ConfigError("", "axis step must be >= 1");
    return axis;
}

int cmd_sweep(const CommonOpts& common, const std::string& axis_text) {
    const Axis axis = parse_axis(axis_text);
    const json base_doc = load_doc(common);

    std::cout << "axis,value,a2a_dispatch_s,ag_rs_dispatch_s,comp_comm_ratio,"
                 "comp_comm_ratio_approx\n";
    for (long long v = axis.begin; v <= axis.end; v += axis.step) {
        json doc = base_doc;
        long long n;
        if (axis.key == "n") {
            n = v;
        } else {
            apply_override(doc, axis.key + "=" + std::to_string(v));
            n = 0;
        }
        const Config config = parse_config(doc);  // unknown axis keys reject here
        if (n == 0) n = config.cluster.gpus_per_node;
        const auto link = commcost::LinkModel::from_cluster(config.cluster);
        const int bpe = bytes_per_element(config.precision.tp_comm_format);
        const ModelConfig& m = config.model;
        const double a2a = commcost::ep_dispatch_time(commcost::EpPattern::a2a,
                                                      m.micro_batch, m.seq_len,
                                                      m.hidden_size, n, m.top_k, link, bpe);
        const double ag_rs = commcost::ep_dispatch_time(commcost::EpPattern::ag_rs,
                                                        m.micro_batch, m.seq_len,
                                                        m.hidden_size, n, m.top_k, link,
                                                        bpe);
        double ratio = 0.0;
        double ratio_approx = 0.0;
        if (n >= 2) {
            const auto r = planner::scale_up_ratio(config, n);
            ratio = r.ratio;
            ratio_approx = r.ratio_approx;
        }
        std::cout << axis.key << "," << v << "," << a2a << "," << ag_rs << "," << ratio
                  << "," << ratio_approx << "\n";
    }
    return 0;
}

int cmd_numerics(long long seeds, long long ranks, long long dim,
                 std::vector<std::string> scheme_names, std::uint64_t base_seed) {
    if (seeds < 1 || ranks < 2 || dim < 1) {
        throw ConfigError("", "numerics needs seeds >= 1, ranks >= 2, dim >= 1");
    }
    if (scheme_names.empty()) scheme_names = {"ring_bf16", "a2a_fp32"};
    std::vector<numerics::ReduceKind> schemes;
    for (const auto& name : scheme_names) {
        schemes.push_back(numerics::reduce_kind_from_name(name));
    }

    bool has_ring = false;
    bool has_a2a = false;
    long long a2a_wins = 0;
    std::cout << "scheme,format,trial,error\n";
    for (long long trial = 0; trial < seeds; ++trial) {
        std::mt19937_64 rng(base_seed + static_cast<std::uint64_t>(trial));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<std::vector<double>> vectors(
            static_cast<std::size_t>(ranks),
            std::vector<double>(static_cast<std::size_t>(dim)));
        for (auto& v : vectors) {
            for (double& e : v) e = normal(rng);
        }
        double ring_err = 0.0;
        double a2a_err = 0.0;
        for (numerics::ReduceKind kind : schemes) {
            const double err = numerics::reduce_rel_error(vectors, kind);
            if (kind == numerics::ReduceKind::ring_bf16) {
                ring_err = err;
                has_ring = true;
            } else {
                a2a_err = err;
                has_a2a = true;
            }
            std::cout << numerics::reduce_kind_name(kind) << ",bf16," << trial << "," << err
                      << "\n";
        }
        if (has_ring && has_a2a && a2a_err <= ring_err) a2a_wins++;
    }
    if (has_ring && has_a2a) {
        std::cout << "summary,a2a_fp32_win_rate,,"
                  << static_cast<double>(a2a_wins) / static_cast<double>(seeds) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Analytical planner and simulator for large-scale MoE training"};
    app.require_subcommand(1);

    CommonOpts common;
    long long n_override = 0;
    bool explain = false;
    std::string attn = "sp";
    std::string ffn = "ep";
    std::string pattern = "auto";
    std::string mode = "inter-op";
    bool remat = true;
    bool no_remat = false;
    std::string fuse = "none";
    bool tune_sms = false;
    std::string trace_path;
    std::string axis_text;
    long long seeds = 100;
    long long ranks = 64;
    long long dim = 4096;
    std::vector<std::string> scheme_names;
    std::uint64_t numerics_seed = 0;
    if (const char* env = std::getenv("MOEPLAN_SEED")) numerics_seed = std::stoull(env);

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", common.config_path, "config file (JSON)")->required();
        cmd->add_option("--set", common.sets, "override, e.g. --set model.top_k=4");
        cmd->add_option("--format", common.format, "output format: text | json");
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&common](std::uint64_t v) { common.seed = v; }, "seed override");
    };

    auto* plan_cmd = app.add_subcommand("plan", "enumerate and rank parallelism plans");
    add_common(plan_cmd);
    plan_cmd->add_option("--n", n_override, "intra-node parallel size (default gpus_per_node)");
    plan_cmd->add_flag("--explain", explain, "show volume formulas with substituted values");

    auto* sim_cmd = app.add_subcommand("simulate", "simulate one plan's layer and iteration");
    add_common(sim_cmd);
    sim_cmd->add_option("--attn", attn, "attention strategy: tp | sp | cp");
    sim_cmd->add_option("--ffn", ffn, "FFN strategy: tp | ep");
    sim_cmd->add_option("--pattern", pattern, "EP dispatch: a2a | ag_rs | auto");
    sim_cmd->add_option("--n", n_override, "intra-node parallel size");
    sim_cmd->add_option("--mode", mode, "schedule mode: serial | inter-op");
    sim_cmd->add_flag("--no-remat", no_remat, "disable selective rematerialization");
    sim_cmd->add_option("--fuse", fuse, "intra-op fusion: none | all");
    sim_cmd->add_flag("--tune-sms", tune_sms, "search the comm SM allocation");
    sim_cmd->add_option("--trace", trace_path, "write trace-event JSON to this file");

    auto* mem_cmd = app.add_subcommand("memory", "per-GPU memory breakdown for one plan");
    add_common(mem_cmd);
    mem_cmd->add_option("--attn", attn, "attention strategy: tp | sp | cp");
    mem_cmd->add_option("--ffn", ffn, "FFN strategy: tp | ep");
    mem_cmd->add_option("--pattern", pattern, "EP dispatch: a2a | ag_rs | auto");
    mem_cmd->add_option("--n", n_override, "intra-node parallel size");
    mem_cmd->add_flag("--no-remat", no_remat, "disable selective rematerialization");

    auto* sweep_cmd = app.add_subcommand("sweep", "CSV sweep over one config axis");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--axis", axis_text, "axis, e.g. model.top_k=1..8 or n=2..16:2")
        ->required();

    auto* num_cmd = app.add_subcommand("numerics", "reduction-scheme error study (CSV)");
    num_cmd->add_option("--seeds", seeds, "number of trials");
    num_cmd->add_option("--ranks", ranks, "ranks in the emulated reduction");
    num_cmd->add_option("--dim", dim, "gradient vector dimension");
    num_cmd->add_option("--scheme", scheme_names, "ring_bf16 and/or a2a_fp32");
    num_cmd->add_option("--seed", numerics_seed, "base seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        remat = !no_remat;
        if (plan_cmd->parsed()) return cmd_plan(common, n_override, explain);
        if (sim_cmd->parsed()) {
            return cmd_simulate(common, attn, ffn, pattern, n_override, mode, remat, fuse,
                                tune_sms, trace_path);
        }
        if (mem_cmd->parsed()) return cmd_memory(common, attn, ffn, pattern, n_override, remat);
        if (sweep_cmd->parsed()) return cmd_sweep(common, axis_text);
        if (num_cmd->parsed()) return cmd_numerics(seeds, ranks, dim, scheme_names, numerics_seed);
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
