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
#include <nlohmann/json.hpp>

#include "moeplan/simsched.hpp"

namespace moeplan::simsched {

namespace {
constexpr int kTraceSchemaVersion = 1;

int lane_of(StreamClass s) {
    switch (s) {
        case StreamClass::compute: return 0;
        case StreamClass::comm_intra: return 1;
        case StreamClass::comm_inter: return 2;
    }
    return 0;
}

const char* lane_name(StreamClass s) {
    switch (s) {
        case StreamClass::compute: return "compute";
        case StreamClass::comm_intra: return "comm_intra";
        case StreamClass::comm_inter: return "comm_inter";
    }
    return "?";
}
}  // namespace

nlohmann::json trace_events_json(const OpGraph& g, const Timeline& t) {
    nlohmann::json j;
    j["schema_version"] = kTraceSchemaVersion;
    j["displayTimeUnit"] = "ns";
    auto& events = j["traceEvents"] = nlohmann::json::array();

    for (StreamClass s :
         {StreamClass::compute, StreamClass::comm_intra, StreamClass::comm_inter}) {
        events.push_back({{"ph", "M"},
                          {"pid", 0},
                          {"tid", lane_of(s)},
                          {"name", "thread_name"},
                          {"args", {{"name", lane_name(s)}}}});
    }

    for (const TimelineEvent& e : t.events) {
        const OpNode& node = g.at(e.node);
        nlohmann::json args = {{"kind", op_kind_name(node.kind)},
                               {"flops", node.flops},
                               {"bytes", node.kind == OpKind::collective
                                             ? static_cast<double>(node.volume.bytes)
                                             : node.bytes_moved},
                               {"remat", node.is_remat}};
        events.push_back({{"ph", "X"},
                          {"pid", 0},
                          {"tid", lane_of(e.resource)},
                          {"name", e.name},
                          {"ts", e.start * 1e6},
                          {"dur", (e.end - e.start) * 1e6},
                          {"args", args}});
    }
    j["makespan_seconds"] = t.makespan;
    j["exposed_comm_seconds"] = t.exposed_comm;
    return j;
}

}  // namespace moeplan::simsched
