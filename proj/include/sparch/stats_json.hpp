#pragma once

#include <json.hpp>

#include "sparch/schedule.hpp"
#include "sparch/simulator.hpp"

namespace sparch {

// Stable reporting schema; field names and nesting are part of the CLI
// contract, so tests may parse them.
inline nlohmann::json stats_to_json(const SimStats& s) {
    nlohmann::json j;
    j["cycles"] = s.cycles;
    j["seconds"] = s.seconds;
    j["gflops"] = s.gflops;
    j["dram_read_bytes"] = {{"left", s.traffic.read_left},
                            {"right", s.traffic.read_right},
                            {"partial", s.traffic.read_partial},
                            {"final", s.traffic.read_final}};
    j["dram_write_bytes"] = {{"partial", s.traffic.write_partial},
                             {"final", s.traffic.write_final}};
    j["multiplies"] = s.multiplies;
    j["adds"] = s.adds;
    j["partial_matrices"] = s.partial_matrices;
    j["rounds"] = s.rounds;
    if (s.hit_rate)
        j["hit_rate"] = *s.hit_rate;
    else
        j["hit_rate"] = nullptr;
    j["bandwidth_utilization"] = s.bandwidth_utilization;
    j["result_nnz"] = s.result_nnz;
    return j;
}

inline nlohmann::json plan_to_json(const MergePlan& p) {
    nlohmann::json j;
    j["num_leaves"] = p.num_leaves;
    j["way"] = p.way;
    j["cost"] = plan_cost(p);
    j["rounds"] = nlohmann::json::array();
    for (const MergeRound& r : p.rounds)
        j["rounds"].push_back(
            {{"inputs", r.inputs}, {"output", r.output}, {"output_weight", r.output_weight}});
    return j;
}

inline nlohmann::json round_traffic_to_json(const std::vector<RoundTraffic>& rounds) {
    nlohmann::json arr = nlohmann::json::array();
    for (const RoundTraffic& r : rounds)
        arr.push_back({{"round_index", r.round_index},
                       {"left_bytes_read", r.left_bytes_read},
                       {"right_bytes_read", r.right_bytes_read},
                       {"partial_bytes_read", r.partial_bytes_read},
                       {"partial_bytes_written", r.partial_bytes_written},
                       {"final_bytes_written", r.final_bytes_written},
                       {"cycles", r.cycles}});
    return arr;
}

}  // namespace sparch
