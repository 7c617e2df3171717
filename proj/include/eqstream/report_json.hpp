#pragma once

#include <string>

#include <json.hpp>

#include "eqstream/lfs.hpp"

namespace eqstream {

inline nlohmann::ordered_json report_to_json(const EqsReport& report) {
    nlohmann::ordered_json j;
    j["eqs"] = report.eqs;
    j["distance"] = report.distance;
    j["per_scale"] = nlohmann::ordered_json::array();
    for (const ScaleSummary& s : report.per_scale) {
        j["per_scale"].push_back({{"distance", s.distance},
                                  {"similarity", s.similarity},
                                  {"patch_count", s.patch_count}});
    }
    j["per_step"] = nlohmann::ordered_json::array();
    for (const StepSummary& s : report.per_step) {
        j["per_step"].push_back({{"distance", s.distance}, {"similarity", s.similarity}});
    }
    j["degenerate_patches"] = report.degenerate_patches;
    j["config_digest"] = report.config_digest;
    j["tool_version"] = report.tool_version;
    j["weight_seed"] = report.weight_seed;
    return j;
}

inline std::string report_to_string(const EqsReport& report) {
    return report_to_json(report).dump(2) + "\n";
}

}  // namespace eqstream
