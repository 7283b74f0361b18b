#pragma once

#include <filesystem>

#include <json.hpp>

#include "braim/scenario.hpp"

namespace braim {

// Schema (all lengths in meters):
//   bs_positions      [[x, y, z], ...]                     required, M >= 4
//   ue_true           [x, y, z]                            default [0, 0, 0]
//   clock_bias        number                               default 0
//   noise_std         number or array of M numbers         required
//   faults            object or array of M objects with
//                     theta, bias_mean, bias_std            required
//   initial_estimate  [x, y, z]                            default ue_true
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace braim
