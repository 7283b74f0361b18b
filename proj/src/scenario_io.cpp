#include "braim/scenario_io.hpp"

#include <fstream>

#include "braim/error.hpp"

namespace braim {
namespace {

Eigen::Vector3d vec3(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json vec3_json(const Eigen::Vector3d& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

FaultSpec fault_from_json(const nlohmann::json& j) {
  FaultSpec f;
  f.theta = j.at("theta").get<double>();
  f.bias_mean = j.value("bias_mean", 0.0);
  f.bias_std = j.value("bias_std", 0.0);
  return f;
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    for (const auto& p : j.at("bs_positions")) s.bs_positions.push_back(vec3(p, "bs_positions"));
    const auto m = s.bs_positions.size();
    if (j.contains("ue_true")) s.ue_true = vec3(j["ue_true"], "ue_true");
    s.clock_bias = j.value("clock_bias", 0.0);

    const auto& ns = j.at("noise_std");
    if (ns.is_number()) {
      s.noise_std.assign(m, ns.get<double>());
    } else {
      s.noise_std = ns.get<std::vector<double>>();
    }

    const auto& fs = j.at("faults");
    if (fs.is_object()) {
      s.faults.assign(m, fault_from_json(fs));
    } else {
      for (const auto& f : fs) s.faults.push_back(fault_from_json(f));
    }
    s.initial_estimate = j.contains("initial_estimate") ? vec3(j["initial_estimate"], "initial_estimate")
                                                        : s.ue_true;
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["bs_positions"] = nlohmann::json::array();
  for (const auto& p : s.bs_positions) j["bs_positions"].push_back(vec3_json(p));
  j["ue_true"] = vec3_json(s.ue_true);
  j["clock_bias"] = s.clock_bias;
  j["noise_std"] = s.noise_std;
  j["faults"] = nlohmann::json::array();
  for (const FaultSpec& f : s.faults)
    j["faults"].push_back({{"theta", f.theta}, {"bias_mean", f.bias_mean}, {"bias_std", f.bias_std}});
  j["initial_estimate"] = vec3_json(s.initial_estimate);
  return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario file " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace braim
