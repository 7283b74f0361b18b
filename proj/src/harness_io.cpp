#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "braim/error.hpp"
#include "braim/harness.hpp"
#include "braim/scenario_io.hpp"

namespace braim {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("subspace basis vectors must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

SubspaceSpec subspace_from_json(const json& j) {
  check_keys(j, {"name", "kind", "basis"}, "subspace");
  const std::string name = j.at("name").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  SubspaceSpec s;
  s.name = name;
  if (kind == "dir1d") {
    s.kind = SubspaceSpec::Kind::dir1d;
  } else if (kind == "plane2d") {
    s.kind = SubspaceSpec::Kind::plane2d;
  } else if (kind == "full3d") {
    s.kind = SubspaceSpec::Kind::full3d;
  } else {
    throw ConfigError("subspace '" + name + "': unknown kind '" + kind + "'");
  }
  if (j.contains("basis"))
    for (const auto& v : j["basis"]) s.basis.push_back(vec3(v));
  try {
    s.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return s;
}

const char* kind_name(SubspaceSpec::Kind k) {
  switch (k) {
    case SubspaceSpec::Kind::dir1d: return "dir1d";
    case SubspaceSpec::Kind::plane2d: return "plane2d";
    case SubspaceSpec::Kind::full3d: return "full3d";
  }
  return "?";
}

const char* init_kind_name(InitErrorModel::Kind k) {
  switch (k) {
    case InitErrorModel::Kind::none: return "none";
    case InitErrorModel::Kind::horizontal: return "horizontal";
    case InitErrorModel::Kind::vertical: return "vertical";
  }
  return "?";
}

InitErrorModel::Kind parse_init_kind(const std::string& s) {
  if (s == "none") return InitErrorModel::Kind::none;
  if (s == "horizontal") return InitErrorModel::Kind::horizontal;
  if (s == "vertical") return InitErrorModel::Kind::vertical;
  throw ConfigError("unknown init_error kind '" + s + "' (expected none, horizontal or vertical)");
}

LayoutParams layout_from_json(const json& j) {
  check_keys(j,
             {"cols", "rows", "cell_x", "cell_y", "jitter_std", "height_min", "height_max", "nlos_bias_min",
              "nlos_bias_max", "noise_std", "theta"},
             "layout");
  LayoutParams p;
  p.cols = j.value("cols", p.cols);
  p.rows = j.value("rows", p.rows);
  p.cell_x = j.value("cell_x", p.cell_x);
  p.cell_y = j.value("cell_y", p.cell_y);
  p.jitter_std = j.value("jitter_std", p.jitter_std);
  p.height_min = j.value("height_min", p.height_min);
  p.height_max = j.value("height_max", p.height_max);
  p.nlos_bias_min = j.value("nlos_bias_min", p.nlos_bias_min);
  p.nlos_bias_max = j.value("nlos_bias_max", p.nlos_bias_max);
  p.noise_std = j.value("noise_std", p.noise_std);
  p.theta = j.value("theta", p.theta);
  if (p.cols < 1 || p.rows < 1) throw ConfigError("layout: cols and rows must be positive");
  return p;
}

ordered_json layout_to_json(const LayoutParams& p) {
  return ordered_json{{"cols", p.cols},
                      {"rows", p.rows},
                      {"cell_x", p.cell_x},
                      {"cell_y", p.cell_y},
                      {"jitter_std", p.jitter_std},
                      {"height_min", p.height_min},
                      {"height_max", p.height_max},
                      {"nlos_bias_min", p.nlos_bias_min},
                      {"nlos_bias_max", p.nlos_bias_max},
                      {"noise_std", p.noise_std},
                      {"theta", p.theta}};
}

CampaignConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j,
             {"scenario", "scenario_file", "layout_seed", "layout", "fault_type", "n_epochs", "campaign_seed",
              "fault_free", "p_tir", "p_fa_h", "p_fa_v", "algorithms", "subspaces", "zeta1", "zeta2", "r_tol",
              "init_error", "stanford_pixel"},
             "config");
  CampaignConfig c;
  if (j.contains("scenario") && j.contains("scenario_file"))
    throw ConfigError("config: give either scenario or scenario_file, not both");
  if (j.contains("scenario")) c.scenario = scenario_from_json(j["scenario"]);
  if (j.contains("scenario_file")) {
    std::filesystem::path p = j["scenario_file"].get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    c.scenario = load_scenario(p);
  }
  c.layout_seed = j.value("layout_seed", c.layout_seed);
  if (j.contains("layout")) c.layout = layout_from_json(j["layout"]);
  if (j.contains("fault_type")) c.fault_type = parse_fault_type(j["fault_type"].get<std::string>());
  if (j.contains("n_epochs")) {
    const auto n = j["n_epochs"].get<long long>();
    if (n < 1) throw ConfigError("n_epochs must be at least 1");
    c.n_epochs = static_cast<std::size_t>(n);
  }
  c.campaign_seed = j.value("campaign_seed", c.campaign_seed);
  c.fault_free = j.value("fault_free", c.fault_free);
  if (j.contains("p_tir")) {
    const auto& p = j["p_tir"];
    if (p.is_number()) {
      c.p_tir = p.get<double>();
    } else if (p.is_object()) {
      for (const auto& [k, v] : p.items()) {
        if (k == "default")
          c.p_tir = v.get<double>();
        else
          c.p_tir_by_subspace[k] = v.get<double>();
      }
    } else {
      throw ConfigError("p_tir must be a number or an object");
    }
  }
  c.false_alarm.p_fa_h = j.value("p_fa_h", c.false_alarm.p_fa_h);
  c.false_alarm.p_fa_v = j.value("p_fa_v", c.false_alarm.p_fa_v);
  if (j.contains("algorithms")) {
    c.algorithms.clear();
    for (const auto& a : j["algorithms"]) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
  }
  if (j.contains("subspaces")) {
    c.subspaces.clear();
    for (const auto& s : j["subspaces"]) c.subspaces.push_back(subspace_from_json(s));
  }
  c.zeta1 = j.value("zeta1", c.zeta1);
  c.zeta2 = j.value("zeta2", c.zeta2);
  c.r_tol = j.value("r_tol", c.r_tol);
  if (j.contains("init_error")) {
    const auto& e = j["init_error"];
    check_keys(e, {"kind", "magnitude"}, "init_error");
    c.init_error.kind = parse_init_kind(e.value("kind", std::string("none")));
    c.init_error.magnitude = e.value("magnitude", 0.0);
  }
  c.stanford_pixel = j.value("stanford_pixel", c.stanford_pixel);
  c.validate();
  return c;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

const char* const kTimeColumns[] = {"t_draw",          "t_bayes_fusion", "t_bayes_exact_pl", "t_bayes_over_pl",
                                    "t_baseline_fde", "t_baseline_pl",  "t_total"};

std::array<double*, 7> time_fields(StageTimes& t) {
  return {&t.draw, &t.bayes_fusion, &t.bayes_exact_pl, &t.bayes_over_pl, &t.baseline_fde, &t.baseline_pl, &t.total};
}

}  // namespace

CampaignConfig campaign_config_from_json(const nlohmann::json& j) {
  try {
    return config_from_json(j, std::filesystem::current_path());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    json j;
    in >> j;
    return config_from_json(j, path.parent_path().empty() ? std::filesystem::current_path() : path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
}

nlohmann::json campaign_config_to_json(const CampaignConfig& c) {
  json j;
  if (c.scenario) j["scenario"] = scenario_to_json(*c.scenario);
  j["layout_seed"] = c.layout_seed;
  j["layout"] = json(layout_to_json(c.layout));
  if (c.fault_type) j["fault_type"] = to_string(*c.fault_type);
  j["n_epochs"] = c.n_epochs;
  j["campaign_seed"] = c.campaign_seed;
  j["fault_free"] = c.fault_free;
  if (c.p_tir_by_subspace.empty()) {
    j["p_tir"] = c.p_tir;
  } else {
    json p = {{"default", c.p_tir}};
    for (const auto& [k, v] : c.p_tir_by_subspace) p[k] = v;
    j["p_tir"] = p;
  }
  j["p_fa_h"] = c.false_alarm.p_fa_h;
  j["p_fa_v"] = c.false_alarm.p_fa_v;
  j["algorithms"] = json::array();
  for (Algorithm a : c.algorithms) j["algorithms"].push_back(to_string(a));
  j["subspaces"] = json::array();
  for (const auto& s : c.subspaces) {
    json b = json::array();
    for (const auto& v : s.basis) b.push_back({v.x(), v.y(), v.z()});
    j["subspaces"].push_back({{"name", s.name}, {"kind", kind_name(s.kind)}, {"basis", b}});
  }
  j["zeta1"] = c.zeta1;
  j["zeta2"] = c.zeta2;
  j["r_tol"] = c.r_tol;
  j["init_error"] = {{"kind", init_kind_name(c.init_error.kind)}, {"magnitude", c.init_error.magnitude}};
  j["stanford_pixel"] = c.stanford_pixel;
  return j;
}

void write_records_csv(const std::filesystem::path& path, std::span<const Cell> cells,
                       std::span<const EpochRecord> records) {
  auto out = open_out(path);
  out << "epoch,fault_mask,baseline_alarm";
  for (const auto& c : cells) out << ',' << c.name << ".pe," << c.name << ".pl," << c.name << ".available," << c.name << ".fallback";
  for (const char* t : kTimeColumns) out << ',' << t;
  out << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << r.fault_mask << ',' << int(r.baseline_alarm);
    for (const auto& x : r.cells) out << ',' << fmt(x.pe) << ',' << fmt(x.pl) << ',' << int(x.available) << ',' << int(x.fallback);
    StageTimes t = r.times;
    for (double* v : time_fields(t)) out << ',' << fmt(*v);
    out << '\n';
  }
}

RecordsFile read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open records file " + path.string());
  const auto split = [](const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    return f;
  };
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("records file is empty");
  const auto header = split(line);
  constexpr std::size_t kTimes = std::size(kTimeColumns);
  if (header.size() < 3 + kTimes || (header.size() - 3 - kTimes) % 4 != 0 || header[0] != "epoch")
    throw ConfigError("records file has an unexpected header");
  RecordsFile rf;
  const std::size_t n_cells = (header.size() - 3 - kTimes) / 4;
  for (std::size_t c = 0; c < n_cells; ++c) {
    const std::string& h = header[3 + 4 * c];
    rf.cell_names.push_back(h.substr(0, h.size() - 3));
  }
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split(line);
      if (f.size() != header.size()) throw ConfigError("records file: ragged row");
      EpochRecord r;
      r.epoch = std::stoull(f[0]);
      r.fault_mask = static_cast<std::uint32_t>(std::stoul(f[1]));
      r.baseline_alarm = f[2] == "1";
      for (std::size_t c = 0; c < n_cells; ++c) {
        CellResult x;
        x.pe = std::stod(f[3 + 4 * c]);
        x.pl = std::stod(f[4 + 4 * c]);
        x.available = f[5 + 4 * c] == "1";
        x.fallback = f[6 + 4 * c] == "1";
        r.cells.push_back(x);
      }
      auto fields = time_fields(r.times);
      for (std::size_t t = 0; t < kTimes; ++t) *fields[t] = std::stod(f[3 + 4 * n_cells + t]);
      rf.records.push_back(std::move(r));
    }
  } catch (const std::logic_error& e) {
    throw ConfigError(std::string("records file: malformed number: ") + e.what());
  }
  return rf;
}

nlohmann::ordered_json summary_to_json(const CampaignConfig& c, const MetricsSummary& s) {
  ordered_json j;
  j["config"] = ordered_json::parse(campaign_config_to_json(c).dump());
  j["n_epochs"] = s.n_epochs;
  j["faulty_epochs"] = s.faulty_epochs;
  j["baseline_alarms"] = s.baseline_alarms;
  j["cells"] = ordered_json::array();
  for (const auto& x : s.cells) {
    j["cells"].push_back(ordered_json{{"name", x.name},
                                      {"n_epochs", x.n_epochs},
                                      {"n_available", x.n_available},
                                      {"availability", x.availability},
                                      {"failures", x.failures},
                                      {"ir", x.ir},
                                      {"ir_ci95", {x.ir_ci.lo, x.ir_ci.hi}},
                                      {"fallbacks", x.fallbacks},
                                      {"pl_p50", optional_number(x.pl_p50)},
                                      {"pl_p95", optional_number(x.pl_p95)},
                                      {"pl_p99", optional_number(x.pl_p99)}});
  }
  return j;
}

nlohmann::ordered_json runtime_to_json(std::span<const EpochRecord> records) {
  ordered_json j;
  j["n_epochs"] = records.size();
  j["stages"] = ordered_json::object();
  constexpr std::size_t kTimes = std::size(kTimeColumns);
  std::array<double, kTimes> mean{};
  for (std::size_t t = 0; t < kTimes; ++t) {
    std::vector<double> v;
    for (const auto& r : records) {
      StageTimes x = r.times;
      v.push_back(*time_fields(x)[t]);
    }
    if (v.empty()) continue;
    double sum = 0.0;
    for (double a : v) sum += a;
    mean[t] = sum / static_cast<double>(v.size());
    j["stages"][kTimeColumns[t] + 2] = ordered_json{{"mean", mean[t]},
                                                     {"p50", percentile(v, 50)},
                                                     {"p90", percentile(v, 90)},
                                                     {"p99", percentile(v, 99)},
                                                     {"max", percentile(v, 100)}};
  }
  // Hardware-independent view: mean stage times relative to the baseline test plus PL.
  const double base = mean[4] + mean[5];
  if (base > 0.0) {
    j["relative_to_baseline"] = ordered_json{{"bayes_over", (mean[1] + mean[3]) / base},
                                             {"bayes_exact", (mean[1] + mean[2]) / base}};
  }
  return j;
}

nlohmann::ordered_json sweep_to_json(const SweepResult& r) {
  ordered_json j;
  j["kind"] = init_kind_name(r.kind);
  j["points"] = ordered_json::array();
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    ordered_json p;
    p["value"] = r.values[i];
    for (const auto& c : r.summaries[i].cells)
      p["cells"][c.name] = ordered_json{{"pl_p50", optional_number(c.pl_p50)}, {"ir", c.ir}, {"failures", c.failures}};
    j["points"].push_back(p);
  }
  for (const auto& s : r.spread)
    j["spread"][s.name] = ordered_json{{"pl_p50_min", s.p50_min}, {"pl_p50_max", s.p50_max}, {"pl_p50_cv", s.p50_cv},
                                       {"ir_min", s.ir_min},       {"ir_max", s.ir_max},       {"ir_cv", s.ir_cv}};
  return j;
}

void write_stanford_csv(const std::filesystem::path& path, const StanfordHistogram& h) {
  auto out = open_out(path);
  out << "# pixel=" << fmt(h.pixel) << " n_available=" << h.n_available << " below_diagonal=" << h.below_diagonal.size()
      << '\n';
  out << "pe_bin,pl_bin,pe_lo,pl_lo,count,below_diagonal\n";
  for (const auto& [key, count] : h.bins) {
    // A bin straddling the diagonal is flagged when any of its points is a failure.
    const bool below = std::any_of(h.below_diagonal.begin(), h.below_diagonal.end(), [&](const auto& p) {
      return static_cast<long>(std::floor(p.pe / h.pixel)) == key.first &&
             static_cast<long>(std::floor(p.pl / h.pixel)) == key.second;
    });
    out << key.first << ',' << key.second << ',' << fmt(key.first * h.pixel) << ',' << fmt(key.second * h.pixel)
        << ',' << count << ',' << int(below) << '\n';
  }
  auto pts = open_out(path.parent_path() / (path.stem().string() + "_failures.csv"));
  pts << "epoch,pe,pl\n";
  for (const auto& p : h.below_diagonal) pts << p.epoch << ',' << fmt(p.pe) << ',' << fmt(p.pl) << '\n';
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_campaign_outputs(const std::filesystem::path& dir, const CampaignConfig& c, const CampaignResult& r) {
  std::filesystem::create_directories(dir);
  write_records_csv(dir / "records.csv", r.cells, r.records);
  write_json(dir / "summary.json", summary_to_json(c, r.summary));
  write_json(dir / "runtime.json", runtime_to_json(r.records));
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const Cell& cell = r.cells[i];
    const std::string name =
        "stanford_" + std::string(to_string(cell.algorithm)) + "_" + c.subspaces[cell.subspace].name + ".csv";
    write_stanford_csv(dir / name, stanford_export(r.records, i, c.stanford_pixel));
  }
}

}  // namespace braim
