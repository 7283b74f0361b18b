#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "braim/baseline.hpp"
#include "braim/integrity.hpp"
#include "braim/metrics.hpp"
#include "braim/scenario.hpp"

namespace braim {

enum class Algorithm { bayes_exact, bayes_over, baseline };
const char* to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

// H = span(e1, e2), V = e3, D45 = (cos 45, sin 45, 0).
std::vector<SubspaceSpec> default_subspaces();

struct CampaignConfig {
  std::optional<Scenario> scenario;  // generated from layout_seed when absent
  std::uint64_t layout_seed = 1;
  LayoutParams layout;
  // Fault model of every station; for an inline scenario it replaces the scenario's own.
  std::optional<FaultType> fault_type;
  std::size_t n_epochs = 10000;
  std::uint64_t campaign_seed = 1;
  bool fault_free = false;  // draw no faults; the algorithms keep their priors
  double p_tir = 1e-3;
  std::map<std::string, double> p_tir_by_subspace;
  FalseAlarmBudget false_alarm;
  std::vector<Algorithm> algorithms{Algorithm::bayes_exact, Algorithm::bayes_over, Algorithm::baseline};
  std::vector<SubspaceSpec> subspaces = default_subspaces();
  double zeta1 = 0.1;
  double zeta2 = 0.002;
  double r_tol = 1e-3;
  InitErrorModel init_error;
  double stanford_pixel = 0.01;

  // Throws ConfigError.
  void validate() const;
  double p_tir_for(const SubspaceSpec& s) const;
  Scenario resolve_scenario() const;
};

// One (algorithm, subspace) pair evaluated by a campaign. The baseline only covers subspaces
// spanned by coordinate axes; other pairs are not evaluated.
struct Cell {
  Algorithm algorithm = Algorithm::bayes_exact;
  std::size_t subspace = 0;
  std::string name;  // "algorithm/subspace"
};
std::vector<Cell> campaign_cells(const CampaignConfig& c);

struct CellResult {
  double pe = 0.0;
  double pl = 0.0;
  bool available = false;
  bool fallback = false;  // the near-exact PL returned the overestimate
};

// Seconds. Bayesian PL stages include the projections.
struct StageTimes {
  double draw = 0.0;
  double bayes_fusion = 0.0;
  double bayes_exact_pl = 0.0;
  double bayes_over_pl = 0.0;
  double baseline_fde = 0.0;
  double baseline_pl = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::uint32_t fault_mask = 0;
  bool baseline_alarm = false;  // the all-in-view test failed
  std::vector<CellResult> cells;  // parallel to campaign_cells()
  StageTimes times;
};

// An epoch is a failure iff it is available and PE > PL.
struct CellSummary {
  std::string name;
  std::size_t n_epochs = 0;
  std::size_t n_available = 0;
  std::size_t failures = 0;
  std::size_t fallbacks = 0;
  double ir = 0.0;  // failures / n_epochs
  Interval ir_ci;   // 95% Clopper-Pearson
  double availability = 0.0;
  std::optional<double> pl_p50, pl_p95, pl_p99;  // over available epochs
};

struct MetricsSummary {
  std::size_t n_epochs = 0;
  std::size_t faulty_epochs = 0;
  std::size_t baseline_alarms = 0;
  std::vector<CellSummary> cells;

  const CellSummary& cell(const std::string& name) const;
};

MetricsSummary summarize(std::span<const Cell> cells, std::span<const EpochRecord> records);

struct CampaignResult {
  Scenario scenario;
  std::vector<Cell> cells;
  std::vector<EpochRecord> records;  // sorted by epoch
  MetricsSummary summary;
};

// Epochs run on `threads` workers; records and summary do not depend on the thread count.
CampaignResult run_campaign(const CampaignConfig& c, unsigned threads = 1);

struct StanfordHistogram {
  double pixel = 0.01;
  std::size_t n_available = 0;
  std::map<std::pair<long, long>, std::size_t> bins;  // (PE bin, PL bin) -> count
  struct Point {
    std::size_t epoch = 0;
    double pe = 0.0;
    double pl = 0.0;
  };
  std::vector<Point> below_diagonal;  // PE > PL
};

StanfordHistogram stanford_export(std::span<const EpochRecord> records, std::size_t cell, double pixel);

struct SweepResult {
  InitErrorModel::Kind kind = InitErrorModel::Kind::horizontal;
  std::vector<double> values;
  std::vector<MetricsSummary> summaries;  // per value
  struct Spread {
    std::string name;
    double p50_min = 0.0, p50_max = 0.0, p50_cv = 0.0;
    double ir_min = 0.0, ir_max = 0.0, ir_cv = 0.0;
  };
  std::vector<Spread> spread;  // per cell
};

// E_H = 0, 0.5, .., 5 or E_V = -10, -8, .., 10.
std::vector<double> default_sweep_values(InitErrorModel::Kind kind);

// Reruns the campaign at every initial-error value with the same seed, so every point sees the
// same noise and bias realizations.
SweepResult sensitivity_sweep(const CampaignConfig& base, InitErrorModel::Kind kind, std::vector<double> values,
                              unsigned threads = 1);

// Persistence. Config and scenario errors surface as ConfigError.
CampaignConfig campaign_config_from_json(const nlohmann::json& j);
nlohmann::json campaign_config_to_json(const CampaignConfig& c);
CampaignConfig load_campaign_config(const std::filesystem::path& path);

void write_records_csv(const std::filesystem::path& path, std::span<const Cell> cells,
                       std::span<const EpochRecord> records);
struct RecordsFile {
  std::vector<std::string> cell_names;
  std::vector<EpochRecord> records;
};
RecordsFile read_records_csv(const std::filesystem::path& path);

nlohmann::ordered_json summary_to_json(const CampaignConfig& c, const MetricsSummary& s);
nlohmann::ordered_json runtime_to_json(std::span<const EpochRecord> records);
nlohmann::ordered_json sweep_to_json(const SweepResult& r);
void write_stanford_csv(const std::filesystem::path& path, const StanfordHistogram& h);
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);

// run: records.csv, summary.json, runtime.json and stanford_<algorithm>_<subspace>.csv.
void write_campaign_outputs(const std::filesystem::path& dir, const CampaignConfig& c, const CampaignResult& r);

}  // namespace braim
