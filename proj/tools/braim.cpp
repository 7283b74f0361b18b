// braim: Monte-Carlo integrity campaigns from the command line.
// Exit codes: 0 success, 2 configuration error, 3 campaign failure.
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "braim/error.hpp"
#include "braim/harness.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::string out_dir = "out";
  unsigned threads = 0;
  std::vector<std::string> algos;
  std::string fault_type;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "Campaign config JSON (defaults apply when omitted)");
  app->add_option("--seed", o.seed, "Campaign seed");
  app->add_option("--epochs", o.epochs, "Number of epochs");
  app->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
  app->add_option("--threads", o.threads, "Worker threads (0: hardware concurrency)");
  app->add_option("--algo", o.algos, "Algorithms: bayes_exact, bayes_over, baseline (repeatable)");
  app->add_option("--fault-type", o.fault_type, "Fault model: nlos or clock");
}

braim::CampaignConfig build_config(const CommonOptions& o) {
  braim::CampaignConfig c = o.config.empty() ? braim::CampaignConfig{} : braim::load_campaign_config(o.config);
  if (o.seed) c.campaign_seed = *o.seed;
  if (o.epochs) c.n_epochs = *o.epochs;
  if (!o.algos.empty()) {
    c.algorithms.clear();
    for (const auto& a : o.algos) c.algorithms.push_back(braim::parse_algorithm(a));
  }
  if (!o.fault_type.empty()) c.fault_type = braim::parse_fault_type(o.fault_type);
  c.validate();
  return c;
}

unsigned thread_count(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

void print_summary(const braim::MetricsSummary& s) {
  std::cout << "epochs " << s.n_epochs << ", faulty " << s.faulty_epochs << ", baseline alarms " << s.baseline_alarms
            << '\n';
  for (const auto& c : s.cells) {
    std::cout << "  " << c.name << ": IR " << c.ir << " (" << c.failures << " failures), availability "
              << c.availability;
    if (c.pl_p50) std::cout << ", PL p50/p95/p99 " << *c.pl_p50 << " / " << *c.pl_p95 << " / " << *c.pl_p99;
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian and solution-separation RAIM campaigns"};
  app.require_subcommand(1);

  CommonOptions run_opt;
  auto* run = app.add_subcommand("run", "Run a Monte-Carlo campaign");
  add_common(run, run_opt);

  CommonOptions sweep_opt;
  std::string sweep_kind = "horizontal";
  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Initial-position-error sensitivity sweep");
  add_common(sweep, sweep_opt);
  sweep->add_option("--kind", sweep_kind, "horizontal or vertical")->capture_default_str();
  sweep->add_option("--values", sweep_values, "Sweep values in meters (default grid when omitted)");

  std::string records_path, cell_name, stanford_out;
  double pixel = 0.01;
  auto* stanford = app.add_subcommand("stanford", "Stanford histogram from a records file");
  stanford->add_option("--records", records_path, "records.csv written by run")->required();
  stanford->add_option("--cell", cell_name, "Cell name, e.g. bayes_exact/H")->required();
  stanford->add_option("--pixel", pixel, "Pixel size in meters")->capture_default_str();
  stanford->add_option("--out", stanford_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      const braim::CampaignConfig c = build_config(run_opt);
      const braim::CampaignResult r = braim::run_campaign(c, thread_count(run_opt.threads));
      braim::write_campaign_outputs(run_opt.out_dir, c, r);
      print_summary(r.summary);
    } else if (*sweep) {
      const braim::CampaignConfig c = build_config(sweep_opt);
      braim::InitErrorModel::Kind kind;
      if (sweep_kind == "horizontal")
        kind = braim::InitErrorModel::Kind::horizontal;
      else if (sweep_kind == "vertical")
        kind = braim::InitErrorModel::Kind::vertical;
      else
        throw braim::ConfigError("--kind must be horizontal or vertical");
      if (sweep_values.empty()) sweep_values = braim::default_sweep_values(kind);
      const auto r = braim::sensitivity_sweep(c, kind, sweep_values, thread_count(sweep_opt.threads));
      std::filesystem::create_directories(sweep_opt.out_dir);
      braim::write_json(std::filesystem::path(sweep_opt.out_dir) / "sweep.json", braim::sweep_to_json(r));
      for (const auto& s : r.spread)
        std::cout << s.name << ": PL p50 " << s.p50_min << ".." << s.p50_max << " (CV " << s.p50_cv << "), IR "
                  << s.ir_min << ".." << s.ir_max << '\n';
    } else if (*stanford) {
      const braim::RecordsFile rf = braim::read_records_csv(records_path);
      const auto it = std::find(rf.cell_names.begin(), rf.cell_names.end(), cell_name);
      if (it == rf.cell_names.end()) throw braim::ConfigError("records file has no cell '" + cell_name + "'");
      if (rf.records.empty()) throw braim::ConfigError("records file has no epochs");
      const auto h = braim::stanford_export(rf.records, static_cast<std::size_t>(it - rf.cell_names.begin()), pixel);
      braim::write_stanford_csv(stanford_out, h);
      std::cout << h.n_available << " points, " << h.below_diagonal.size() << " below the diagonal\n";
    }
  } catch (const braim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const braim::InvalidInput& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "campaign failed: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
