#include "braim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <cmath>
#include <numbers>
#include <thread>

#include "braim/bayes.hpp"
#include "braim/error.hpp"

namespace braim {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool probability(double p) { return p > 0.0 && p < 1.0; }

// Coordinate axes of an axis-aligned subspace (full3d: all three).
std::vector<int> axes_of(const SubspaceSpec& s) {
  if (s.kind == SubspaceSpec::Kind::full3d) return {0, 1, 2};
  std::vector<int> out;
  for (const auto& v : s.basis) {
    Eigen::Index i = 0;
    v.cwiseAbs().maxCoeff(&i);
    out.push_back(static_cast<int>(i));
  }
  return out;
}

double projected_norm(const SubspaceSpec& s, const Eigen::Vector3d& e) {
  return (s.matrix().transpose() * e).norm();
}

// Per-worker state: the top-level baseline geometry only depends on the expansion point.
struct Worker {
  const CampaignConfig& cfg;
  const Scenario& scn;
  const Scenario& draw_scn;
  const std::vector<Cell>& cells;
  std::vector<double> theta;
  std::optional<SsGeometry> geom;
  Eigen::Vector3d geom_point = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());

  EpochRecord run(std::size_t epoch) {
    const auto t_epoch = Clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.cells.assign(cells.size(), CellResult{});

    auto t0 = Clock::now();
    const EpochDraw draw = draw_epoch(draw_scn, epoch_seed(cfg.campaign_seed, epoch), cfg.init_error);
    const LinearModel model = linearize(scn, draw.expansion_point);
    rec.fault_mask = draw.fault_mask();
    rec.times.draw = seconds_since(t0);

    const bool any_bayes = std::any_of(cells.begin(), cells.end(),
                                       [](const Cell& c) { return c.algorithm != Algorithm::baseline; });
    if (any_bayes) run_bayes(model, draw, rec);
    if (std::any_of(cells.begin(), cells.end(), [](const Cell& c) { return c.algorithm == Algorithm::baseline; }))
      run_baseline(model, draw, rec);
    rec.times.total = seconds_since(t_epoch);
    return rec;
  }

  void run_bayes(const LinearModel& model, const EpochDraw& draw, EpochRecord& rec) {
    auto t0 = Clock::now();
    std::optional<PosteriorResult> post;
    try {
      const auto branches = branch_messages(model, draw.y, scn.faults);
      FusionOptions opt;
      opt.fault_probs = false;
      post = fuse_posterior(branches, opt);
    } catch (const std::exception&) {
      post.reset();
    }
    rec.times.bayes_fusion = seconds_since(t0);
    if (!post) return;

    const Eigen::Vector3d err = post->x_hat - scn.ue_true;
    std::vector<std::optional<double>> exact_1d(cfg.subspaces.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const Cell& cell = cells[c];
      if (cell.algorithm == Algorithm::baseline) continue;
      const SubspaceSpec& sub = cfg.subspaces[cell.subspace];
      const double p = cfg.p_tir_for(sub);
      t0 = Clock::now();
      CellResult& out = rec.cells[c];
      out.pe = projected_norm(sub, err);
      try {
        if (sub.dims() == 1) {
          // Both Bayesian methods coincide in one dimension.
          if (!exact_1d[cell.subspace])
            exact_1d[cell.subspace] = pl_1d_exact(project_error(*post, sub), p, cfg.r_tol).radius;
          out.pl = *exact_1d[cell.subspace];
        } else if (cell.algorithm == Algorithm::bayes_over) {
          out.pl = pl_overestimate(project_error(*post, sub), p, {}, cfg.r_tol).radius;
        } else {
          ExactPlOptions opt;
          opt.zeta1 = cfg.zeta1;
          opt.zeta2 = cfg.zeta2;
          opt.r_tol = cfg.r_tol;
          const PlResult r = pl_exact_nd(project_error(*post, sub), p, opt);
          out.pl = r.radius;
          out.fallback = r.fallback;
        }
        out.available = true;
      } catch (const std::exception&) {
        out.available = false;
      }
      (cell.algorithm == Algorithm::bayes_exact ? rec.times.bayes_exact_pl : rec.times.bayes_over_pl) +=
          seconds_since(t0);
    }
  }

  void run_baseline(const LinearModel& model, const EpochDraw& draw, EpochRecord& rec) {
    auto t0 = Clock::now();
    std::optional<SsTestReport> report;
    try {
      if (!geom || geom_point != draw.expansion_point) {
        geom.emplace(model, full_mask(model.size()), enumerate_fault_modes(model.size(), theta), cfg.false_alarm);
        geom_point = draw.expansion_point;
      }
      report = baseline_fde(*geom, model, draw.y, theta, cfg.false_alarm);
      rec.baseline_alarm = report->exclusion_attempted;
    } catch (const std::exception&) {
      report.reset();
    }
    rec.times.baseline_fde = seconds_since(t0);
    if (!report) return;

    t0 = Clock::now();
    const Eigen::Vector3d err = report->x_hat.head<3>() - scn.ue_true;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].algorithm != Algorithm::baseline) continue;
      const SubspaceSpec& sub = cfg.subspaces[cells[c].subspace];
      CellResult& out = rec.cells[c];
      out.pe = projected_norm(sub, err);
      if (!report->available) continue;
      const std::vector<int> axes = axes_of(sub);
      const double p = cfg.p_tir_for(sub) / static_cast<double>(axes.size());
      double sq = 0.0;
      bool ok = true;
      for (int a : axes) {
        const auto pl = baseline_axis_pl(*report, a, p, cfg.r_tol);
        if (!pl) {
          ok = false;
          break;
        }
        sq += *pl * *pl;
      }
      out.available = ok;
      out.pl = ok ? std::sqrt(sq) : 0.0;
    }
    rec.times.baseline_pl = seconds_since(t0);
  }
};

}  // namespace

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::bayes_exact: return "bayes_exact";
    case Algorithm::bayes_over: return "bayes_over";
    case Algorithm::baseline: return "baseline";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "bayes_exact") return Algorithm::bayes_exact;
  if (name == "bayes_over") return Algorithm::bayes_over;
  if (name == "baseline") return Algorithm::baseline;
  throw ConfigError("unknown algorithm '" + name + "' (expected bayes_exact, bayes_over or baseline)");
}

std::vector<SubspaceSpec> default_subspaces() {
  const double c = std::numbers::sqrt2 / 2.0;
  return {SubspaceSpec::plane(Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(), "H"),
          SubspaceSpec::direction(Eigen::Vector3d::UnitZ(), "V"),
          SubspaceSpec::direction(Eigen::Vector3d(c, c, 0.0), "D45")};
}

void CampaignConfig::validate() const {
  if (n_epochs < 1) throw ConfigError("n_epochs must be at least 1");
  if (!probability(p_tir)) throw ConfigError("p_tir must lie in (0, 1)");
  for (const auto& [name, p] : p_tir_by_subspace) {
    if (!probability(p)) throw ConfigError("p_tir for '" + name + "' must lie in (0, 1)");
    if (std::none_of(subspaces.begin(), subspaces.end(), [&](const SubspaceSpec& s) { return s.name == name; }))
      throw ConfigError("p_tir given for unknown subspace '" + name + "'");
  }
  if (!probability(false_alarm.p_fa_h) || !probability(false_alarm.p_fa_v))
    throw ConfigError("false-alarm probabilities must lie in (0, 1)");
  if (algorithms.empty()) throw ConfigError("no algorithms selected");
  if (subspaces.empty()) throw ConfigError("no subspaces selected");
  for (std::size_t i = 0; i < subspaces.size(); ++i) {
    try {
      subspaces[i].validate();
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
    for (std::size_t j = 0; j < i; ++j)
      if (subspaces[i].name == subspaces[j].name) throw ConfigError("duplicate subspace '" + subspaces[i].name + "'");
  }
  if (!(zeta1 > 0.0 && zeta2 >= 0.0 && zeta1 + zeta2 < 1.0))
    throw ConfigError("need zeta1 > 0, zeta2 >= 0 and zeta1 + zeta2 < 1");
  if (!(r_tol > 0.0)) throw ConfigError("r_tol must be positive");
  if (init_error.kind == InitErrorModel::Kind::horizontal && !(init_error.magnitude >= 0.0))
    throw ConfigError("horizontal initial error magnitude must be nonnegative");
  if (!(stanford_pixel > 0.0)) throw ConfigError("stanford_pixel must be positive");
  resolve_scenario().validate();
}

double CampaignConfig::p_tir_for(const SubspaceSpec& s) const {
  const auto it = p_tir_by_subspace.find(s.name);
  return it == p_tir_by_subspace.end() ? p_tir : it->second;
}

Scenario CampaignConfig::resolve_scenario() const {
  if (!scenario) return generate_scenario(layout_seed, fault_type.value_or(FaultType::nlos), layout);
  Scenario s = *scenario;
  if (fault_type) apply_fault_type(s, *fault_type, layout_seed, layout);
  return s;
}

std::vector<Cell> campaign_cells(const CampaignConfig& c) {
  std::vector<Cell> out;
  for (Algorithm a : c.algorithms)
    for (std::size_t s = 0; s < c.subspaces.size(); ++s) {
      if (a == Algorithm::baseline && !c.subspaces[s].axis_aligned()) continue;
      out.push_back(Cell{a, s, std::string(to_string(a)) + "/" + c.subspaces[s].name});
    }
  return out;
}

const CellSummary& MetricsSummary::cell(const std::string& name) const {
  for (const auto& c : cells)
    if (c.name == name) return c;
  throw InvalidInput("no cell named '" + name + "'");
}

MetricsSummary summarize(std::span<const Cell> cells, std::span<const EpochRecord> records) {
  MetricsSummary s;
  s.n_epochs = records.size();
  for (const auto& r : records) {
    s.faulty_epochs += r.fault_mask != 0;
    s.baseline_alarms += r.baseline_alarm;
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellSummary cs;
    cs.name = cells[c].name;
    cs.n_epochs = records.size();
    std::vector<double> pls;
    for (const auto& r : records) {
      const CellResult& x = r.cells[c];
      if (!x.available) continue;
      ++cs.n_available;
      cs.failures += x.pe > x.pl;
      cs.fallbacks += x.fallback;
      pls.push_back(x.pl);
    }
    if (cs.n_epochs > 0) {
      cs.ir = static_cast<double>(cs.failures) / static_cast<double>(cs.n_epochs);
      cs.ir_ci = clopper_pearson(cs.failures, cs.n_epochs);
      cs.availability = static_cast<double>(cs.n_available) / static_cast<double>(cs.n_epochs);
    }
    if (!pls.empty()) {
      cs.pl_p50 = percentile(pls, 50.0);
      cs.pl_p95 = percentile(pls, 95.0);
      cs.pl_p99 = percentile(pls, 99.0);
    }
    s.cells.push_back(std::move(cs));
  }
  return s;
}

CampaignResult run_campaign(const CampaignConfig& c, unsigned threads) {
  c.validate();
  CampaignResult res;
  res.scenario = c.resolve_scenario();
  res.cells = campaign_cells(c);
  Scenario draw_scn = res.scenario;
  if (c.fault_free)
    for (auto& f : draw_scn.faults) f.theta = 0.0;
  std::vector<double> theta;
  for (const auto& f : res.scenario.faults) theta.push_back(f.theta);

  res.records.resize(c.n_epochs);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    Worker w{c, res.scenario, draw_scn, res.cells, theta, std::nullopt, Eigen::Vector3d::Constant(std::nan(""))};
    for (std::size_t e; (e = next.fetch_add(1)) < c.n_epochs;) res.records[e] = w.run(e);
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  res.summary = summarize(res.cells, res.records);
  return res;
}

StanfordHistogram stanford_export(std::span<const EpochRecord> records, std::size_t cell, double pixel) {
  if (records.empty()) throw InvalidInput("stanford_export: no records");
  if (!(pixel > 0.0)) throw InvalidInput("stanford_export: pixel must be positive");
  StanfordHistogram h;
  h.pixel = pixel;
  for (const auto& r : records) {
    if (cell >= r.cells.size()) throw InvalidInput("stanford_export: cell index out of range");
    const CellResult& x = r.cells[cell];
    if (!x.available) continue;
    ++h.n_available;
    ++h.bins[{static_cast<long>(std::floor(x.pe / pixel)), static_cast<long>(std::floor(x.pl / pixel))}];
    if (x.pe > x.pl) h.below_diagonal.push_back({r.epoch, x.pe, x.pl});
  }
  return h;
}

std::vector<double> default_sweep_values(InitErrorModel::Kind kind) {
  std::vector<double> v;
  if (kind == InitErrorModel::Kind::horizontal)
    for (int i = 0; i <= 10; ++i) v.push_back(0.5 * i);
  else if (kind == InitErrorModel::Kind::vertical)
    for (int i = -5; i <= 5; ++i) v.push_back(2.0 * i);
  else
    v.push_back(0.0);
  return v;
}

SweepResult sensitivity_sweep(const CampaignConfig& base, InitErrorModel::Kind kind, std::vector<double> values,
                              unsigned threads) {
  if (values.empty()) throw ConfigError("sensitivity sweep needs at least one value");
  SweepResult out;
  out.kind = kind;
  out.values = values;
  std::vector<Cell> cells = campaign_cells(base);
  for (double v : values) {
    CampaignConfig c = base;
    c.init_error = InitErrorModel{kind, v};
    out.summaries.push_back(run_campaign(c, threads).summary);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    SweepResult::Spread s;
    s.name = cells[i].name;
    std::vector<double> p50, ir;
    for (const auto& m : out.summaries) {
      if (m.cells[i].pl_p50) p50.push_back(*m.cells[i].pl_p50);
      ir.push_back(m.cells[i].ir);
    }
    if (!p50.empty()) {
      s.p50_min = *std::min_element(p50.begin(), p50.end());
      s.p50_max = *std::max_element(p50.begin(), p50.end());
      s.p50_cv = coefficient_of_variation(p50);
    }
    s.ir_min = *std::min_element(ir.begin(), ir.end());
    s.ir_max = *std::max_element(ir.begin(), ir.end());
    s.ir_cv = s.ir_max > 0.0 ? coefficient_of_variation(ir) : 0.0;
    out.spread.push_back(s);
  }
  return out;
}

}  // namespace braim
