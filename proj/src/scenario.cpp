#include "braim/scenario.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "braim/error.hpp"

namespace braim {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kNlosStream = 0x6e6c6f73ULL;

std::vector<double> draw_nlos_means(std::uint64_t layout_seed, int m, const LayoutParams& p) {
  std::mt19937_64 rng(splitmix64(layout_seed ^ kNlosStream));
  std::uniform_real_distribution<double> ub(p.nlos_bias_min, p.nlos_bias_max);
  std::vector<double> out(static_cast<std::size_t>(m));
  for (double& v : out) v = ub(rng);
  return out;
}

}  // namespace

void Scenario::validate() const {
  const auto m = bs_positions.size();
  if (m < 4) throw ConfigError("scenario: at least 4 base stations are required");
  if (m > 24) throw ConfigError("scenario: at most 24 base stations are supported");
  if (noise_std.size() != m) throw ConfigError("scenario: noise_std must have one entry per base station");
  if (faults.size() != m) throw ConfigError("scenario: faults must have one entry per base station");
  for (double s : noise_std)
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("scenario: noise_std must be positive");
  for (const FaultSpec& f : faults) {
    if (!(f.theta > 0.0 && f.theta < 1.0)) throw ConfigError("scenario: theta must lie in (0, 1)");
    if (!(f.bias_std >= 0.0) || !std::isfinite(f.bias_mean))
      throw ConfigError("scenario: invalid bias parameters");
  }
  for (const auto& x : bs_positions)
    if ((x - initial_estimate).norm() == 0.0)
      throw ConfigError("scenario: base station coincides with the initial estimate");
}

LinearModel linearize(const Scenario& s) { return linearize(s, s.initial_estimate); }

LinearModel linearize(const Scenario& s, const Eigen::Vector3d& x0) {
  const int m = s.size();
  LinearModel lm;
  lm.h.resize(m, 4);
  lm.noise_var.resize(m);
  lm.expansion_point = x0;
  for (int i = 0; i < m; ++i) {
    const Eigen::Vector3d d = x0 - s.bs_positions[static_cast<std::size_t>(i)];
    const double r = d.norm();
    if (r == 0.0) throw ConfigError("linearize: base station coincides with the expansion point");
    lm.h.row(i).head<3>() = (d / r).transpose();
    lm.h(i, 3) = 1.0;
    const double sd = s.noise_std[static_cast<std::size_t>(i)];
    lm.noise_var[i] = sd * sd;
  }
  return lm;
}

std::uint32_t EpochDraw::fault_mask() const {
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < lambda_true.size(); ++i)
    if (lambda_true[i]) mask |= 1u << i;
  return mask;
}

std::uint64_t epoch_seed(std::uint64_t campaign_seed, std::uint64_t epoch_index) {
  return splitmix64(splitmix64(campaign_seed) ^ splitmix64(epoch_index + 0x243f6a8885a308d3ULL));
}

Eigen::VectorXd observables(const Scenario& s, const Eigen::VectorXd& range,
                            const Eigen::Vector3d& x0) {
  const int m = s.size();
  Eigen::VectorXd y(m);
  for (int i = 0; i < m; ++i) {
    const Eigen::Vector3d d = x0 - s.bs_positions[static_cast<std::size_t>(i)];
    const double r = d.norm();
    y[i] = range[i] - r + (d / r).dot(x0);
  }
  return y;
}

EpochDraw draw_epoch(const Scenario& s, std::uint64_t rng_seed, const InitErrorModel& init) {
  const int m = s.size();
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  EpochDraw e;
  e.rng_seed = rng_seed;
  e.lambda_true.assign(static_cast<std::size_t>(m), false);
  e.b = Eigen::VectorXd::Zero(m);
  e.n.resize(m);
  e.range.resize(m);
  for (int i = 0; i < m; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const FaultSpec& f = s.faults[iu];
    const bool faulty = std::bernoulli_distribution(f.theta)(rng);
    e.lambda_true[iu] = faulty;
    if (faulty) e.b[i] = f.bias_mean + f.bias_std * normal(rng);
    e.n[i] = s.noise_std[iu] * normal(rng);
    e.range[i] = (s.bs_positions[iu] - s.ue_true).norm() + s.clock_bias + e.b[i] + e.n[i];
  }

  switch (init.kind) {
    case InitErrorModel::Kind::none:
      e.expansion_point = s.initial_estimate;
      break;
    case InitErrorModel::Kind::horizontal: {
      const double phi = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
      e.expansion_point = s.ue_true + init.magnitude * Eigen::Vector3d(std::cos(phi), std::sin(phi), 0.0);
      break;
    }
    case InitErrorModel::Kind::vertical:
      e.expansion_point = s.ue_true + Eigen::Vector3d(0.0, 0.0, init.magnitude);
      break;
  }
  e.y = observables(s, e.range, e.expansion_point);
  return e;
}

FaultType parse_fault_type(const std::string& name) {
  if (name == "nlos") return FaultType::nlos;
  if (name == "clock") return FaultType::clock;
  throw ConfigError("unknown fault type '" + name + "' (expected nlos or clock)");
}

std::string to_string(FaultType t) { return t == FaultType::nlos ? "nlos" : "clock"; }

void apply_fault_type(Scenario& s, FaultType type, std::uint64_t layout_seed, const LayoutParams& p) {
  const std::vector<double> means = draw_nlos_means(layout_seed, s.size(), p);
  for (std::size_t i = 0; i < s.faults.size(); ++i) {
    if (type == FaultType::nlos) {
      s.faults[i].bias_mean = means[i];
      s.faults[i].bias_std = 1.0;
    } else {
      s.faults[i].bias_mean = 0.0;
      s.faults[i].bias_std = 10.0;
    }
  }
}

Scenario generate_scenario(std::uint64_t layout_seed, FaultType type, const LayoutParams& p) {
  std::mt19937_64 rng(splitmix64(layout_seed));
  std::normal_distribution<double> jitter(0.0, p.jitter_std);
  std::uniform_real_distribution<double> height(p.height_min, p.height_max);
  Scenario s;
  for (int r = 0; r < p.rows; ++r) {
    for (int c = 0; c < p.cols; ++c) {
      const double cx = (c - 0.5 * (p.cols - 1)) * p.cell_x;
      const double cy = (r - 0.5 * (p.rows - 1)) * p.cell_y;
      const double jx = jitter(rng);
      const double jy = jitter(rng);
      s.bs_positions.emplace_back(cx + jx, cy + jy, height(rng));
    }
  }
  const auto m = s.bs_positions.size();
  s.noise_std.assign(m, p.noise_std);
  s.faults.assign(m, FaultSpec{p.theta, 0.0, 0.0});
  apply_fault_type(s, type, layout_seed, p);
  return s;
}

}  // namespace braim
