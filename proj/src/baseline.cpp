#include "braim/baseline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "braim/error.hpp"
#include "braim/normal.hpp"

namespace braim {
namespace {

using Gain = Eigen::Matrix<double, 4, Eigen::Dynamic>;

bool lex_less(std::uint32_t a, std::uint32_t b) {
  while (a != 0 && b != 0) {
    const int la = std::countr_zero(a);
    const int lb = std::countr_zero(b);
    if (la != lb) return la < lb;
    a &= a - 1;
    b &= b - 1;
  }
  return a == 0 && b != 0;
}

// Information matrix and weighted regressor of the measurements in mask.
struct Normal {
  Eigen::Matrix4d info = Eigen::Matrix4d::Zero();
  Gain hw;  // column i = h_i / sigma_i^2, zero outside mask
};

Normal normal_equations(const LinearModel& model, std::uint32_t mask) {
  const int m = model.size();
  Normal n;
  n.hw = Gain::Zero(4, m);
  for (int i = 0; i < m; ++i) {
    if (!((mask >> i) & 1u)) continue;
    const Eigen::Vector4d h = model.h.row(i).transpose();
    n.hw.col(i) = h / model.noise_var[i];
    n.info.noalias() += n.hw.col(i) * h.transpose();
  }
  return n;
}

// Inverse of a 4x4 information matrix, or nullopt when it is numerically singular.
std::optional<Eigen::Matrix4d> covariance_of(const Eigen::Matrix4d& info) {
  Eigen::LLT<Eigen::Matrix4d> llt(info);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Eigen::Vector4d d = llt.matrixLLT().diagonal();
  if (!(d.minCoeff() > 1e-7 * d.maxCoeff())) return std::nullopt;
  return llt.solve(Eigen::Matrix4d::Identity());
}

// Separation gain rows (3 x M, row-major) and position covariance for one mode.
struct ModeGeom {
  std::vector<double> sep;
  Eigen::Vector3d sigma_ss, sigma_pos;
};

std::optional<ModeGeom> mode_geometry(const LinearModel& model, const Normal& aiv, const Gain& gain0,
                                      std::uint32_t faulty_mask) {
  const int m = model.size();
  Eigen::Matrix4d info = aiv.info;
  Gain hw = aiv.hw;
  for (std::uint32_t f = faulty_mask; f != 0; f &= f - 1) {
    const int i = std::countr_zero(f);
    info.noalias() -= hw.col(i) * model.h.row(i);
    hw.col(i).setZero();
  }
  info = 0.5 * (info + info.transpose()).eval();
  const auto phi = covariance_of(info);
  if (!phi) return std::nullopt;
  const Gain diff = (*phi) * hw - gain0;
  ModeGeom g;
  g.sep.resize(static_cast<std::size_t>(3 * m));
  for (int r = 0; r < 3; ++r) {
    double var = 0.0;
    for (int c = 0; c < m; ++c) {
      g.sep[static_cast<std::size_t>(r * m + c)] = diff(r, c);
      var += diff(r, c) * diff(r, c) * model.noise_var[c];
    }
    g.sigma_ss[r] = std::sqrt(var);
    g.sigma_pos[r] = std::sqrt((*phi)(r, r));
  }
  return g;
}

// Full monitoring of the free set of a candidate without storing anything; stops at the first
// separation that exceeds its threshold.
bool subset_passes(const LinearModel& model, const Eigen::VectorXd& y, std::uint32_t mask,
                   std::span<const double> theta, const FalseAlarmBudget& budget, const kernels::Table& kt) {
  const std::vector<FaultMode> modes = enumerate_fault_modes(mask, theta);
  if (modes.empty()) return false;
  const Normal aiv = normal_equations(model, mask);
  const auto phi0 = covariance_of(aiv.info);
  if (!phi0) return false;
  const Gain gain0 = (*phi0) * aiv.hw;
  const Eigen::Vector3d k = ss_threshold_factors(modes.size(), budget);
  const int m = model.size();
  for (const FaultMode& mode : modes) {
    const auto g = mode_geometry(model, aiv, gain0, mode.faulty_mask);
    if (!g) continue;
    for (int r = 0; r < 3; ++r) {
      const double tau = std::abs(kt.dot(g->sep.data() + r * m, y.data(), static_cast<std::size_t>(m)));
      if (tau > g->sigma_ss[r] * k[r]) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<int> mask_indices(std::uint32_t mask) {
  std::vector<int> out;
  for (; mask != 0; mask &= mask - 1) out.push_back(std::countr_zero(mask));
  return out;
}

std::uint32_t full_mask(int m) { return m >= 32 ? ~0u : ((1u << m) - 1u); }

std::vector<int> FaultMode::free_set() const { return mask_indices(free_mask()); }
std::vector<int> FaultMode::faulty_set() const { return mask_indices(faulty_mask); }

std::size_t fault_mode_count(int n, int min_free) {
  std::size_t total = 0;
  double c = 1.0;  // C(n, j)
  for (int j = 1; j <= n - min_free; ++j) {
    c = c * (n - j + 1) / j;
    total += static_cast<std::size_t>(std::llround(c));
  }
  return total;
}

std::vector<FaultMode> enumerate_fault_modes(std::uint32_t universe, std::span<const double> theta,
                                             int min_free) {
  const std::vector<int> idx = mask_indices(universe);
  const int n = static_cast<int>(idx.size());
  std::vector<FaultMode> modes;
  if (n <= min_free) return modes;
  if (!idx.empty() && idx.back() >= static_cast<int>(theta.size()))
    throw InvalidInput("enumerate_fault_modes: theta is shorter than the universe");

  // p_fm = prod_{free}(1 - theta) prod_{faulty} theta, written as the all-free probability
  // times the odds of each faulty measurement so that equal odds give bit-identical p_fm.
  double p_none = 1.0;
  for (int i : idx) p_none *= 1.0 - theta[static_cast<std::size_t>(i)];
  modes.reserve(fault_mode_count(n, min_free));
  const std::uint32_t limit = 1u << n;
  for (std::uint32_t sub = 1; sub < limit; ++sub) {
    const int k = std::popcount(sub);
    if (k > n - min_free) continue;
    FaultMode f;
    f.universe_mask = universe;
    double p = p_none;
    for (std::uint32_t s = sub; s != 0; s &= s - 1) {
      const int i = idx[static_cast<std::size_t>(std::countr_zero(s))];
      f.faulty_mask |= 1u << i;
      const double t = theta[static_cast<std::size_t>(i)];
      p *= t / (1.0 - t);
    }
    f.p_fm = p;
    modes.push_back(f);
  }
  std::sort(modes.begin(), modes.end(), [](const FaultMode& a, const FaultMode& b) {
    if (a.p_fm != b.p_fm) return a.p_fm > b.p_fm;
    return lex_less(a.faulty_mask, b.faulty_mask);
  });
  return modes;
}

std::vector<FaultMode> enumerate_fault_modes(int m, std::span<const double> theta, int min_free) {
  return enumerate_fault_modes(full_mask(m), theta, min_free);
}

std::optional<WlsResult> wls_estimate(const LinearModel& model, const Eigen::VectorXd& y, std::uint32_t use_mask) {
  const Normal n = normal_equations(model, use_mask);
  const auto phi = covariance_of(n.info);
  if (!phi) return std::nullopt;
  WlsResult r;
  r.phi = *phi;
  r.gain = r.phi * n.hw;
  r.x_hat = r.gain * y;
  return r;
}

std::optional<WlsResult> wls_estimate(const LinearModel& model, const Eigen::VectorXd& y, const FaultMode* mode) {
  return wls_estimate(model, y, mode != nullptr ? mode->free_mask() : full_mask(model.size()));
}

Eigen::Vector3d ss_threshold_factors(std::size_t n_modes, const FalseAlarmBudget& budget) {
  if (n_modes == 0) return Eigen::Vector3d::Zero();
  const double n = static_cast<double>(n_modes);
  const double kh = q_inv(budget.p_fa_h / (4.0 * n));
  return {kh, kh, q_inv(budget.p_fa_v / (2.0 * n))};
}

SsGeometry::SsGeometry(const LinearModel& model, std::uint32_t aiv_mask, std::vector<FaultMode> modes,
                       const FalseAlarmBudget& budget)
    : m_(model.size()), aiv_mask_(aiv_mask), n_fm_(modes.size()) {
  const Normal aiv = normal_equations(model, aiv_mask);
  const auto phi0 = covariance_of(aiv.info);
  if (!phi0) throw UnobservableState("SsGeometry: all-in-view measurements do not determine the state");
  gain0_ = (*phi0) * aiv.hw;
  for (int r = 0; r < 3; ++r) sigma0_[r] = std::sqrt((*phi0)(r, r));
  factors_ = ss_threshold_factors(n_fm_, budget);

  std::vector<ModeGeom> kept;
  kept.reserve(modes.size());
  for (const FaultMode& mode : modes) {
    if ((mode.faulty_mask & ~aiv_mask) != 0) throw InvalidInput("SsGeometry: mode excludes a measurement outside the all-in-view set");
    auto g = mode_geometry(model, aiv, gain0_, mode.faulty_mask);
    if (!g) continue;
    modes_.push_back(mode);
    kept.push_back(std::move(*g));
  }
  const auto n = static_cast<Eigen::Index>(kept.size());
  sep_.reserve(kept.size() * static_cast<std::size_t>(3 * m_));
  sigma_ss_.resize(n, 3);
  thresholds_.resize(n, 3);
  sigma_pos_.resize(n, 3);
  for (Eigen::Index k = 0; k < n; ++k) {
    const ModeGeom& g = kept[static_cast<std::size_t>(k)];
    sep_.insert(sep_.end(), g.sep.begin(), g.sep.end());
    for (int r = 0; r < 3; ++r) {
      sigma_ss_(k, r) = g.sigma_ss[r];
      thresholds_(k, r) = g.sigma_ss[r] * factors_[r];
      sigma_pos_(k, r) = g.sigma_pos[r];
    }
  }
}

SsTestReport ss_test(const SsGeometry& geom, const Eigen::VectorXd& y, const kernels::Table* kt) {
  const kernels::Table& k = kt != nullptr ? *kt : kernels::active();
  if (y.size() != geom.size()) throw InvalidInput("ss_test: measurement vector has the wrong size");
  const auto n = static_cast<Eigen::Index>(geom.modes().size());
  SsTestReport r;
  r.tau.resize(n, 3);
  std::vector<double> sep_y(static_cast<std::size_t>(3 * n));
  if (n > 0) k.gemv(geom.separation().data(), static_cast<std::size_t>(3 * n), static_cast<std::size_t>(geom.size()),
                    y.data(), sep_y.data());
  r.passed = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double t = std::abs(sep_y[static_cast<std::size_t>(3 * i + c)]);
      r.tau(i, c) = t;
      if (t > geom.thresholds()(i, c)) r.passed = false;
    }
  }
  r.available = r.passed;
  r.thresholds = geom.thresholds();
  r.solution_mask = geom.all_in_view_mask();
  r.x_hat = geom.gain0() * y;
  r.sigma0 = geom.sigma0();
  r.p_fm.reserve(geom.modes().size());
  for (const FaultMode& f : geom.modes()) r.p_fm.push_back(f.p_fm);
  r.sigma_pos = geom.sigma_pos();
  return r;
}

SsTestReport ss_test(const LinearModel& model, const Eigen::VectorXd& y, std::span<const FaultMode> modes,
                     const FalseAlarmBudget& budget) {
  const SsGeometry g(model, full_mask(model.size()), std::vector<FaultMode>(modes.begin(), modes.end()), budget);
  return ss_test(g, y);
}

SsTestReport fault_exclusion(const LinearModel& model, const Eigen::VectorXd& y, std::span<const FaultMode> modes,
                             std::span<const double> theta, const FalseAlarmBudget& budget) {
  const kernels::Table& kt = kernels::active();
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const std::uint32_t mask = modes[k].free_mask();
    if (!subset_passes(model, y, mask, theta, budget, kt)) continue;
    const SsGeometry g(model, mask, enumerate_fault_modes(mask, theta), budget);
    SsTestReport r = ss_test(g, y, &kt);
    if (!r.passed) continue;
    r.exclusion_attempted = true;
    r.accepted_mode = k;
    return r;
  }
  SsTestReport r;
  r.exclusion_attempted = true;
  return r;
}

SsTestReport baseline_fde(const SsGeometry& top, const LinearModel& model, const Eigen::VectorXd& y,
                          std::span<const double> theta, const FalseAlarmBudget& budget) {
  SsTestReport r = ss_test(top, y);
  if (r.passed) return r;
  return fault_exclusion(model, y, top.modes(), theta, budget);
}

std::optional<double> baseline_axis_pl(const SsTestReport& report, int axis, double p_tir, double r_tol) {
  if (!report.available) return std::nullopt;
  if (!(p_tir > 0.0 && p_tir < 1.0)) throw InvalidInput("baseline_axis_pl: P_TIR must lie in (0, 1)");
  const std::size_t n = report.p_fm.size();
  std::vector<double> tail(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) tail[k] = tail[k + 1] + report.p_fm[k];
  const double s0 = report.sigma0[axis];

  // Terms are visited in decreasing p_fm; each is at most p_fm, so the remaining tail bounds
  // what is left and the comparison can often be settled early.
  const auto satisfied = [&](double r) {
    double s = 2.0 * q_func(r / s0);
    for (std::size_t k = 0; k < n; ++k) {
      if (s >= p_tir) return false;
      if (s + tail[k] < p_tir) return true;
      const auto ki = static_cast<Eigen::Index>(k);
      s += report.p_fm[k] * q_func((r - report.thresholds(ki, axis)) / report.sigma_pos(ki, axis));
    }
    return s < p_tir;
  };

  double hi = 10.0 * s0;
  while (!satisfied(hi)) {
    hi *= 2.0;
    if (hi > 1e7) return std::nullopt;
  }
  double lo = 0.0;
  while (hi - lo > r_tol) {
    const double mid = 0.5 * (lo + hi);
    (satisfied(mid) ? hi : lo) = mid;
  }
  return hi;
}

BaselinePl baseline_pl(const SsTestReport& report, double p_tir_h, double p_tir_v, double r_tol) {
  BaselinePl out;
  const auto p1 = baseline_axis_pl(report, 0, 0.5 * p_tir_h, r_tol);
  const auto p2 = baseline_axis_pl(report, 1, 0.5 * p_tir_h, r_tol);
  const auto p3 = baseline_axis_pl(report, 2, p_tir_v, r_tol);
  if (!p1 || !p2 || !p3) return out;
  out.pl_h = std::hypot(*p1, *p2);
  out.pl_v = *p3;
  out.available = true;
  return out;
}

}  // namespace braim
