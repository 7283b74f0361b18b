#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "braim/kernels.hpp"
#include "braim/scenario.hpp"

namespace braim {

// Hypothesis that exactly the measurements in faulty_mask are faulty, within the monitored
// set universe_mask. Measurement i is bit i.
struct FaultMode {
  std::uint32_t universe_mask = 0;
  std::uint32_t faulty_mask = 0;
  double p_fm = 0.0;

  std::uint32_t free_mask() const { return universe_mask & ~faulty_mask; }
  std::vector<int> free_set() const;
  std::vector<int> faulty_set() const;
};

std::vector<int> mask_indices(std::uint32_t mask);
std::uint32_t full_mask(int m);

// All subsets of 1 .. |universe| - min_free faulty measurements, sorted by p_fm descending,
// ties broken lexicographically on the sorted faulty indices. Empty when |universe| <= min_free.
std::vector<FaultMode> enumerate_fault_modes(std::uint32_t universe_mask, std::span<const double> theta,
                                             int min_free = 5);
std::vector<FaultMode> enumerate_fault_modes(int m, std::span<const double> theta, int min_free = 5);

// sum_{j=1}^{n-min_free} C(n, j).
std::size_t fault_mode_count(int n, int min_free = 5);

struct WlsResult {
  Eigen::Vector4d x_hat = Eigen::Vector4d::Zero();
  Eigen::Matrix4d phi = Eigen::Matrix4d::Zero();
  Eigen::Matrix<double, 4, Eigen::Dynamic> gain;  // columns of excluded measurements are zero
};

// WLS over the measurements in use_mask; nullopt when they do not determine the state.
std::optional<WlsResult> wls_estimate(const LinearModel& model, const Eigen::VectorXd& y,
                                      std::uint32_t use_mask);
std::optional<WlsResult> wls_estimate(const LinearModel& model, const Eigen::VectorXd& y,
                                      const FaultMode* mode = nullptr);

struct FalseAlarmBudget {
  double p_fa_h = 1e-2;
  double p_fa_v = 1e-2;
};

// Threshold multipliers Q^-1(P_FA_H / (4 N)) and Q^-1(P_FA_V / (2 N)).
Eigen::Vector3d ss_threshold_factors(std::size_t n_modes, const FalseAlarmBudget& budget);

// Everything about a monitored mode list that depends only on the geometry: the separation
// gains (rows 1..3 of A^(k) - A^(0)), their standard deviations, thresholds and the position
// standard deviations sqrt(diag Phi^(k)). Modes whose subset does not determine the state are
// dropped; n_fm stays the enumerated count.
class SsGeometry {
 public:
  SsGeometry(const LinearModel& model, std::uint32_t all_in_view_mask, std::vector<FaultMode> modes,
             const FalseAlarmBudget& budget);

  std::uint32_t all_in_view_mask() const { return aiv_mask_; }
  std::size_t n_fm() const { return n_fm_; }
  const std::vector<FaultMode>& modes() const { return modes_; }
  const Eigen::Matrix<double, 4, Eigen::Dynamic>& gain0() const { return gain0_; }
  const Eigen::Vector3d& sigma0() const { return sigma0_; }
  const Eigen::Vector3d& factors() const { return factors_; }
  // Row-major (3 * modes) x M stack of separation gains.
  const std::vector<double>& separation() const { return sep_; }
  const Eigen::Matrix<double, Eigen::Dynamic, 3>& sigma_ss() const { return sigma_ss_; }
  const Eigen::Matrix<double, Eigen::Dynamic, 3>& thresholds() const { return thresholds_; }
  const Eigen::Matrix<double, Eigen::Dynamic, 3>& sigma_pos() const { return sigma_pos_; }
  int size() const { return m_; }

 private:
  int m_ = 0;
  std::uint32_t aiv_mask_ = 0;
  std::size_t n_fm_ = 0;
  std::vector<FaultMode> modes_;
  Eigen::Matrix<double, 4, Eigen::Dynamic> gain0_;
  Eigen::Vector3d sigma0_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d factors_ = Eigen::Vector3d::Zero();
  std::vector<double> sep_;
  Eigen::Matrix<double, Eigen::Dynamic, 3> sigma_ss_, thresholds_, sigma_pos_;
};

struct SsTestReport {
  Eigen::Matrix<double, Eigen::Dynamic, 3> tau;
  Eigen::Matrix<double, Eigen::Dynamic, 3> thresholds;
  bool passed = false;
  bool available = false;
  bool exclusion_attempted = false;
  // Index into the top-level mode list of the mode accepted by exclusion; empty when the
  // all-in-view solution passed.
  std::optional<std::size_t> accepted_mode;
  std::uint32_t solution_mask = 0;  // measurements behind x_hat

  Eigen::Vector4d x_hat = Eigen::Vector4d::Zero();
  // Inputs of the PL bound for the accepted solution and its monitored modes.
  Eigen::Vector3d sigma0 = Eigen::Vector3d::Zero();
  std::vector<double> p_fm;
  Eigen::Matrix<double, Eigen::Dynamic, 3> sigma_pos;
};

SsTestReport ss_test(const SsGeometry& geom, const Eigen::VectorXd& y,
                     const kernels::Table* kt = nullptr);
SsTestReport ss_test(const LinearModel& model, const Eigen::VectorXd& y, std::span<const FaultMode> modes,
                     const FalseAlarmBudget& budget);

// Remark-1 exclusion: each top-level mode k in order is re-monitored on its free set with
// its own sub-mode list; the first that passes is accepted. A free set too small to carry any
// sub-mode cannot confirm itself and is skipped.
SsTestReport fault_exclusion(const LinearModel& model, const Eigen::VectorXd& y,
                             std::span<const FaultMode> modes, std::span<const double> theta,
                             const FalseAlarmBudget& budget);

// ss_test, then fault_exclusion when the test fails.
SsTestReport baseline_fde(const SsGeometry& top, const LinearModel& model, const Eigen::VectorXd& y,
                          std::span<const double> theta, const FalseAlarmBudget& budget);

// Smallest r (within r_tol) with 2 Q(r / sigma0_n) + sum_k p_k Q((r - T_nk) / sigma_nk) < p_tir.
// nullopt when no r up to the bracket cap satisfies it.
std::optional<double> baseline_axis_pl(const SsTestReport& report, int axis, double p_tir, double r_tol = 1e-3);

struct BaselinePl {
  double pl_h = 0.0;
  double pl_v = 0.0;
  bool available = false;
};

// Horizontal axes each get P_TIR_H / 2 and combine as sqrt(PL_1^2 + PL_2^2).
BaselinePl baseline_pl(const SsTestReport& report, double p_tir_h, double p_tir_v, double r_tol = 1e-3);

}  // namespace braim
