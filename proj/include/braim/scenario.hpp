#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace braim {

// Prior fault model of one measurement: with probability theta the range carries a bias
// drawn from N(bias_mean, bias_std^2). bias_std = 0 is a point mass.
struct FaultSpec {
  double theta = 0.05;
  double bias_mean = 0.0;
  double bias_std = 0.0;
};

struct Scenario {
  std::vector<Eigen::Vector3d> bs_positions;
  Eigen::Vector3d ue_true = Eigen::Vector3d::Zero();
  double clock_bias = 0.0;
  std::vector<double> noise_std;  // one per base station
  std::vector<FaultSpec> faults;  // one per base station
  Eigen::Vector3d initial_estimate = Eigen::Vector3d::Zero();

  int size() const { return static_cast<int>(bs_positions.size()); }
  // Throws ConfigError on inconsistent sizes, nonpositive noise, theta outside (0,1) or a
  // base station at the expansion point.
  void validate() const;
};

// Rows of h are [g_i' 1] with g_i the unit vector from base station i to the expansion point.
struct LinearModel {
  Eigen::Matrix<double, Eigen::Dynamic, 4> h;
  Eigen::VectorXd noise_var;  // diagonal of the noise covariance
  Eigen::Vector3d expansion_point = Eigen::Vector3d::Zero();

  int size() const { return static_cast<int>(h.rows()); }
};

LinearModel linearize(const Scenario& s);
LinearModel linearize(const Scenario& s, const Eigen::Vector3d& expansion_point);

// Offset of the expansion point from the true position, drawn per epoch.
struct InitErrorModel {
  enum class Kind { none, horizontal, vertical };
  Kind kind = Kind::none;
  double magnitude = 0.0;  // E_H >= 0 or signed E_V, meters
};

struct EpochDraw {
  Eigen::VectorXd y;  // linearized observables
  Eigen::VectorXd range;  // d_i: true range plus clock bias, fault bias and noise
  std::vector<bool> lambda_true;
  Eigen::VectorXd b;
  Eigen::VectorXd n;
  Eigen::Vector3d expansion_point = Eigen::Vector3d::Zero();
  std::uint64_t rng_seed = 0;

  std::uint32_t fault_mask() const;
};

// Per-epoch stream seed derived from (campaign_seed, epoch_index).
std::uint64_t epoch_seed(std::uint64_t campaign_seed, std::uint64_t epoch_index);

// Faults, biases and noise are drawn before the initial-error direction so that sweeps over
// the initial error share their noise and bias realizations.
EpochDraw draw_epoch(const Scenario& s, std::uint64_t rng_seed, const InitErrorModel& init = {});

// y_i = d_i - |x_i - x0| + g_i' x0 for expansion point x0.
Eigen::VectorXd observables(const Scenario& s, const Eigen::VectorXd& range,
                            const Eigen::Vector3d& expansion_point);

enum class FaultType { nlos, clock };

FaultType parse_fault_type(const std::string& name);
std::string to_string(FaultType t);

struct LayoutParams {
  int cols = 3;  // along x
  int rows = 4;  // along y
  double cell_x = 400.0;
  double cell_y = 250.0;
  double jitter_std = 60.0;
  double height_min = 10.0;
  double height_max = 30.0;
  double nlos_bias_min = 1.0;
  double nlos_bias_max = 20.0;
  double noise_std = 0.5;
  double theta = 0.05;
};

// Base stations at the centres of a cols x rows grid of cells centred on the origin, each
// displaced horizontally by N(0, jitter_std^2) with height U[height_min, height_max]. The UE
// sits at the origin with zero clock bias and a perfect initial estimate.
// nlos: bias_mean ~ U[nlos_bias_min, nlos_bias_max] per station, bias_std = 1.
// clock: bias_mean = 0, bias_std = 10.
Scenario generate_scenario(std::uint64_t layout_seed, FaultType type, const LayoutParams& p = {});

// Replace the fault model of every station with the given type, keeping theta. nlos means
// are redrawn from layout_seed exactly as generate_scenario would.
void apply_fault_type(Scenario& s, FaultType type, std::uint64_t layout_seed,
                      const LayoutParams& p = {});

}  // namespace braim
