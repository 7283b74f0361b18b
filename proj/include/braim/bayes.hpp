#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "braim/gauss.hpp"
#include "braim/kernels.hpp"
#include "braim/scenario.hpp"

namespace braim {

// Message from measurement branch i to the state X: the two-term mixture over Gamma_i
// = h_i' X (fault-free, faulty) pulled back through h_i'. Scales follow ScaleRule::reduced,
// so exp(log_scale) of term 1 is (1 - theta) / sigma_n and of term 2 is
// theta / sqrt(sigma_n^2 + sigma_b^2).
struct BranchMessage {
  int index = 0;
  double y = 0.0;
  Eigen::Vector4d h = Eigen::Vector4d::Zero();
  FaultSpec fault;
  double sigma_n = 1.0;
  std::array<ScaledGaussian, 2> terms;
};

BranchMessage branch_message(double y, const Eigen::Vector4d& h, const FaultSpec& fault, double sigma_n,
                             int index = 0);

std::vector<BranchMessage> branch_messages(const LinearModel& model, const Eigen::VectorXd& y,
                                           std::span<const FaultSpec> faults);

// Posterior of X as a 2^M-term mixture. Term l (0-based) takes the faulty branch state for
// measurement j exactly when bit j of l is set.
struct PosteriorResult {
  int m = 0;
  std::vector<double> weights;      // normalized
  std::vector<double> log_weights;  // normalized
  std::vector<Eigen::Vector4d> means;
  std::vector<Eigen::Matrix4d> covs;
  Eigen::Vector3d x_hat = Eigen::Vector3d::Zero();
  Eigen::VectorXd theta_post;
  double log_evidence = 0.0;  // log of the integral of the product of all messages

  GaussianMixture to_mixture() const;
};

struct FaultPosterior {
  Eigen::VectorXd theta_post;
  // log of (1 - theta_i) mu(0) + theta_i mu(1) from the message into Lambda_i; equals the
  // fused log_evidence for every i.
  Eigen::VectorXd log_evidence;
};

struct FusionOptions {
  std::optional<GeneralGaussian> prior;  // full-rank Gaussian on X, multiplied into every term
  bool fault_probs = true;               // run the leave-one-out messages
  const kernels::Table* kernels = nullptr;  // nullptr selects kernels::active()
};

// Throws UnobservableState when the measurements do not determine X and InvalidInput for
// M > 16.
PosteriorResult fuse_posterior(std::span<const BranchMessage> branches, const FusionOptions& opt = {});

FaultPosterior posterior_fault_probs(std::span<const BranchMessage> branches, const FusionOptions& opt = {});

}  // namespace braim
