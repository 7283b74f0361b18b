#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace braim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PseudoInverse {
  MatrixXd pinv;
  double log_pdet = 0.0;  // sum of log of retained eigenvalues; 0 when rank is 0
  int rank = 0;
};

// Eigenvalues at or below dim * eps * lambda_max are treated as zero.
PseudoInverse pseudo_inverse_pdet(const MatrixXd& a);

// Gaussian on R^n whose covariance may be singular. Both the moment pair (m, Sigma)
// and the canonical triple (u, V, alpha) are held; V = pinv(Sigma), u = V m,
// alpha = -u' pinv(V) u / 2.
class GeneralGaussian {
 public:
  GeneralGaussian() = default;

  static GeneralGaussian from_moments(VectorXd mean, MatrixXd cov);
  // u must lie in the range of V.
  static GeneralGaussian from_canonical(VectorXd u, MatrixXd info);

  int dim() const { return static_cast<int>(mean_.size()); }
  int rank() const { return rank_; }
  const VectorXd& mean() const { return mean_; }
  const MatrixXd& cov() const { return cov_; }
  const VectorXd& u() const { return u_; }
  const MatrixXd& info() const { return info_; }
  double alpha() const { return alpha_; }
  double log_pdet_cov() const { return log_pdet_cov_; }
  double log_pdet_info() const { return -log_pdet_cov_; }

 private:
  VectorXd mean_, u_;
  MatrixXd cov_, info_;
  double alpha_ = 0.0;
  double log_pdet_cov_ = 0.0;
  int rank_ = 0;
};

// Degenerate density: zero off the affine support m + range(Sigma).
double density_moment(const GeneralGaussian& g, const VectorXd& x);
double log_density_moment(const GeneralGaussian& g, const VectorXd& x);

// Canonical function |V|+^{1/2} (2pi)^{-k/2} exp(-x'Vx/2 + x'u + alpha). Defined on all of
// R^n; constant along the null space of V.
double density_canonical(const GeneralGaussian& g, const VectorXd& x);
double log_density_canonical(const GeneralGaussian& g, const VectorXd& x);

// value(x) = exp(log_scale) * density_canonical(gaussian, x).
struct ScaledGaussian {
  double log_scale = 0.0;
  GeneralGaussian gaussian;

  double log_value(const VectorXd& x) const { return log_scale + log_density_canonical(gaussian, x); }
};

// exact: the scale makes every output pointwise equal to its defining expression.
// reduced: the inverse map drops 1/|V_X|+^{1/2} and the product drops prod |V_i|+^{1/2}.
// A chain of reduced maps followed by a reduced product equals the exact chain.
enum class ScaleRule { exact, reduced };

// Message on X = R^n induced by a message on Y = A X. A is m x n with full row rank and
// the message on Y has a nonsingular information matrix.
ScaledGaussian inverse_linear_map(const GeneralGaussian& y, const MatrixXd& a,
                                  ScaleRule rule = ScaleRule::exact);

// Product of scaled canonical functions on a common R^n.
ScaledGaussian product(std::span<const ScaledGaussian> factors, ScaleRule rule = ScaleRule::exact);

struct GaussianMixture {
  std::vector<GeneralGaussian> components;
  std::vector<double> log_weights;

  void normalize();
  std::vector<double> weights() const;
  VectorXd mean() const;
  double density(const VectorXd& x) const;
};

// log sum exp over a span; -inf for an empty span.
double log_sum_exp(std::span<const double> v);

}  // namespace braim
