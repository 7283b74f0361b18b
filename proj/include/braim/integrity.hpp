#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "braim/bayes.hpp"
#include "braim/gx2.hpp"
#include "braim/kernels.hpp"

namespace braim {

// Subspace of the 3D position error on which a protection level is defined.
struct SubspaceSpec {
  enum class Kind { dir1d, plane2d, full3d };
  Kind kind = Kind::full3d;
  std::vector<Eigen::Vector3d> basis;  // orthonormal; empty for full3d
  std::string name;

  static SubspaceSpec direction(const Eigen::Vector3d& v, std::string name);
  static SubspaceSpec plane(const Eigen::Vector3d& a, const Eigen::Vector3d& b, std::string name);
  static SubspaceSpec full(std::string name);

  int dims() const;
  // 3 x dims matrix with the basis as columns (identity for full3d).
  Eigen::MatrixXd matrix() const;
  // Throws InvalidInput unless the basis has the right size, unit norm and is orthogonal.
  void validate() const;
  // True when every basis vector is a coordinate axis.
  bool axis_aligned() const;
};

// Distribution of the position error x - x_hat projected on a subspace.
struct ErrorMixture {
  int n = 1;
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;

  std::size_t size() const { return weights.size(); }
};

ErrorMixture project_error(const PosteriorResult& posterior, const SubspaceSpec& spec);

enum class PlMethod { exact1d, overestimate, exact_nd, baseline };
const char* to_string(PlMethod m);

struct PlResult {
  double radius = 0.0;
  PlMethod method = PlMethod::exact1d;
  double tir_used = 0.0;
  int iterations = 0;
  std::size_t terms_used = 0;
  // The near-exact search could not satisfy its constraint below the overestimate, which is returned.
  bool fallback = false;
};

// Integrity risk of the radius r for a 1D mixture: sum_l w_l P(|e| > r).
double ir_1d(const ErrorMixture& mix, double r);

// Smallest r (to r_tol) with ir_1d(mix, r) < p_tir.
PlResult pl_1d_exact(const ErrorMixture& mix, double p_tir, double r_tol = 1e-3);

// Per-axis 1D PLs at axis_weights[i] * p_tir combined as sqrt(sum PL_i^2). Empty weights mean
// 1/n each.
PlResult pl_overestimate(const ErrorMixture& mix, double p_tir, std::vector<double> axis_weights = {},
                         double r_tol = 1e-3);

// ||e||^2 for e ~ N(m, cov) as a weighted sum of noncentral chi-square(1) variables.
GeneralizedChiSquare quadratic_form_params(const Eigen::VectorXd& m, const Eigen::MatrixXd& cov);

struct ExactPlOptions {
  double zeta1 = 0.1;
  double zeta2 = 0.002;
  double r_tol = 1e-3;
  const kernels::Table* kernels = nullptr;
};

// Exact n-dimensional PL: bisection between 0 and the overestimate on
// sum_{j <= J} w_j (1 - F_j(r^2, U_j)) < (1 - zeta1 - zeta2) p_tir.
PlResult pl_exact_nd(const ErrorMixture& mix, double p_tir, const ExactPlOptions& opt = {});

}  // namespace braim
