#pragma once

#include <span>
#include <vector>

#include "braim/kernels.hpp"

namespace braim {

// Q = sum_i w_i chi'^2(k_i, nu_i^2) with w_i > 0.
struct GeneralizedChiSquare {
  std::vector<double> weights;
  std::vector<double> dofs;
  std::vector<double> noncentralities;  // nu_i^2

  void validate() const;
};

// Bound Xi(U) on the error of truncating the Imhof integral at U.
double imhof_truncation_bound(const GeneralizedChiSquare& g, double u);

// Smallest U (to relative 1e-9) with Xi(U) <= eps. Throws NumericalFailure once U times the
// largest weight exceeds cap.
double imhof_truncation_limit(const GeneralizedChiSquare& g, double eps, double cap = 1e15);

// Integrand sin(beta(u, z)) / (u kappa(u)) of the Imhof inversion.
double imhof_integrand(const GeneralizedChiSquare& g, double z, double u);

// F(z, U) = 1/2 - (1/pi) int_0^U integrand, evaluated with panels whose count grows with
// log U: Gauss-Legendre near the origin and Legendre-moment (Filon) panels beyond. Not clamped.
double imhof_truncated_cdf(const GeneralizedChiSquare& g, double z, double u_max);

// Same quantity by adaptive Gauss-Kronrod over panels no longer than half an oscillation.
// Cost grows linearly in U; meant as an independent check.
double imhof_truncated_cdf_direct(const GeneralizedChiSquare& g, double z, double u_max, double abs_tol);

struct Gx2Cdf {
  double value = 0.0;  // clamped to [0, 1]
  double u_used = 0.0;
};

// P(Q <= z) with truncation error at most eps_abs.
Gx2Cdf gx2_cdf(const GeneralizedChiSquare& g, double z, double eps_abs);

// F(z, U_l) for many distributions at a shared z. Oscillating weights of the Filon panels
// depend only on the panel and z, so they are computed once per z and reused by every term;
// each term then costs one dot product.
class ImhofBatch {
 public:
  // z_max bounds every z passed to evaluate().
  ImhofBatch(std::span<const GeneralizedChiSquare> terms, std::span<const double> limits, double z_max,
             const kernels::Table* kt = nullptr);

  std::size_t size() const { return terms_.size(); }
  // Prepares the shared weights for z; then term(l) returns F(z, U_l).
  void set_z(double z);
  double term(std::size_t l) const;

 private:
  struct Term {
    std::vector<double> direct_u, direct_beta, direct_g;  // g includes the quadrature weight
    int panel_begin = 0, panel_end = 0;                   // global panel indices [begin, end)
    std::vector<double> amp;                              // per panel: A(16), -B(16)
    double tail_a = 0.0, tail_b = 0.0;                    // partial last panel, empty if equal
    std::vector<double> tail_amp;
  };

  void panel_weights(double a, double b, double* out) const;

  const kernels::Table* kt_;
  std::vector<Term> terms_;
  int panel_lo_ = 0, panel_hi_ = 0;
  double z_ = 0.0, z_max_ = 0.0;
  std::vector<double> weights_;       // per global panel: Wc(16), Ws(16)
  std::vector<double> tail_weights_;  // per term
};

}  // namespace braim
