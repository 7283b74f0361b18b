#pragma once

#include <functional>
#include <span>
#include <vector>

namespace braim {

struct GaussRule {
  std::vector<double> nodes;    // ascending, in (-1, 1)
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1].
GaussRule gauss_legendre(int n);

// Spherical Bessel functions j_0(x) .. j_{n-1}(x) for x >= 0.
void sph_bessel_array(int n, double x, std::span<double> out);

// Adaptive Gauss-Kronrod (7, 15) on [a, b] with the interval first split into `pieces` equal
// parts. Returns the integral; abs_err receives the summed error estimate.
double integrate_gk15(const std::function<double(double)>& f, double a, double b, double abs_tol,
                      std::size_t pieces = 1, double* abs_err = nullptr);

}  // namespace braim
