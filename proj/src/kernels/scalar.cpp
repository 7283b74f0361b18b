#include <cmath>

#include "variants.hpp"

namespace braim::kernels::detail {
namespace {

void spd4_solve_scalar(const Spd4Batch& in, const Spd4Out& out) {
  for (std::size_t k = 0; k < in.count; ++k) {
    const double a00 = in.v[0][k], a01 = in.v[1][k], a02 = in.v[2][k], a03 = in.v[3][k];
    const double a11 = in.v[4][k], a12 = in.v[5][k], a13 = in.v[6][k];
    const double a22 = in.v[7][k], a23 = in.v[8][k], a33 = in.v[9][k];

    const double l00 = std::sqrt(a00), i0 = 1.0 / l00;
    const double l10 = a01 * i0, l20 = a02 * i0, l30 = a03 * i0;
    const double d1 = a11 - l10 * l10;
    const double l11 = std::sqrt(d1), i1 = 1.0 / l11;
    const double l21 = (a12 - l20 * l10) * i1;
    const double l31 = (a13 - l30 * l10) * i1;
    const double d2 = a22 - l20 * l20 - l21 * l21;
    const double l22 = std::sqrt(d2), i2 = 1.0 / l22;
    const double l32 = (a23 - l30 * l20 - l31 * l21) * i2;
    const double d3 = a33 - l30 * l30 - l31 * l31 - l32 * l32;
    const double l33 = std::sqrt(d3), i3 = 1.0 / l33;

    // M = inverse of L, lower triangular.
    const double m00 = i0;
    const double m11 = i1, m10 = -l10 * m00 * i1;
    const double m22 = i2, m21 = -l21 * m11 * i2, m20 = -(l20 * m00 + l21 * m10) * i2;
    const double m33 = i3, m32 = -l32 * m22 * i3;
    const double m31 = -(l31 * m11 + l32 * m21) * i3;
    const double m30 = -(l30 * m00 + l31 * m10 + l32 * m20) * i3;

    const double s00 = m00 * m00 + m10 * m10 + m20 * m20 + m30 * m30;
    const double s01 = m10 * m11 + m20 * m21 + m30 * m31;
    const double s02 = m20 * m22 + m30 * m32;
    const double s03 = m30 * m33;
    const double s11 = m11 * m11 + m21 * m21 + m31 * m31;
    const double s12 = m21 * m22 + m31 * m32;
    const double s13 = m31 * m33;
    const double s22 = m22 * m22 + m32 * m32;
    const double s23 = m32 * m33;
    const double s33 = m33 * m33;

    // Substitution through L rather than S u: backward stable in the mean.
    const double z0 = in.u[0][k] * i0;
    const double z1 = (in.u[1][k] - l10 * z0) * i1;
    const double z2 = (in.u[2][k] - l20 * z0 - l21 * z1) * i2;
    const double z3 = (in.u[3][k] - l30 * z0 - l31 * z1 - l32 * z2) * i3;
    const double x3 = z3 * i3;
    const double x2 = (z2 - l32 * x3) * i2;
    const double x1 = (z1 - l21 * x2 - l31 * x3) * i1;
    const double x0 = (z0 - l10 * x1 - l20 * x2 - l30 * x3) * i0;

    out.mean[0][k] = x0;
    out.mean[1][k] = x1;
    out.mean[2][k] = x2;
    out.mean[3][k] = x3;
    out.cov[0][k] = s00;
    out.cov[1][k] = s01;
    out.cov[2][k] = s02;
    out.cov[3][k] = s03;
    out.cov[4][k] = s11;
    out.cov[5][k] = s12;
    out.cov[6][k] = s13;
    out.cov[7][k] = s22;
    out.cov[8][k] = s23;
    out.cov[9][k] = s33;
    const bool pd = a00 > 0.0 && d1 > 0.0 && d2 > 0.0 && d3 > 0.0;
    out.det[k] = pd ? a00 * d1 * d2 * d3 : -1.0;
    out.quad[k] = z0 * z0 + z1 * z1 + z2 * z2 + z3 * z3;
  }
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

const Table kScalarTable{"scalar", spd4_solve_scalar, gemv_scalar, dot_scalar};

}  // namespace braim::kernels::detail
