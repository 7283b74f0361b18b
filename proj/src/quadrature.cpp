#include "braim/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "braim/error.hpp"

namespace braim {

GaussRule gauss_legendre(int n) {
  if (n < 1) throw InvalidInput("gauss_legendre: n must be positive");
  GaussRule r;
  r.nodes.resize(static_cast<std::size_t>(n));
  r.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) p0 = 1.0;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    r.nodes[lo] = -x;
    r.nodes[hi] = x;
    r.weights[lo] = r.weights[hi] = w;
  }
  return r;
}

void sph_bessel_array(int n, double x, std::span<double> out) {
  if (n <= 0) return;
  if (static_cast<int>(out.size()) < n) throw InvalidInput("sph_bessel_array: output too short");
  if (x == 0.0) {
    out[0] = 1.0;
    for (int l = 1; l < n; ++l) out[static_cast<std::size_t>(l)] = 0.0;
    return;
  }
  const double s = std::sin(x), c = std::cos(x);
  const double j0 = s / x;
  if (x >= n) {
    // Upward recurrence is stable while l < x.
    out[0] = j0;
    if (n > 1) out[1] = s / (x * x) - c / x;
    for (int l = 1; l + 1 < n; ++l)
      out[static_cast<std::size_t>(l + 1)] =
          (2.0 * l + 1.0) / x * out[static_cast<std::size_t>(l)] - out[static_cast<std::size_t>(l - 1)];
    return;
  }
  // Miller's downward recurrence, normalized against whichever of j_0, j_1 is larger.
  const int start = n + 20 + static_cast<int>(x);
  double f_hi = 0.0, f = 1e-300;
  double f0 = 0.0, f1 = 0.0;
  for (int l = start; l >= 1; --l) {
    const double f_lo = (2.0 * l + 1.0) / x * f - f_hi;
    f_hi = f;
    f = f_lo;
    // f now holds the unnormalized j_{l-1}, f_hi holds j_l.
    if (l - 1 < n) out[static_cast<std::size_t>(l - 1)] = f;
    if (l < n) out[static_cast<std::size_t>(l)] = f_hi;
    if (std::abs(f) > 1e250) {
      f *= 1e-250;
      f_hi *= 1e-250;
      for (int k = l - 1; k < n; ++k)
        if (k >= 0) out[static_cast<std::size_t>(k)] *= 1e-250;
    }
  }
  f0 = out[0];
  f1 = n > 1 ? out[1] : f_hi;
  const double j1 = s / (x * x) - c / x;
  const double scale = std::abs(j0) >= std::abs(j1) ? j0 / f0 : j1 / f1;
  for (int l = 0; l < n; ++l) out[static_cast<std::size_t>(l)] *= scale;
}

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

double gk15(const std::function<double(double)>& f, double a, double b, double& err) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double k = fc * kWgk[7];
  double g = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double s = f(c - dx) + f(c + dx);
    k += kWgk[j] * s;
    if (j % 2 == 1) g += kWg[j / 2] * s;
  }
  err = std::abs((k - g) * h);
  return k * h;
}

double adapt(const std::function<double(double)>& f, double a, double b, double tol, int depth, double& err) {
  double e = 0.0;
  const double v = gk15(f, a, b, e);
  if (e <= tol || depth >= 40) {
    err += e;
    return v;
  }
  const double m = 0.5 * (a + b);
  return adapt(f, a, m, 0.5 * tol, depth + 1, err) + adapt(f, m, b, 0.5 * tol, depth + 1, err);
}

}  // namespace

double integrate_gk15(const std::function<double(double)>& f, double a, double b, double abs_tol,
                      std::size_t pieces, double* abs_err) {
  if (pieces == 0) pieces = 1;
  double err = 0.0, total = 0.0;
  const double step = (b - a) / static_cast<double>(pieces);
  const double tol = abs_tol / static_cast<double>(pieces);
  for (std::size_t i = 0; i < pieces; ++i) {
    const double lo = a + step * static_cast<double>(i);
    const double hi = i + 1 == pieces ? b : lo + step;
    total += adapt(f, lo, hi, tol, 0, err);
  }
  if (abs_err != nullptr) *abs_err = err;
  return total;
}

}  // namespace braim
