#include "braim/gx2.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "braim/error.hpp"
#include "braim/quadrature.hpp"

namespace braim {
namespace {

constexpr int kNodes = 16;
constexpr int kPanelWidth = 2 * kNodes;  // cosine and sine weights
constexpr double kRho = 1.5;             // ratio of consecutive panel breakpoints
constexpr double kDampingCut = 41.5;     // exp(-41.5) ~ 1e-18
constexpr double kPhasePerPanel = 6.0;   // radians per 16-point panel near the origin

double breakpoint(int p) { return std::pow(kRho, p); }

struct Basis {
  GaussRule rule;
  // t[j][k] = (2j + 1)/2 w_k P_j(t_k): Legendre coefficient j of the Lagrange polynomial k.
  std::array<std::array<double, kNodes>, kNodes> t{};

  Basis() : rule(gauss_legendre(kNodes)) {
    for (int k = 0; k < kNodes; ++k) {
      const double x = rule.nodes[static_cast<std::size_t>(k)];
      double p0 = 1.0, p1 = x;
      for (int j = 0; j < kNodes; ++j) {
        const double pj = j == 0 ? 1.0 : (j == 1 ? x : 0.0);
        double val = pj;
        if (j >= 2) {
          const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
          p0 = p1;
          p1 = p2;
          val = p2;
        }
        t[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] =
            0.5 * (2.0 * j + 1.0) * rule.weights[static_cast<std::size_t>(k)] * val;
      }
    }
  }
};

const Basis& basis() {
  static const Basis b;
  return b;
}

double beta0(const GeneralizedChiSquare& g, double u) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.weights.size(); ++i) {
    const double wu = g.weights[i] * u;
    s += g.dofs[i] * std::atan(wu) + g.noncentralities[i] * wu / (1.0 + wu * wu);
  }
  return 0.5 * s;
}

double log_kappa(const GeneralizedChiSquare& g, double u) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.weights.size(); ++i) {
    const double wu2 = g.weights[i] * g.weights[i] * u * u;
    s += 0.25 * g.dofs[i] * std::log1p(wu2) + 0.5 * g.noncentralities[i] * wu2 / (1.0 + wu2);
  }
  return s;
}

// Upper bound on |d beta / du| over u >= 0 at a given z.
double phase_rate(const GeneralizedChiSquare& g, double z) {
  double s = 0.5 * z;
  for (std::size_t i = 0; i < g.weights.size(); ++i)
    s += 0.5 * (g.dofs[i] + g.noncentralities[i]) * g.weights[i];
  return s;
}

double damping(const GeneralizedChiSquare& g, double u) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.weights.size(); ++i) {
    const double wu2 = g.weights[i] * g.weights[i] * u * u;
    s += 0.5 * g.noncentralities[i] * wu2 / (1.0 + wu2);
  }
  return s;
}

}  // namespace

void GeneralizedChiSquare::validate() const {
  if (weights.empty()) throw InvalidInput("generalized chi-square: no terms");
  if (dofs.size() != weights.size() || noncentralities.size() != weights.size())
    throw InvalidInput("generalized chi-square: size mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw InvalidInput("generalized chi-square: weights must be positive");
    if (!(dofs[i] > 0.0)) throw InvalidInput("generalized chi-square: degrees of freedom must be positive");
    if (!(noncentralities[i] >= 0.0) || !std::isfinite(noncentralities[i]))
      throw InvalidInput("generalized chi-square: noncentralities must be nonnegative");
  }
}

double imhof_truncation_bound(const GeneralizedChiSquare& g, double u) {
  double k = 0.0, s = 0.0;
  for (std::size_t i = 0; i < g.weights.size(); ++i) {
    k += 0.5 * g.dofs[i];
    s += 0.5 * g.dofs[i] * std::log(g.weights[i]);
  }
  const double log_den = std::log(std::numbers::pi) + std::log(k) + k * std::log(u) + s + damping(g, u);
  return std::exp(-log_den);
}

double imhof_truncation_limit(const GeneralizedChiSquare& g, double eps, double cap) {
  g.validate();
  if (!(eps > 0.0)) throw InvalidInput("imhof_truncation_limit: eps must be positive");
  // The cap applies to the dimensionless U * max weight so that the limit is scale-free.
  cap /= *std::max_element(g.weights.begin(), g.weights.end());
  double lo = 1.0, hi = 1.0;
  if (imhof_truncation_bound(g, 1.0) <= eps) {
    while (imhof_truncation_bound(g, lo) <= eps) {
      lo *= 0.5;
      if (lo < 1e-300) return lo;
    }
  } else {
    while (imhof_truncation_bound(g, hi) > eps) {
      hi *= 2.0;
      if (hi > cap) throw NumericalFailure("imhof_truncation_limit: U exceeds the cap");
    }
    lo = 0.5 * hi;
  }
  while (hi / lo - 1.0 > 1e-9) {
    const double mid = std::sqrt(lo * hi);
    (imhof_truncation_bound(g, mid) <= eps ? hi : lo) = mid;
  }
  return std::min(hi, cap);
}

double imhof_integrand(const GeneralizedChiSquare& g, double z, double u) {
  if (u == 0.0) {
    double s = -0.5 * z;
    for (std::size_t i = 0; i < g.weights.size(); ++i)
      s += 0.5 * (g.dofs[i] + g.noncentralities[i]) * g.weights[i];
    return s;
  }
  return std::sin(beta0(g, u) - 0.5 * z * u) * std::exp(-log_kappa(g, u)) / u;
}

ImhofBatch::ImhofBatch(std::span<const GeneralizedChiSquare> terms, std::span<const double> limits, double z_max,
                       const kernels::Table* kt)
    : kt_(kt != nullptr ? kt : &kernels::active()), z_max_(z_max) {
  if (terms.size() != limits.size()) throw InvalidInput("ImhofBatch: one limit per term is required");
  const Basis& bs = basis();
  bool any_panel = false;
  terms_.resize(terms.size());
  tail_weights_.assign(terms.size() * kPanelWidth, 0.0);

  const auto amplitude = [](const GeneralizedChiSquare& g, double u, double* a, double* b) {
    const double beta = beta0(g, u);
    const double inv = std::exp(-log_kappa(g, u)) / u;
    *a = std::sin(beta) * inv;
    *b = -std::cos(beta) * inv;
  };
  const auto fill_panel = [&](const GeneralizedChiSquare& g, double a, double b, double* out) {
    const double h = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int k = 0; k < kNodes; ++k)
      amplitude(g, mid + h * bs.rule.nodes[static_cast<std::size_t>(k)], out + k, out + kNodes + k);
  };

  for (std::size_t l = 0; l < terms.size(); ++l) {
    const GeneralizedChiSquare& g = terms[l];
    g.validate();
    const double u_max = limits[l];
    if (!(u_max > 0.0)) throw InvalidInput("ImhofBatch: limits must be positive");
    Term& t = terms_[l];

    // Oscillation-resolving region [0, d]: up to a quarter of the shortest scale 1/omega, and
    // far enough that the noncentral damping has removed everything a polynomial could not
    // follow.
    const double w_max = *std::max_element(g.weights.begin(), g.weights.end());
    double d0 = 0.25 / w_max;
    double nc_total = 0.0;
    for (double v : g.noncentralities) nc_total += 0.5 * v;
    if (nc_total > kDampingCut && damping(g, d0) < kDampingCut) {
      double lo = d0, hi = d0;
      while (damping(g, hi) < kDampingCut) hi *= 2.0;
      for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-6; ++it) {
        const double mid = 0.5 * (lo + hi);
        (damping(g, mid) < kDampingCut ? lo : hi) = mid;
      }
      d0 = hi;
    }
    const int p_d = static_cast<int>(std::floor(std::log(d0) / std::log(kRho)));
    const double d = std::min(breakpoint(p_d), u_max);

    const int n_sub = std::max(1, static_cast<int>(std::ceil(phase_rate(g, z_max) * d / kPhasePerPanel)));
    const double step = d / n_sub;
    for (int s = 0; s < n_sub; ++s) {
      const double a = step * s, h = 0.5 * step, mid = a + h;
      for (int k = 0; k < kNodes; ++k) {
        const double u = mid + h * bs.rule.nodes[static_cast<std::size_t>(k)];
        t.direct_u.push_back(u);
        t.direct_beta.push_back(beta0(g, u));
        t.direct_g.push_back(bs.rule.weights[static_cast<std::size_t>(k)] * h * std::exp(-log_kappa(g, u)) / u);
      }
    }
    if (u_max <= d) continue;

    t.panel_begin = p_d;
    int p = p_d;
    while (breakpoint(p + 1) <= u_max) ++p;
    t.panel_end = p;
    t.amp.resize(static_cast<std::size_t>(t.panel_end - t.panel_begin) * kPanelWidth);
    for (int q = t.panel_begin; q < t.panel_end; ++q)
      fill_panel(g, breakpoint(q), breakpoint(q + 1),
                 t.amp.data() + static_cast<std::size_t>(q - t.panel_begin) * kPanelWidth);
    if (t.panel_end > t.panel_begin) {
      if (!any_panel) {
        panel_lo_ = t.panel_begin;
        panel_hi_ = t.panel_end;
        any_panel = true;
      }
      panel_lo_ = std::min(panel_lo_, t.panel_begin);
      panel_hi_ = std::max(panel_hi_, t.panel_end);
    }
    t.tail_a = breakpoint(t.panel_end);
    t.tail_b = u_max;
    if (t.tail_b > t.tail_a) {
      t.tail_amp.resize(kPanelWidth);
      fill_panel(g, t.tail_a, t.tail_b, t.tail_amp.data());
    }
  }
  weights_.assign(static_cast<std::size_t>(panel_hi_ - panel_lo_) * kPanelWidth, 0.0);
  set_z(z_max);
}

void ImhofBatch::panel_weights(double a, double b, double* out) const {
  const Basis& bs = basis();
  const double c = 0.5 * z_;
  const double h = 0.5 * (b - a), mid = 0.5 * (a + b);
  std::array<double, kNodes> j{};
  sph_bessel_array(kNodes, c * h, j);
  const double cm = std::cos(c * mid), sm = std::sin(c * mid);
  std::array<double, kNodes> re{}, im{};
  // int_a^b P_j e^{icu} du = 2 h i^j j_j(c h) e^{i c mid}.
  for (int q = 0; q < kNodes; ++q) {
    const double r = 2.0 * h * j[static_cast<std::size_t>(q)];
    double x = cm, y = sm;
    switch (q % 4) {
      case 1: x = -sm; y = cm; break;
      case 2: x = -cm; y = -sm; break;
      case 3: x = sm; y = -cm; break;
      default: break;
    }
    re[static_cast<std::size_t>(q)] = r * x;
    im[static_cast<std::size_t>(q)] = r * y;
  }
  for (int k = 0; k < kNodes; ++k) {
    double wc = 0.0, ws = 0.0;
    for (int q = 0; q < kNodes; ++q) {
      const double tq = bs.t[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)];
      wc += tq * re[static_cast<std::size_t>(q)];
      ws += tq * im[static_cast<std::size_t>(q)];
    }
    out[k] = wc;
    out[kNodes + k] = ws;
  }
}

void ImhofBatch::set_z(double z) {
  if (!(z >= 0.0)) throw InvalidInput("ImhofBatch: z must be nonnegative");
  if (z > z_max_ * (1.0 + 1e-12)) throw InvalidInput("ImhofBatch: z exceeds the z_max used to build the batch");
  z_ = z;
  for (int p = panel_lo_; p < panel_hi_; ++p)
    panel_weights(breakpoint(p), breakpoint(p + 1), weights_.data() + static_cast<std::size_t>(p - panel_lo_) * kPanelWidth);
  for (std::size_t l = 0; l < terms_.size(); ++l)
    if (!terms_[l].tail_amp.empty())
      panel_weights(terms_[l].tail_a, terms_[l].tail_b, tail_weights_.data() + l * kPanelWidth);
}

double ImhofBatch::term(std::size_t l) const {
  const Term& t = terms_[l];
  const double c = 0.5 * z_;
  double s = 0.0;
  for (std::size_t k = 0; k < t.direct_u.size(); ++k) s += t.direct_g[k] * std::sin(t.direct_beta[k] - c * t.direct_u[k]);
  if (!t.amp.empty())
    s += kt_->dot(t.amp.data(), weights_.data() + static_cast<std::size_t>(t.panel_begin - panel_lo_) * kPanelWidth,
                  t.amp.size());
  if (!t.tail_amp.empty()) s += kt_->dot(t.tail_amp.data(), tail_weights_.data() + l * kPanelWidth, kPanelWidth);
  return 0.5 - s / std::numbers::pi;
}

double imhof_truncated_cdf(const GeneralizedChiSquare& g, double z, double u_max) {
  const double lim[1] = {u_max};
  ImhofBatch b(std::span<const GeneralizedChiSquare>(&g, 1), lim, z);
  return b.term(0);
}

double imhof_truncated_cdf_direct(const GeneralizedChiSquare& g, double z, double u_max, double abs_tol) {
  g.validate();
  const double rate = phase_rate(g, z);
  const double pieces = std::ceil(u_max * rate / std::numbers::pi) + 1.0;
  if (pieces > 5e6) throw NumericalFailure("imhof_truncated_cdf_direct: too many oscillations");
  const double v = integrate_gk15([&](double u) { return imhof_integrand(g, z, u); }, 0.0, u_max, abs_tol,
                                  static_cast<std::size_t>(pieces));
  return 0.5 - v / std::numbers::pi;
}

Gx2Cdf gx2_cdf(const GeneralizedChiSquare& g, double z, double eps_abs) {
  g.validate();
  if (!(z >= 0.0)) throw InvalidInput("gx2_cdf: z must be nonnegative");
  Gx2Cdf r;
  r.u_used = imhof_truncation_limit(g, eps_abs);
  r.value = std::clamp(imhof_truncated_cdf(g, z, r.u_used), 0.0, 1.0);
  return r;
}

}  // namespace braim
