#include "braim/integrity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "braim/error.hpp"
#include "braim/normal.hpp"

namespace braim {
namespace {

std::vector<std::size_t> order_by_weight(const std::vector<double>& w) {
  std::vector<std::size_t> idx(w.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
  return idx;
}

// Scalar view of a 1D mixture, in descending weight with suffix sums for early decisions.
struct Sorted1d {
  std::vector<double> w, m, s, rest;

  explicit Sorted1d(const ErrorMixture& mix) {
    for (std::size_t l : order_by_weight(mix.weights)) {
      if (!(mix.covs[l](0, 0) > 0.0)) throw InvalidInput("1D PL: variances must be positive");
      w.push_back(mix.weights[l]);
      m.push_back(mix.means[l](0));
      s.push_back(std::sqrt(mix.covs[l](0, 0)));
    }
    rest.assign(w.size() + 1, 0.0);
    for (std::size_t i = w.size(); i-- > 0;) rest[i] = rest[i + 1] + w[i];
  }

  // ir(r) < p, deciding as soon as the remaining weight cannot change the answer.
  bool below(double r, double p) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (acc >= p) return false;
      if (acc + rest[i] < p) return true;
      acc += w[i] * (q_func((r - m[i]) / s[i]) + q_func((r + m[i]) / s[i]));
    }
    return acc < p;
  }
};

void check_mixture(const ErrorMixture& mix) {
  if (mix.weights.empty()) throw InvalidInput("error mixture is empty");
  if (mix.means.size() != mix.size() || mix.covs.size() != mix.size())
    throw InvalidInput("error mixture: size mismatch");
}

void check_p(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("P_TIR must lie in (0, 1)");
}

}  // namespace

SubspaceSpec SubspaceSpec::direction(const Eigen::Vector3d& v, std::string name) {
  SubspaceSpec s{Kind::dir1d, {v}, std::move(name)};
  s.validate();
  return s;
}

SubspaceSpec SubspaceSpec::plane(const Eigen::Vector3d& a, const Eigen::Vector3d& b, std::string name) {
  SubspaceSpec s{Kind::plane2d, {a, b}, std::move(name)};
  s.validate();
  return s;
}

SubspaceSpec SubspaceSpec::full(std::string name) { return SubspaceSpec{Kind::full3d, {}, std::move(name)}; }

int SubspaceSpec::dims() const {
  switch (kind) {
    case Kind::dir1d: return 1;
    case Kind::plane2d: return 2;
    case Kind::full3d: return 3;
  }
  return 3;
}

Eigen::MatrixXd SubspaceSpec::matrix() const {
  if (kind == Kind::full3d) return Eigen::Matrix3d::Identity();
  Eigen::MatrixXd v(3, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = basis[i];
  return v;
}

void SubspaceSpec::validate() const {
  const std::size_t want = kind == Kind::full3d ? 0 : static_cast<std::size_t>(dims());
  if (basis.size() != want) throw InvalidInput("subspace '" + name + "': wrong number of basis vectors");
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (std::abs(basis[i].norm() - 1.0) > 1e-12) throw InvalidInput("subspace '" + name + "': basis not unit norm");
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(basis[i].dot(basis[j])) > 1e-12) throw InvalidInput("subspace '" + name + "': basis not orthogonal");
  }
}

bool SubspaceSpec::axis_aligned() const {
  for (const auto& v : basis)
    if ((v.array().abs() == 1.0).count() != 1) return false;
  return true;
}

ErrorMixture project_error(const PosteriorResult& posterior, const SubspaceSpec& spec) {
  spec.validate();
  const Eigen::MatrixXd v = spec.matrix();
  ErrorMixture mix;
  mix.n = spec.dims();
  mix.weights = posterior.weights;
  mix.means.reserve(mix.weights.size());
  mix.covs.reserve(mix.weights.size());
  for (std::size_t l = 0; l < posterior.weights.size(); ++l) {
    const Eigen::Vector3d m3 = posterior.means[l].head<3>() - posterior.x_hat;
    mix.means.emplace_back(v.transpose() * m3);
    Eigen::MatrixXd c = v.transpose() * posterior.covs[l].topLeftCorner<3, 3>() * v;
    mix.covs.emplace_back(0.5 * (c + c.transpose()));
  }
  return mix;
}

const char* to_string(PlMethod m) {
  switch (m) {
    case PlMethod::exact1d: return "exact1d";
    case PlMethod::overestimate: return "overestimate";
    case PlMethod::exact_nd: return "exact_nd";
    case PlMethod::baseline: return "baseline";
  }
  return "?";
}

double ir_1d(const ErrorMixture& mix, double r) {
  double acc = 0.0;
  for (std::size_t l = 0; l < mix.size(); ++l) {
    const double m = mix.means[l](0), s = std::sqrt(mix.covs[l](0, 0));
    acc += mix.weights[l] * (q_func((r - m) / s) + q_func((r + m) / s));
  }
  return acc;
}

PlResult pl_1d_exact(const ErrorMixture& mix, double p_tir, double r_tol) {
  check_mixture(mix);
  check_p(p_tir);
  if (mix.n != 1) throw InvalidInput("pl_1d_exact needs a 1D mixture");
  if (!(r_tol > 0.0)) throw InvalidInput("r_tol must be positive");
  const Sorted1d sm(mix);
  // Each term alone is below p_tir beyond |m| + sigma Q^-1(p_tir / 2).
  const double z = q_inv(0.5 * p_tir);
  double hi = 0.0;
  for (std::size_t i = 0; i < sm.w.size(); ++i) hi = std::max(hi, std::abs(sm.m[i]) + sm.s[i] * z);
  hi = hi * 1.01 + r_tol;
  while (!sm.below(hi, p_tir)) hi *= 2.0;
  double lo = 0.0;
  PlResult res;
  res.method = PlMethod::exact1d;
  res.tir_used = p_tir;
  res.terms_used = sm.w.size();
  while (hi - lo > r_tol) {
    const double mid = 0.5 * (lo + hi);
    (sm.below(mid, p_tir) ? hi : lo) = mid;
    ++res.iterations;
  }
  res.radius = hi;
  return res;
}

PlResult pl_overestimate(const ErrorMixture& mix, double p_tir, std::vector<double> axis_weights, double r_tol) {
  check_mixture(mix);
  check_p(p_tir);
  if (axis_weights.empty()) axis_weights.assign(static_cast<std::size_t>(mix.n), 1.0 / mix.n);
  if (axis_weights.size() != static_cast<std::size_t>(mix.n)) throw InvalidInput("one axis weight per dimension");
  double total = 0.0;
  for (double w : axis_weights) {
    if (!(w > 0.0 && w < 1.0) && !(mix.n == 1 && w == 1.0)) throw InvalidInput("axis weights must lie in (0, 1)");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("axis weights must sum to 1");

  PlResult res;
  res.method = PlMethod::overestimate;
  res.tir_used = p_tir;
  res.terms_used = mix.size();
  double sq = 0.0;
  for (int i = 0; i < mix.n; ++i) {
    ErrorMixture axis;
    axis.n = 1;
    axis.weights = mix.weights;
    for (std::size_t l = 0; l < mix.size(); ++l) {
      axis.means.emplace_back(Eigen::VectorXd::Constant(1, mix.means[l](i)));
      axis.covs.emplace_back(Eigen::MatrixXd::Constant(1, 1, mix.covs[l](i, i)));
    }
    const PlResult r = pl_1d_exact(axis, axis_weights[static_cast<std::size_t>(i)] * p_tir, r_tol);
    sq += r.radius * r.radius;
    res.iterations += r.iterations;
  }
  res.radius = std::sqrt(sq);
  return res;
}

GeneralizedChiSquare quadratic_form_params(const Eigen::VectorXd& m, const Eigen::MatrixXd& cov) {
  if (cov.rows() != m.size() || cov.cols() != m.size() || m.size() == 0)
    throw InvalidInput("quadratic_form_params: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericalFailure("quadratic_form_params: eigendecomposition failed");
  const Eigen::VectorXd& w = es.eigenvalues();
  if (!(w.minCoeff() > 1e-14 * std::max(w.maxCoeff(), 0.0)) || !(w.minCoeff() > 0.0))
    throw InvalidInput("quadratic_form_params: covariance is not positive definite");
  // P' Sigma^-1/2 m = Omega^-1/2 P' m.
  const Eigen::VectorXd nu = (es.eigenvectors().transpose() * m).cwiseQuotient(w.cwiseSqrt());
  GeneralizedChiSquare g;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    g.weights.push_back(w(i));
    g.dofs.push_back(1.0);
    g.noncentralities.push_back(nu(i) * nu(i));
  }
  return g;
}

PlResult pl_exact_nd(const ErrorMixture& mix, double p_tir, const ExactPlOptions& opt) {
  check_mixture(mix);
  check_p(p_tir);
  if (mix.n < 2 || mix.n > 3) throw InvalidInput("pl_exact_nd needs a 2D or 3D mixture");
  // zeta1 = 0 would need an infinite truncation limit.
  if (!(opt.zeta1 > 0.0 && opt.zeta2 >= 0.0 && opt.zeta1 + opt.zeta2 < 1.0))
    throw InvalidInput("need zeta1 > 0, zeta2 >= 0 and zeta1 + zeta2 < 1");
  if (!(opt.r_tol > 0.0)) throw InvalidInput("r_tol must be positive");

  const PlResult upper = pl_overestimate(mix, p_tir, {}, opt.r_tol);
  PlResult res;
  res.method = PlMethod::exact_nd;
  res.tir_used = p_tir;

  // J: the smallest prefix (by descending weight) whose tail weight is within zeta2 P.
  const std::vector<std::size_t> order = order_by_weight(mix.weights);
  std::vector<double> tail(order.size() + 1, 0.0);
  for (std::size_t i = order.size(); i-- > 0;) tail[i] = tail[i + 1] + mix.weights[order[i]];
  std::size_t j_count = order.size();
  for (std::size_t j = 0; j <= order.size(); ++j)
    if (tail[j] <= opt.zeta2 * p_tir) {
      j_count = j;
      break;
    }
  res.terms_used = j_count;

  const double xi = opt.zeta1 * p_tir;
  std::vector<GeneralizedChiSquare> g(j_count);
  std::vector<double> limits(j_count), w(j_count), rest(j_count + 1, 0.0);
  for (std::size_t j = 0; j < j_count; ++j) {
    const std::size_t l = order[j];
    g[j] = quadratic_form_params(mix.means[l], mix.covs[l]);
    limits[j] = imhof_truncation_limit(g[j], xi);
    w[j] = mix.weights[l];
  }
  for (std::size_t j = j_count; j-- > 0;) rest[j] = rest[j + 1] + w[j];

  const double target = (1.0 - opt.zeta1 - opt.zeta2) * p_tir;
  double hi = upper.radius;
  ImhofBatch batch(g, limits, hi * hi, opt.kernels);
  const auto satisfied = [&](double r) {
    batch.set_z(r * r);
    double acc = 0.0;
    for (std::size_t j = 0; j < j_count; ++j) {
      if (acc >= target) return false;
      if (acc + rest[j] < target) return true;
      acc += w[j] * (1.0 - std::clamp(batch.term(j), 0.0, 1.0));
    }
    return acc < target;
  };

  if (!satisfied(hi)) {
    res.radius = upper.radius;
    res.fallback = true;
    return res;
  }
  double lo = 0.0;
  while (hi - lo > opt.r_tol) {
    const double mid = 0.5 * (lo + hi);
    (satisfied(mid) ? hi : lo) = mid;
    ++res.iterations;
  }
  res.radius = hi;
  return res;
}

}  // namespace braim
