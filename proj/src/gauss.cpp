#include "braim/gauss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "braim/error.hpp"

namespace braim {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kSupportTol = 1e-9;

void require_symmetric(const MatrixXd& a, const char* what) {
  if (a.rows() != a.cols()) throw InvalidInput(std::string(what) + ": matrix is not square");
  if (!a.allFinite()) throw InvalidInput(std::string(what) + ": matrix has non-finite entries");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InvalidInput(std::string(what) + ": matrix is not symmetric");
}

MatrixXd symmetrized(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

bool in_range(const MatrixXd& a, const MatrixXd& a_pinv, const VectorXd& v) {
  const VectorXd r = v - a * (a_pinv * v);
  return r.norm() <= kSupportTol * (1.0 + v.norm());
}

}  // namespace

PseudoInverse pseudo_inverse_pdet(const MatrixXd& a) {
  require_symmetric(a, "pseudo_inverse_pdet");
  const auto n = a.rows();
  PseudoInverse out;
  out.pinv = MatrixXd::Zero(n, n);
  if (n == 0) return out;

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(a));
  const VectorXd& lam = es.eigenvalues();
  const double lam_max = lam.cwiseAbs().maxCoeff();
  const double thr = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * lam_max;
  if (lam.minCoeff() < -std::sqrt(std::numeric_limits<double>::epsilon()) * lam_max)
    throw InvalidInput("pseudo_inverse_pdet: matrix is not positive semidefinite");

  const MatrixXd& p = es.eigenvectors();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lam[i] > thr) {
      out.pinv.noalias() += (1.0 / lam[i]) * p.col(i) * p.col(i).transpose();
      out.log_pdet += std::log(lam[i]);
      ++out.rank;
    }
  }
  return out;
}

GeneralGaussian GeneralGaussian::from_moments(VectorXd mean, MatrixXd cov) {
  if (cov.rows() != mean.size()) throw InvalidInput("GeneralGaussian: mean/covariance size mismatch");
  if (!mean.allFinite()) throw InvalidInput("GeneralGaussian: non-finite mean");
  const PseudoInverse pi = pseudo_inverse_pdet(cov);
  GeneralGaussian g;
  g.mean_ = std::move(mean);
  g.cov_ = symmetrized(cov);
  g.info_ = pi.pinv;
  g.u_ = g.info_ * g.mean_;
  g.alpha_ = -0.5 * g.u_.dot(g.cov_ * g.u_);
  g.log_pdet_cov_ = pi.log_pdet;
  g.rank_ = pi.rank;
  return g;
}

GeneralGaussian GeneralGaussian::from_canonical(VectorXd u, MatrixXd info) {
  if (info.rows() != u.size()) throw InvalidInput("GeneralGaussian: u/V size mismatch");
  if (!u.allFinite()) throw InvalidInput("GeneralGaussian: non-finite u");
  const PseudoInverse pi = pseudo_inverse_pdet(info);
  if (!in_range(info, pi.pinv, u)) throw InvalidInput("GeneralGaussian: u is not in the range of V");
  GeneralGaussian g;
  g.u_ = std::move(u);
  g.info_ = symmetrized(info);
  g.cov_ = pi.pinv;
  g.mean_ = g.cov_ * g.u_;
  g.alpha_ = -0.5 * g.u_.dot(g.mean_);
  g.log_pdet_cov_ = -pi.log_pdet;
  g.rank_ = pi.rank;
  return g;
}

double log_density_moment(const GeneralGaussian& g, const VectorXd& x) {
  if (x.size() != g.dim()) throw InvalidInput("density_moment: dimension mismatch");
  const VectorXd d = x - g.mean();
  const VectorXd vd = g.info() * d;
  if (!in_range(g.cov(), g.info(), d)) return -std::numeric_limits<double>::infinity();
  return -0.5 * d.dot(vd) - 0.5 * g.rank() * kLog2Pi - 0.5 * g.log_pdet_cov();
}

double density_moment(const GeneralGaussian& g, const VectorXd& x) {
  return std::exp(log_density_moment(g, x));
}

double log_density_canonical(const GeneralGaussian& g, const VectorXd& x) {
  if (x.size() != g.dim()) throw InvalidInput("density_canonical: dimension mismatch");
  return 0.5 * g.log_pdet_info() - 0.5 * g.rank() * kLog2Pi - 0.5 * x.dot(g.info() * x) +
         x.dot(g.u()) + g.alpha();
}

double density_canonical(const GeneralGaussian& g, const VectorXd& x) {
  return std::exp(log_density_canonical(g, x));
}

ScaledGaussian inverse_linear_map(const GeneralGaussian& y, const MatrixXd& a, ScaleRule rule) {
  if (a.rows() != y.dim()) throw InvalidInput("inverse_linear_map: A has wrong row count");
  if (y.rank() != y.dim()) throw InvalidInput("inverse_linear_map: message on Y must be nondegenerate");
  ScaledGaussian out;
  out.gaussian = GeneralGaussian::from_canonical(a.transpose() * y.u(),
                                                 symmetrized(a.transpose() * y.info() * a));
  if (out.gaussian.rank() != a.rows()) throw InvalidInput("inverse_linear_map: A is not full row rank");
  out.log_scale = 0.5 * y.log_pdet_info();
  if (rule == ScaleRule::exact) out.log_scale -= 0.5 * out.gaussian.log_pdet_info();
  return out;
}

ScaledGaussian product(std::span<const ScaledGaussian> factors, ScaleRule rule) {
  if (factors.empty()) throw InvalidInput("product: no factors");
  const auto n = factors.front().gaussian.dim();
  VectorXd u = VectorXd::Zero(n);
  MatrixXd v = MatrixXd::Zero(n, n);
  double log_scale = 0.0;
  int rank_sum = 0;
  for (const ScaledGaussian& f : factors) {
    if (f.gaussian.dim() != n) throw InvalidInput("product: dimension mismatch");
    u += f.gaussian.u();
    v += f.gaussian.info();
    log_scale += f.log_scale + f.gaussian.alpha();
    if (rule == ScaleRule::exact) log_scale += 0.5 * f.gaussian.log_pdet_info();
    rank_sum += f.gaussian.rank();
  }
  ScaledGaussian out;
  out.gaussian = GeneralGaussian::from_canonical(std::move(u), std::move(v));
  out.log_scale = log_scale - out.gaussian.alpha() - 0.5 * out.gaussian.log_pdet_info() -
                  0.5 * (rank_sum - out.gaussian.rank()) * kLog2Pi;
  return out;
}

double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

void GaussianMixture::normalize() {
  const double z = log_sum_exp(log_weights);
  for (double& w : log_weights) w -= z;
}

std::vector<double> GaussianMixture::weights() const {
  const double z = log_sum_exp(log_weights);
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - z);
  return w;
}

VectorXd GaussianMixture::mean() const {
  if (components.empty()) return {};
  const std::vector<double> w = weights();
  VectorXd m = VectorXd::Zero(components.front().dim());
  for (std::size_t i = 0; i < w.size(); ++i) m += w[i] * components[i].mean();
  return m;
}

double GaussianMixture::density(const VectorXd& x) const {
  const std::vector<double> w = weights();
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * density_moment(components[i], x);
  return s;
}

}  // namespace braim
