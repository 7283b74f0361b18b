#include "braim/bayes.hpp"

#include <cmath>
#include <limits>

#include "braim/error.hpp"
#include "braim/normal.hpp"

namespace braim {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr int kMaxBranches = 16;

// One factor in packed form: information matrix (upper triangle), u, and the scalar
// log_scale + alpha - rank/2 log(2 pi) carried into every product that contains it.
struct Packed {
  std::array<double, kernels::kSym4> v{};
  std::array<double, 4> u{};
  double acc = 0.0;
};

Packed pack(const ScaledGaussian& g) {
  Packed p;
  const MatrixXd& v = g.gaussian.info();
  std::size_t k = 0;
  for (int r = 0; r < 4; ++r)
    for (int c = r; c < 4; ++c) p.v[k++] = v(r, c);
  for (int r = 0; r < 4; ++r) p.u[static_cast<std::size_t>(r)] = g.gaussian.u()[r];
  p.acc = g.log_scale + g.gaussian.alpha() - 0.5 * g.gaussian.rank() * kLog2Pi;
  return p;
}

Packed pack_prior(const GeneralGaussian& prior) {
  if (prior.dim() != 4 || prior.rank() != 4) throw InvalidInput("fuse_posterior: prior must be a full-rank Gaussian on R^4");
  ScaledGaussian s;
  s.gaussian = prior;
  Packed p = pack(s);
  p.acc += 0.5 * prior.log_pdet_info();
  return p;
}

struct Soa {
  std::size_t n = 0;
  std::array<std::vector<double>, kernels::kSym4> v;
  std::array<std::vector<double>, 4> u;
  std::vector<double> acc;

  explicit Soa(std::size_t size) : n(size), acc(size) {
    for (auto& a : v) a.resize(size);
    for (auto& a : u) a.resize(size);
  }
  void set(std::size_t i, const Packed& p) {
    for (std::size_t k = 0; k < kernels::kSym4; ++k) v[k][i] = p.v[k];
    for (std::size_t k = 0; k < 4; ++k) u[k][i] = p.u[k];
    acc[i] = p.acc;
  }
};

struct Pair {
  Packed first, second;  // fault-free and faulty terms
};

Pair pack_branch(const BranchMessage& b) { return {pack(b.terms[0]), pack(b.terms[1])}; }

// All 2^|pairs| sums base + sum_j (first_j or second_j); entry p uses the faulty state of pair j
// exactly when bit j of p is set. Each entry is a plain sum of its own terms, so no entry
// carries the cancellation of a first_j that is later removed.
Soa expand(std::span<const Pair> pairs, const Packed& base) {
  Soa t(std::size_t{1} << pairs.size());
  t.set(0, base);
  std::size_t filled = 1;
  for (const Pair& p : pairs) {
    for (std::size_t k = 0; k < kernels::kSym4; ++k) {
      double* col = t.v[k].data();
      for (std::size_t i = 0; i < filled; ++i) {
        col[filled + i] = col[i] + p.second.v[k];
        col[i] += p.first.v[k];
      }
    }
    for (std::size_t k = 0; k < 4; ++k) {
      double* col = t.u[k].data();
      for (std::size_t i = 0; i < filled; ++i) {
        col[filled + i] = col[i] + p.second.u[k];
        col[i] += p.first.u[k];
      }
    }
    for (std::size_t i = 0; i < filled; ++i) {
      t.acc[filled + i] = t.acc[i] + p.second.acc;
      t.acc[i] += p.first.acc;
    }
    filled *= 2;
  }
  return t;
}

struct Solved {
  std::array<std::vector<double>, 4> mean;
  std::array<std::vector<double>, kernels::kSym4> cov;
  std::vector<double> det, quad;
  std::vector<double> log_w;  // unnormalized
  bool all_pd = true;
};

Solved solve(const Soa& t, const kernels::Table& kt) {
  Solved s;
  for (auto& a : s.mean) a.resize(t.n);
  for (auto& a : s.cov) a.resize(t.n);
  s.det.resize(t.n);
  s.quad.resize(t.n);
  s.log_w.resize(t.n);
  kernels::Spd4Batch in;
  kernels::Spd4Out out;
  in.count = t.n;
  for (std::size_t k = 0; k < kernels::kSym4; ++k) {
    in.v[k] = t.v[k].data();
    out.cov[k] = s.cov[k].data();
  }
  for (std::size_t k = 0; k < 4; ++k) {
    in.u[k] = t.u[k].data();
    out.mean[k] = s.mean[k].data();
  }
  out.det = s.det.data();
  out.quad = s.quad.data();
  kt.spd4_solve(in, out);
  // Product scale: sum of factor scalars - alpha - log|V|/2 + (rank 4)/2 log(2 pi).
  for (std::size_t i = 0; i < t.n; ++i) {
    if (!(s.det[i] > 0.0) || !std::isfinite(s.quad[i])) {
      s.all_pd = false;
      s.log_w[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    s.log_w[i] = t.acc[i] + 0.5 * s.quad[i] - 0.5 * std::log(s.det[i]) + 2.0 * kLog2Pi;
  }
  return s;
}

const kernels::Table& table_of(const FusionOptions& opt) {
  return opt.kernels != nullptr ? *opt.kernels : kernels::active();
}

void check_branches(std::span<const BranchMessage> branches, const FusionOptions& opt) {
  if (branches.empty()) throw UnobservableState("fuse_posterior: no measurements");
  if (branches.size() > kMaxBranches) throw InvalidInput("fuse_posterior: at most 16 measurements are supported");
  Eigen::Matrix4d info = Eigen::Matrix4d::Zero();
  for (const BranchMessage& b : branches) info += b.h * b.h.transpose() / (b.sigma_n * b.sigma_n);
  if (opt.prior) info += opt.prior->info();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(info);
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(es.eigenvalues().minCoeff() > 1e-12 * lmax))
    throw UnobservableState("fuse_posterior: measurements do not determine the state (rank(H) < 4)");
}

}  // namespace

BranchMessage branch_message(double y, const Eigen::Vector4d& h, const FaultSpec& fault, double sigma_n,
                             int index) {
  if (!(sigma_n > 0.0)) throw InvalidInput("branch_message: sigma_n must be positive");
  if (!(fault.theta > 0.0 && fault.theta < 1.0)) throw InvalidInput("branch_message: theta must lie in (0, 1)");
  BranchMessage b;
  b.index = index;
  b.y = y;
  b.h = h;
  b.fault = fault;
  b.sigma_n = sigma_n;
  const MatrixXd a = h.transpose();
  const double var[2] = {sigma_n * sigma_n, sigma_n * sigma_n + fault.bias_std * fault.bias_std};
  const double mean[2] = {y, y - fault.bias_mean};
  const double prob[2] = {1.0 - fault.theta, fault.theta};
  for (int t = 0; t < 2; ++t) {
    const GeneralGaussian gamma =
        GeneralGaussian::from_moments(VectorXd::Constant(1, mean[t]), MatrixXd::Constant(1, 1, var[t]));
    ScaledGaussian& out = b.terms[static_cast<std::size_t>(t)];
    out = inverse_linear_map(gamma, a, ScaleRule::reduced);
    out.log_scale += std::log(prob[t]);
  }
  return b;
}

std::vector<BranchMessage> branch_messages(const LinearModel& model, const Eigen::VectorXd& y,
                                           std::span<const FaultSpec> faults) {
  const int m = model.size();
  if (y.size() != m || static_cast<int>(faults.size()) != m) throw InvalidInput("branch_messages: size mismatch");
  std::vector<BranchMessage> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    out.push_back(branch_message(y[i], model.h.row(i).transpose(), faults[static_cast<std::size_t>(i)],
                                 std::sqrt(model.noise_var[i]), i));
  return out;
}

PosteriorResult fuse_posterior(std::span<const BranchMessage> branches, const FusionOptions& opt) {
  check_branches(branches, opt);
  const kernels::Table& kt = table_of(opt);
  std::vector<Pair> pairs;
  for (const BranchMessage& b : branches) pairs.push_back(pack_branch(b));
  const Packed base = opt.prior ? pack_prior(*opt.prior) : Packed{};

  const Soa table = expand(pairs, base);
  const Solved s = solve(table, kt);
  if (!s.all_pd) throw UnobservableState("fuse_posterior: a hypothesis leaves the state unobservable");

  PosteriorResult r;
  r.m = static_cast<int>(branches.size());
  r.log_evidence = log_sum_exp(s.log_w);
  const std::size_t n = table.n;
  r.weights.resize(n);
  r.log_weights.resize(n);
  r.means.resize(n);
  r.covs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.log_weights[i] = s.log_w[i] - r.log_evidence;
    r.weights[i] = std::exp(r.log_weights[i]);
    for (int k = 0; k < 4; ++k) r.means[i][k] = s.mean[static_cast<std::size_t>(k)][i];
    Eigen::Matrix4d& c = r.covs[i];
    std::size_t k = 0;
    for (int row = 0; row < 4; ++row)
      for (int col = row; col < 4; ++col) c(row, col) = c(col, row) = s.cov[k++][i];
    r.x_hat += r.weights[i] * r.means[i].head<3>();
  }
  if (opt.fault_probs) r.theta_post = posterior_fault_probs(branches, opt).theta_post;
  return r;
}

FaultPosterior posterior_fault_probs(std::span<const BranchMessage> branches, const FusionOptions& opt) {
  check_branches(branches, opt);
  const kernels::Table& kt = table_of(opt);
  const std::size_t m = branches.size();
  std::vector<Pair> pairs;
  for (const BranchMessage& b : branches) pairs.push_back(pack_branch(b));
  const Packed base = opt.prior ? pack_prior(*opt.prior) : Packed{};
  const std::span<const Pair> all(pairs);

  FaultPosterior out;
  out.theta_post.resize(static_cast<Eigen::Index>(m));
  out.log_evidence.resize(static_cast<Eigen::Index>(m));
  std::optional<PosteriorResult> fallback;

  for (std::size_t i = 0; i < m; ++i) {
    // Leave-one-out product of every branch except i: prefix table over j < i combined with
    // the suffix table over j > i.
    const Soa prefix = expand(all.subspan(0, i), base);
    const Soa suffix = expand(all.subspan(i + 1), Packed{});
    Soa loo(prefix.n * suffix.n);
    for (std::size_t s = 0; s < suffix.n; ++s) {
      const std::size_t off = s * prefix.n;
      for (std::size_t k = 0; k < kernels::kSym4; ++k) {
        const double sv = suffix.v[k][s];
        for (std::size_t p = 0; p < prefix.n; ++p) loo.v[k][off + p] = prefix.v[k][p] + sv;
      }
      for (std::size_t k = 0; k < 4; ++k) {
        const double su = suffix.u[k][s];
        for (std::size_t p = 0; p < prefix.n; ++p) loo.u[k][off + p] = prefix.u[k][p] + su;
      }
      for (std::size_t p = 0; p < prefix.n; ++p) loo.acc[off + p] = prefix.acc[p] + suffix.acc[s];
    }
    const Solved s = solve(loo, kt);
    const BranchMessage& b = branches[i];
    const double theta = b.fault.theta;

    if (!s.all_pd) {
      // Without branch i the state is not determined; the marginal of the fused mixture is
      // the same quantity.
      if (!fallback) {
        FusionOptions o = opt;
        o.fault_probs = false;
        fallback = fuse_posterior(branches, o);
      }
      double p = 0.0;
      for (std::size_t l = 0; l < fallback->weights.size(); ++l)
        if ((l >> i) & 1u) p += fallback->weights[l];
      out.theta_post[static_cast<Eigen::Index>(i)] = p;
      out.log_evidence[static_cast<Eigen::Index>(i)] = fallback->log_evidence;
      continue;
    }

    // Steps 7-9: project each term onto Gamma_i = h_i' X, pass through the likelihood of y_i,
    // then through the bias prior for each state of Lambda_i.
    const double var_n = b.sigma_n * b.sigma_n;
    const double var_b = b.fault.bias_std * b.fault.bias_std;
    std::vector<double> l0(loo.n), l1(loo.n);
    const Eigen::Vector4d& h = b.h;
    for (std::size_t l = 0; l < loo.n; ++l) {
      const double mu = h[0] * s.mean[0][l] + h[1] * s.mean[1][l] + h[2] * s.mean[2][l] + h[3] * s.mean[3][l];
      const double c00 = s.cov[0][l], c01 = s.cov[1][l], c02 = s.cov[2][l], c03 = s.cov[3][l];
      const double c11 = s.cov[4][l], c12 = s.cov[5][l], c13 = s.cov[6][l];
      const double c22 = s.cov[7][l], c23 = s.cov[8][l], c33 = s.cov[9][l];
      const double v = h[0] * h[0] * c00 + h[1] * h[1] * c11 + h[2] * h[2] * c22 + h[3] * h[3] * c33 +
                       2.0 * (h[0] * (h[1] * c01 + h[2] * c02 + h[3] * c03) +
                              h[1] * (h[2] * c12 + h[3] * c13) + h[2] * h[3] * c23);
      const double resid = b.y - mu;
      l0[l] = s.log_w[l] + log_normal_pdf(0.0, resid, var_n + v);
      l1[l] = s.log_w[l] + log_normal_pdf(b.fault.bias_mean, resid, var_n + var_b + v);
    }
    const double a0 = std::log1p(-theta) + log_sum_exp(l0);
    const double a1 = std::log(theta) + log_sum_exp(l1);
    const double z = log_add(a0, a1);
    out.theta_post[static_cast<Eigen::Index>(i)] = std::exp(a1 - z);
    out.log_evidence[static_cast<Eigen::Index>(i)] = z;
  }
  return out;
}

GaussianMixture PosteriorResult::to_mixture() const {
  GaussianMixture g;
  g.log_weights = log_weights;
  g.components.reserve(means.size());
  for (std::size_t i = 0; i < means.size(); ++i)
    g.components.push_back(GeneralGaussian::from_moments(means[i], covs[i]));
  return g;
}

}  // namespace braim
