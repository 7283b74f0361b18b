#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "braim/bayes.hpp"
#include "braim/baseline.hpp"
#include "braim/error.hpp"
#include "support/oracles.hpp"

using namespace braim;

namespace {

// Random M-station scenario around the origin with mixed fault models.
Scenario random_scenario(std::mt19937_64& rng, int m, bool clock_like = false) {
  std::uniform_real_distribution<double> xy(-500.0, 500.0), h(10.0, 30.0), mb(1.0, 20.0), th(0.02, 0.2),
      sn(0.3, 1.0);
  Scenario s;
  for (int i = 0; i < m; ++i) {
    s.bs_positions.emplace_back(xy(rng), xy(rng), h(rng));
    s.noise_std.push_back(sn(rng));
    s.faults.push_back(clock_like ? FaultSpec{th(rng), 0.0, 10.0} : FaultSpec{th(rng), mb(rng), 1.0});
  }
  return s;
}

PosteriorResult posterior_of(const Scenario& s, const EpochDraw& d, const FusionOptions& opt = {}) {
  const LinearModel model = linearize(s, d.expansion_point);
  const auto br = branch_messages(model, d.y, s.faults);
  return fuse_posterior(br, opt);
}

}  // namespace

TEST_SUITE("bayes") {
  TEST_CASE("branch message weights and alphas") {
    const Eigen::Vector4d h(0.6, 0.8, 0.0, 1.0);
    const BranchMessage b = branch_message(0.0, h, FaultSpec{0.05, 10.0, 1.0}, 1.0);
    CHECK(std::exp(b.terms[0].log_scale) == doctest::Approx(0.95).epsilon(1e-14));
    CHECK(std::exp(b.terms[1].log_scale) == doctest::Approx(0.05 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(b.terms[0].gaussian.alpha() == doctest::Approx(0.0));
    CHECK(b.terms[1].gaussian.alpha() == doctest::Approx(-25.0).epsilon(1e-12));
    for (const auto& t : b.terms) {
      CHECK(t.gaussian.rank() == 1);
      // V = c h h'.
      const double c = t.gaussian.info()(3, 3);
      CHECK((t.gaussian.info() - c * h * h.transpose()).norm() < 1e-12);
    }
    const BranchMessage tiny = branch_message(0.0, h, FaultSpec{1e-15, 10.0, 1.0}, 1.0);
    CHECK(std::exp(tiny.terms[1].log_scale) < 1e-14);
  }

  TEST_CASE("branch terms are the measurement mixture terms times |h| / sigma_t") {
    // Reduced maps omit |V_X|+^{-1/2} = |h| / sigma_t per term; the reduced product restores it.
    std::mt19937_64 rng(21);
    std::normal_distribution<double> nd;
    const Eigen::Vector4d h(0.3, -0.9, 0.2, 1.0);
    const FaultSpec f{0.1, 4.0, 2.0};
    const double y = 1.3, sn = 0.7;
    const BranchMessage b = branch_message(y, h, f, sn);
    const double hn = h.norm();
    const double var[2] = {sn * sn, sn * sn + 4.0};
    const double mean[2] = {y, y - f.bias_mean};
    const double prob[2] = {1.0 - f.theta, f.theta};
    for (int t = 0; t < 100; ++t) {
      Eigen::Vector4d x;
      for (int i = 0; i < 4; ++i) x(i) = nd(rng);
      const double g = h.dot(x);
      for (int k = 0; k < 2; ++k) {
        const double term = prob[k] * std::exp(-0.5 * (g - mean[k]) * (g - mean[k]) / var[k]) /
                            std::sqrt(2.0 * std::numbers::pi * var[k]);
        CHECK(std::exp(b.terms[static_cast<std::size_t>(k)].log_value(x)) ==
              doctest::Approx(term * hn / std::sqrt(var[k])).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("posterior matches brute-force enumeration") {
    std::mt19937_64 rng(22);
    for (int t = 0; t < 12; ++t) {
      const int m = 5 + t % 4;
      const Scenario s = random_scenario(rng, m, t % 3 == 0);
      const auto d = draw_epoch(s, rng());
      const LinearModel model = linearize(s, d.expansion_point);
      const PosteriorResult p = posterior_of(s, d);
      const auto hyp = oracle::brute_force_posterior(model, d.y, s.faults);
      const auto w = oracle::normalized_weights(hyp);
      REQUIRE(p.weights.size() == hyp.size());
      for (std::size_t l = 0; l < hyp.size(); ++l) {
        CHECK(std::abs(p.weights[l] - w[l]) < 1e-10);
        CHECK((p.means[l] - hyp[l].mean).norm() < 1e-9);
        CHECK((p.covs[l] - hyp[l].cov).norm() < 1e-9 * std::max(1.0, hyp[l].cov.norm()));
      }
      CHECK(p.log_evidence == doctest::Approx(oracle::log_total_evidence(hyp)).epsilon(1e-10));
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (std::size_t l = 0; l < hyp.size(); ++l) mean += w[l] * hyp[l].mean.head<3>();
      CHECK((p.x_hat - mean).norm() < 1e-9);
    }
  }

  TEST_CASE("Gaussian prior matches enumeration with extra observations") {
    std::mt19937_64 rng(23);
    const Scenario s = random_scenario(rng, 6);
    const auto d = draw_epoch(s, 99);
    const LinearModel model = linearize(s, d.expansion_point);
    const Eigen::Vector4d m0(1.0, -2.0, 0.5, 0.0);
    Eigen::Matrix4d p0 = Eigen::Matrix4d::Identity() * 4.0;
    p0(0, 1) = p0(1, 0) = 1.0;
    FusionOptions opt;
    opt.prior = GeneralGaussian::from_moments(m0, p0);
    const PosteriorResult p = posterior_of(s, d, opt);
    const auto hyp = oracle::brute_force_posterior(model, d.y, s.faults, &m0, &p0);
    const auto w = oracle::normalized_weights(hyp);
    for (std::size_t l = 0; l < hyp.size(); ++l) {
      CHECK(std::abs(p.weights[l] - w[l]) < 1e-10);
      CHECK((p.means[l] - hyp[l].mean).norm() < 1e-9);
    }
  }

  TEST_CASE("vanishing fault prior collapses to WLS") {
    std::mt19937_64 rng(24);
    Scenario s = random_scenario(rng, 8);
    for (auto& f : s.faults) f.theta = 1e-14;
    const auto d = draw_epoch(s, 5);
    const LinearModel model = linearize(s, d.expansion_point);
    const PosteriorResult p = posterior_of(s, d);
    CHECK(p.weights[0] > 1.0 - 1e-9);
    const auto wls = wls_estimate(model, d.y);
    REQUIRE(wls);
    CHECK((p.means[0] - wls->x_hat).norm() < 1e-9);
    CHECK((p.x_hat - wls->x_hat.head<3>()).norm() < 1e-9);
    CHECK((p.covs[0] - wls->phi).norm() < 1e-9);
  }

  TEST_CASE("posterior fault probabilities") {
    std::mt19937_64 rng(25);
    for (int t = 0; t < 6; ++t) {
      const Scenario s = random_scenario(rng, 6 + t % 3, t % 2 == 1);
      const auto d = draw_epoch(s, rng());
      const LinearModel model = linearize(s, d.expansion_point);
      const auto br = branch_messages(model, d.y, s.faults);
      const FaultPosterior fp = posterior_fault_probs(br);
      const auto hyp = oracle::brute_force_posterior(model, d.y, s.faults);
      const auto w = oracle::normalized_weights(hyp);
      const double log_ev = oracle::log_total_evidence(hyp);
      for (int i = 0; i < s.size(); ++i) {
        double marg = 0.0;
        for (std::size_t l = 0; l < w.size(); ++l)
          if ((l >> i) & 1u) marg += w[l];
        CHECK(fp.theta_post(i) == doctest::Approx(marg).epsilon(1e-9));
        CHECK(fp.theta_post(i) >= 0.0);
        CHECK(fp.theta_post(i) <= 1.0);
        CHECK(fp.log_evidence(i) == doctest::Approx(log_ev).epsilon(1e-9));
      }
      const PosteriorResult p = fuse_posterior(br);
      CHECK((p.theta_post - fp.theta_post).norm() < 1e-12);
    }
  }

  TEST_CASE("a large bias is identified") {
    Scenario s = generate_scenario(1, FaultType::nlos);
    for (auto& f : s.faults) f.theta = 0.05;
    auto d = draw_epoch(s, 3);
    const LinearModel model = linearize(s, d.expansion_point);
    Eigen::VectorXd y = d.y - d.b;
    y(3) += 100.0;
    for (auto& f : s.faults) f = FaultSpec{0.05, 100.0, 1.0};
    const auto fp = posterior_fault_probs(branch_messages(model, y, s.faults));
    CHECK(fp.theta_post(3) > 0.99);
  }

  TEST_CASE("consistent measurements lower the fault belief") {
    Scenario s = generate_scenario(1, FaultType::nlos);
    for (auto& f : s.faults) f = FaultSpec{0.05, 15.0, 1.0};
    for (auto& n : s.noise_std) n = 1e-3;
    const LinearModel model = linearize(s);
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(s.size());
    const auto fp = posterior_fault_probs(branch_messages(model, y, s.faults));
    for (int i = 0; i < s.size(); ++i) CHECK(fp.theta_post(i) < 0.05);
  }

  TEST_CASE("permuting measurements permutes the result") {
    std::mt19937_64 rng(26);
    const Scenario s = random_scenario(rng, 7);
    const auto d = draw_epoch(s, 8);
    const LinearModel model = linearize(s, d.expansion_point);
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    LinearModel pm = model;
    Eigen::VectorXd py(7);
    std::vector<FaultSpec> pf(7);
    for (int i = 0; i < 7; ++i) {
      pm.h.row(i) = model.h.row(perm[i]);
      pm.noise_var(i) = model.noise_var(perm[i]);
      py(i) = d.y(perm[i]);
      pf[i] = s.faults[perm[i]];
    }
    const auto a = fuse_posterior(branch_messages(model, d.y, s.faults));
    const auto b = fuse_posterior(branch_messages(pm, py, pf));
    CHECK((a.x_hat - b.x_hat).norm() < 1e-9);
    for (int i = 0; i < 7; ++i) CHECK(b.theta_post(i) == doctest::Approx(a.theta_post(perm[i])).epsilon(1e-9));
  }

  TEST_CASE("kernel variants give the same posterior") {
    if (kernels::avx2() == nullptr) return;
    const Scenario s = generate_scenario(4, FaultType::clock);
    const auto d = draw_epoch(s, 12);
    const auto br = branch_messages(linearize(s), d.y, s.faults);
    FusionOptions a, b;
    a.kernels = &kernels::scalar();
    b.kernels = kernels::avx2();
    const auto pa = fuse_posterior(br, a), pb = fuse_posterior(br, b);
    for (std::size_t l = 0; l < pa.weights.size(); ++l) {
      CHECK(pa.weights[l] == doctest::Approx(pb.weights[l]).epsilon(1e-10));
      CHECK((pa.means[l] - pb.means[l]).norm() < 1e-10);
    }
    CHECK((pa.theta_post - pb.theta_post).norm() < 1e-10);
  }

  TEST_CASE("every term covariance is symmetric positive definite") {
    const Scenario s = generate_scenario(6, FaultType::nlos);
    const auto p = posterior_of(s, draw_epoch(s, 1));
    for (const auto& c : p.covs) {
      CHECK((c - c.transpose()).norm() < 1e-12 * c.norm());
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(c).eigenvalues().minCoeff() > 0.0);
    }
  }

  TEST_CASE("errors") {
    Scenario s;
    s.bs_positions = {{100, 0, 0}, {200, 0, 0}, {300, 0, 0}, {400, 0, 0}, {500, 0, 0}};
    s.noise_std.assign(5, 1.0);
    s.faults.assign(5, FaultSpec{});
    const auto model = linearize(s);
    CHECK_THROWS_AS(fuse_posterior(branch_messages(model, Eigen::VectorXd::Zero(5), s.faults)), UnobservableState);
    std::mt19937_64 rng(27);
    const Scenario big = random_scenario(rng, 17);
    CHECK_THROWS_AS(fuse_posterior(branch_messages(linearize(big), Eigen::VectorXd::Zero(17), big.faults)), InvalidInput);
  }
}
