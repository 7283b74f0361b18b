#include <doctest.h>

#include <cmath>
#include <random>

#include "braim/baseline.hpp"
#include "braim/error.hpp"
#include "braim/normal.hpp"
#include "oracles/frozen_values.hpp"

using namespace braim;

namespace {

std::vector<double> uniform_theta(int m, double t = 0.05) { return std::vector<double>(static_cast<std::size_t>(m), t); }

struct Setup {
  Scenario s;
  LinearModel model;
  std::vector<double> theta;
};

Setup setup12(FaultType type = FaultType::nlos) {
  Setup st;
  st.s = generate_scenario(1, type);
  st.model = linearize(st.s);
  st.theta = uniform_theta(12);
  return st;
}

}  // namespace

TEST_SUITE("baseline") {
  TEST_CASE("fault mode counts") {
    CHECK(fault_mode_count(12) == 3301);
    CHECK(enumerate_fault_modes(12, uniform_theta(12)).size() == 3301);
    CHECK(enumerate_fault_modes(6, uniform_theta(6)).size() == 6);
    CHECK(enumerate_fault_modes(5, uniform_theta(5)).empty());
    CHECK(fault_mode_count(5) == 0);
  }

  TEST_CASE("mode ordering") {
    const auto modes = enumerate_fault_modes(8, uniform_theta(8));
    std::size_t last_size = 0;
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const std::size_t n = modes[k].faulty_set().size();
      CHECK(n >= last_size);
      last_size = n;
      if (k > 0) CHECK(modes[k - 1].p_fm >= modes[k].p_fm);
    }
    // Ties are ordered lexicographically on the faulty indices.
    CHECK(modes[0].faulty_set() == std::vector<int>{0});
    CHECK(modes[7].faulty_set() == std::vector<int>{7});
    CHECK(modes[8].faulty_set() == std::vector<int>{0, 1});
    CHECK(modes[9].faulty_set() == std::vector<int>{0, 2});
    // p_fm = prod (1 - theta) over free * prod theta over faulty.
    CHECK(modes[0].p_fm == doctest::Approx(std::pow(0.95, 7) * 0.05).epsilon(1e-14));
    std::vector<double> th = uniform_theta(8);
    th[5] = 0.3;
    const auto m2 = enumerate_fault_modes(8, th);
    CHECK(m2[0].faulty_set() == std::vector<int>{5});
  }

  TEST_CASE("threshold factors") {
    const Eigen::Vector3d f = ss_threshold_factors(3301, FalseAlarmBudget{1e-2, 1e-2});
    CHECK(f(0) == doctest::Approx(frozen::kSsFactorH3301).epsilon(1e-12));
    CHECK(f(1) == doctest::Approx(frozen::kSsFactorH3301).epsilon(1e-12));
    CHECK(f(2) == doctest::Approx(frozen::kSsFactorV3301).epsilon(1e-12));
  }

  TEST_CASE("WLS against normal equations") {
    Scenario s;
    s.bs_positions = {{100, 100, 10}, {-100, 100, 20}, {-100, -100, 30}, {100, -100, 15}};
    s.noise_std.assign(4, 0.5);
    s.faults.assign(4, FaultSpec{});
    const LinearModel m = linearize(s);
    const Eigen::Vector4d y(0.3, -0.2, 0.7, 0.1);
    const auto w = wls_estimate(m, y);
    REQUIRE(w);
    const Eigen::Matrix4d ht = m.h.transpose();
    const Eigen::Vector4d ls = (ht * m.h).inverse() * (ht * y);
    CHECK((w->x_hat - ls).norm() < 1e-10);
    CHECK((w->phi - 0.25 * (ht * m.h).inverse()).norm() < 1e-10);
    // Noise-free truth recovers the zero offset.
    CHECK(wls_estimate(m, Eigen::VectorXd::Zero(m.size()))->x_hat.norm() < 1e-12);
    // A subset that cannot determine the state.
    CHECK_FALSE(wls_estimate(m, y, 0b0111u).has_value());
  }

  TEST_CASE("noise-free epoch passes with zero statistics") {
    const Setup st = setup12();
    const SsGeometry g(st.model, full_mask(12), enumerate_fault_modes(12, st.theta), FalseAlarmBudget{});
    CHECK(g.n_fm() == 3301);
    const SsTestReport r = ss_test(g, Eigen::VectorXd::Zero(12));
    CHECK(r.passed);
    CHECK(r.available);
    CHECK(r.tau.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("separation statistics against direct WLS") {
    const Setup st = setup12();
    const auto modes = enumerate_fault_modes(12, st.theta);
    const SsGeometry g(st.model, full_mask(12), modes, FalseAlarmBudget{});
    const auto d = draw_epoch(st.s, 4);
    const SsTestReport r = ss_test(g, d.y);
    const auto w0 = wls_estimate(st.model, d.y);
    for (std::size_t k : {0u, 17u, 500u, 3300u}) {
      const auto wk = wls_estimate(st.model, d.y, &modes[k]);
      REQUIRE(wk);
      for (int c = 0; c < 3; ++c) {
        CHECK(r.tau(static_cast<Eigen::Index>(k), c) == doctest::Approx(std::abs(w0->x_hat(c) - wk->x_hat(c))).epsilon(1e-9));
        // sigma_ss from (A_k - A_0) R (A_k - A_0)'.
        const Eigen::RowVectorXd diff = wk->gain.row(c) - w0->gain.row(c);
        const double var = (diff.array().square() * st.model.noise_var.transpose().array()).sum();
        CHECK(g.sigma_ss()(static_cast<Eigen::Index>(k), c) == doctest::Approx(std::sqrt(var)).epsilon(1e-9));
        CHECK(g.sigma_pos()(static_cast<Eigen::Index>(k), c) == doctest::Approx(std::sqrt(wk->phi(c, c))).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("exclusion removes a single large bias") {
    const Setup st = setup12();
    const auto modes = enumerate_fault_modes(12, st.theta);
    const SsGeometry g(st.model, full_mask(12), modes, FalseAlarmBudget{});
    Scenario quiet = st.s;
    for (auto& n : quiet.noise_std) n = 1e-4;
    for (int bad : {2, 7}) {
      const auto d = draw_epoch(quiet, 10 + bad);
      Eigen::VectorXd y = d.y - d.b;
      y(bad) += 1000.0;
      const SsTestReport top = ss_test(g, y);
      CHECK_FALSE(top.passed);
      const SsTestReport r = baseline_fde(g, st.model, y, st.theta, FalseAlarmBudget{});
      REQUIRE(r.available);
      REQUIRE(r.accepted_mode.has_value());
      CHECK(modes[*r.accepted_mode].faulty_set() == std::vector<int>{bad});
      CHECK((r.solution_mask & (1u << bad)) == 0u);
      CHECK(r.x_hat.head<3>().norm() < 1e-2);
    }
  }

  TEST_CASE("adversarial seven-fault epoch is unavailable") {
    const Setup st = setup12();
    const auto modes = enumerate_fault_modes(12, st.theta);
    const SsGeometry g(st.model, full_mask(12), modes, FalseAlarmBudget{});
    Eigen::VectorXd y = Eigen::VectorXd::Zero(12);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> big(200.0, 900.0);
    for (int i = 0; i < 7; ++i) y(i) = (i % 2 ? 1 : -1) * big(rng);
    const SsTestReport r = baseline_fde(g, st.model, y, st.theta, FalseAlarmBudget{});
    CHECK(r.exclusion_attempted);
    CHECK_FALSE(r.available);
    CHECK_FALSE(baseline_pl(r, 1e-3, 1e-3).available);
  }

  TEST_CASE("PL without monitored modes is a single Gaussian bound") {
    Scenario s;
    s.bs_positions = {{100, 100, 10}, {-100, 100, 20}, {-100, -100, 30}, {100, -100, 15}, {0, 150, 25}};
    s.noise_std.assign(5, 0.5);
    s.faults.assign(5, FaultSpec{});
    const LinearModel m = linearize(s);
    const SsGeometry g(m, full_mask(5), enumerate_fault_modes(5, uniform_theta(5)), FalseAlarmBudget{});
    CHECK(g.n_fm() == 0);
    const SsTestReport r = ss_test(g, Eigen::VectorXd::Zero(5));
    const auto pv = baseline_axis_pl(r, 2, 1e-3, 1e-6);
    REQUIRE(pv);
    CHECK(*pv == doctest::Approx(r.sigma0(2) * q_inv(0.5e-3)).epsilon(1e-5));
  }

  TEST_CASE("PL bisection postcondition") {
    const Setup st = setup12(FaultType::clock);
    const SsGeometry g(st.model, full_mask(12), enumerate_fault_modes(12, st.theta), FalseAlarmBudget{});
    const auto d = draw_epoch(st.s, 2);
    const SsTestReport r = ss_test(g, d.y - d.b);
    REQUIRE(r.passed);
    const double p = 1e-3, tol = 1e-3;
    const auto lhs = [&](double x, int axis) {
      double s = 2.0 * q_func(x / r.sigma0(axis));
      for (std::size_t k = 0; k < r.p_fm.size(); ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        s += r.p_fm[k] * q_func((x - r.thresholds(ki, axis)) / r.sigma_pos(ki, axis));
      }
      return s;
    };
    for (int axis = 0; axis < 3; ++axis) {
      const auto pl = baseline_axis_pl(r, axis, p, tol);
      REQUIRE(pl);
      CHECK(lhs(*pl, axis) < p);
      CHECK(lhs(*pl - tol, axis) >= p);
      double prev = lhs(0.0, axis);
      for (double x = 0.1; x < *pl * 2; x += 0.1) {
        const double v = lhs(x, axis);
        CHECK(v <= prev);
        prev = v;
      }
    }
    const BaselinePl both = baseline_pl(r, p, p, tol);
    CHECK(both.available);
    CHECK(both.pl_h == doctest::Approx(std::hypot(*baseline_axis_pl(r, 0, p / 2, tol), *baseline_axis_pl(r, 1, p / 2, tol))));
  }

  TEST_CASE("fault-free error covariance matches Phi") {
    const Setup st = setup12();
    Scenario clean = st.s;
    for (auto& f : clean.faults) f.theta = 0.0;
    const auto w0 = wls_estimate(st.model, Eigen::VectorXd::Zero(12));
    const int n = 10000;
    Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
    for (int e = 0; e < n; ++e) {
      const auto d = draw_epoch(clean, epoch_seed(8, e));
      const Eigen::Vector4d x = w0->gain * d.y;
      acc += x * x.transpose();
    }
    acc /= n;
    for (int i = 0; i < 4; ++i) CHECK(acc(i, i) == doctest::Approx(w0->phi(i, i)).epsilon(0.1));
  }
}
