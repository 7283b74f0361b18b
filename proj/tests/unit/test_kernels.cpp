#include <doctest.h>

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "braim/kernels.hpp"

using namespace braim;

namespace {

struct Batch {
  std::size_t n;
  std::array<std::vector<double>, kernels::kSym4> v;
  std::array<std::vector<double>, 4> u;
  std::array<std::vector<double>, 4> mean;
  std::array<std::vector<double>, kernels::kSym4> cov;
  std::vector<double> det, quad;

  explicit Batch(std::size_t count) : n(count), det(count), quad(count) {
    for (auto& x : v) x.resize(n);
    for (auto& x : u) x.resize(n);
    for (auto& x : mean) x.resize(n);
    for (auto& x : cov) x.resize(n);
  }
  kernels::Spd4Batch in() const {
    kernels::Spd4Batch b;
    b.count = n;
    for (std::size_t k = 0; k < kernels::kSym4; ++k) b.v[k] = v[k].data();
    for (std::size_t k = 0; k < 4; ++k) b.u[k] = u[k].data();
    return b;
  }
  kernels::Spd4Out out() {
    kernels::Spd4Out o;
    for (std::size_t k = 0; k < 4; ++k) o.mean[k] = mean[k].data();
    for (std::size_t k = 0; k < kernels::kSym4; ++k) o.cov[k] = cov[k].data();
    o.det = det.data();
    o.quad = quad.data();
    return o;
  }
};

constexpr int kPack[4][4] = {{0, 1, 2, 3}, {1, 4, 5, 6}, {2, 5, 7, 8}, {3, 6, 8, 9}};

Batch random_batch(std::size_t n, std::uint64_t seed, bool spoil_every_fifth) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Batch b(n);
  for (std::size_t l = 0; l < n; ++l) {
    Eigen::Matrix4d a;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a(i, j) = nd(rng);
    Eigen::Matrix4d s = a * a.transpose() + 0.1 * Eigen::Matrix4d::Identity();
    if (spoil_every_fifth && l % 5 == 0) s(3, 3) = -1.0;
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j) b.v[kPack[i][j]][l] = s(i, j);
    for (int i = 0; i < 4; ++i) b.u[i][l] = nd(rng);
  }
  return b;
}

std::vector<const kernels::Table*> tables() {
  std::vector<const kernels::Table*> t{&kernels::scalar()};
  if (kernels::avx2() != nullptr) t.push_back(kernels::avx2());
  return t;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("batched 4x4 SPD solve matches Eigen") {
    for (const auto* kt : tables()) {
      for (std::size_t n : {1u, 3u, 4u, 13u, 64u}) {
        CAPTURE(kt->name);
        CAPTURE(n);
        Batch b = random_batch(n, 7 + n, true);
        kt->spd4_solve(b.in(), b.out());
        for (std::size_t l = 0; l < n; ++l) {
          Eigen::Matrix4d s;
          Eigen::Vector4d u;
          for (int i = 0; i < 4; ++i) {
            u(i) = b.u[i][l];
            for (int j = 0; j < 4; ++j) s(i, j) = b.v[kPack[i][j]][l];
          }
          if (l % 5 == 0) {
            CHECK(b.det[l] == -1.0);
            continue;
          }
          const Eigen::LLT<Eigen::Matrix4d> llt(s);
          const Eigen::Vector4d m = llt.solve(u);
          const Eigen::Matrix4d c = llt.solve(Eigen::Matrix4d::Identity());
          CHECK(b.det[l] == doctest::Approx(s.determinant()).epsilon(1e-10));
          CHECK(b.quad[l] == doctest::Approx(u.dot(m)).epsilon(1e-10));
          for (int i = 0; i < 4; ++i) {
            CHECK(b.mean[i][l] == doctest::Approx(m(i)).epsilon(1e-9));
            for (int j = i; j < 4; ++j) CHECK(b.cov[kPack[i][j]][l] == doctest::Approx(c(i, j)).epsilon(1e-9));
          }
        }
      }
    }
  }

  TEST_CASE("variants agree with the scalar reference") {
    if (kernels::avx2() == nullptr) return;
    const auto& s = kernels::scalar();
    const auto& v = *kernels::avx2();
    Batch a = random_batch(37, 99, false), b = random_batch(37, 99, false);
    s.spd4_solve(a.in(), a.out());
    v.spd4_solve(b.in(), b.out());
    for (std::size_t l = 0; l < 37; ++l) {
      CHECK(a.det[l] == doctest::Approx(b.det[l]).epsilon(1e-13));
      CHECK(a.quad[l] == doctest::Approx(b.quad[l]).epsilon(1e-12));
      for (int i = 0; i < 4; ++i) CHECK(a.mean[i][l] == doctest::Approx(b.mean[i][l]).epsilon(1e-12));
    }

    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (std::size_t n : {0u, 1u, 7u, 8u, 33u, 1000u}) {
      std::vector<double> x(n), y(n);
      for (auto& e : x) e = nd(rng);
      for (auto& e : y) e = nd(rng);
      double ref = 0.0;
      for (std::size_t i = 0; i < n; ++i) ref += x[i] * y[i];
      CHECK(s.dot(x.data(), y.data(), n) == doctest::Approx(ref).epsilon(1e-12));
      CHECK(v.dot(x.data(), y.data(), n) == doctest::Approx(ref).epsilon(1e-12));
    }
    for (std::size_t cols : {1u, 5u, 12u, 17u}) {
      const std::size_t rows = 9;
      std::vector<double> a2(rows * cols), x(cols), y1(rows), y2(rows);
      for (auto& e : a2) e = nd(rng);
      for (auto& e : x) e = nd(rng);
      s.gemv(a2.data(), rows, cols, x.data(), y1.data());
      v.gemv(a2.data(), rows, cols, x.data(), y2.data());
      for (std::size_t r = 0; r < rows; ++r) {
        double ref = 0.0;
        for (std::size_t c = 0; c < cols; ++c) ref += a2[r * cols + c] * x[c];
        CHECK(y1[r] == doctest::Approx(ref).epsilon(1e-12));
        CHECK(y2[r] == doctest::Approx(ref).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("active table is one of the variants") {
    const auto& a = kernels::active();
    CHECK((&a == &kernels::scalar() || &a == kernels::avx2()));
  }
}
