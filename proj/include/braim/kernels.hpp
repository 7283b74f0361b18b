#pragma once

#include <array>
#include <cstddef>

// Data-parallel inner loops. Every kernel has a portable scalar reference and, on x86-64,
// an AVX2/FMA variant; the variant is chosen once at startup from CPUID. Results of the two
// agree to rounding, not bit-for-bit.
namespace braim::kernels {

// Packed upper triangle of a symmetric 4x4 matrix: 00 01 02 03 11 12 13 22 23 33.
inline constexpr std::size_t kSym4 = 10;

// Structure-of-arrays batch of systems V m = u, one lane per system.
struct Spd4Batch {
  std::size_t count = 0;
  std::array<const double*, kSym4> v{};
  std::array<const double*, 4> u{};
};

struct Spd4Out {
  std::array<double*, 4> mean{};
  std::array<double*, kSym4> cov{};
  double* det = nullptr;   // det(V), or -1 when a Cholesky pivot is not positive
  double* quad = nullptr;  // u' V^-1 u
};

struct Table {
  const char* name;
  void (*spd4_solve)(const Spd4Batch& in, const Spd4Out& out);
  // y = A x with A row-major rows x cols.
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  double (*dot)(const double* a, const double* b, std::size_t n);
};

const Table& scalar();
// nullptr when the variant was not compiled in or the CPU lacks AVX2/FMA.
const Table* avx2();
// avx2() when available, else scalar(). BRAIM_KERNELS=scalar forces the reference.
const Table& active();

}  // namespace braim::kernels
