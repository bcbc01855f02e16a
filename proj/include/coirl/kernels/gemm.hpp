#pragma once

#include <cstddef>

#include "coirl/real.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace kernels {

// C[m x p] = op(A) * op(B)   (or += when accumulate is set).
// A is stored m x k, or k x m when trans_a; B is stored k x p, or p x k when trans_b.
// Dot products accumulate in double.
struct GemmArgs {
  const Real* a;
  const Real* b;
  Real* c;
  std::size_t m;
  std::size_t k;
  std::size_t p;
  bool trans_a = false;
  bool trans_b = false;
  bool accumulate = false;
};

// Reference implementation.
void gemm_serial(const GemmArgs& args);

// OpenMP over output rows. Each row is computed exactly as in gemm_serial, so
// the result is bitwise identical for any thread count.
void gemm_parallel(const GemmArgs& args);

// Work (m*k*p) above which gemm() dispatches to the parallel kernel.
inline constexpr std::size_t kParallelGemmThreshold = std::size_t{1} << 18;

void gemm(const GemmArgs& args);

}  // namespace kernels
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
