#include "coirl/kernels/gemm.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace kernels {
namespace {

inline void gemm_row(const GemmArgs& g, std::size_t i) {
  const std::size_t lda = g.trans_a ? g.m : g.k;
  const std::size_t ldb = g.trans_b ? g.k : g.p;
  Real* crow = g.c + i * g.p;
  for (std::size_t j = 0; j < g.p; ++j) {
    double acc = 0.0;
    for (std::size_t l = 0; l < g.k; ++l) {
      const Real av = g.trans_a ? g.a[l * lda + i] : g.a[i * lda + l];
      const Real bv = g.trans_b ? g.b[j * ldb + l] : g.b[l * ldb + j];
      acc += static_cast<double>(av) * static_cast<double>(bv);
    }
    if (g.accumulate) {
      crow[j] = static_cast<Real>(static_cast<double>(crow[j]) + acc);
    } else {
      crow[j] = static_cast<Real>(acc);
    }
  }
}

}  // namespace

void gemm_serial(const GemmArgs& args) {
  for (std::size_t i = 0; i < args.m; ++i) gemm_row(args, i);
}

void gemm_parallel(const GemmArgs& args) {
  const auto rows = static_cast<long long>(args.m);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i) gemm_row(args, static_cast<std::size_t>(i));
}

void gemm(const GemmArgs& args) {
  if (args.m > 1 && args.m * args.k * args.p >= kParallelGemmThreshold) {
    gemm_parallel(args);
  } else {
    gemm_serial(args);
  }
}

}  // namespace kernels
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
