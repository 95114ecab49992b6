#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops shared by the network and the metrics.
//
// Every backend computes bit-identical results: reductions use four
// interleaved partial sums combined as (s0 + s1) + (s2 + s3), followed by
// the scalar tail, and no backend fuses multiply-add. The scalar backend is
// the reference the SIMD backends are tested against.
namespace ddil::kernels {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
  Backend backend;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[j] = sum_d (cols[d * stride + j] - query[d])^2 for j < n.
  // Points are stored column-major: one contiguous column per dimension.
  void (*sq_dists)(const double* query, const double* cols, std::size_t dim,
                   std::size_t stride, std::size_t n, double* out);
};

const KernelTable& scalar_table();
#if defined(DDIL_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(DDIL_HAVE_NEON)
const KernelTable& neon_table();
#endif

// Best backend supported by the running CPU. DDIL_KERNELS=scalar in the
// environment forces the reference backend.
const KernelTable& active();

// Pins the backend used by active(); returns false if it is unavailable.
bool select(Backend backend);

std::string_view backend_name(Backend backend);

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }

}  // namespace ddil::kernels
