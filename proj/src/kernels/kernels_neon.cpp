#include "ddil/kernels.hpp"

#include <arm_neon.h>

namespace ddil::kernels {
namespace {

// Two float64x2 registers hold the four partial sums (s0, s1) and (s2, s3).
double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double sum = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
               (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void sq_dists_neon(const double* query, const double* cols, std::size_t dim,
                   std::size_t stride, std::size_t n, double* out) {
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t d = 0; d < dim; ++d) {
      const float64x2_t diff = vsubq_f64(vld1q_f64(cols + d * stride + j), vdupq_n_f64(query[d]));
      acc = vaddq_f64(acc, vmulq_f64(diff, diff));
    }
    vst1q_f64(out + j, acc);
  }
  for (; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = cols[d * stride + j] - query[d];
      acc += diff * diff;
    }
    out[j] = acc;
  }
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{Backend::neon, dot_neon, axpy_neon, sq_dists_neon};
  return table;
}

}  // namespace ddil::kernels
