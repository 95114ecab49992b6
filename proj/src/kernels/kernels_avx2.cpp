#include "ddil/kernels.hpp"

#include <immintrin.h>

namespace ddil::kernels {
namespace {

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, prod);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double sum = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void sq_dists_avx2(const double* query, const double* cols, std::size_t dim,
                   std::size_t stride, std::size_t n, double* out) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(cols + d * stride + j), _mm256_set1_pd(query[d]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out + j, acc);
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

const KernelTable& avx2_table() {
  static const KernelTable table{Backend::avx2, dot_avx2, axpy_avx2, sq_dists_avx2};
  return table;
}

}  // namespace ddil::kernels
