#include "ddil/kernels.hpp"

namespace ddil::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  double sum = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void sq_dists_scalar(const double* query, const double* cols, std::size_t dim,
                     std::size_t stride, std::size_t n, double* out) {
  for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double q = query[d];
    const double* col = cols + d * stride;
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = col[j] - q;
      out[j] += diff * diff;
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::scalar, dot_scalar, axpy_scalar, sq_dists_scalar};
  return table;
}

}  // namespace ddil::kernels
