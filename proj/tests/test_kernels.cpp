#include <cstring>
#include <vector>

#include "doctest.h"
#include "ddil/kernels.hpp"
#include "ddil/rng.hpp"

using namespace ddil;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = standard_normal(rng) * 3.0;
  return v;
}

bool bitwise_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

// Straight-line restatement of the documented reduction order.
double reference_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s[4] = {0, 0, 0, 0};
  const std::size_t n = a.size(), body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    for (int l = 0; l < 4; ++l) s[l] += a[i + l] * b[i + l];
  }
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  for (std::size_t i = body; i < n; ++i) total += a[i] * b[i];
  return total;
}

std::vector<const kernels::KernelTable*> simd_tables() {
  std::vector<const kernels::KernelTable*> tables;
#if defined(DDIL_HAVE_AVX2)
  if (__builtin_cpu_supports("avx2")) tables.push_back(&kernels::avx2_table());
#endif
#if defined(DDIL_HAVE_NEON)
  tables.push_back(&kernels::neon_table());
#endif
  return tables;
}

}  // namespace

TEST_CASE("scalar dot follows the documented reduction order") {
  Rng rng(1);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u, 64u, 131u}) {
    const auto a = random_vector(rng, n), b = random_vector(rng, n);
    CHECK(bitwise_equal(kernels::scalar_table().dot(a.data(), b.data(), n), reference_dot(a, b)));
  }
}

TEST_CASE("SIMD kernels are bitwise identical to the scalar reference") {
  const auto tables = simd_tables();
  if (tables.empty()) MESSAGE("no SIMD backend on this machine; only the scalar path is exercised");
  const auto& ref = kernels::scalar_table();
  Rng rng(7);
  for (const auto* table : tables) {
    CAPTURE(kernels::backend_name(table->backend));
    for (std::size_t n = 0; n < 70; ++n) {
      const auto a = random_vector(rng, n), b = random_vector(rng, n);
      CHECK(bitwise_equal(table->dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n)));

      auto y1 = random_vector(rng, n);
      auto y2 = y1;
      table->axpy(-0.37, a.data(), y1.data(), n);
      ref.axpy(-0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(bitwise_equal(y1[i], y2[i]));

      for (std::size_t dim : {1u, 2u, 5u}) {
        const std::size_t stride = n + 3;
        const auto cols = random_vector(rng, dim * stride);
        const auto q = random_vector(rng, dim);
        std::vector<double> o1(n), o2(n);
        table->sq_dists(q.data(), cols.data(), dim, stride, n, o1.data());
        ref.sq_dists(q.data(), cols.data(), dim, stride, n, o2.data());
        for (std::size_t i = 0; i < n; ++i) CHECK(bitwise_equal(o1[i], o2[i]));
      }
    }
  }
}

TEST_CASE("sq_dists matches the definition on column-major points") {
  const double cols[] = {0.0, 1.0, -2.0, /* y */ 0.0, 2.0, 0.5};
  const double q[] = {1.0, 1.0};
  double out[3];
  kernels::active().sq_dists(q, cols, 2, 3, 3, out);
  CHECK(out[0] == 2.0);
  CHECK(out[1] == 1.0);
  CHECK(out[2] == 9.25);
}

TEST_CASE("backend selection") {
  CHECK(kernels::select(kernels::Backend::scalar));
  CHECK(kernels::active().backend == kernels::Backend::scalar);
  CHECK(kernels::backend_name(kernels::Backend::scalar) == "scalar");
#if defined(DDIL_HAVE_AVX2)
  if (__builtin_cpu_supports("avx2")) {
    CHECK(kernels::select(kernels::Backend::avx2));
    CHECK(kernels::active().backend == kernels::Backend::avx2);
  }
#endif
}
