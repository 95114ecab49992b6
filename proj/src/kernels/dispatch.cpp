#include <atomic>
#include <cstdlib>
#include <string_view>

#include "ddil/kernels.hpp"

namespace ddil::kernels {
namespace {

const KernelTable* detect() {
  if (const char* forced = std::getenv("DDIL_KERNELS"); forced && std::string_view(forced) == "scalar") {
    return &scalar_table();
  }
#if defined(DDIL_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return &avx2_table();
#endif
#if defined(DDIL_HAVE_NEON)
  return &neon_table();
#endif
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool select(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      current().store(&scalar_table());
      return true;
    case Backend::avx2:
#if defined(DDIL_HAVE_AVX2)
      if (__builtin_cpu_supports("avx2")) {
        current().store(&avx2_table());
        return true;
      }
#endif
      return false;
    case Backend::neon:
#if defined(DDIL_HAVE_NEON)
      current().store(&neon_table());
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

}  // namespace ddil::kernels
