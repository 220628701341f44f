#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels.hpp"

namespace uwsplat::simd {

namespace {

Backend detect() {
  if (const char* env = std::getenv("UWSPLAT_SIMD"); env && std::string(env) == "scalar") return Backend::kScalar;
  if (backend_supported(Backend::kAvx2)) return Backend::kAvx2;
  return Backend::kScalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{detect()};
  return b;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(UWSPLAT_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw std::invalid_argument("simd backend '" + std::string(backend_name(b)) + "' is not available on this host");
  }
  current().store(b, std::memory_order_relaxed);
}

const KernelTable& kernels(Backend b) {
#if defined(UWSPLAT_HAVE_AVX2)
  if (b == Backend::kAvx2) {
    if (!backend_supported(b)) throw std::invalid_argument("avx2 kernels requested on a host without avx2");
    return detail::avx2_table();
  }
#endif
  if (b != Backend::kScalar) throw std::invalid_argument("simd backend not compiled in");
  return detail::scalar_table();
}

const KernelTable& kernels() { return kernels(active_backend()); }

}  // namespace uwsplat::simd
