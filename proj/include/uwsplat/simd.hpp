#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

// Data-parallel inner loops with a scalar reference implementation and
// vector variants chosen once at startup from the host CPU. The variants are
// equivalence-tested against the scalar path.
namespace uwsplat::simd {

enum class Backend { kScalar, kAvx2 };

std::string_view backend_name(Backend b);
bool backend_supported(Backend b);

/// Currently dispatched backend. Defaults to the best supported one unless the
/// environment variable UWSPLAT_SIMD=scalar forces the reference path.
Backend active_backend();

/// Throws std::invalid_argument if the backend is not supported on this host.
void set_backend(Backend b);

/// Sorted splats overlapping one pixel row segment, structure-of-arrays.
/// features holds 4 values per splat: r, g, b, camera depth.
struct SplatSpan {
  std::size_t count = 0;
  const double* mean_x = nullptr;
  const double* mean_y = nullptr;
  const double* conic_a = nullptr;
  const double* conic_b = nullptr;
  const double* conic_c = nullptr;
  const double* opacity = nullptr;
  const double* features = nullptr;
};

struct CompositeParams {
  double alpha_max = 0.99;
  double min_transmittance = 1e-4;
  // Splats whose Gaussian falloff at the pixel is below exp(min_power) are
  // skipped without evaluating the exponential.
  double min_power = -20.0;
};

/// Front-to-back compositing of a row segment of n pixels whose centers are
/// (x0 + i, y) for i in [0, n). Per pixel writes 4 accumulated features,
/// the final transmittance, and the number of splats consumed.
struct CompositeOut {
  double* features = nullptr;
  double* transmittance = nullptr;
  std::uint32_t* consumed = nullptr;
};

struct KernelTable {
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*div)(const double* a, const double* b, double* out, std::size_t n);
  void (*exp)(const double* a, double* out, std::size_t n);
  // out += a * b
  void (*mul_acc)(const double* a, const double* b, double* out, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*composite_row)(const SplatSpan& splats, double x0, double y, std::size_t n, const CompositeParams& params,
                        const CompositeOut& out);
};

const KernelTable& kernels();
const KernelTable& kernels(Backend b);

}  // namespace uwsplat::simd
