#pragma once

#include "uwsplat/simd.hpp"

namespace uwsplat::simd::detail {

const KernelTable& scalar_table();
#if defined(UWSPLAT_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace uwsplat::simd::detail
