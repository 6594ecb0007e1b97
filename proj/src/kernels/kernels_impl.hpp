#pragma once

#include <cstddef>

// Internal kernel vtable. Each backend translation unit fills one of these.

namespace dspboard::kernels::detail {

struct Ops {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum_squares)(const double*, std::size_t);
  double (*sum_squared_diff)(const double*, const double*, std::size_t);
  void (*weight_update)(double*, const double*, std::size_t, double, double);
};

const Ops& scalar_ops();
#if DSPBOARD_HAVE_AVX2
const Ops& avx2_ops();
#endif
#if DSPBOARD_HAVE_NEON
const Ops& neon_ops();
#endif

}  // namespace dspboard::kernels::detail
