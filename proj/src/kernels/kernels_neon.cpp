#include <arm_neon.h>

#include "kernels_impl.hpp"

// NEON variants, 2 doubles per lane, scalar tail.

namespace dspboard::kernels::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  }
  double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vld1q_f64(x + i);
    acc = vfmaq_f64(acc, v, v);
  }
  double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

double sum_squared_diff_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void weight_update_neon(double* w, const double* x, std::size_t n, double g,
                        double leak) {
  const float64x2_t gv = vdupq_n_f64(g);
  const float64x2_t keepv = vdupq_n_f64(1.0 - leak);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t wv = vmulq_f64(keepv, vld1q_f64(w + i));
    vst1q_f64(w + i, vfmaq_f64(wv, gv, vld1q_f64(x + i)));
  }
  const double keep = 1.0 - leak;
  for (; i < n; ++i) w[i] = keep * w[i] + g * x[i];
}

}  // namespace

const Ops& neon_ops() {
  static const Ops ops{dot_neon, sum_squares_neon, sum_squared_diff_neon,
                       weight_update_neon};
  return ops;
}

}  // namespace dspboard::kernels::detail
