#include "kernels_impl.hpp"

// Reference kernels: plain sequential loops. These define the scalar-backend
// semantics the SIMD variants are equivalence-tested against.

namespace dspboard::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double sum_squared_diff_scalar(const double* a, const double* b,
                               std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void weight_update_scalar(double* w, const double* x, std::size_t n, double g,
                          double leak) {
  const double keep = 1.0 - leak;
  for (std::size_t i = 0; i < n; ++i) w[i] = keep * w[i] + g * x[i];
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{dot_scalar, sum_squares_scalar, sum_squared_diff_scalar,
                       weight_update_scalar};
  return ops;
}

}  // namespace dspboard::kernels::detail
