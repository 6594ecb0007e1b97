#pragma once

#include <cstddef>
#include <span>

// Arithmetic inner loops shared by the signal and filter code. A scalar
// reference implementation always exists; on x86-64 an AVX2+FMA variant and
// on aarch64 a NEON variant are compiled in and selected at runtime from
// CPUID (env BOARD_SIM_KERNELS=scalar|avx2|neon overrides the pick).
//
// Results are deterministic for a fixed backend. Backends may differ in the
// last bits because SIMD variants accumulate in lanes; the equivalence tests
// bound that difference.

namespace dspboard::kernels {

enum class Backend { scalar, avx2, neon };

const char* backend_name(Backend b);
bool backend_available(Backend b);

/// Backend currently in use (selected on first call).
Backend active_backend();

/// Force a backend. Returns false and leaves the selection unchanged if the
/// machine cannot run it. Not safe to call concurrently with kernel use.
bool set_backend(Backend b);

/// sum_i a[i]*b[i]; spans must have equal length.
double dot(std::span<const double> a, std::span<const double> b);

/// sum_i x[i]^2
double sum_squares(std::span<const double> x);

/// sum_i (a[i]-b[i])^2; spans must have equal length.
double sum_squared_diff(std::span<const double> a, std::span<const double> b);

/// w[i] = (1 - leak)*w[i] + g*x[i]
void weight_update(std::span<double> w, std::span<const double> x, double g,
                   double leak);

}  // namespace dspboard::kernels
