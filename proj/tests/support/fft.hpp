#pragma once

// Test-only radix-2 FFT used as an independent spectral oracle. Kept free of
// any library code so periodogram checks do not share a path with the
// implementation under test.

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace testsupport {

inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: n must be a power of 2");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

/// |X_k|^2 / n for k = 0..n-1.
inline std::vector<double> periodogram(const std::vector<double>& x) {
  std::vector<std::complex<double>> a(x.begin(), x.end());
  fft_inplace(a);
  std::vector<double> p(a.size());
  for (std::size_t k = 0; k < a.size(); ++k)
    p[k] = std::norm(a[k]) / static_cast<double>(a.size());
  return p;
}

}  // namespace testsupport
