#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>
#include <vector>

#include "dspboard/kernels.hpp"

using namespace dspboard;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = (static_cast<double>(rng() >> 11) * 0x1.0p-53) * 4.0 - 2.0;
  return v;
}

double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("scalar kernels match naive loops exactly") {
  REQUIRE(kernels::set_backend(kernels::Backend::scalar));
  std::mt19937_64 rng(123);
  for (const std::size_t n : {0u, 1u, 3u, 7u, 32u, 101u}) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    CHECK(kernels::dot(a, b) == naive_dot(a, b));
    CHECK(kernels::sum_squares(a) == naive_dot(a, a));
    double sd = 0.0;
    for (std::size_t i = 0; i < n; ++i) sd += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(kernels::sum_squared_diff(a, b) == sd);

    auto w = a;
    auto expect = a;
    const double g = 0.375, leak = 0.25;
    for (std::size_t i = 0; i < n; ++i) expect[i] = (1.0 - leak) * expect[i] + g * b[i];
    kernels::weight_update(w, b, g, leak);
    CHECK(w == expect);
  }
}

TEST_CASE("simd backends agree with scalar within rounding") {
  for (const auto backend : {kernels::Backend::avx2, kernels::Backend::neon}) {
    if (!kernels::backend_available(backend)) continue;
    std::mt19937_64 rng(77);
    for (const std::size_t n : {1u, 2u, 4u, 5u, 8u, 15u, 16u, 17u, 33u, 64u, 1000u}) {
      const auto a = random_vec(rng, n);
      const auto b = random_vec(rng, n);

      REQUIRE(kernels::set_backend(kernels::Backend::scalar));
      const double dot_s = kernels::dot(a, b);
      const double ss_s = kernels::sum_squares(a);
      const double sd_s = kernels::sum_squared_diff(a, b);
      auto w_s = a;
      kernels::weight_update(w_s, b, 0.125, 0.0625);

      REQUIRE(kernels::set_backend(backend));
      CHECK(kernels::dot(a, b) == doctest::Approx(dot_s).epsilon(1e-13));
      CHECK(kernels::sum_squares(a) == doctest::Approx(ss_s).epsilon(1e-13));
      CHECK(kernels::sum_squared_diff(a, b) == doctest::Approx(sd_s).epsilon(1e-13));
      auto w_v = a;
      kernels::weight_update(w_v, b, 0.125, 0.0625);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(w_v[i] == doctest::Approx(w_s[i]).epsilon(1e-13));
    }
    REQUIRE(kernels::set_backend(kernels::Backend::scalar));
  }
}

TEST_CASE("dispatch reports a usable backend") {
  CHECK(kernels::backend_available(kernels::Backend::scalar));
  const auto active = kernels::active_backend();
  CHECK(kernels::backend_available(active));
  CHECK(kernels::backend_name(active) != nullptr);

  if (!kernels::backend_available(kernels::Backend::neon)) {
    const auto before = kernels::active_backend();
    CHECK_FALSE(kernels::set_backend(kernels::Backend::neon));
    CHECK(kernels::active_backend() == before);
  }
}

TEST_CASE("kernel length mismatches throw") {
  const std::vector<double> a{1.0, 2.0}, b{1.0};
  CHECK_THROWS_AS((void)kernels::dot(a, b), std::invalid_argument);
  CHECK_THROWS_AS((void)kernels::sum_squared_diff(a, b), std::invalid_argument);
  std::vector<double> w{1.0, 2.0};
  CHECK_THROWS_AS(kernels::weight_update(w, b, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("empty spans are well-defined") {
  const std::vector<double> none;
  CHECK(kernels::dot(none, none) == 0.0);
  CHECK(kernels::sum_squares(none) == 0.0);
  CHECK(kernels::sum_squared_diff(none, none) == 0.0);
}
