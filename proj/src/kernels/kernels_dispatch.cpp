#include "dspboard/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "kernels_impl.hpp"

namespace dspboard::kernels {
namespace {

using detail::Ops;

const Ops* g_ops = nullptr;
Backend g_backend = Backend::scalar;

bool cpu_supports(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if DSPBOARD_HAVE_AVX2
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if DSPBOARD_HAVE_NEON
      return true;  // baseline on aarch64
#else
      return false;
#endif
  }
  return false;
}

const Ops& ops_for(Backend b) {
  switch (b) {
#if DSPBOARD_HAVE_AVX2
    case Backend::avx2:
      return detail::avx2_ops();
#endif
#if DSPBOARD_HAVE_NEON
    case Backend::neon:
      return detail::neon_ops();
#endif
    default:
      return detail::scalar_ops();
  }
}

Backend pick_default() {
  if (const char* env = std::getenv("BOARD_SIM_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_supports(Backend::avx2))
      return Backend::avx2;
    if (std::strcmp(env, "neon") == 0 && cpu_supports(Backend::neon))
      return Backend::neon;
  }
  if (cpu_supports(Backend::avx2)) return Backend::avx2;
  if (cpu_supports(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

const Ops& ops() {
  if (!g_ops) {
    g_backend = pick_default();
    g_ops = &ops_for(g_backend);
  }
  return *g_ops;
}

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "?";
}

bool backend_available(Backend b) { return cpu_supports(b); }

Backend active_backend() {
  ops();
  return g_backend;
}

bool set_backend(Backend b) {
  if (!cpu_supports(b)) return false;
  g_backend = b;
  g_ops = &ops_for(b);
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("kernels::dot: length mismatch");
  return ops().dot(a.data(), b.data(), a.size());
}

double sum_squares(std::span<const double> x) {
  return ops().sum_squares(x.data(), x.size());
}

double sum_squared_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("kernels::sum_squared_diff: length mismatch");
  return ops().sum_squared_diff(a.data(), b.data(), a.size());
}

void weight_update(std::span<double> w, std::span<const double> x, double g,
                   double leak) {
  if (w.size() != x.size())
    throw std::invalid_argument("kernels::weight_update: length mismatch");
  ops().weight_update(w.data(), x.data(), w.size(), g, leak);
}

}  // namespace dspboard::kernels
