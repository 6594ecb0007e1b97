#include "dspboard/adaptive.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dspboard/kernels.hpp"

namespace dspboard::adaptive {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("adaptive: " + msg);
}

void validate_cfg(const LmsConfig& cfg) {
  if (!(cfg.mu >= 0.0) || !std::isfinite(cfg.mu)) fail("mu must be finite and >= 0");
  if (cfg.num_taps < 1) fail("num_taps must be >= 1");
  if (!(cfg.leakage >= 0.0 && cfg.leakage < 1.0)) fail("leakage must be in [0,1)");
  if (cfg.normalized && !(cfg.eps > 0.0)) fail("eps must be positive for NLMS");
}

double effective_mu(const LmsConfig& cfg, std::span<const double> window) {
  if (!cfg.normalized) return cfg.mu;
  return cfg.mu / (cfg.eps + kernels::sum_squares(window));
}

// Shared engine for the three serial topologies. The regressor at sample k is
//   [x_{k-delay} .. x_{k-delay-nb+1}, d_{k-1} .. d_{k-na}]
// with zero pre-history. `desired` may alias `input` (predictor).
AdaptiveRun run_engine(const signal::SampleStream& input,
                       const signal::SampleStream& desired,
                       const LmsConfig& cfg, std::size_t nb, std::size_t na,
                       std::size_t delay, const FilterCoefficients& initial) {
  validate_cfg(cfg);
  if (nb < 1) fail("nb must be >= 1");

  const std::size_t n = input.size();
  const std::size_t order = nb + na;

  std::vector<double> w(order, 0.0);
  if (!initial.b.empty() || !initial.a.empty()) {
    if (initial.b.size() != nb || initial.a.size() != na)
      fail("initial coefficients do not match nb/na");
    std::copy(initial.b.begin(), initial.b.end(), w.begin());
    std::copy(initial.a.begin(), initial.a.end(), w.begin() + static_cast<std::ptrdiff_t>(nb));
  }

  AdaptiveRun run;
  run.y.rate_hz = input.rate_hz;
  run.e.rate_hz = input.rate_hz;
  run.y.samples.resize(n);
  run.e.samples.resize(n);
  run.snapshot_stride = cfg.snapshot_stride;

  const auto split = [&](const std::vector<double>& flat) {
    FilterCoefficients c;
    c.b.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(nb));
    c.a.assign(flat.begin() + static_cast<std::ptrdiff_t>(nb), flat.end());
    return c;
  };

  std::vector<double> reg(order, 0.0);
  const std::vector<double>& x = input.samples;
  const std::vector<double>& d = desired.samples;

  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < nb; ++i) {
      const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(k) -
                                 static_cast<std::ptrdiff_t>(delay) -
                                 static_cast<std::ptrdiff_t>(i);
      reg[i] = idx >= 0 ? x[static_cast<std::size_t>(idx)] : 0.0;
    }
    for (std::size_t j = 0; j < na; ++j) {
      const std::ptrdiff_t idx =
          static_cast<std::ptrdiff_t>(k) - 1 - static_cast<std::ptrdiff_t>(j);
      reg[nb + j] = idx >= 0 ? d[static_cast<std::size_t>(idx)] : 0.0;
    }

    const double y = kernels::dot(w, reg);
    if (!std::isfinite(y))
      throw DivergenceError(k, "adaptive: non-finite output at sample " +
                                   std::to_string(k));
    const double e = d[k] - y;
    run.y.samples[k] = y;
    run.e.samples[k] = e;

    const double g = 2.0 * effective_mu(cfg, reg) * e;
    kernels::weight_update(w, reg, g, cfg.leakage);

    if (cfg.snapshot_stride > 0 && (k + 1) % cfg.snapshot_stride == 0)
      run.coeff_trajectory.push_back(split(w));
  }

  run.final = split(w);
  return run;
}

}  // namespace

StepOutput fir_lms_step(FilterCoefficients& state,
                        std::span<const double> window, double desired,
                        const LmsConfig& cfg) {
  validate_cfg(cfg);
  if (state.b.size() != cfg.num_taps)
    fail("state has " + std::to_string(state.b.size()) + " taps, config wants " +
         std::to_string(cfg.num_taps));
  if (window.size() != cfg.num_taps) fail("window length != num_taps");
  if (!std::isfinite(desired)) fail("non-finite desired sample");
  for (const double v : window)
    if (!std::isfinite(v)) fail("non-finite window sample");

  StepOutput out;
  out.y = kernels::dot(state.b, window);
  out.e = desired - out.y;
  const double g = 2.0 * effective_mu(cfg, window) * out.e;
  kernels::weight_update(state.b, window, g, cfg.leakage);
  return out;
}

AdaptiveRun run_identification(const signal::SampleStream& input,
                               const signal::SampleStream& desired,
                               const LmsConfig& cfg,
                               const FilterCoefficients& initial) {
  if (input.size() != desired.size()) fail("input/desired length mismatch");
  if (input.rate_hz != desired.rate_hz) fail("input/desired rate mismatch");
  if (!initial.a.empty()) fail("identification takes FIR initial coefficients");
  return run_engine(input, desired, cfg, cfg.num_taps, 0, 0, initial);
}

AdaptiveRun run_predictor(const signal::SampleStream& input,
                          const PredictorConfig& cfg,
                          const FilterCoefficients& initial) {
  if (cfg.delay < 1) fail("predictor delay must be >= 1");
  if (input.size() < cfg.delay) fail("stream shorter than predictor delay");
  if (!initial.a.empty()) fail("predictor takes FIR initial coefficients");
  return run_engine(input, input, cfg.lms, cfg.lms.num_taps, 0, cfg.delay,
                    initial);
}

AdaptiveRun run_iir_equation_error(const signal::SampleStream& input,
                                   const signal::SampleStream& desired,
                                   const LmsConfig& cfg, std::size_t nb,
                                   std::size_t na) {
  return run_iir_equation_error(input, desired, cfg, nb, na,
                                FilterCoefficients{});
}

AdaptiveRun run_iir_equation_error(const signal::SampleStream& input,
                                   const signal::SampleStream& desired,
                                   const LmsConfig& cfg, std::size_t nb,
                                   std::size_t na,
                                   const FilterCoefficients& initial) {
  if (input.size() != desired.size()) fail("input/desired length mismatch");
  if (input.rate_hz != desired.rate_hz) fail("input/desired rate mismatch");
  return run_engine(input, desired, cfg, nb, na, 0, initial);
}

double stability_bound(const LmsConfig& cfg, double input_power) {
  if (!(input_power > 0.0)) fail("input power must be positive");
  if (cfg.num_taps < 1) fail("num_taps must be >= 1");
  return 1.0 / (static_cast<double>(cfg.num_taps) * input_power);
}

void write_coefficients_csv(std::span<const double> coeffs,
                            const std::string& path) {
  std::ofstream f(path);
  if (!f) fail("cannot open " + path + " for writing");
  f << "index,value\n";
  char buf[64];
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, coeffs[i]);
    f << buf;
  }
}

std::vector<double> read_coefficients_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("index,value", 0) != 0)
    fail("csv: missing index,value header");
  std::vector<double> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail("csv: malformed line '" + line + "'");
    out.push_back(std::stod(line.substr(comma + 1)));
  }
  return out;
}

void write_run_csv(const signal::SampleStream& x, const AdaptiveRun& run,
                   const std::string& path) {
  if (x.size() != run.y.size()) fail("write_run_csv: stream length mismatch");
  std::ofstream f(path);
  if (!f) fail("cannot open " + path + " for writing");
  f << "k,x,y,e\n";
  char buf[128];
  for (std::size_t k = 0; k < x.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", k, x.samples[k],
                  run.y.samples[k], run.e.samples[k]);
    f << buf;
  }
}

}  // namespace dspboard::adaptive
