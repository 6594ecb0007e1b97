#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dspboard/signal.hpp"

// LMS-adaptive filtering: Widrow-Hoff update b' = (1-leak)*b + 2*mu_eff*e*x
// with optional NLMS normalization mu_eff = mu/(eps + |x|^2), run in the
// predictor (adaptive line enhancer) and identification topologies, plus an
// equation-error adaptive IIR whose regressor concatenates delayed inputs
// and delayed desired samples. All arithmetic is double precision.

namespace dspboard::adaptive {

struct FilterCoefficients {
  std::vector<double> b;  // feedforward taps, newest-sample tap first
  std::vector<double> a;  // feedback add-weights: y_k = b.x + sum_j a_j*d_{k-j}
};

struct LmsConfig {
  double mu = 0.01;
  std::size_t num_taps = 1;
  bool normalized = false;  // NLMS on/off
  double leakage = 0.0;     // in [0,1); 0 = pure LMS
  double eps = 1e-12;       // NLMS denominator guard
  std::size_t snapshot_stride = 100;  // coefficient snapshots; 0 disables
};

struct PredictorConfig {
  LmsConfig lms;
  std::size_t delay = 1;  // decorrelation delay in samples, >= 1
};

struct AdaptiveRun {
  signal::SampleStream y;  // filter output
  signal::SampleStream e;  // error, e_k = d_k - y_k
  std::vector<FilterCoefficients> coeff_trajectory;
  std::size_t snapshot_stride = 0;
  FilterCoefficients final;
};

struct StepOutput {
  double y = 0.0;
  double e = 0.0;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t index, const std::string& what)
      : std::runtime_error(what), sample_index(index) {}
  std::size_t sample_index;
};

/// One FIR+LMS step. `window` holds the most recent num_taps inputs, newest
/// first. Computes y = b.window, e = desired - y, then updates state.b in
/// place. Throws std::invalid_argument on length mismatch or non-finite
/// inputs.
StepOutput fir_lms_step(FilterCoefficients& state,
                        std::span<const double> window, double desired,
                        const LmsConfig& cfg);

/// Identification topology: adapt so the filter output tracks `desired`.
/// Window pre-history is zero-padded.
AdaptiveRun run_identification(const signal::SampleStream& input,
                               const signal::SampleStream& desired,
                               const LmsConfig& cfg,
                               const FilterCoefficients& initial);

/// Predictor topology (adaptive line enhancer): regressor is the input
/// delayed by cfg.delay, desired is the current input. y enhances the
/// narrowband content, e keeps the broadband residue.
AdaptiveRun run_predictor(const signal::SampleStream& input,
                          const PredictorConfig& cfg,
                          const FilterCoefficients& initial);

/// Equation-error adaptive IIR: regressor = [x_k..x_{k-nb+1},
/// d_{k-1}..d_{k-na}]. na = 0 reduces bit-identically to
/// run_identification. Throws DivergenceError when the output goes
/// non-finite.
AdaptiveRun run_iir_equation_error(const signal::SampleStream& input,
                                   const signal::SampleStream& desired,
                                   const LmsConfig& cfg, std::size_t nb,
                                   std::size_t na);
AdaptiveRun run_iir_equation_error(const signal::SampleStream& input,
                                   const signal::SampleStream& desired,
                                   const LmsConfig& cfg, std::size_t nb,
                                   std::size_t na,
                                   const FilterCoefficients& initial);

/// Step-size guidance: 1/(num_taps * input_power). Throws on power <= 0.
double stability_bound(const LmsConfig& cfg, double input_power);

// CSV: coefficient vectors as "index,value"; runs as "k,x,y,e".
void write_coefficients_csv(std::span<const double> coeffs,
                            const std::string& path);
std::vector<double> read_coefficients_csv(const std::string& path);
void write_run_csv(const signal::SampleStream& x, const AdaptiveRun& run,
                   const std::string& path);

}  // namespace dspboard::adaptive
