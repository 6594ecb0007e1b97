#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "dspboard/adaptive.hpp"
#include "dspboard/board.hpp"
#include "dspboard/dualcore.hpp"
#include "dspboard/signal.hpp"

#include "dspboard/vme.hpp"

// Demo pipelines over the full stack: the BCM machine-protection chain
// (synthesize -> ADC -> dual-core adaptive filter -> trip comparator -> DAC)
// and the four-electrode BPM X/Y computation split across the two cores.

namespace dspboard::apps {

/// VME view of the whole board: words 0x0000-0xFFFF map the dual-port RAM
/// through port A, words 0x10000-0x10007 map the CE3 I/O registers.
/// Unmapped or direction-restricted accesses throw board::UnmappedAddress,
/// which slave_execute reports as BERR.
class BoardVmeBacking final : public vme::Backing {
 public:
  explicit BoardVmeBacking(board::Board& brd) : board_(&brd) {}

  std::uint16_t read_word(std::uint32_t word_index) override;
  void write_word(std::uint32_t word_index, std::uint16_t value) override;
  std::size_t words() const override { return 0x10008; }

 private:
  board::Board* board_;
};

struct BpmReading {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;  // electrode amplitudes, >= 0
  double k_scale = 1.0;                       // mm per unit ratio
};

struct BpmResult {
  double x_mm = 0.0;
  double y_mm = 0.0;
};

/// Difference-over-sum position: x = k*(a-b)/(a+b), y = k*(c-d)/(c+d),
/// computed by two workers over the dual-port memory (X on one core, Y on
/// the other, electrodes and results as binary64 word groups). Equals
/// bpm_position_direct bit-for-bit. Throws std::invalid_argument on negative
/// amplitudes or zero electrode sums.
BpmResult bpm_position(const BpmReading& r,
                       const dualcore::Schedule& schedule = {});

/// The same formula evaluated inline (oracle for the dual-core path).
BpmResult bpm_position_direct(const BpmReading& r);

struct BcmExperiment {
  signal::SignalSpec signal;          // beam components + contamination
  dualcore::PipelineConfig topology;  // must be the Predictor topology
  board::TripConfig trip;
  board::AdcModel adc;
  board::DacModel dac;
  bool adc_enabled = true;
  bool dac_enabled = true;
  double snr_skip_fraction = 0.5;  // steady-state window for SNR figures
};

struct BcmReport {
  double input_snr_db = 0.0;   // quantized input vs clean reference
  double output_snr_db = 0.0;  // enhancer output vs clean reference
  double improvement_db = 0.0;
  board::TripReport trip;
  board::DigitalIo dio;
  adaptive::AdaptiveRun run;
  signal::SampleStream clean;         // reference retained from synthesis
  signal::SampleStream contaminated;  // clean + noise components
  signal::SampleStream seen;          // after ADC quantization (or = contaminated)
  signal::SampleStream dac_out;
  std::uint64_t dac_timing_violations = 0;
};

/// Run the whole BCM chain. Deterministic given the experiment (seeds
/// included). The clean reference is a simulation-only affordance for SNR
/// ground truth; a real system has no such stream.
BcmReport run_bcm_experiment(const BcmExperiment& exp);

/// SNR over the trailing (1 - skip_fraction) of the streams.
signal::SnrReport snr_tail(const signal::SampleStream& reference,
                           const signal::SampleStream& x,
                           double skip_fraction);

// --------------------------------------------------------------------------
// Experiment config: line-oriented "key = value" under [section] headers.
// Sections: [signal] (duration_s, rate_hz, component = ... lines),
// [filter] (topology, taps, mu, normalized, leakage, eps, delay, block_len,
// role, scheduler, scheduler_seed, snapshot_stride), [trip] (threshold_v,
// persistence, output_line), [adc]/[dac] (enabled, full_scale_v).
// Component forms:
//   component = dc <level_v>
//   component = sin <freq_hz> <amplitude_v> <phase_rad>
//   component = white <sigma_v> <seed>
//   component = narrowband <center_hz> <bandwidth_hz> <sigma_v> <seed>
//   component = pulse <period_s> <duty> <amplitude_v>

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

BcmExperiment parse_experiment(std::istream& in);
BcmExperiment parse_experiment_file(const std::string& path);

/// Apply a global seed override: component seeds become base + index.
void override_seeds(signal::SignalSpec& spec, std::uint64_t base);

void write_report_csv(const BcmReport& report, std::ostream& out);
std::string format_summary(const BcmReport& report);

}  // namespace dspboard::apps
