#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <variant>
#include <vector>

// Test-signal synthesis and SNR measurement. Streams are plain value types;
// every generator is a pure function of its spec, so identical specs (seeds
// included) give bit-identical streams.
//
// Randomness is pinned: std::mt19937_64 (whose output sequence the C++
// standard fixes) drives a Box-Muller transform,
//   u1 = (r1 >> 11) * 2^-53 clamped away from 0, u2 = (r2 >> 11) * 2^-53,
//   z0 = sqrt(-2 ln u1) cos(2 pi u2), z1 = sqrt(-2 ln u1) sin(2 pi u2),
// with z1 cached for the next draw. No library distribution is used because
// those differ between standard libraries.

namespace dspboard::signal {

struct SampleStream {
  std::vector<double> samples;
  double rate_hz = 333000.0;

  std::size_t size() const { return samples.size(); }
};

struct Dc {
  double level_v = 0.0;
};

struct Sinusoid {
  double freq_hz = 0.0;
  double amplitude_v = 1.0;
  double phase_rad = 0.0;
};

struct WhiteNoise {
  double sigma_v = 1.0;
  std::uint64_t seed = 0;
};

struct NarrowbandNoise {
  double center_hz = 0.0;
  double bandwidth_hz = 0.0;
  double sigma_v = 1.0;
  std::uint64_t seed = 0;
};

struct Pulse {
  double period_s = 1.0;
  double duty = 0.5;       // fraction of the period spent high, in (0, 1]
  double amplitude_v = 1.0;
};

using Component = std::variant<Dc, Sinusoid, WhiteNoise, NarrowbandNoise, Pulse>;

struct SignalSpec {
  double duration_s = 1.0;
  double rate_hz = 333000.0;  // board ADC rate
  std::vector<Component> components;
};

struct SnrReport {
  double signal_power_v2 = 0.0;
  double noise_power_v2 = 0.0;
  double snr_db = 0.0;  // +inf sentinel when noise power is zero
};

/// True for components that model contamination (white/narrowband noise).
bool is_noise_component(const Component& c);

/// Sum all components of the spec. floor(duration_s * rate_hz) samples.
/// Throws std::invalid_argument on violated spec invariants (non-positive
/// duration/rate, frequency at or above Nyquist, bad duty/sigma).
SampleStream synthesize(const SignalSpec& spec);

/// One component on its own, n samples at rate_hz.
SampleStream synthesize_component(const Component& c, std::size_t n,
                                  double rate_hz);

/// signal power = mean(ref^2), noise power = mean((cont-ref)^2).
/// snr_db = 10 log10(signal/noise); zero noise power gives the +inf sentinel.
/// Throws std::invalid_argument on length/rate mismatch or empty streams.
SnrReport measure_snr(const SampleStream& reference,
                      const SampleStream& contaminated);

/// White noise through a fixed order-4 Butterworth bandpass whose -3 dB
/// points sit at center +- bandwidth/2 (order-4 lowpass with cutoff
/// bandwidth/2 when center_hz == 0), rescaled so the sample standard
/// deviation equals sigma_v.
SampleStream narrowband_noise(double center_hz, double bandwidth_hz,
                              double sigma_v, std::uint64_t seed,
                              std::size_t n, double rate_hz);

// One cascade stage of the shaper; exposed so tests can probe the response.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;  // numerator
  double a1 = 0.0, a2 = 0.0;            // denominator (leading 1 implied)
  double s1 = 0.0, s2 = 0.0;            // transposed direct form II state

  double step(double x);
};

/// The two-section shaper used by narrowband_noise, unit gain at center.
std::vector<Biquad> design_bandpass4(double center_hz, double bandwidth_hz,
                                     double rate_hz);

/// Magnitude response of a biquad cascade at freq_hz.
double cascade_response(const std::vector<Biquad>& sections, double freq_hz,
                        double rate_hz);

// CSV: header "index,volts", one sample per line, %.17g (round-trip exact).
void write_csv(const SampleStream& s, std::ostream& out);
void write_csv(const SampleStream& s, const std::string& path);
SampleStream read_csv(std::istream& in, double rate_hz);
SampleStream read_csv(const std::string& path, double rate_hz);

/// Seeded Gaussian draw source (the documented mt19937_64 + Box-Muller).
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}
  double next();

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dspboard::signal
