#include "dspboard/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dspboard/kernels.hpp"

namespace dspboard::signal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("signal: " + msg);
}

double uniform01(std::mt19937_64& rng) {
  // 53-bit mantissa draw in [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

double GaussianSource::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01(rng_);
  const double u2 = uniform01(rng_);
  if (u1 <= 0.0) u1 = 0x1.0p-53;  // keep log() finite
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  has_spare_ = true;
  return r * std::cos(kTwoPi * u2);
}

double Biquad::step(double x) {
  const double y = b0 * x + s1;
  s1 = b1 * x - a1 * y + s2;
  s2 = b2 * x - a2 * y;
  return y;
}

namespace {

// Bilinear transform of one analog section (n2 s^2 + n1 s + n0) /
// (s^2 + d1 s + d0) at sample rate fs.
Biquad bilinear(double n2, double n1, double n0, double d1, double d0,
                double fs) {
  const double k = 2.0 * fs;
  const double a0 = k * k + d1 * k + d0;
  Biquad q;
  q.b0 = (n2 * k * k + n1 * k + n0) / a0;
  q.b1 = (-2.0 * n2 * k * k + 2.0 * n0) / a0;
  q.b2 = (n2 * k * k - n1 * k + n0) / a0;
  q.a1 = (-2.0 * k * k + 2.0 * d0) / a0;
  q.a2 = (k * k - d1 * k + d0) / a0;
  return q;
}

std::vector<Biquad> design_lowpass4(double cutoff_hz, double rate_hz) {
  // Order-4 Butterworth: conjugate pole pairs at angles 5pi/8 and 7pi/8 on
  // the prewarped cutoff circle.
  const double wc = 2.0 * rate_hz * std::tan(std::numbers::pi * cutoff_hz / rate_hz);
  std::vector<Biquad> sections;
  for (const double theta : {5.0 * std::numbers::pi / 8.0, 7.0 * std::numbers::pi / 8.0}) {
    const double zeta = -std::cos(theta);
    sections.push_back(bilinear(0.0, 0.0, wc * wc, 2.0 * zeta * wc, wc * wc, rate_hz));
  }
  return sections;
}

}  // namespace

std::vector<Biquad> design_bandpass4(double center_hz, double bandwidth_hz,
                                     double rate_hz) {
  if (center_hz == 0.0) return design_lowpass4(bandwidth_hz / 2.0, rate_hz);

  // Prewarp the -3 dB edges, then map the order-2 Butterworth lowpass
  // prototype (poles at 3pi/4 and 5pi/4 on the unit circle) through the
  // standard lowpass-to-bandpass substitution s -> (s^2 + w0^2)/(B s).
  const double f1 = center_hz - bandwidth_hz / 2.0;
  const double f2 = center_hz + bandwidth_hz / 2.0;
  const double w1 = 2.0 * rate_hz * std::tan(std::numbers::pi * f1 / rate_hz);
  const double w2 = 2.0 * rate_hz * std::tan(std::numbers::pi * f2 / rate_hz);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  using cd = std::complex<double>;
  std::vector<cd> poles;
  for (const double theta : {3.0 * std::numbers::pi / 4.0, 5.0 * std::numbers::pi / 4.0}) {
    const cd p(std::cos(theta), std::sin(theta));
    const cd bp = bw * p;
    const cd disc = std::sqrt(bp * bp - 4.0 * w0 * w0);
    poles.push_back((bp + disc) / 2.0);
    poles.push_back((bp - disc) / 2.0);
  }
  std::vector<Biquad> sections;
  std::vector<cd> reps;
  for (const cd& p : poles)
    if (p.imag() > 0.0) reps.push_back(p);
  if (reps.size() == 2) {
    for (const cd& p : reps) {
      const double d1 = -2.0 * p.real();
      const double d0 = std::norm(p);
      // Each section carries one of the two bandpass zeros at s = 0: B s.
      sections.push_back(bilinear(0.0, bw, 0.0, d1, d0, rate_hz));
    }
  } else {
    // Degenerate wide-band case: all four poles real. Pair first/last and
    // middle two so each section keeps real coefficients.
    std::sort(poles.begin(), poles.end(),
              [](const cd& a, const cd& b) { return a.real() < b.real(); });
    const auto pair_section = [&](const cd& p, const cd& q) {
      sections.push_back(bilinear(0.0, bw, 0.0, -(p + q).real(),
                                  (p * q).real(), rate_hz));
    };
    pair_section(poles[0], poles[3]);
    pair_section(poles[1], poles[2]);
  }

  // Normalize cascade gain to 1 at the digital image of w0.
  const double f0d = rate_hz / std::numbers::pi * std::atan(w0 / (2.0 * rate_hz));
  const double g = cascade_response(sections, f0d, rate_hz);
  if (g > 0.0) {
    sections[0].b0 /= g;
    sections[0].b1 /= g;
    sections[0].b2 /= g;
  }
  return sections;
}

double cascade_response(const std::vector<Biquad>& sections, double freq_hz,
                        double rate_hz) {
  const std::complex<double> z =
      std::polar(1.0, kTwoPi * freq_hz / rate_hz);
  const std::complex<double> zi = 1.0 / z;
  std::complex<double> h = 1.0;
  for (const Biquad& q : sections) {
    h *= (q.b0 + q.b1 * zi + q.b2 * zi * zi) /
         (1.0 + q.a1 * zi + q.a2 * zi * zi);
  }
  return std::abs(h);
}

bool is_noise_component(const Component& c) {
  return std::holds_alternative<WhiteNoise>(c) ||
         std::holds_alternative<NarrowbandNoise>(c);
}

namespace {

void validate_component(const Component& c, double rate_hz) {
  const double nyquist = rate_hz / 2.0;
  if (const auto* s = std::get_if<Sinusoid>(&c)) {
    if (!(s->freq_hz >= 0.0) || s->freq_hz >= nyquist)
      fail("sinusoid frequency " + std::to_string(s->freq_hz) +
           " Hz is at or above Nyquist (" + std::to_string(nyquist) + " Hz)");
  } else if (const auto* w = std::get_if<WhiteNoise>(&c)) {
    if (!(w->sigma_v >= 0.0)) fail("white noise sigma must be >= 0");
  } else if (const auto* nb = std::get_if<NarrowbandNoise>(&c)) {
    if (!(nb->sigma_v >= 0.0)) fail("narrowband sigma must be >= 0");
    if (nb->center_hz == 0.0) {
      if (!(nb->bandwidth_hz > 0.0) || nb->bandwidth_hz / 2.0 >= nyquist)
        fail("narrowband baseband bandwidth out of range");
    } else {
      if (!(0.0 < nb->bandwidth_hz && nb->bandwidth_hz < nb->center_hz))
        fail("narrowband requires 0 < bandwidth < center");
      if (nb->center_hz + nb->bandwidth_hz / 2.0 >= nyquist)
        fail("narrowband center " + std::to_string(nb->center_hz) +
             " Hz too close to Nyquist (" + std::to_string(nyquist) + " Hz)");
    }
  } else if (const auto* p = std::get_if<Pulse>(&c)) {
    if (!(p->period_s > 0.0)) fail("pulse period must be positive");
    if (!(p->duty > 0.0 && p->duty <= 1.0)) fail("pulse duty must be in (0,1]");
  }
}

}  // namespace

SampleStream synthesize_component(const Component& c, std::size_t n,
                                  double rate_hz) {
  validate_component(c, rate_hz);
  SampleStream out;
  out.rate_hz = rate_hz;
  out.samples.assign(n, 0.0);

  if (const auto* dc = std::get_if<Dc>(&c)) {
    for (auto& v : out.samples) v = dc->level_v;
  } else if (const auto* s = std::get_if<Sinusoid>(&c)) {
    for (std::size_t k = 0; k < n; ++k)
      out.samples[k] = s->amplitude_v *
                       std::sin(kTwoPi * s->freq_hz * (static_cast<double>(k) / rate_hz) +
                                s->phase_rad);
  } else if (const auto* w = std::get_if<WhiteNoise>(&c)) {
    GaussianSource g(w->seed);
    for (auto& v : out.samples) v = w->sigma_v * g.next();
  } else if (const auto* nb = std::get_if<NarrowbandNoise>(&c)) {
    out = narrowband_noise(nb->center_hz, nb->bandwidth_hz, nb->sigma_v,
                           nb->seed, n, rate_hz);
  } else if (const auto* p = std::get_if<Pulse>(&c)) {
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / rate_hz;
      const double u = std::fmod(t, p->period_s);
      out.samples[k] = (u < p->duty * p->period_s) ? p->amplitude_v : 0.0;
    }
  }
  return out;
}

SampleStream synthesize(const SignalSpec& spec) {
  if (!(spec.duration_s > 0.0)) fail("duration must be positive");
  if (!(spec.rate_hz > 0.0)) fail("sample rate must be positive");
  const auto n = static_cast<std::size_t>(spec.duration_s * spec.rate_hz);

  SampleStream out;
  out.rate_hz = spec.rate_hz;
  out.samples.assign(n, 0.0);
  for (const Component& c : spec.components) {
    const SampleStream part = synthesize_component(c, n, spec.rate_hz);
    for (std::size_t k = 0; k < n; ++k) out.samples[k] += part.samples[k];
  }
  return out;
}

SnrReport measure_snr(const SampleStream& reference,
                      const SampleStream& contaminated) {
  if (reference.size() != contaminated.size())
    fail("measure_snr: length mismatch");
  if (reference.rate_hz != contaminated.rate_hz)
    fail("measure_snr: rate mismatch");
  if (reference.size() == 0) fail("measure_snr: empty streams");

  const auto n = static_cast<double>(reference.size());
  SnrReport r;
  r.signal_power_v2 = kernels::sum_squares(reference.samples) / n;
  r.noise_power_v2 =
      kernels::sum_squared_diff(contaminated.samples, reference.samples) / n;
  if (r.noise_power_v2 > 0.0) {
    r.snr_db = 10.0 * std::log10(r.signal_power_v2 / r.noise_power_v2);
  } else {
    r.snr_db = std::numeric_limits<double>::infinity();
  }
  return r;
}

SampleStream narrowband_noise(double center_hz, double bandwidth_hz,
                              double sigma_v, std::uint64_t seed,
                              std::size_t n, double rate_hz) {
  validate_component(NarrowbandNoise{center_hz, bandwidth_hz, sigma_v, seed},
                     rate_hz);
  SampleStream out;
  out.rate_hz = rate_hz;
  out.samples.assign(n, 0.0);
  if (sigma_v == 0.0 || n == 0) return out;

  std::vector<Biquad> shaper = design_bandpass4(center_hz, bandwidth_hz, rate_hz);
  GaussianSource g(seed);
  for (auto& v : out.samples) {
    double x = g.next();
    for (Biquad& q : shaper) x = q.step(x);
    v = x;
  }

  const double power = kernels::sum_squares(out.samples) / static_cast<double>(n);
  const double sd = std::sqrt(power);
  if (sd == 0.0) return out;
  const double scale = sigma_v / sd;
  for (auto& v : out.samples) v *= scale;
  return out;
}

void write_csv(const SampleStream& s, std::ostream& out) {
  out << "index,volts\n";
  char buf[64];
  for (std::size_t k = 0; k < s.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k, s.samples[k]);
    out << buf;
  }
}

void write_csv(const SampleStream& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) fail("cannot open " + path + " for writing");
  write_csv(s, f);
}

SampleStream read_csv(std::istream& in, double rate_hz) {
  SampleStream s;
  s.rate_hz = rate_hz;
  std::string line;
  if (!std::getline(in, line) || line.rfind("index,volts", 0) != 0)
    fail("csv: missing index,volts header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail("csv: malformed line '" + line + "'");
    s.samples.push_back(std::stod(line.substr(comma + 1)));
  }
  return s;
}

SampleStream read_csv(const std::string& path, double rate_hz) {
  std::ifstream f(path);
  if (!f) fail("cannot open " + path);
  return read_csv(f, rate_hz);
}

}  // namespace dspboard::signal
