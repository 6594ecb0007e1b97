#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dspboard/dualcore.hpp"
#include "dspboard/signal.hpp"

// Behavioral models of the board peripherals: 12-bit offset-binary ADC and
// DAC (+-full_scale bipolar, 5 V default), 8+8 digital I/O, a latching
// watchdog, the machine-protection trip comparator, and a 16-bit register
// dispatcher over the documented EMIF CE map.

namespace dspboard::board {

struct AdcModel {
  int bits = 12;
  double full_scale_v = 5.0;  // bipolar +-full_scale
  double rate_hz = 333000.0;
  std::uint64_t saturation_count = 0;

  int code_count() const { return 1 << bits; }  // 4096
  double lsb_v() const { return 2.0 * full_scale_v / code_count(); }
};

struct DacModel {
  int bits = 12;
  double full_scale_v = 5.0;
  double settle_s = 3e-6;
  double last_update_s = -1.0;
  bool has_updated = false;
  std::uint64_t timing_violations = 0;

  int code_count() const { return 1 << bits; }
};

struct DigitalIo {
  std::array<bool, 8> inputs{};
  std::array<bool, 8> outputs{};

  std::uint8_t input_mask() const;
  std::uint8_t output_mask() const;
  void set_outputs(std::uint8_t mask);
  void set_inputs(std::uint8_t mask);
};

struct WatchdogTimer {
  std::uint64_t timeout_steps = 1000;
  std::uint64_t last_kick_step = 0;
  bool expired = false;
};

struct TripConfig {
  double threshold_v = 1.0;
  std::uint32_t persistence = 1;  // M consecutive samples over threshold
  int output_line = 0;            // DIO output asserted on trip
};

struct TripReport {
  bool tripped = false;
  std::optional<std::size_t> trip_index;  // index of the M-th violating sample
  std::optional<double> latency_s;        // M / rate_hz
};

/// code = clamp(round((v + FS)/(2 FS) * 4096), 0, 4095). Out-of-range input
/// clamps silently and bumps saturation_count.
std::uint16_t adc_sample(AdcModel& adc, double volts);

/// volts = code/4096 * 2 FS - FS. Updates spaced closer than settle_s bump
/// timing_violations. Throws std::invalid_argument on code > 4095.
double dac_output(DacModel& dac, std::uint16_t code, double t_s);

/// ADC then DAC-style reconstruction at the ADC's own scale: the stream the
/// DSP arithmetic actually sees.
signal::SampleStream adc_roundtrip_stream(AdcModel& adc,
                                          const signal::SampleStream& in);

/// Quantize a stream to DAC codes (same coding as the ADC), produce the
/// output voltages, spacing updates at 1/rate.
signal::SampleStream dac_stream(DacModel& dac, const signal::SampleStream& in);

/// Expiry latches when now - last_kick exceeds timeout; only reset clears.
bool watchdog_tick(WatchdogTimer& wd, std::uint64_t now_step);
void watchdog_kick(WatchdogTimer& wd, std::uint64_t now_step);
void watchdog_reset(WatchdogTimer& wd, std::uint64_t now_step);

/// First index where persistence consecutive samples exceed threshold_v;
/// asserts cfg.output_line on `dio` when given and tripped.
TripReport trip_evaluate(const TripConfig& cfg,
                         const signal::SampleStream& filtered,
                         DigitalIo* dio = nullptr);

void write_trip_csv(const TripReport& r, const std::string& path);

// --------------------------------------------------------------------------
// Register map. The paper assigns peripherals to the EMIF CE spaces without
// offsets; this is the documented concrete map (byte addresses, 16-bit
// registers):
//   CE2 0xA0000000  dual-port RAM, 64K x 16 (0x20000 bytes), port A
//   CE3 0xB0000000  I/O page:
//     +0x00 ADC_DATA   r   sample of the present analog input
//     +0x02 DAC_DATA   w   DAC code
//     +0x04 DIO_IN     r   input lines bitmask
//     +0x06 DIO_OUT    rw  output lines bitmask
//     +0x08 WDT_KICK   w   any value kicks
//     +0x0A WDT_STATUS r   bit 0 = expired (latched)
//     +0x0C WDT_RESET  w   any value clears the latch
// CE0 (SDRAM) and CE1 (FLASH) are out of scope and unmapped.

struct RegisterRegion {
  std::string name;
  std::uint32_t base;
  std::uint32_t size_bytes;
  std::string access;  // "r", "w", "rw"
};

std::vector<RegisterRegion> register_map();
std::string register_map_markdown();

class UnmappedAddress : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// The board: peripheral instances plus the bus dispatcher. Single-owner
/// mutable state; hand the whole object between threads, do not share it.
class Board {
 public:
  AdcModel adc;
  DacModel dac;
  DigitalIo dio;
  WatchdogTimer wdt;
  dualcore::DualPortMemory dpram;

  double analog_in_v = 0.0;   // voltage at the ADC pin
  double analog_out_v = 0.0;  // voltage at the DAC pin
  std::uint16_t dac_code = 2048;
  std::uint64_t step = 0;     // board clock, advanced by the owner
  double step_period_s = 1.0 / 333000.0;

  double now_s() const { return static_cast<double>(step) * step_period_s; }

  /// 16-bit bus access at an even byte address; throws UnmappedAddress.
  std::uint16_t read16(std::uint32_t address);
  void write16(std::uint32_t address, std::uint16_t value);
};

}  // namespace dspboard::board
