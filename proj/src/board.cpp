#include "dspboard/board.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace dspboard::board {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("board: " + msg);
}

}  // namespace

std::uint8_t DigitalIo::input_mask() const {
  std::uint8_t m = 0;
  for (int i = 0; i < 8; ++i)
    if (inputs[static_cast<std::size_t>(i)]) m |= static_cast<std::uint8_t>(1u << i);
  return m;
}

std::uint8_t DigitalIo::output_mask() const {
  std::uint8_t m = 0;
  for (int i = 0; i < 8; ++i)
    if (outputs[static_cast<std::size_t>(i)]) m |= static_cast<std::uint8_t>(1u << i);
  return m;
}

void DigitalIo::set_outputs(std::uint8_t mask) {
  for (int i = 0; i < 8; ++i) outputs[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
}

void DigitalIo::set_inputs(std::uint8_t mask) {
  for (int i = 0; i < 8; ++i) inputs[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
}

std::uint16_t adc_sample(AdcModel& adc, double volts) {
  if (std::isnan(volts)) fail("adc input is NaN");
  const double fs = adc.full_scale_v;
  const int max_code = adc.code_count() - 1;
  const double scaled = (volts + fs) / (2.0 * fs) * adc.code_count();
  double code = std::round(scaled);
  if (code < 0.0) {
    code = 0.0;
    ++adc.saturation_count;
  } else if (code > max_code) {
    code = max_code;
    ++adc.saturation_count;
  }
  return static_cast<std::uint16_t>(code);
}

double dac_output(DacModel& dac, std::uint16_t code, double t_s) {
  if (code >= dac.code_count()) fail("dac code out of range");
  if (dac.has_updated && t_s - dac.last_update_s < dac.settle_s)
    ++dac.timing_violations;
  dac.last_update_s = t_s;
  dac.has_updated = true;
  return static_cast<double>(code) / dac.code_count() * 2.0 * dac.full_scale_v -
         dac.full_scale_v;
}

signal::SampleStream adc_roundtrip_stream(AdcModel& adc,
                                          const signal::SampleStream& in) {
  signal::SampleStream out;
  out.rate_hz = in.rate_hz;
  out.samples.reserve(in.size());
  const double fs = adc.full_scale_v;
  for (const double v : in.samples) {
    const std::uint16_t code = adc_sample(adc, v);
    out.samples.push_back(static_cast<double>(code) / adc.code_count() * 2.0 * fs - fs);
  }
  return out;
}

signal::SampleStream dac_stream(DacModel& dac, const signal::SampleStream& in) {
  signal::SampleStream out;
  out.rate_hz = in.rate_hz;
  out.samples.reserve(in.size());
  const double fs = dac.full_scale_v;
  const int max_code = dac.code_count() - 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    if (std::isnan(in.samples[k])) fail("dac input is NaN");
    double code = std::round((in.samples[k] + fs) / (2.0 * fs) * dac.code_count());
    if (code < 0.0) code = 0.0;
    if (code > max_code) code = max_code;
    out.samples.push_back(dac_output(dac, static_cast<std::uint16_t>(code),
                                     static_cast<double>(k) / in.rate_hz));
  }
  return out;
}

bool watchdog_tick(WatchdogTimer& wd, std::uint64_t now_step) {
  if (!wd.expired && now_step - wd.last_kick_step > wd.timeout_steps)
    wd.expired = true;
  return wd.expired;
}

void watchdog_kick(WatchdogTimer& wd, std::uint64_t now_step) {
  // A kick after expiry does not clear the latch.
  wd.last_kick_step = now_step;
}

void watchdog_reset(WatchdogTimer& wd, std::uint64_t now_step) {
  wd.expired = false;
  wd.last_kick_step = now_step;
}

TripReport trip_evaluate(const TripConfig& cfg,
                         const signal::SampleStream& filtered, DigitalIo* dio) {
  if (cfg.persistence < 1) fail("trip persistence must be >= 1");
  if (cfg.output_line < 0 || cfg.output_line > 7) fail("trip output line must be 0..7");

  TripReport r;
  std::uint32_t streak = 0;
  for (std::size_t k = 0; k < filtered.size(); ++k) {
    if (filtered.samples[k] > cfg.threshold_v) {
      if (++streak >= cfg.persistence) {
        r.tripped = true;
        r.trip_index = k;
        r.latency_s = static_cast<double>(cfg.persistence) / filtered.rate_hz;
        break;
      }
    } else {
      streak = 0;
    }
  }
  if (r.tripped && dio) dio->outputs[static_cast<std::size_t>(cfg.output_line)] = true;
  return r;
}

void write_trip_csv(const TripReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) fail("cannot open " + path + " for writing");
  f << "tripped,trip_index,latency_s\n";
  char buf[96];
  if (r.tripped) {
    std::snprintf(buf, sizeof buf, "1,%zu,%.17g\n", *r.trip_index, *r.latency_s);
  } else {
    std::snprintf(buf, sizeof buf, "0,,\n");
  }
  f << buf;
}

// ---------------------------------------------------------------------------
// Register map and dispatcher

namespace {

constexpr std::uint32_t kDpramBase = 0xA0000000;
constexpr std::uint32_t kDpramBytes = 0x20000;
constexpr std::uint32_t kIoBase = 0xB0000000;

constexpr std::uint32_t kAdcData = kIoBase + 0x00;
constexpr std::uint32_t kDacData = kIoBase + 0x02;
constexpr std::uint32_t kDioIn = kIoBase + 0x04;
constexpr std::uint32_t kDioOut = kIoBase + 0x06;
constexpr std::uint32_t kWdtKick = kIoBase + 0x08;
constexpr std::uint32_t kWdtStatus = kIoBase + 0x0A;
constexpr std::uint32_t kWdtReset = kIoBase + 0x0C;

}  // namespace

std::vector<RegisterRegion> register_map() {
  return {
      {"dpram", kDpramBase, kDpramBytes, "rw"},
      {"adc_data", kAdcData, 2, "r"},
      {"dac_data", kDacData, 2, "w"},
      {"dio_in", kDioIn, 2, "r"},
      {"dio_out", kDioOut, 2, "rw"},
      {"wdt_kick", kWdtKick, 2, "w"},
      {"wdt_status", kWdtStatus, 2, "r"},
      {"wdt_reset", kWdtReset, 2, "w"},
  };
}

std::string register_map_markdown() {
  std::string out =
      "| name | base | size (bytes) | access |\n"
      "|------|------|--------------|--------|\n";
  char buf[128];
  for (const RegisterRegion& r : register_map()) {
    std::snprintf(buf, sizeof buf, "| %s | 0x%08X | 0x%X | %s |\n",
                  r.name.c_str(), r.base, r.size_bytes, r.access.c_str());
    out += buf;
  }
  return out;
}

std::uint16_t Board::read16(std::uint32_t address) {
  if (address % 2 != 0) throw UnmappedAddress("board: odd bus address");
  if (address >= kDpramBase && address < kDpramBase + kDpramBytes)
    return dpram.read(dualcore::Port::A, (address - kDpramBase) / 2);
  switch (address) {
    case kAdcData:
      return adc_sample(adc, analog_in_v);
    case kDioIn:
      return dio.input_mask();
    case kDioOut:
      return dio.output_mask();
    case kWdtStatus:
      return watchdog_tick(wdt, step) ? 1 : 0;
    default:
      break;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "board: no readable register at 0x%08X", address);
  throw UnmappedAddress(buf);
}

void Board::write16(std::uint32_t address, std::uint16_t value) {
  if (address % 2 != 0) throw UnmappedAddress("board: odd bus address");
  if (address >= kDpramBase && address < kDpramBase + kDpramBytes) {
    dpram.write(dualcore::Port::A, (address - kDpramBase) / 2, value);
    return;
  }
  switch (address) {
    case kDacData:
      dac_code = value;
      analog_out_v = dac_output(dac, value, now_s());
      return;
    case kDioOut:
      dio.set_outputs(static_cast<std::uint8_t>(value & 0xFF));
      return;
    case kWdtKick:
      watchdog_kick(wdt, step);
      return;
    case kWdtReset:
      watchdog_reset(wdt, step);
      return;
    default:
      break;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "board: no writable register at 0x%08X", address);
  throw UnmappedAddress(buf);
}

}  // namespace dspboard::board
