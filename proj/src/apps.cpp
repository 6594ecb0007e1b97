#include "dspboard/apps.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace dspboard::apps {

namespace {

constexpr std::uint32_t kVmeDpramWords = 0x10000;
constexpr std::uint32_t kVmeIoWords = 8;

std::uint32_t board_address(std::uint32_t word_index) {
  if (word_index < kVmeDpramWords) return 0xA0000000 + 2 * word_index;
  if (word_index < kVmeDpramWords + kVmeIoWords)
    return 0xB0000000 + 2 * (word_index - kVmeDpramWords);
  throw board::UnmappedAddress("vme backing: word index beyond the board view");
}

[[noreturn]] void cfg_fail(const std::string& msg) { throw ConfigError("config: " + msg); }

double dos_ratio(double p, double q, double k) { return k * (p - q) / (p + q); }

// Fixed cells for the BPM session: four binary64 electrode inputs, two
// binary64 results, one go flag and one done flag per worker.
struct BpmCells {
  static constexpr std::uint32_t a = 0x0020, b = 0x0024, c = 0x0028, d = 0x002C;
  static constexpr std::uint32_t x = 0x0030, y = 0x0034;
  static constexpr std::uint32_t go = 0x0040;      // set by the host preload
  static constexpr std::uint32_t done_x = 0x0041;  // set by worker X
  static constexpr std::uint32_t done_y = 0x0042;  // set by worker Y
};

double read_f64_cell(dualcore::DualPortMemory& mem, dualcore::Port port,
                     std::uint32_t base) {
  std::array<std::uint16_t, 4> w{};
  for (std::uint32_t i = 0; i < 4; ++i) w[i] = mem.read(port, base + i);
  return dualcore::decode_f64(w);
}

void write_f64_cell(dualcore::DualPortMemory& mem, dualcore::Port port,
                    std::uint32_t base, double v) {
  const auto w = dualcore::encode_f64(v);
  for (std::uint32_t i = 0; i < 4; ++i) mem.write(port, base + i, w[i]);
}

// One coordinate worker: waits for the go flag, reads its electrode pair,
// deposits the ratio, flags completion.
class AxisWorker final : public dualcore::Agent {
 public:
  AxisWorker(dualcore::DualPortMemory& mem, dualcore::Port port,
             std::uint32_t in0, std::uint32_t in1, std::uint32_t out,
             std::uint32_t done_flag, double k)
      : mem_(&mem), port_(port), in0_(in0), in1_(in1), out_(out),
        done_flag_(done_flag), k_(k) {}

  bool step() override {
    switch (st_) {
      case St::wait_go:
        if (mem_->read(port_, BpmCells::go) == 0) return false;
        st_ = St::compute;
        return true;
      case St::compute: {
        const double p = read_f64_cell(*mem_, port_, in0_);
        const double q = read_f64_cell(*mem_, port_, in1_);
        write_f64_cell(*mem_, port_, out_, dos_ratio(p, q, k_));
        mem_->write(port_, done_flag_, 1);
        st_ = St::finished;
        return true;
      }
      case St::finished:
        return false;
    }
    return false;
  }

  bool done() const override { return st_ == St::finished; }
  std::string describe() const override { return "bpm axis worker"; }

 private:
  enum class St { wait_go, compute, finished };
  dualcore::DualPortMemory* mem_;
  dualcore::Port port_;
  std::uint32_t in0_, in1_, out_, done_flag_;
  double k_;
  St st_ = St::wait_go;
};

void validate_reading(const BpmReading& r) {
  if (r.a < 0 || r.b < 0 || r.c < 0 || r.d < 0)
    throw std::invalid_argument("bpm: electrode amplitudes must be >= 0");
  if (!(r.a + r.b > 0) || !(r.c + r.d > 0))
    throw std::invalid_argument("bpm: invalid reading, electrode sum is zero");
}

}  // namespace

std::uint16_t BoardVmeBacking::read_word(std::uint32_t word_index) {
  return board_->read16(board_address(word_index));
}

void BoardVmeBacking::write_word(std::uint32_t word_index, std::uint16_t value) {
  board_->write16(board_address(word_index), value);
}

BpmResult bpm_position_direct(const BpmReading& r) {
  validate_reading(r);
  return {dos_ratio(r.a, r.b, r.k_scale), dos_ratio(r.c, r.d, r.k_scale)};
}

BpmResult bpm_position(const BpmReading& r, const dualcore::Schedule& schedule) {
  validate_reading(r);
  dualcore::DualPortMemory mem;
  write_f64_cell(mem, dualcore::Port::A, BpmCells::a, r.a);
  write_f64_cell(mem, dualcore::Port::A, BpmCells::b, r.b);
  write_f64_cell(mem, dualcore::Port::A, BpmCells::c, r.c);
  write_f64_cell(mem, dualcore::Port::A, BpmCells::d, r.d);
  mem.write(dualcore::Port::A, BpmCells::go, 1);

  AxisWorker x_worker(mem, dualcore::Port::A, BpmCells::a, BpmCells::b,
                      BpmCells::x, BpmCells::done_x, r.k_scale);
  AxisWorker y_worker(mem, dualcore::Port::B, BpmCells::c, BpmCells::d,
                      BpmCells::y, BpmCells::done_y, r.k_scale);
  dualcore::run_agents({&x_worker, &y_worker}, mem, schedule, 1000);

  BpmResult out;
  out.x_mm = read_f64_cell(mem, dualcore::Port::A, BpmCells::x);
  out.y_mm = read_f64_cell(mem, dualcore::Port::A, BpmCells::y);
  return out;
}

signal::SnrReport snr_tail(const signal::SampleStream& reference,
                           const signal::SampleStream& x,
                           double skip_fraction) {
  if (!(skip_fraction >= 0.0 && skip_fraction < 1.0))
    throw std::invalid_argument("apps: skip_fraction must be in [0,1)");
  if (reference.size() != x.size())
    throw std::invalid_argument("apps: snr_tail length mismatch");
  const auto skip = static_cast<std::size_t>(
      skip_fraction * static_cast<double>(reference.size()));
  signal::SampleStream r2, x2;
  r2.rate_hz = reference.rate_hz;
  x2.rate_hz = x.rate_hz;
  r2.samples.assign(reference.samples.begin() + static_cast<std::ptrdiff_t>(skip),
                    reference.samples.end());
  x2.samples.assign(x.samples.begin() + static_cast<std::ptrdiff_t>(skip),
                    x.samples.end());
  return signal::measure_snr(r2, x2);
}

BcmReport run_bcm_experiment(const BcmExperiment& exp) {
  if (!std::holds_alternative<adaptive::PredictorConfig>(exp.topology.topology))
    throw std::invalid_argument(
        "bcm: the protection chain runs the predictor topology (no desired "
        "stream exists for identification)");

  BcmReport rep;

  // Clean reference = non-noise components only; contamination rides on top.
  signal::SignalSpec clean_spec = exp.signal;
  clean_spec.components.clear();
  for (const auto& c : exp.signal.components)
    if (!signal::is_noise_component(c)) clean_spec.components.push_back(c);
  rep.clean = signal::synthesize(clean_spec);
  rep.contaminated = signal::synthesize(exp.signal);

  board::AdcModel adc = exp.adc;
  rep.seen = exp.adc_enabled ? board::adc_roundtrip_stream(adc, rep.contaminated)
                             : rep.contaminated;

  const auto& pred = std::get<adaptive::PredictorConfig>(exp.topology.topology);
  const dualcore::SharedLayout layout = dualcore::SharedLayout::defaults(
      static_cast<std::uint16_t>(pred.lms.num_taps), exp.topology.block_len);
  rep.run = dualcore::run_dual_pipeline(rep.seen, nullptr, exp.topology, layout);

  rep.input_snr_db = snr_tail(rep.clean, rep.seen, exp.snr_skip_fraction).snr_db;
  rep.output_snr_db = snr_tail(rep.clean, rep.run.y, exp.snr_skip_fraction).snr_db;
  if (std::isinf(rep.input_snr_db) && std::isinf(rep.output_snr_db))
    rep.improvement_db = 0.0;
  else
    rep.improvement_db = rep.output_snr_db - rep.input_snr_db;

  rep.trip = board::trip_evaluate(exp.trip, rep.run.y, &rep.dio);

  if (exp.dac_enabled) {
    board::DacModel dac = exp.dac;
    rep.dac_out = board::dac_stream(dac, rep.run.y);
    rep.dac_timing_violations = dac.timing_violations;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

struct KeyValue {
  std::string section;
  std::string key;
  std::string value;
  int line_no;
};

std::vector<KeyValue> read_kv(std::istream& in) {
  std::vector<KeyValue> out;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first.front() == '[') {
      if (first.back() != ']')
        cfg_fail("line " + std::to_string(line_no) + ": malformed section header");
      section = first.substr(1, first.size() - 2);
      continue;
    }
    std::string eq;
    if (!(ls >> eq) || eq != "=")
      cfg_fail("line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string rest;
    std::getline(ls, rest);
    const auto start = rest.find_first_not_of(" \t");
    rest = start == std::string::npos ? "" : rest.substr(start);
    const auto end = rest.find_last_not_of(" \t\r");
    if (end != std::string::npos) rest.erase(end + 1);
    if (rest.empty()) cfg_fail("line " + std::to_string(line_no) + ": empty value for " + first);
    out.push_back({section, first, rest, line_no});
  }
  return out;
}

double to_double(const KeyValue& kv) {
  try {
    return std::stod(kv.value);
  } catch (const std::exception&) {
    cfg_fail(kv.section + "." + kv.key + ": not a number: '" + kv.value + "'");
  }
}

std::uint64_t to_u64(const KeyValue& kv) {
  try {
    return std::stoull(kv.value, nullptr, 0);
  } catch (const std::exception&) {
    cfg_fail(kv.section + "." + kv.key + ": not an integer: '" + kv.value + "'");
  }
}

bool to_bool(const KeyValue& kv) {
  if (kv.value == "true" || kv.value == "1" || kv.value == "on") return true;
  if (kv.value == "false" || kv.value == "0" || kv.value == "off") return false;
  cfg_fail(kv.section + "." + kv.key + ": not a boolean: '" + kv.value + "'");
}

signal::Component parse_component(const KeyValue& kv) {
  std::istringstream vs(kv.value);
  std::string kind;
  vs >> kind;
  std::vector<double> args;
  for (double v; vs >> v;) args.push_back(v);
  const auto want = [&](std::size_t n) {
    if (args.size() != n)
      cfg_fail("signal.component (" + kind + "): expected " + std::to_string(n) +
               " arguments, got " + std::to_string(args.size()));
  };
  if (kind == "dc") {
    want(1);
    return signal::Dc{args[0]};
  }
  if (kind == "sin") {
    want(3);
    return signal::Sinusoid{args[0], args[1], args[2]};
  }
  if (kind == "white") {
    want(2);
    return signal::WhiteNoise{args[0], static_cast<std::uint64_t>(args[1])};
  }
  if (kind == "narrowband") {
    want(4);
    return signal::NarrowbandNoise{args[0], args[1], args[2],
                                   static_cast<std::uint64_t>(args[3])};
  }
  if (kind == "pulse") {
    want(3);
    return signal::Pulse{args[0], args[1], args[2]};
  }
  cfg_fail("signal.component: unknown kind '" + kind + "'");
}

}  // namespace

BcmExperiment parse_experiment(std::istream& in) {
  BcmExperiment exp;
  adaptive::PredictorConfig pred;
  adaptive::LmsConfig ident;
  bool is_predictor = true;

  for (const KeyValue& kv : read_kv(in)) {
    if (kv.section == "signal") {
      if (kv.key == "duration_s") exp.signal.duration_s = to_double(kv);
      else if (kv.key == "rate_hz") exp.signal.rate_hz = to_double(kv);
      else if (kv.key == "component") exp.signal.components.push_back(parse_component(kv));
      else cfg_fail("signal." + kv.key + ": unknown key");
    } else if (kv.section == "filter") {
      auto& lms = is_predictor ? pred.lms : ident;
      if (kv.key == "topology") {
        if (kv.value == "predictor") is_predictor = true;
        else if (kv.value == "identification") is_predictor = false;
        else cfg_fail("filter.topology: must be predictor or identification");
      } else if (kv.key == "taps") lms.num_taps = to_u64(kv);
      else if (kv.key == "mu") lms.mu = to_double(kv);
      else if (kv.key == "normalized") lms.normalized = to_bool(kv);
      else if (kv.key == "leakage") lms.leakage = to_double(kv);
      else if (kv.key == "eps") lms.eps = to_double(kv);
      else if (kv.key == "snapshot_stride") lms.snapshot_stride = to_u64(kv);
      else if (kv.key == "delay") pred.delay = to_u64(kv);
      else if (kv.key == "block_len") exp.topology.block_len = static_cast<std::uint16_t>(to_u64(kv));
      else if (kv.key == "role") {
        if (kv.value == "filter_on_a") exp.topology.role = dualcore::RoleAssignment::filter_on_a;
        else if (kv.value == "filter_on_b") exp.topology.role = dualcore::RoleAssignment::filter_on_b;
        else cfg_fail("filter.role: must be filter_on_a or filter_on_b");
      } else if (kv.key == "scheduler") {
        if (kv.value == "round_robin") exp.topology.schedule.policy = dualcore::SchedulePolicy::round_robin;
        else if (kv.value == "random") exp.topology.schedule.policy = dualcore::SchedulePolicy::random;
        else cfg_fail("filter.scheduler: must be round_robin or random");
      } else if (kv.key == "scheduler_seed") exp.topology.schedule.seed = to_u64(kv);
      else cfg_fail("filter." + kv.key + ": unknown key");
    } else if (kv.section == "trip") {
      if (kv.key == "threshold_v") exp.trip.threshold_v = to_double(kv);
      else if (kv.key == "persistence") exp.trip.persistence = static_cast<std::uint32_t>(to_u64(kv));
      else if (kv.key == "output_line") exp.trip.output_line = static_cast<int>(to_u64(kv));
      else cfg_fail("trip." + kv.key + ": unknown key");
    } else if (kv.section == "adc") {
      if (kv.key == "enabled") exp.adc_enabled = to_bool(kv);
      else if (kv.key == "full_scale_v") exp.adc.full_scale_v = to_double(kv);
      else cfg_fail("adc." + kv.key + ": unknown key");
    } else if (kv.section == "dac") {
      if (kv.key == "enabled") exp.dac_enabled = to_bool(kv);
      else if (kv.key == "full_scale_v") exp.dac.full_scale_v = to_double(kv);
      else cfg_fail("dac." + kv.key + ": unknown key");
    } else {
      cfg_fail("unknown section [" + kv.section + "] (key " + kv.key + ")");
    }
  }

  if (is_predictor) exp.topology.topology = pred;
  else exp.topology.topology = ident;

  // Surface spec violations now, attributed to their keys.
  const double nyquist = exp.signal.rate_hz / 2.0;
  std::size_t idx = 0;
  for (const auto& c : exp.signal.components) {
    try {
      (void)signal::synthesize_component(c, 0, exp.signal.rate_hz);
    } catch (const std::invalid_argument& e) {
      cfg_fail("signal.component[" + std::to_string(idx) + "]: " + e.what() +
               " (Nyquist = " + std::to_string(nyquist) + " Hz)");
    }
    ++idx;
  }
  if (!(exp.signal.duration_s > 0.0)) cfg_fail("signal.duration_s: must be positive");
  exp.adc.rate_hz = exp.signal.rate_hz;
  return exp;
}

BcmExperiment parse_experiment_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) cfg_fail("cannot open " + path);
  return parse_experiment(f);
}

void override_seeds(signal::SignalSpec& spec, std::uint64_t base) {
  std::uint64_t i = 0;
  for (auto& c : spec.components) {
    if (auto* w = std::get_if<signal::WhiteNoise>(&c)) w->seed = base + i;
    else if (auto* nb = std::get_if<signal::NarrowbandNoise>(&c)) nb->seed = base + i;
    ++i;
  }
}

void write_report_csv(const BcmReport& report, std::ostream& out) {
  char buf[128];
  out << "key,value\n";
  const auto row = [&](const char* k, double v) {
    std::snprintf(buf, sizeof buf, "%s,%.17g\n", k, v);
    out << buf;
  };
  row("input_snr_db", report.input_snr_db);
  row("output_snr_db", report.output_snr_db);
  row("improvement_db", report.improvement_db);
  out << "tripped," << (report.trip.tripped ? 1 : 0) << "\n";
  if (report.trip.tripped) {
    out << "trip_index," << *report.trip.trip_index << "\n";
    row("trip_latency_s", *report.trip.latency_s);
  }
  out << "dac_timing_violations," << report.dac_timing_violations << "\n";
  std::snprintf(buf, sizeof buf, "dio_outputs,0x%02X\n", report.dio.output_mask());
  out << buf;
}

std::string format_summary(const BcmReport& report) {
  char buf[512];
  std::snprintf(
      buf, sizeof buf,
      "BCM experiment summary\n"
      "  samples            : %zu\n"
      "  input SNR          : %.3f dB\n"
      "  output SNR         : %.3f dB\n"
      "  improvement        : %.3f dB\n"
      "  trip               : %s\n",
      report.run.y.size(), report.input_snr_db, report.output_snr_db,
      report.improvement_db,
      report.trip.tripped ? "TRIPPED" : "clear");
  std::string out = buf;
  if (report.trip.tripped) {
    std::snprintf(buf, sizeof buf,
                  "  trip index         : %zu\n"
                  "  trip latency       : %.6g s\n",
                  *report.trip.trip_index, *report.trip.latency_s);
    out += buf;
  }
  return out;
}

}  // namespace dspboard::apps
