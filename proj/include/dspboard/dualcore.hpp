#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dspboard/adaptive.hpp"
#include "dspboard/signal.hpp"

// Two-worker emulation of the board's DSP partition: worker F runs the FIR
// filtering, worker L runs the LMS coefficient update, and everything that
// crosses between them goes through a modeled 64K x 16 dual-port RAM using
// flag-guarded single-writer mailboxes.
//
// Defined semantics (delayed-update LMS): worker F filters block n with the
// coefficient epoch that has absorbed blocks 0..n-2 (epoch 0 is the initial
// set and also covers block 1, since the update for block 0 is still in
// flight while block 1 is being filtered). With block_len = 1 this is serial
// per-sample LMS with one extra sample of coefficient delay. run_dual_pipeline
// is bit-identical to run_serial_delayed for every admissible schedule.
//
// Wire formats: coefficients and forwarded x/e samples cross the RAM as
// IEEE-754 binary32 split into two 16-bit words (low word first). The LMS
// worker keeps its accumulator in double and publishes binary32 roundings.

namespace dspboard::dualcore {

enum class Port : std::uint8_t { A = 0, B = 1 };
enum class MemOp : std::uint8_t { read, write };

struct AccessRecord {
  std::uint64_t step;
  Port port;
  MemOp op;
  std::uint16_t address;
  std::uint16_t value;
};

struct HazardEvent {
  std::uint64_t step;
  std::uint16_t address;
  std::uint16_t value_a;  // what port A wrote
  std::uint16_t value_b;  // what port B wrote
};

/// 65536 x 16 dual-port memory, zero-initialized. Writes commit immediately;
/// a write from each port to the same address within one simulated step is
/// recorded as a hazard (real parts leave it undefined).
class DualPortMemory {
 public:
  static constexpr std::size_t kWords = 65536;

  DualPortMemory() : words_(kWords, 0) {}

  std::uint16_t read(Port port, std::uint32_t address);
  void write(Port port, std::uint32_t address, std::uint16_t value);
  void advance_step();
  std::uint64_t step() const { return step_; }

  void enable_log(bool on) { logging_ = on; }
  const std::vector<AccessRecord>& access_log() const { return log_; }
  const std::vector<HazardEvent>& hazards() const { return hazards_; }

 private:
  std::vector<std::uint16_t> words_;
  std::uint64_t step_ = 0;
  bool logging_ = false;
  std::vector<AccessRecord> log_;
  std::vector<HazardEvent> hazards_;
  std::vector<std::pair<std::uint32_t, Port>> step_writes_;
};

inline std::uint16_t dpram_read(DualPortMemory& mem, Port port,
                                std::uint32_t address) {
  return mem.read(port, address);
}
inline void dpram_write(DualPortMemory& mem, Port port, std::uint32_t address,
                        std::uint16_t value) {
  mem.write(port, address, value);
}

void write_access_log_csv(const std::vector<AccessRecord>& log,
                          std::ostream& out);

// binary32 as two words, low half first; binary64 as four words, least
// significant first. Round-trips are exact for every finite value the layout
// can represent.
std::array<std::uint16_t, 2> encode_f32(double v);
double decode_f32(std::uint16_t lo, std::uint16_t hi);
std::array<std::uint16_t, 4> encode_f64(double v);
double decode_f64(const std::array<std::uint16_t, 4>& words);

/// double -> binary32 -> double, the rounding applied at every RAM crossing.
double f32_roundtrip(double v);

/// Where the shared regions live. Flag cells are seq/ack counters of
/// single-writer mailboxes: data (F -> L, per-block x and e) and coeff
/// (L -> F, one coefficient epoch). seqno counts blocks absorbed by L.
struct SharedLayout {
  std::uint16_t coeff_base = 0x0100;
  std::uint16_t coeff_count = 1;
  std::uint16_t data_base = 0x1000;
  std::uint16_t block_len = 1;
  std::uint16_t flag_data_ready = 0x0010;  // data mailbox seq (written by F)
  std::uint16_t flag_data_ack = 0x0011;    // data mailbox ack (written by L)
  std::uint16_t flag_coeff_ready = 0x0012;  // coeff mailbox seq (written by L)
  std::uint16_t flag_coeff_ack = 0x0013;    // coeff mailbox ack (written by F)
  std::uint16_t seqno = 0x0014;

  std::size_t coeff_words() const { return 2u * coeff_count; }
  std::size_t data_words() const { return 1u + 4u * block_len; }

  /// Throws std::invalid_argument when regions overlap or overflow 64K.
  void validate() const;

  static SharedLayout defaults(std::uint16_t coeff_count,
                               std::uint16_t block_len);
  /// Line-oriented "key = hex" config, e.g. "coeff_base = 0x0100".
  static SharedLayout parse(std::istream& in);
  std::string format() const;
};

enum class SchedulePolicy { round_robin, random };

struct Schedule {
  SchedulePolicy policy = SchedulePolicy::round_robin;
  std::uint64_t seed = 0;
};

/// One worker in a two-core session. step() performs at most one bounded
/// action (a flag poll, a region copy, one block of compute) and reports
/// whether it made progress; a blocked poll returns false.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual bool step() = 0;
  virtual bool done() const = 0;
  virtual std::string describe() const { return "agent"; }
};

/// Step agents until all finish, one agent per scheduler round (round-robin
/// or seeded-random pick). Throws HandshakeTimeout after max_idle_rounds
/// consecutive rounds without progress. Returns rounds executed.
std::uint64_t run_agents(const std::vector<Agent*>& agents,
                         DualPortMemory& mem, const Schedule& schedule,
                         std::uint64_t max_idle_rounds);

enum class RoleAssignment { filter_on_a, filter_on_b };

struct PipelineConfig {
  std::uint16_t block_len = 1;
  std::variant<adaptive::PredictorConfig, adaptive::LmsConfig> topology;
  RoleAssignment role = RoleAssignment::filter_on_a;
  Schedule schedule;
  bool strict_hazards = true;
  bool enable_access_log = false;
  std::uint64_t max_idle_rounds = 100000;
  adaptive::FilterCoefficients initial;  // empty = zeros
  // In pipeline runs the coefficient trajectory records published epochs
  // (one per block), every snapshot_stride-th epoch; serial adaptive runs
  // snapshot per sample instead.
};

struct PipelineTrace {
  std::vector<AccessRecord> access_log;
  std::vector<HazardEvent> hazards;
  std::uint64_t rounds = 0;
};

class HandshakeTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class HazardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run the two-worker pipeline. `desired` must be non-null exactly when the
/// topology is Identification. The result is deterministic and bit-identical
/// to run_serial_delayed under any schedule consistent with the handshake.
adaptive::AdaptiveRun run_dual_pipeline(const signal::SampleStream& input,
                                        const signal::SampleStream* desired,
                                        const PipelineConfig& cfg,
                                        const SharedLayout& layout,
                                        PipelineTrace* trace = nullptr);

/// The single-threaded delayed-update reference the pipeline must equal.
adaptive::AdaptiveRun run_serial_delayed(const signal::SampleStream& input,
                                         const signal::SampleStream* desired,
                                         const PipelineConfig& cfg);

// Replay-check of the mailbox discipline over an access log: every payload
// read must happen while its mailbox holds unconsumed data. Returns
// human-readable violations (empty = clean).
std::vector<std::string> audit_mailbox_order(
    const std::vector<AccessRecord>& log, const SharedLayout& layout);

enum class FilterKind { fir, iir };

struct MacBudget {
  std::size_t macs_per_sample = 0;
  double sample_rate_hz = 0.0;
  double macs_per_second = 0.0;
  double budget_macs_per_second = 3.0e8;  // two MACs/cycle at 150 MHz
  double utilization = 0.0;
  bool over_budget = false;
};

/// FIR: num_taps filter MACs + num_taps update MACs per sample. IIR adds one
/// of each per feedback tap.
MacBudget mac_budget(std::size_t num_taps, FilterKind kind,
                     double sample_rate_hz, std::size_t na = 0);

std::string format_budget(const MacBudget& b);

}  // namespace dspboard::dualcore
