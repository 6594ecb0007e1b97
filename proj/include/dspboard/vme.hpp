#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Transaction-level VME slave: D16, D08(EO), BLT, RMW, ADO, address
// pipelining, and selectable interrupts with D08/D16 Status/ID. One call to
// slave_execute is one indivisible bus cycle, which is what makes RMW atomic;
// multiple logical masters are modeled by serializing their transactions.
//
// Conventions: big-endian byte lanes (even byte = high half of the 16-bit
// word), BLT bursts must stay inside one 256-byte block, ADO latches the
// address and the next data cycle at that address saves one abstract cycle.

namespace dspboard::vme {

enum class Cycle { D16, D08_EO, BLT, RMW, ADO };
enum class Dir { read, write };

struct RmwMasks {
  std::uint16_t and_mask = 0xFFFF;
  std::uint16_t or_mask = 0x0000;
};

struct VmeTransaction {
  Cycle cycle = Cycle::D16;
  Dir dir = Dir::read;
  std::uint32_t address = 0;
  std::vector<std::uint16_t> data;  // write payload (words, or one byte)
  std::uint32_t blt_count = 0;      // words to move on BLT read
  std::optional<RmwMasks> rmw;
};

struct BusResult {
  enum class Outcome { dtack, berr };
  Outcome outcome = Outcome::dtack;
  std::vector<std::uint16_t> data;  // read payload; RMW original value
  std::string berr_reason;
  std::uint32_t cycles_consumed = 0;

  bool ok() const { return outcome == Outcome::dtack; }
};

/// 16-bit word backing store the slave window maps onto (board registers,
/// DPRAM, or plain RAM in tests). A backing may throw std::out_of_range for
/// words it cannot serve (unmapped or direction-restricted registers);
/// slave_execute turns that into BERR.
class Backing {
 public:
  virtual ~Backing() = default;
  virtual std::uint16_t read_word(std::uint32_t word_index) = 0;
  virtual void write_word(std::uint32_t word_index, std::uint16_t value) = 0;
  virtual std::size_t words() const = 0;
};

class RamBacking final : public Backing {
 public:
  explicit RamBacking(std::size_t words) : words_(words, 0) {}
  std::uint16_t read_word(std::uint32_t i) override { return words_.at(i); }
  void write_word(std::uint32_t i, std::uint16_t v) override { words_.at(i) = v; }
  std::size_t words() const override { return words_.size(); }
  const std::vector<std::uint16_t>& raw() const { return words_; }

 private:
  std::vector<std::uint16_t> words_;
};

enum class IackWidth { d08, d16 };

struct PendingInterrupt {
  std::uint16_t status_id = 0;
  IackWidth width = IackWidth::d08;
};

struct SlaveState {
  std::uint32_t decoded_base = 0;
  std::uint32_t window_bytes = 0;
  Backing* backing = nullptr;
  std::optional<std::uint32_t> pipeline_reg;
  std::array<std::optional<PendingInterrupt>, 8> pending;  // levels 1..7
};

/// Execute one bus cycle against the slave. Never hangs: exactly one
/// DTACK/BERR outcome with bounded cycles_consumed.
BusResult slave_execute(SlaveState& state, const VmeTransaction& txn);

/// Post an interrupt. Throws std::invalid_argument on level outside 1..7, a
/// D08 status/id wider than 8 bits, or a second raise at a pending level.
void raise_interrupt(SlaveState& state, int level, std::uint16_t status_id,
                     IackWidth width);

/// Matching IACK returns the Status/ID (masked to the configured width) and
/// clears the pending flag; returns nullopt when nothing pends at the level.
std::optional<std::uint16_t> iack_cycle(SlaveState& state, int level);

// --------------------------------------------------------------------------
// Conformance scripts. Line-oriented text, all numbers hex (0x optional):
//   D16 W <addr> <word>            [EXPECT DTACK | EXPECT BERR]
//   D16 R <addr>                   [EXPECT DTACK <word> | EXPECT BERR]
//   D08 W <addr> <byte>            [EXPECT ...]
//   D08 R <addr>                   [EXPECT DTACK <byte> | EXPECT BERR]
//   BLT W <addr> <w0> <w1> ...     [EXPECT ...]
//   BLT R <addr> <count>           [EXPECT DTACK <w0> ... | EXPECT BERR]
//   RMW <addr> <and> <or>          [EXPECT DTACK <original> | EXPECT BERR]
//   ADO <addr>                     [EXPECT DTACK]
// '#' starts a comment.

struct Expectation {
  BusResult::Outcome outcome = BusResult::Outcome::dtack;
  std::optional<std::vector<std::uint16_t>> data;
};

struct ScriptStep {
  int line_no = 0;
  std::string text;
  VmeTransaction txn;
  std::optional<Expectation> expect;
};

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<ScriptStep> parse_script(std::istream& in);
std::vector<ScriptStep> parse_script_file(const std::string& path);

struct ConformanceEntry {
  int line_no = 0;
  std::string text;
  bool checked = false;  // had an EXPECT clause
  bool pass = true;
  std::string expected;
  std::string actual;
};

struct ConformanceReport {
  std::vector<ConformanceEntry> entries;
  std::size_t failures = 0;

  bool all_passed() const { return failures == 0; }
};

ConformanceReport run_conformance(SlaveState& state,
                                  const std::vector<ScriptStep>& script);

void write_report_csv(const ConformanceReport& report, std::ostream& out);

}  // namespace dspboard::vme
