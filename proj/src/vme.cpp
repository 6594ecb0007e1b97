#include "dspboard/vme.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dspboard::vme {

namespace {

constexpr std::uint32_t kBltBlockBytes = 256;

BusResult berr(std::string reason, std::uint32_t cycles) {
  BusResult r;
  r.outcome = BusResult::Outcome::berr;
  r.berr_reason = std::move(reason);
  r.cycles_consumed = cycles;
  return r;
}

BusResult execute_decoded(SlaveState& state, const VmeTransaction& txn);

}  // namespace

BusResult slave_execute(SlaveState& state, const VmeTransaction& txn) {
  if (!state.backing) throw std::logic_error("vme: slave has no backing store");
  try {
    return execute_decoded(state, txn);
  } catch (const std::out_of_range& e) {
    // The backing refused the access (unmapped or wrong-direction register).
    return berr(std::string("backing fault: ") + e.what(), 2);
  }
}

namespace {

BusResult execute_decoded(SlaveState& state, const VmeTransaction& txn) {

  // Address pipelining: a latched ADO address pays for the decode of the
  // next data cycle at that address. Consumed (or dropped) by any data cycle.
  std::uint32_t pipeline_credit = 0;
  if (txn.cycle != Cycle::ADO) {
    if (state.pipeline_reg && *state.pipeline_reg == txn.address)
      pipeline_credit = 1;
    state.pipeline_reg.reset();
  }

  const auto in_window = [&](std::uint32_t addr, std::uint32_t bytes) {
    return addr >= state.decoded_base &&
           addr + bytes <= state.decoded_base + state.window_bytes;
  };
  const auto word_index = [&](std::uint32_t addr) {
    return (addr - state.decoded_base) / 2;
  };

  switch (txn.cycle) {
    case Cycle::ADO: {
      // Latches the address, transfers nothing, never touches backing.
      if (!txn.data.empty())
        throw std::invalid_argument("vme: ADO carries no data");
      state.pipeline_reg = txn.address;
      BusResult r;
      r.cycles_consumed = 1;
      return r;
    }

    case Cycle::D16: {
      if (txn.address % 2 != 0) return berr("alignment: D16 at odd address", 1);
      if (!in_window(txn.address, 2)) return berr("unmapped address", 1);
      BusResult r;
      r.cycles_consumed = 2 - pipeline_credit;
      if (txn.dir == Dir::write) {
        if (txn.data.size() != 1)
          throw std::invalid_argument("vme: D16 write takes one word");
        state.backing->write_word(word_index(txn.address), txn.data[0]);
      } else {
        r.data.push_back(state.backing->read_word(word_index(txn.address)));
      }
      return r;
    }

    case Cycle::D08_EO: {
      if (!in_window(txn.address, 1)) return berr("unmapped address", 1);
      const std::uint32_t wi = word_index(txn.address);
      const bool even = txn.address % 2 == 0;
      const std::uint16_t word = state.backing->read_word(wi);
      BusResult r;
      r.cycles_consumed = 2 - pipeline_credit;
      if (txn.dir == Dir::write) {
        if (txn.data.size() != 1 || txn.data[0] > 0xFF)
          throw std::invalid_argument("vme: D08 write takes one byte");
        const std::uint16_t byte = txn.data[0];
        // Big-endian lanes: even byte address is the high half.
        const std::uint16_t updated =
            even ? static_cast<std::uint16_t>((word & 0x00FF) | (byte << 8))
                 : static_cast<std::uint16_t>((word & 0xFF00) | byte);
        state.backing->write_word(wi, updated);
      } else {
        r.data.push_back(even ? static_cast<std::uint16_t>(word >> 8)
                              : static_cast<std::uint16_t>(word & 0xFF));
      }
      return r;
    }

    case Cycle::BLT: {
      if (txn.address % 2 != 0) return berr("alignment: BLT at odd address", 1);
      const std::uint32_t count =
          txn.dir == Dir::write ? static_cast<std::uint32_t>(txn.data.size())
                                : txn.blt_count;
      if (count < 1) return berr("BLT length must be >= 1", 1);
      const std::uint32_t bytes = 2 * count;
      if (txn.address / kBltBlockBytes !=
          (txn.address + bytes - 1) / kBltBlockBytes)
        return berr("BLT crosses 256-byte block boundary", 1);
      if (!in_window(txn.address, bytes)) return berr("unmapped address", 1);
      BusResult r;
      r.cycles_consumed = 1 + count - pipeline_credit;
      const std::uint32_t wi = word_index(txn.address);
      if (txn.dir == Dir::write) {
        for (std::uint32_t i = 0; i < count; ++i)
          state.backing->write_word(wi + i, txn.data[i]);
      } else {
        for (std::uint32_t i = 0; i < count; ++i)
          r.data.push_back(state.backing->read_word(wi + i));
      }
      return r;
    }

    case Cycle::RMW: {
      if (txn.address % 2 != 0) return berr("alignment: RMW at odd address", 1);
      if (!in_window(txn.address, 2)) return berr("unmapped address", 1);
      if (!txn.rmw) throw std::invalid_argument("vme: RMW needs masks");
      const std::uint32_t wi = word_index(txn.address);
      const std::uint16_t original = state.backing->read_word(wi);
      state.backing->write_word(
          wi, static_cast<std::uint16_t>((original & txn.rmw->and_mask) |
                                         txn.rmw->or_mask));
      BusResult r;
      r.cycles_consumed = 3 - pipeline_credit;
      r.data.push_back(original);
      return r;
    }
  }
  return berr("unknown cycle", 1);
}

}  // namespace

void raise_interrupt(SlaveState& state, int level, std::uint16_t status_id,
                     IackWidth width) {
  if (level < 1 || level > 7)
    throw std::invalid_argument("vme: interrupt level must be 1..7");
  if (width == IackWidth::d08 && status_id > 0xFF)
    throw std::invalid_argument("vme: D08 status/id exceeds 8 bits");
  auto& slot = state.pending[static_cast<std::size_t>(level)];
  if (slot)
    throw std::invalid_argument("vme: interrupt already pending at level " +
                                std::to_string(level));
  slot = PendingInterrupt{status_id, width};
}

std::optional<std::uint16_t> iack_cycle(SlaveState& state, int level) {
  if (level < 1 || level > 7)
    throw std::invalid_argument("vme: interrupt level must be 1..7");
  auto& slot = state.pending[static_cast<std::size_t>(level)];
  if (!slot) return std::nullopt;
  const std::uint16_t id = slot->width == IackWidth::d08
                               ? static_cast<std::uint16_t>(slot->status_id & 0xFF)
                               : slot->status_id;
  slot.reset();
  return id;
}

// ---------------------------------------------------------------------------
// Script parsing

namespace {

[[noreturn]] void parse_fail(int line_no, const std::string& msg) {
  throw ScriptError("script line " + std::to_string(line_no) + ": " + msg);
}

std::uint32_t parse_hex(const std::string& tok, int line_no) {
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(tok, &used, 16);
    if (used != tok.size()) parse_fail(line_no, "bad number '" + tok + "'");
    return static_cast<std::uint32_t>(v);
  } catch (const ScriptError&) {
    throw;
  } catch (const std::exception&) {
    parse_fail(line_no, "bad number '" + tok + "'");
  }
}

}  // namespace

std::vector<ScriptStep> parse_script(std::istream& in) {
  std::vector<ScriptStep> script;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    std::string body = hash == std::string::npos ? line : line.substr(0, hash);
    std::istringstream ls(body);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    ScriptStep step;
    step.line_no = line_no;
    step.text = body;

    // Split off the EXPECT clause first.
    std::optional<Expectation> expect;
    for (std::size_t i = 0; i < tok.size(); ++i) {
      if (tok[i] == "EXPECT") {
        if (i + 1 >= tok.size()) parse_fail(line_no, "EXPECT needs DTACK/BERR");
        Expectation e;
        if (tok[i + 1] == "DTACK") {
          e.outcome = BusResult::Outcome::dtack;
          if (i + 2 < tok.size()) {
            std::vector<std::uint16_t> words;
            for (std::size_t j = i + 2; j < tok.size(); ++j)
              words.push_back(static_cast<std::uint16_t>(parse_hex(tok[j], line_no)));
            e.data = std::move(words);
          }
        } else if (tok[i + 1] == "BERR") {
          e.outcome = BusResult::Outcome::berr;
        } else {
          parse_fail(line_no, "EXPECT needs DTACK/BERR");
        }
        expect = std::move(e);
        tok.resize(i);
        break;
      }
    }
    if (tok.empty()) parse_fail(line_no, "missing cycle");
    step.expect = std::move(expect);

    const std::string& cyc = tok[0];
    const auto need = [&](std::size_t n, const char* what) {
      if (tok.size() < n) parse_fail(line_no, std::string("missing ") + what);
    };

    if (cyc == "ADO") {
      need(2, "address");
      step.txn.cycle = Cycle::ADO;
      step.txn.address = parse_hex(tok[1], line_no);
      if (tok.size() > 2) parse_fail(line_no, "ADO carries no data");
    } else if (cyc == "RMW") {
      need(4, "address/and/or");
      step.txn.cycle = Cycle::RMW;
      step.txn.dir = Dir::read;
      step.txn.address = parse_hex(tok[1], line_no);
      step.txn.rmw = RmwMasks{static_cast<std::uint16_t>(parse_hex(tok[2], line_no)),
                              static_cast<std::uint16_t>(parse_hex(tok[3], line_no))};
      if (tok.size() > 4) parse_fail(line_no, "RMW takes address, AND, OR");
    } else if (cyc == "D16" || cyc == "D08" || cyc == "BLT") {
      need(3, "direction/address");
      step.txn.cycle = cyc == "D16" ? Cycle::D16
                       : cyc == "D08" ? Cycle::D08_EO
                                      : Cycle::BLT;
      if (tok[1] == "R") step.txn.dir = Dir::read;
      else if (tok[1] == "W") step.txn.dir = Dir::write;
      else parse_fail(line_no, "direction must be R or W");
      step.txn.address = parse_hex(tok[2], line_no);
      if (step.txn.dir == Dir::write) {
        if (tok.size() < 4) parse_fail(line_no, "write needs data");
        for (std::size_t i = 3; i < tok.size(); ++i)
          step.txn.data.push_back(static_cast<std::uint16_t>(parse_hex(tok[i], line_no)));
        if (step.txn.cycle != Cycle::BLT && step.txn.data.size() != 1)
          parse_fail(line_no, "single-word cycle takes one datum");
        if (step.txn.cycle == Cycle::D08_EO && step.txn.data[0] > 0xFF)
          parse_fail(line_no, "D08 datum exceeds one byte");
      } else if (step.txn.cycle == Cycle::BLT) {
        need(4, "BLT read count");
        step.txn.blt_count = parse_hex(tok[3], line_no);
        if (tok.size() > 4) parse_fail(line_no, "BLT read takes address and count");
      } else if (tok.size() > 3) {
        parse_fail(line_no, "read takes only an address");
      }
    } else {
      parse_fail(line_no, "unknown cycle '" + cyc + "'");
    }
    script.push_back(std::move(step));
  }
  return script;
}

std::vector<ScriptStep> parse_script_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ScriptError("cannot open script " + path);
  return parse_script(f);
}

namespace {

std::string describe_outcome(BusResult::Outcome o,
                             const std::vector<std::uint16_t>* data) {
  std::string s = o == BusResult::Outcome::dtack ? "DTACK" : "BERR";
  if (data) {
    char buf[16];
    for (const std::uint16_t w : *data) {
      std::snprintf(buf, sizeof buf, " 0x%04X", w);
      s += buf;
    }
  }
  return s;
}

}  // namespace

ConformanceReport run_conformance(SlaveState& state,
                                  const std::vector<ScriptStep>& script) {
  ConformanceReport report;
  for (const ScriptStep& step : script) {
    const BusResult result = slave_execute(state, step.txn);
    ConformanceEntry entry;
    entry.line_no = step.line_no;
    entry.text = step.text;
    entry.actual = describe_outcome(result.outcome, &result.data);
    if (step.expect) {
      entry.checked = true;
      const Expectation& e = *step.expect;
      entry.expected = describe_outcome(
          e.outcome, e.data ? &*e.data : nullptr);
      entry.pass = result.outcome == e.outcome &&
                   (!e.data || *e.data == result.data);
      if (!entry.pass) ++report.failures;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

void write_report_csv(const ConformanceReport& report, std::ostream& out) {
  out << "line,checked,pass,expected,actual,script\n";
  for (const ConformanceEntry& e : report.entries) {
    out << e.line_no << ',' << (e.checked ? 1 : 0) << ',' << (e.pass ? 1 : 0)
        << ",\"" << e.expected << "\",\"" << e.actual << "\",\"" << e.text
        << "\"\n";
  }
}

}  // namespace dspboard::vme
