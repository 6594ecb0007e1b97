#include "dspboard/dualcore.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "dspboard/kernels.hpp"

namespace dspboard::dualcore {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("dualcore: " + msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// DualPortMemory

std::uint16_t DualPortMemory::read(Port port, std::uint32_t address) {
  if (address >= kWords) fail("dpram read address out of range");
  const std::uint16_t v = words_[address];
  if (logging_) log_.push_back({step_, port, MemOp::read, static_cast<std::uint16_t>(address), v});
  return v;
}

void DualPortMemory::write(Port port, std::uint32_t address, std::uint16_t value) {
  if (address >= kWords) fail("dpram write address out of range");
  for (const auto& [addr, p] : step_writes_) {
    if (addr == address && p != port) {
      HazardEvent h;
      h.step = step_;
      h.address = static_cast<std::uint16_t>(address);
      h.value_a = port == Port::A ? value : words_[address];
      h.value_b = port == Port::B ? value : words_[address];
      hazards_.push_back(h);
      break;
    }
  }
  step_writes_.emplace_back(address, port);
  words_[address] = value;
  if (logging_) log_.push_back({step_, port, MemOp::write, static_cast<std::uint16_t>(address), value});
}

void DualPortMemory::advance_step() {
  ++step_;
  step_writes_.clear();
}

void write_access_log_csv(const std::vector<AccessRecord>& log,
                          std::ostream& out) {
  out << "step,port,op,address,value\n";
  char buf[80];
  for (const AccessRecord& r : log) {
    std::snprintf(buf, sizeof buf, "%llu,%c,%c,0x%04X,0x%04X\n",
                  static_cast<unsigned long long>(r.step),
                  r.port == Port::A ? 'A' : 'B',
                  r.op == MemOp::read ? 'R' : 'W', r.address, r.value);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Wire encodings

std::array<std::uint16_t, 2> encode_f32(double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  return {static_cast<std::uint16_t>(bits & 0xFFFF),
          static_cast<std::uint16_t>(bits >> 16)};
}

double decode_f32(std::uint16_t lo, std::uint16_t hi) {
  const std::uint32_t bits =
      static_cast<std::uint32_t>(lo) | (static_cast<std::uint32_t>(hi) << 16);
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::array<std::uint16_t, 4> encode_f64(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  return {static_cast<std::uint16_t>(bits & 0xFFFF),
          static_cast<std::uint16_t>((bits >> 16) & 0xFFFF),
          static_cast<std::uint16_t>((bits >> 32) & 0xFFFF),
          static_cast<std::uint16_t>((bits >> 48) & 0xFFFF)};
}

double decode_f64(const std::array<std::uint16_t, 4>& words) {
  std::uint64_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 16) | words[static_cast<std::size_t>(i)];
  return std::bit_cast<double>(bits);
}

double f32_roundtrip(double v) { return static_cast<double>(static_cast<float>(v)); }

// ---------------------------------------------------------------------------
// SharedLayout

void SharedLayout::validate() const {
  struct Region {
    std::uint32_t base;
    std::uint32_t size;
    const char* name;
  };
  const Region regions[] = {
      {coeff_base, static_cast<std::uint32_t>(coeff_words()), "coeff"},
      {data_base, static_cast<std::uint32_t>(data_words()), "data"},
      {flag_data_ready, 1, "flag_data_ready"},
      {flag_data_ack, 1, "flag_data_ack"},
      {flag_coeff_ready, 1, "flag_coeff_ready"},
      {flag_coeff_ack, 1, "flag_coeff_ack"},
      {seqno, 1, "seqno"},
  };
  if (coeff_count < 1) fail("layout: coeff_count must be >= 1");
  if (block_len < 1) fail("layout: block_len must be >= 1");
  for (const Region& r : regions) {
    if (r.base + r.size > DualPortMemory::kWords)
      fail(std::string("layout: region ") + r.name + " overflows the 64K space");
  }
  for (std::size_t i = 0; i < std::size(regions); ++i) {
    for (std::size_t j = i + 1; j < std::size(regions); ++j) {
      const Region &a = regions[i], &b = regions[j];
      if (a.base < b.base + b.size && b.base < a.base + a.size)
        fail(std::string("layout: regions ") + a.name + " and " + b.name + " overlap");
    }
  }
}

SharedLayout SharedLayout::defaults(std::uint16_t coeff_count,
                                    std::uint16_t block_len) {
  SharedLayout l;
  l.coeff_count = coeff_count;
  l.block_len = block_len;
  l.validate();
  return l;
}

SharedLayout SharedLayout::parse(std::istream& in) {
  SharedLayout l;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key, eq, value;
    if (!(ls >> key)) continue;
    if (!(ls >> eq >> value) || eq != "=")
      fail("layout: line " + std::to_string(line_no) + ": expected 'key = value'");
    const unsigned long v = std::stoul(value, nullptr, 0);
    if (v > 0xFFFF) fail("layout: line " + std::to_string(line_no) + ": value exceeds 16 bits");
    const auto u16 = static_cast<std::uint16_t>(v);
    if (key == "coeff_base") l.coeff_base = u16;
    else if (key == "coeff_count") l.coeff_count = u16;
    else if (key == "data_base") l.data_base = u16;
    else if (key == "block_len") l.block_len = u16;
    else if (key == "flag_data_ready") l.flag_data_ready = u16;
    else if (key == "flag_data_ack") l.flag_data_ack = u16;
    else if (key == "flag_coeff_ready") l.flag_coeff_ready = u16;
    else if (key == "flag_coeff_ack") l.flag_coeff_ack = u16;
    else if (key == "seqno") l.seqno = u16;
    else fail("layout: line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  l.validate();
  return l;
}

std::string SharedLayout::format() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "coeff_base = 0x%04X\n"
                "coeff_count = 0x%04X\n"
                "data_base = 0x%04X\n"
                "block_len = 0x%04X\n"
                "flag_data_ready = 0x%04X\n"
                "flag_data_ack = 0x%04X\n"
                "flag_coeff_ready = 0x%04X\n"
                "flag_coeff_ack = 0x%04X\n"
                "seqno = 0x%04X\n",
                coeff_base, coeff_count, data_base, block_len, flag_data_ready,
                flag_data_ack, flag_coeff_ready, flag_coeff_ack, seqno);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared per-block arithmetic. Both the pipeline workers and the serial
// reference call these, which is what makes bit-equality structural.

namespace {

// Regressor for global sample k over stream `x`: x[k-delay-i], zero-padded.
void build_window(const std::vector<double>& x, std::size_t k,
                  std::size_t delay, std::vector<double>& reg) {
  const std::size_t taps = reg.size();
  for (std::size_t i = 0; i < taps; ++i) {
    const auto idx = static_cast<std::ptrdiff_t>(k) -
                     static_cast<std::ptrdiff_t>(delay) -
                     static_cast<std::ptrdiff_t>(i);
    reg[i] = idx >= 0 ? x[static_cast<std::size_t>(idx)] : 0.0;
  }
}

// Filter `len` samples starting at global index `start` with fixed coeffs.
void filter_block(const std::vector<double>& x, const std::vector<double>& d,
                  std::size_t start, std::size_t len,
                  const std::vector<double>& coeffs, std::size_t delay,
                  std::vector<double>& reg, double* y_out, double* e_out) {
  for (std::size_t j = 0; j < len; ++j) {
    const std::size_t k = start + j;
    build_window(x, k, delay, reg);
    const double y = kernels::dot(coeffs, reg);
    y_out[j] = y;
    e_out[j] = d[k] - y;
  }
}

// Sequential LMS pass over one block, given the wire-precision errors and the
// wire-precision input history.
void absorb_block(std::vector<double>& master, const std::vector<double>& hist,
                  std::size_t start, std::size_t len, const double* e_wire,
                  const adaptive::LmsConfig& lms, std::size_t delay,
                  std::vector<double>& reg) {
  for (std::size_t j = 0; j < len; ++j) {
    build_window(hist, start + j, delay, reg);
    const double mu_eff =
        lms.normalized ? lms.mu / (lms.eps + kernels::sum_squares(reg)) : lms.mu;
    kernels::weight_update(master, reg, 2.0 * mu_eff * e_wire[j], lms.leakage);
  }
}

struct TopologyView {
  const adaptive::LmsConfig* lms = nullptr;
  std::size_t delay = 0;
  bool predictor = false;
};

TopologyView view_topology(const PipelineConfig& cfg) {
  TopologyView v;
  if (const auto* p = std::get_if<adaptive::PredictorConfig>(&cfg.topology)) {
    v.lms = &p->lms;
    v.delay = p->delay;
    v.predictor = true;
    if (p->delay < 1) fail("predictor delay must be >= 1");
  } else {
    v.lms = &std::get<adaptive::LmsConfig>(cfg.topology);
  }
  if (v.lms->num_taps < 1) fail("num_taps must be >= 1");
  return v;
}

std::vector<double> initial_master(const PipelineConfig& cfg,
                                   std::size_t num_taps) {
  if (!cfg.initial.a.empty()) fail("pipeline coefficients are FIR-only");
  if (cfg.initial.b.empty()) return std::vector<double>(num_taps, 0.0);
  if (cfg.initial.b.size() != num_taps)
    fail("initial coefficients do not match num_taps");
  return cfg.initial.b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Agents and scheduler

std::uint64_t run_agents(const std::vector<Agent*>& agents,
                         DualPortMemory& mem, const Schedule& schedule,
                         std::uint64_t max_idle_rounds) {
  std::mt19937_64 rng(schedule.seed);
  std::uint64_t rounds = 0;
  std::uint64_t idle = 0;
  std::size_t rr = 0;

  const auto all_done = [&] {
    for (const Agent* a : agents)
      if (!a->done()) return false;
    return true;
  };

  while (!all_done()) {
    // pick a not-yet-finished agent
    Agent* pick = nullptr;
    if (schedule.policy == SchedulePolicy::round_robin) {
      for (std::size_t tries = 0; tries < agents.size(); ++tries) {
        Agent* a = agents[rr % agents.size()];
        ++rr;
        if (!a->done()) {
          pick = a;
          break;
        }
      }
    } else {
      std::vector<Agent*> active;
      for (Agent* a : agents)
        if (!a->done()) active.push_back(a);
      pick = active[rng() % active.size()];
    }

    mem.advance_step();
    ++rounds;
    if (pick->step()) {
      idle = 0;
    } else if (++idle > max_idle_rounds) {
      std::string who;
      for (const Agent* a : agents)
        if (!a->done()) who += (who.empty() ? "" : ", ") + a->describe();
      throw HandshakeTimeout("dualcore: no progress for " +
                             std::to_string(idle) + " rounds; waiting: " + who);
    }
  }
  return rounds;
}

namespace {

// Mailbox helpers; counters are 16-bit and wrap, so only equality tests are
// used.

struct MailboxWriter {
  DualPortMemory* mem;
  Port port;
  std::uint16_t seq_addr, ack_addr;
  std::uint16_t seq = 0;

  bool slot_free() { return mem->read(port, ack_addr) == seq; }
  void commit() { mem->write(port, seq_addr, ++seq); }
};

struct MailboxReader {
  DualPortMemory* mem;
  Port port;
  std::uint16_t seq_addr, ack_addr;
  std::uint16_t ack = 0;

  bool has_data() { return mem->read(port, seq_addr) != ack; }
  void consume() { mem->write(port, ack_addr, ++ack); }
};

// Worker F: filters each block with the latched coefficient epoch, records
// y/e in full precision, forwards the block's x/e to worker L as binary32.
class FilterWorker final : public Agent {
 public:
  FilterWorker(DualPortMemory& mem, Port port, const SharedLayout& layout,
               const std::vector<double>& x, const std::vector<double>& d,
               std::size_t num_taps, std::size_t delay, double* y_out,
               double* e_out)
      : mem_(&mem),
        port_(port),
        layout_(layout),
        x_(x),
        d_(d),
        y_out_(y_out),
        e_out_(e_out),
        delay_(delay),
        latched_(num_taps, 0.0),
        reg_(num_taps, 0.0),
        coeff_in_{&mem, port, layout.flag_coeff_ready, layout.flag_coeff_ack},
        data_out_{&mem, port, layout.flag_data_ready, layout.flag_data_ack} {}

  bool step() override {
    switch (st_) {
      case St::check_input:
        if (pos_ >= x_.size()) {
          st_ = St::publish_end;
        } else {
          const std::size_t need = block_index_ <= 1 ? 0 : block_index_ - 1;
          st_ = (static_cast<std::ptrdiff_t>(need) > last_epoch_) ? St::latch_coeff
                                                                  : St::filter;
        }
        return true;
      case St::latch_coeff: {
        if (!coeff_in_.has_data()) return false;
        for (std::size_t i = 0; i < latched_.size(); ++i) {
          const std::uint16_t lo = mem_->read(port_, layout_.coeff_base + 2 * i);
          const std::uint16_t hi = mem_->read(port_, layout_.coeff_base + 2 * i + 1);
          latched_[i] = decode_f32(lo, hi);
        }
        coeff_in_.consume();
        ++last_epoch_;
        st_ = St::filter;
        return true;
      }
      case St::filter: {
        len_ = std::min<std::size_t>(layout_.block_len, x_.size() - pos_);
        filter_block(x_, d_, pos_, len_, latched_, delay_, reg_, y_out_ + pos_,
                     e_out_ + pos_);
        st_ = St::wait_slot;
        return true;
      }
      case St::wait_slot:
        if (!data_out_.slot_free()) return false;
        st_ = St::publish_data;
        return true;
      case St::publish_data: {
        std::uint32_t addr = layout_.data_base;
        mem_->write(port_, addr++, static_cast<std::uint16_t>(len_));
        for (std::size_t j = 0; j < len_; ++j) {
          const auto w = encode_f32(x_[pos_ + j]);
          mem_->write(port_, addr++, w[0]);
          mem_->write(port_, addr++, w[1]);
        }
        for (std::size_t j = 0; j < len_; ++j) {
          const auto w = encode_f32(e_out_[pos_ + j]);
          mem_->write(port_, addr++, w[0]);
          mem_->write(port_, addr++, w[1]);
        }
        data_out_.commit();
        pos_ += len_;
        ++block_index_;
        st_ = St::check_input;
        return true;
      }
      case St::publish_end:
        if (!data_out_.slot_free()) return false;
        mem_->write(port_, layout_.data_base, 0);
        data_out_.commit();
        st_ = St::finished;
        return true;
      case St::finished:
        return false;
    }
    return false;
  }

  bool done() const override { return st_ == St::finished; }
  std::string describe() const override { return "filter worker"; }

 private:
  enum class St {
    check_input,
    latch_coeff,
    filter,
    wait_slot,
    publish_data,
    publish_end,
    finished
  };

  DualPortMemory* mem_;
  Port port_;
  SharedLayout layout_;
  const std::vector<double>& x_;
  const std::vector<double>& d_;
  double* y_out_;
  double* e_out_;
  std::size_t delay_;
  std::vector<double> latched_;
  std::vector<double> reg_;
  MailboxReader coeff_in_;
  MailboxWriter data_out_;
  St st_ = St::check_input;
  std::size_t pos_ = 0;
  std::size_t len_ = 0;
  std::size_t block_index_ = 0;
  std::ptrdiff_t last_epoch_ = -1;
};

// Worker L: owns the master coefficient set (double), absorbs each block's
// wire data, publishes binary32 epochs.
class LmsWorker final : public Agent {
 public:
  LmsWorker(DualPortMemory& mem, Port port, const SharedLayout& layout,
            const adaptive::LmsConfig& lms, std::size_t delay,
            std::vector<double> initial, std::size_t snapshot_stride,
            std::vector<adaptive::FilterCoefficients>* trajectory)
      : mem_(&mem),
        port_(port),
        layout_(layout),
        lms_(lms),
        delay_(delay),
        master_(std::move(initial)),
        reg_(master_.size(), 0.0),
        snapshot_stride_(snapshot_stride),
        trajectory_(trajectory),
        coeff_out_{&mem, port, layout.flag_coeff_ready, layout.flag_coeff_ack},
        data_in_{&mem, port, layout.flag_data_ready, layout.flag_data_ack} {}

  const std::vector<double>& master() const { return master_; }

  bool step() override {
    switch (st_) {
      case St::publish_init:
        if (!coeff_out_.slot_free()) return false;
        publish_epoch(0);
        st_ = St::wait_data;
        return true;
      case St::wait_data:
        if (!data_in_.has_data()) return false;
        st_ = St::read_data;
        return true;
      case St::read_data: {
        std::uint32_t addr = layout_.data_base;
        const std::uint16_t len = mem_->read(port_, addr++);
        if (len == 0) {
          data_in_.consume();
          st_ = St::finished;
          return true;
        }
        len_ = len;
        block_start_ = hist_.size();
        for (std::size_t j = 0; j < len_; ++j) {
          const std::uint16_t lo = mem_->read(port_, addr++);
          const std::uint16_t hi = mem_->read(port_, addr++);
          hist_.push_back(decode_f32(lo, hi));
        }
        e_wire_.resize(len_);
        for (std::size_t j = 0; j < len_; ++j) {
          const std::uint16_t lo = mem_->read(port_, addr++);
          const std::uint16_t hi = mem_->read(port_, addr++);
          e_wire_[j] = decode_f32(lo, hi);
        }
        data_in_.consume();
        st_ = wave_ >= 1 ? St::maybe_publish : St::absorb;
        return true;
      }
      case St::maybe_publish:
        if (!coeff_out_.slot_free()) return false;
        publish_epoch(wave_);
        st_ = St::absorb;
        return true;
      case St::absorb:
        absorb_block(master_, hist_, block_start_, len_, e_wire_.data(), lms_,
                     delay_, reg_);
        ++wave_;
        mem_->write(port_, layout_.seqno, static_cast<std::uint16_t>(wave_));
        st_ = St::wait_data;
        return true;
      case St::finished:
        return false;
    }
    return false;
  }

  bool done() const override { return st_ == St::finished; }
  std::string describe() const override { return "lms worker"; }

 private:
  enum class St {
    publish_init,
    wait_data,
    read_data,
    maybe_publish,
    absorb,
    finished
  };

  void publish_epoch(std::size_t epoch) {
    std::vector<double> published(master_.size());
    for (std::size_t i = 0; i < master_.size(); ++i) {
      const auto w = encode_f32(master_[i]);
      mem_->write(port_, layout_.coeff_base + 2 * i, w[0]);
      mem_->write(port_, layout_.coeff_base + 2 * i + 1, w[1]);
      published[i] = decode_f32(w[0], w[1]);
    }
    coeff_out_.commit();
    if (trajectory_ && snapshot_stride_ > 0 && epoch % snapshot_stride_ == 0)
      trajectory_->push_back({std::move(published), {}});
  }

  DualPortMemory* mem_;
  Port port_;
  SharedLayout layout_;
  adaptive::LmsConfig lms_;
  std::size_t delay_;
  std::vector<double> master_;
  std::vector<double> reg_;
  std::size_t snapshot_stride_;
  std::vector<adaptive::FilterCoefficients>* trajectory_;
  MailboxWriter coeff_out_;
  MailboxReader data_in_;
  St st_ = St::publish_init;
  std::vector<double> hist_;    // wire-precision x history
  std::vector<double> e_wire_;  // current block's wire errors
  std::size_t block_start_ = 0;
  std::size_t len_ = 0;
  std::size_t wave_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Pipeline entry points

adaptive::AdaptiveRun run_dual_pipeline(const signal::SampleStream& input,
                                        const signal::SampleStream* desired,
                                        const PipelineConfig& cfg,
                                        const SharedLayout& layout,
                                        PipelineTrace* trace) {
  layout.validate();
  const TopologyView topo = view_topology(cfg);
  if (topo.predictor) {
    if (desired) fail("predictor topology takes no desired stream");
  } else {
    if (!desired) fail("identification topology requires a desired stream");
    if (desired->size() != input.size()) fail("input/desired length mismatch");
    if (desired->rate_hz != input.rate_hz) fail("input/desired rate mismatch");
  }
  if (cfg.block_len < 1) fail("block_len must be >= 1");
  if (layout.block_len != cfg.block_len)
    fail("layout block_len differs from pipeline block_len");
  if (layout.coeff_count != topo.lms->num_taps)
    fail("layout coeff_count differs from num_taps");

  const std::vector<double>& d_stream =
      topo.predictor ? input.samples : desired->samples;

  adaptive::AdaptiveRun run;
  run.y.rate_hz = input.rate_hz;
  run.e.rate_hz = input.rate_hz;
  run.y.samples.resize(input.size());
  run.e.samples.resize(input.size());
  run.snapshot_stride = topo.lms->snapshot_stride;

  DualPortMemory mem;
  mem.enable_log(cfg.enable_access_log);

  const Port f_port = cfg.role == RoleAssignment::filter_on_a ? Port::A : Port::B;
  const Port l_port = f_port == Port::A ? Port::B : Port::A;

  FilterWorker filter(mem, f_port, layout, input.samples, d_stream,
                      topo.lms->num_taps, topo.delay, run.y.samples.data(),
                      run.e.samples.data());
  LmsWorker lms(mem, l_port, layout, *topo.lms, topo.delay,
                initial_master(cfg, topo.lms->num_taps),
                topo.lms->snapshot_stride, &run.coeff_trajectory);

  const std::uint64_t rounds =
      run_agents({&filter, &lms}, mem, cfg.schedule, cfg.max_idle_rounds);

  if (cfg.strict_hazards && !mem.hazards().empty())
    throw HazardError("dualcore: " + std::to_string(mem.hazards().size()) +
                      " write/write hazard(s) detected");

  run.final.b = lms.master();
  if (trace) {
    trace->access_log = mem.access_log();
    trace->hazards = mem.hazards();
    trace->rounds = rounds;
  }
  return run;
}

adaptive::AdaptiveRun run_serial_delayed(const signal::SampleStream& input,
                                         const signal::SampleStream* desired,
                                         const PipelineConfig& cfg) {
  const TopologyView topo = view_topology(cfg);
  if (topo.predictor) {
    if (desired) fail("predictor topology takes no desired stream");
  } else {
    if (!desired) fail("identification topology requires a desired stream");
    if (desired->size() != input.size()) fail("input/desired length mismatch");
    if (desired->rate_hz != input.rate_hz) fail("input/desired rate mismatch");
  }
  if (cfg.block_len < 1) fail("block_len must be >= 1");

  const std::vector<double>& x = input.samples;
  const std::vector<double>& d = topo.predictor ? input.samples : desired->samples;
  const std::size_t taps = topo.lms->num_taps;
  const std::size_t n = x.size();
  const std::size_t stride = topo.lms->snapshot_stride;

  adaptive::AdaptiveRun run;
  run.y.rate_hz = input.rate_hz;
  run.e.rate_hz = input.rate_hz;
  run.y.samples.resize(n);
  run.e.samples.resize(n);
  run.snapshot_stride = stride;

  std::vector<double> master = initial_master(cfg, taps);
  std::vector<double> reg(taps, 0.0);
  std::vector<double> hist;  // wire-precision x
  hist.reserve(n);
  std::vector<double> e_wire(cfg.block_len, 0.0);

  const auto publish = [&](std::size_t epoch) {
    std::vector<double> p(taps);
    for (std::size_t i = 0; i < taps; ++i) p[i] = f32_roundtrip(master[i]);
    if (stride > 0 && epoch % stride == 0)
      run.coeff_trajectory.push_back({p, {}});
    return p;
  };

  std::vector<double> latched = publish(0);  // epoch 0
  std::optional<std::vector<double>> pending;

  std::size_t block_index = 0;
  for (std::size_t pos = 0; pos < n; pos += cfg.block_len, ++block_index) {
    const std::size_t len = std::min<std::size_t>(cfg.block_len, n - pos);
    if (block_index >= 2) {
      latched = std::move(*pending);
      pending.reset();
    }
    filter_block(x, d, pos, len, latched, topo.delay, reg,
                 run.y.samples.data() + pos, run.e.samples.data() + pos);
    for (std::size_t j = 0; j < len; ++j) {
      hist.push_back(f32_roundtrip(x[pos + j]));
      e_wire[j] = f32_roundtrip(run.e.samples[pos + j]);
    }
    if (block_index >= 1) pending = publish(block_index);
    absorb_block(master, hist, pos, len, e_wire.data(), *topo.lms, topo.delay,
                 reg);
  }

  run.final.b = std::move(master);
  return run;
}

// ---------------------------------------------------------------------------
// Access-log audit

std::vector<std::string> audit_mailbox_order(
    const std::vector<AccessRecord>& log, const SharedLayout& layout) {
  struct Box {
    const char* name;
    std::uint16_t seq_addr, ack_addr;
    std::uint32_t payload_base;
    std::uint32_t payload_words;
    std::optional<Port> writer;
    std::uint16_t seq = 0, ack = 0;
  };
  Box boxes[2] = {
      {"data", layout.flag_data_ready, layout.flag_data_ack, layout.data_base,
       static_cast<std::uint32_t>(layout.data_words()), {}, 0, 0},
      {"coeff", layout.flag_coeff_ready, layout.flag_coeff_ack,
       layout.coeff_base, static_cast<std::uint32_t>(layout.coeff_words()), {},
       0, 0},
  };

  std::vector<std::string> issues;
  char buf[160];
  for (const AccessRecord& r : log) {
    for (Box& b : boxes) {
      const bool in_payload =
          r.address >= b.payload_base && r.address < b.payload_base + b.payload_words;
      if (r.op == MemOp::write) {
        if (r.address == b.seq_addr) {
          b.writer = r.port;
          b.seq = r.value;
        } else if (r.address == b.ack_addr) {
          b.ack = r.value;
        } else if (in_payload && b.writer && r.port == *b.writer &&
                   b.seq != b.ack) {
          std::snprintf(buf, sizeof buf,
                        "step %llu: %s payload 0x%04X overwritten while unconsumed",
                        static_cast<unsigned long long>(r.step), b.name, r.address);
          issues.emplace_back(buf);
        }
      } else if (in_payload) {
        const bool consumer = !b.writer || r.port != *b.writer;
        if (consumer && b.seq == b.ack) {
          std::snprintf(buf, sizeof buf,
                        "step %llu: %s payload 0x%04X read before flag set",
                        static_cast<unsigned long long>(r.step), b.name, r.address);
          issues.emplace_back(buf);
        }
      }
    }
  }
  return issues;
}

// ---------------------------------------------------------------------------
// MAC budget

MacBudget mac_budget(std::size_t num_taps, FilterKind kind,
                     double sample_rate_hz, std::size_t na) {
  if (num_taps < 1) fail("mac_budget: num_taps must be >= 1");
  if (!(sample_rate_hz > 0.0)) fail("mac_budget: rate must be positive");
  if (kind == FilterKind::fir && na != 0) fail("mac_budget: FIR takes na = 0");

  MacBudget b;
  b.macs_per_sample = 2 * (num_taps + na);
  b.sample_rate_hz = sample_rate_hz;
  b.macs_per_second = static_cast<double>(b.macs_per_sample) * sample_rate_hz;
  b.utilization = b.macs_per_second / b.budget_macs_per_second;
  b.over_budget = b.utilization > 1.0;
  return b;
}

std::string format_budget(const MacBudget& b) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "macs per sample : %zu\n"
                "sample rate     : %.6g S/s\n"
                "macs per second : %.6g\n"
                "budget          : %.6g MACs/s\n"
                "utilization     : %.6g%s\n",
                b.macs_per_sample, b.sample_rate_hz, b.macs_per_second,
                b.budget_macs_per_second, b.utilization,
                b.over_budget ? "  ** OVER BUDGET **" : "");
  return buf;
}

}  // namespace dspboard::dualcore
