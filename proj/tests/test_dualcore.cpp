#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "dspboard/dualcore.hpp"
#include "dspboard/kernels.hpp"
#include "dspboard/signal.hpp"
#include "support/ref_lms.hpp"

using namespace dspboard;
using dualcore::DualPortMemory;
using dualcore::PipelineConfig;
using dualcore::Port;
using dualcore::SharedLayout;
using signal::SampleStream;

namespace {

SampleStream white(double sigma, std::uint64_t seed, std::size_t n,
                   double rate = 10000.0) {
  signal::SignalSpec spec{static_cast<double>(n) / rate, rate,
                          {signal::WhiteNoise{sigma, seed}}};
  return signal::synthesize(spec);
}

SampleStream convolve(const SampleStream& x, const std::vector<double>& h) {
  SampleStream d;
  d.rate_hz = x.rate_hz;
  d.samples.assign(x.size(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k)
    for (std::size_t i = 0; i < h.size() && i <= k; ++i)
      d.samples[k] += h[i] * x.samples[k - i];
  return d;
}

PipelineConfig ident_cfg(std::size_t taps, double mu, std::uint16_t block_len) {
  PipelineConfig cfg;
  adaptive::LmsConfig lms;
  lms.mu = mu;
  lms.num_taps = taps;
  lms.snapshot_stride = 0;
  cfg.topology = lms;
  cfg.block_len = block_len;
  return cfg;
}

PipelineConfig predictor_cfg(std::size_t taps, double mu, std::uint16_t block_len,
                             std::size_t delay = 1, bool normalized = true) {
  PipelineConfig cfg;
  adaptive::PredictorConfig pred;
  pred.lms.mu = mu;
  pred.lms.num_taps = taps;
  pred.lms.normalized = normalized;
  pred.lms.snapshot_stride = 0;
  pred.delay = delay;
  cfg.topology = pred;
  cfg.block_len = block_len;
  return cfg;
}

bool runs_equal(const adaptive::AdaptiveRun& a, const adaptive::AdaptiveRun& b) {
  return a.y.samples == b.y.samples && a.e.samples == b.e.samples &&
         a.final.b == b.final.b && a.coeff_trajectory.size() == b.coeff_trajectory.size();
}

}  // namespace

TEST_CASE("dpram cross-port round trip and zero init") {
  DualPortMemory mem;
  CHECK(mem.read(Port::B, 0x0010) == 0x0000);  // never written
  mem.write(Port::A, 0x0010, 0xBEEF);
  CHECK(mem.read(Port::B, 0x0010) == 0xBEEF);
  CHECK(mem.read(Port::A, 0xFFFF) == 0x0000);
  CHECK_THROWS_AS((void)mem.read(Port::A, 0x10000), std::invalid_argument);
  CHECK_THROWS_AS(mem.write(Port::A, 0x10000, 1), std::invalid_argument);
}

TEST_CASE("same-step write/write collision is a hazard") {
  DualPortMemory mem;
  mem.write(Port::A, 0x0040, 0x1111);
  mem.write(Port::B, 0x0040, 0x2222);
  REQUIRE(mem.hazards().size() == 1);
  CHECK(mem.hazards()[0].address == 0x0040);

  // Across a step boundary the same pair is clean.
  mem.advance_step();
  mem.write(Port::A, 0x0050, 0x1111);
  mem.advance_step();
  mem.write(Port::B, 0x0050, 0x2222);
  CHECK(mem.hazards().size() == 1);

  // Same port re-writing in one step is sequential code, not a hazard.
  mem.advance_step();
  mem.write(Port::A, 0x0060, 1);
  mem.write(Port::A, 0x0060, 2);
  CHECK(mem.hazards().size() == 1);
}

TEST_CASE("access log records operations when enabled") {
  DualPortMemory mem;
  mem.enable_log(true);
  mem.write(Port::A, 0x0001, 42);
  (void)mem.read(Port::B, 0x0001);
  REQUIRE(mem.access_log().size() == 2);
  CHECK(mem.access_log()[0].op == dualcore::MemOp::write);
  CHECK(mem.access_log()[1].op == dualcore::MemOp::read);
  CHECK(mem.access_log()[1].port == Port::B);

  std::stringstream ss;
  dualcore::write_access_log_csv(mem.access_log(), ss);
  CHECK(ss.str().rfind("step,port,op,address,value\n", 0) == 0);
  CHECK(ss.str().find("0,A,W,0x0001,0x002A") != std::string::npos);
}

TEST_CASE("binary32 pairs round-trip exactly") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    float f;
    do {
      const auto bits = static_cast<std::uint32_t>(rng());
      std::memcpy(&f, &bits, sizeof f);
    } while (!std::isfinite(f));
    const auto words = dualcore::encode_f32(static_cast<double>(f));
    CHECK(dualcore::decode_f32(words[0], words[1]) == static_cast<double>(f));
  }
  const auto z = dualcore::encode_f32(0.0);
  CHECK(z[0] == 0);
  CHECK(z[1] == 0);
}

TEST_CASE("binary64 quads round-trip exactly") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 2000; ++i) {
    double d;
    do {
      const auto bits = rng();
      std::memcpy(&d, &bits, sizeof d);
    } while (!std::isfinite(d));
    CHECK(dualcore::decode_f64(dualcore::encode_f64(d)) == d);
  }
}

TEST_CASE("layout validation rejects overlaps and overflow") {
  SharedLayout ok = SharedLayout::defaults(32, 64);
  ok.validate();

  SharedLayout clash = ok;
  clash.data_base = clash.coeff_base;  // payload regions collide
  CHECK_THROWS_AS(clash.validate(), std::invalid_argument);

  SharedLayout flag_in_data = ok;
  flag_in_data.flag_data_ready = ok.data_base;
  CHECK_THROWS_AS(flag_in_data.validate(), std::invalid_argument);

  SharedLayout overflow = ok;
  overflow.data_base = 0xFFF0;
  CHECK_THROWS_AS(overflow.validate(), std::invalid_argument);
}

TEST_CASE("layout text form round trips") {
  const SharedLayout a = SharedLayout::defaults(16, 8);
  std::istringstream in(a.format());
  const SharedLayout b = SharedLayout::parse(in);
  CHECK(a.coeff_base == b.coeff_base);
  CHECK(a.coeff_count == b.coeff_count);
  CHECK(a.data_base == b.data_base);
  CHECK(a.block_len == b.block_len);
  CHECK(a.flag_data_ready == b.flag_data_ready);
  CHECK(a.seqno == b.seqno);

  std::istringstream bad("coeff_base = 0x100\nbogus_key = 1\n");
  CHECK_THROWS_AS((void)SharedLayout::parse(bad), std::invalid_argument);
}

TEST_CASE("serial delayed reference matches the independent oracle") {
  kernels::set_backend(kernels::Backend::scalar);
  const SampleStream x = white(1.0, 3, 4000);
  const SampleStream d = convolve(x, {0.5, -0.3, 0.2});

  for (const std::uint16_t block_len : {1, 16, 64}) {
    const PipelineConfig cfg = ident_cfg(3, 0.01, block_len);
    const auto run = dualcore::run_serial_delayed(x, &d, cfg);
    const auto ref = testsupport::ref_delayed_lms(x.samples, d.samples, 3, 0,
                                                  block_len, {0.01, false, 1e-12, 0.0});
    CHECK(run.y.samples == ref.y);
    CHECK(run.e.samples == ref.e);
    CHECK(run.final.b == ref.w);
  }
}

TEST_CASE("block_len=1 is serial LMS with one extra sample of delay") {
  kernels::set_backend(kernels::Backend::scalar);
  const SampleStream x = white(1.0, 7, 2000);
  const SampleStream d = convolve(x, {0.8, -0.1});
  const PipelineConfig cfg = ident_cfg(2, 0.02, 1);
  const auto dual = dualcore::run_dual_pipeline(
      x, &d, cfg, SharedLayout::defaults(2, 1));
  const auto ref = testsupport::ref_delayed_lms(x.samples, d.samples, 2, 0, 1,
                                                {0.02, false, 1e-12, 0.0});
  CHECK(dual.y.samples == ref.y);
  CHECK(dual.e.samples == ref.e);
  CHECK(dual.final.b == ref.w);
}

TEST_CASE("dual pipeline is bit-identical to the serial reference") {
  const SampleStream x = white(1.0, 11, 6000);
  const SampleStream d = convolve(x, {0.5, -0.3, 0.2});

  for (const std::uint16_t block_len : {1, 16, 64}) {
    // identification
    {
      PipelineConfig cfg = ident_cfg(3, 0.01, block_len);
      cfg.schedule = {dualcore::SchedulePolicy::random, 99};
      const auto dual = dualcore::run_dual_pipeline(
          x, &d, cfg, SharedLayout::defaults(3, block_len));
      const auto serial = dualcore::run_serial_delayed(x, &d, cfg);
      CHECK(runs_equal(dual, serial));
    }
    // predictor
    {
      PipelineConfig cfg = predictor_cfg(8, 0.05, block_len);
      cfg.schedule = {dualcore::SchedulePolicy::random, 4242};
      const auto dual = dualcore::run_dual_pipeline(
          x, nullptr, cfg, SharedLayout::defaults(8, block_len));
      const auto serial = dualcore::run_serial_delayed(x, nullptr, cfg);
      CHECK(runs_equal(dual, serial));
    }
  }
}

TEST_CASE("every schedule yields the same output") {
  const SampleStream x = white(1.0, 13, 3000);
  const SampleStream d = convolve(x, {0.4, 0.2});
  const SharedLayout layout = SharedLayout::defaults(2, 16);

  PipelineConfig cfg = ident_cfg(2, 0.01, 16);
  const auto baseline = dualcore::run_dual_pipeline(x, &d, cfg, layout);

  for (const std::uint64_t seed : {1u, 2u, 3u, 17u, 999u}) {
    cfg.schedule = {dualcore::SchedulePolicy::random, seed};
    const auto run = dualcore::run_dual_pipeline(x, &d, cfg, layout);
    CHECK(runs_equal(run, baseline));
  }
}

TEST_CASE("role assignment swaps ports without changing the result") {
  const SampleStream x = white(1.0, 17, 2000);
  const SampleStream d = convolve(x, {0.9});
  const SharedLayout layout = SharedLayout::defaults(1, 8);

  PipelineConfig cfg = ident_cfg(1, 0.05, 8);
  const auto on_a = dualcore::run_dual_pipeline(x, &d, cfg, layout);
  cfg.role = dualcore::RoleAssignment::filter_on_b;
  const auto on_b = dualcore::run_dual_pipeline(x, &d, cfg, layout);
  CHECK(runs_equal(on_a, on_b));
}

TEST_CASE("mu=0 pipeline is fixed-coefficient filtering") {
  const SampleStream x = white(1.0, 19, 1500);
  const SampleStream d = convolve(x, {0.5, 0.5});

  PipelineConfig cfg = ident_cfg(2, 0.0, 1);
  cfg.initial.b = {0.25, -0.75};
  const auto base = dualcore::run_dual_pipeline(x, &d, cfg, SharedLayout::defaults(2, 1));

  for (const std::uint16_t block_len : {4, 32}) {
    PipelineConfig c2 = ident_cfg(2, 0.0, block_len);
    c2.initial.b = {0.25, -0.75};
    c2.role = dualcore::RoleAssignment::filter_on_b;
    const auto run = dualcore::run_dual_pipeline(x, &d, c2, SharedLayout::defaults(2, block_len));
    CHECK(run.y.samples == base.y.samples);
  }
  CHECK(base.final.b == std::vector<double>{0.25, -0.75});
  // y is the fixed filter applied to the binary32-published coefficients.
  for (std::size_t k = 1; k < x.size(); ++k) {
    const double expect = 0.25 * x.samples[k] - 0.75 * x.samples[k - 1];
    CHECK(base.y.samples[k] == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("dual identification converges to the plant") {
  // Delayed-update LMS applies each block's update one block late, so the
  // per-block loop gain 2*mu*block_len must stay well under 1; mu = 1e-3 at
  // block 64 keeps it at 0.128.
  const SampleStream x = white(1.0, 3, 20000);
  const std::vector<double> plant{0.5, -0.3, 0.2};
  const SampleStream d = convolve(x, plant);
  const PipelineConfig cfg = ident_cfg(3, 0.001, 64);
  const auto run = dualcore::run_dual_pipeline(x, &d, cfg, SharedLayout::defaults(3, 64));
  for (std::size_t i = 0; i < plant.size(); ++i)
    CHECK(std::fabs(run.final.b[i] - plant[i]) <= 2e-2);
}

TEST_CASE("partial final block and empty input are handled") {
  const SampleStream x = white(1.0, 23, 1003);  // 1003 % 16 != 0
  const SampleStream d = convolve(x, {0.3});
  const PipelineConfig cfg = ident_cfg(1, 0.02, 16);
  const auto dual = dualcore::run_dual_pipeline(x, &d, cfg, SharedLayout::defaults(1, 16));
  const auto serial = dualcore::run_serial_delayed(x, &d, cfg);
  CHECK(runs_equal(dual, serial));

  SampleStream empty;
  empty.rate_hz = 1000.0;
  const SampleStream empty_d = empty;
  const auto run = dualcore::run_dual_pipeline(empty, &empty_d, cfg,
                                               SharedLayout::defaults(1, 16));
  CHECK(run.y.samples.empty());
  CHECK(run.final.b == std::vector<double>{0.0});
}

TEST_CASE("pipeline validates its inputs") {
  const SampleStream x = white(1.0, 29, 100);
  const SampleStream d = convolve(x, {1.0});
  PipelineConfig cfg = ident_cfg(2, 0.01, 4);

  CHECK_THROWS_AS((void)dualcore::run_dual_pipeline(x, nullptr, cfg,
                                                    SharedLayout::defaults(2, 4)),
                  std::invalid_argument);
  // layout/config block_len mismatch
  CHECK_THROWS_AS((void)dualcore::run_dual_pipeline(x, &d, cfg,
                                                    SharedLayout::defaults(2, 8)),
                  std::invalid_argument);
  // layout coeff_count mismatch
  CHECK_THROWS_AS((void)dualcore::run_dual_pipeline(x, &d, cfg,
                                                    SharedLayout::defaults(3, 4)),
                  std::invalid_argument);
  // predictor with a desired stream
  PipelineConfig pcfg = predictor_cfg(2, 0.05, 4);
  CHECK_THROWS_AS((void)dualcore::run_dual_pipeline(x, &d, pcfg,
                                                    SharedLayout::defaults(2, 4)),
                  std::invalid_argument);
}

TEST_CASE("handshake timeout fires when the step bound is exhausted") {
  const SampleStream x = white(1.0, 31, 64);
  const SampleStream d = convolve(x, {1.0});
  PipelineConfig cfg = ident_cfg(1, 0.01, 4);
  cfg.max_idle_rounds = 0;  // any blocked poll exceeds the bound
  CHECK_THROWS_AS((void)dualcore::run_dual_pipeline(x, &d, cfg,
                                                    SharedLayout::defaults(1, 4)),
                  dualcore::HandshakeTimeout);
}

namespace {

// An agent stuck polling a flag that never rises: the canonical victim of a
// dead partner.
class StuckAgent final : public dualcore::Agent {
 public:
  explicit StuckAgent(DualPortMemory& mem) : mem_(&mem) {}
  bool step() override { return mem_->read(Port::A, 0x0002) != 0; }
  bool done() const override { return false; }
  std::string describe() const override { return "stuck agent"; }

 private:
  DualPortMemory* mem_;
};

}  // namespace

TEST_CASE("a starved worker raises HandshakeTimeout") {
  DualPortMemory mem;
  StuckAgent agent(mem);
  std::vector<dualcore::Agent*> agents{&agent};
  CHECK_THROWS_AS((void)dualcore::run_agents(agents, mem, {}, 50),
                  dualcore::HandshakeTimeout);
}

TEST_CASE("no payload is read before its flag is set") {
  const SampleStream x = white(1.0, 37, 600);
  const SampleStream d = convolve(x, {0.7, 0.1});
  PipelineConfig cfg = ident_cfg(2, 0.02, 8);
  cfg.enable_access_log = true;
  cfg.schedule = {dualcore::SchedulePolicy::random, 7};
  const SharedLayout layout = SharedLayout::defaults(2, 8);

  dualcore::PipelineTrace trace;
  (void)dualcore::run_dual_pipeline(x, &d, cfg, layout, &trace);
  REQUIRE(!trace.access_log.empty());
  const auto issues = dualcore::audit_mailbox_order(trace.access_log, layout);
  for (const auto& s : issues) MESSAGE(s);
  CHECK(issues.empty());
  CHECK(trace.hazards.empty());
  CHECK(trace.rounds > 0);
}

TEST_CASE("the audit catches a premature payload read") {
  const SharedLayout layout = SharedLayout::defaults(2, 8);
  std::vector<dualcore::AccessRecord> log;
  // Reader pulls a data word before any seq write.
  log.push_back({0, Port::B, dualcore::MemOp::read,
                 static_cast<std::uint16_t>(layout.data_base + 1), 0});
  CHECK(!dualcore::audit_mailbox_order(log, layout).empty());
}

TEST_CASE("mac budget arithmetic") {
  const auto b = dualcore::mac_budget(32, dualcore::FilterKind::fir, 333000.0);
  CHECK(b.macs_per_sample == 64);
  CHECK(b.macs_per_second == doctest::Approx(2.1312e7));
  CHECK(b.utilization == doctest::Approx(0.07104));
  CHECK_FALSE(b.over_budget);

  const auto tiny = dualcore::mac_budget(1, dualcore::FilterKind::fir, 1.0);
  CHECK(tiny.macs_per_second == 2.0);
  CHECK(tiny.utilization == doctest::Approx(6.6667e-9).epsilon(1e-3));

  const auto over = dualcore::mac_budget(500000, dualcore::FilterKind::fir, 333000.0);
  CHECK(over.over_budget);

  const auto iir = dualcore::mac_budget(3, dualcore::FilterKind::iir, 1000.0, 2);
  CHECK(iir.macs_per_sample == 10);

  CHECK_THROWS_AS((void)dualcore::mac_budget(0, dualcore::FilterKind::fir, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)dualcore::mac_budget(1, dualcore::FilterKind::fir, 0.0),
                  std::invalid_argument);
}
