#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dspboard/apps.hpp"

using namespace dspboard;
using apps::BcmExperiment;
using apps::BpmReading;

namespace {

std::string predictor_config(double noise_sigma, double trip_threshold = 10.0) {
  const std::string noise_line =
      noise_sigma > 0.0
          ? "component = white " + std::to_string(noise_sigma) + " 29\n"
          : "";
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "[signal]\n"
                "duration_s = 0.06\n"
                "rate_hz = 333000\n"
                "component = sin 16650 1.0 0.0\n"   // 0.05 * fs
                "%s"
                "[filter]\n"
                "topology = predictor\n"
                "taps = 32\n"
                "mu = 0.05\n"
                "normalized = true\n"
                "delay = 1\n"
                "block_len = 16\n"
                "snapshot_stride = 0\n"
                "[trip]\n"
                "threshold_v = %g\n"
                "persistence = 5\n"
                "output_line = 2\n",
                noise_line.c_str(), trip_threshold);
  return buf;
}

}  // namespace

TEST_CASE("bpm difference-over-sum values") {
  CHECK(apps::bpm_position_direct({1.0, 1.0, 2.0, 2.0, 1.0}).x_mm == 0.0);
  CHECK(apps::bpm_position_direct({1.0, 1.0, 2.0, 2.0, 1.0}).y_mm == 0.0);

  const auto r = apps::bpm_position_direct({1.1, 0.9, 1.0, 1.0, 1.0});
  CHECK(r.x_mm == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.y_mm == 0.0);

  // Ratio homogeneity: scaling all electrodes changes nothing.
  const auto base = apps::bpm_position_direct({1.3, 0.7, 0.4, 1.6, 2.5});
  const auto scaled = apps::bpm_position_direct({13.0, 7.0, 4.0, 16.0, 2.5});
  CHECK(scaled.x_mm == doctest::Approx(base.x_mm).epsilon(1e-12));
  CHECK(scaled.y_mm == doctest::Approx(base.y_mm).epsilon(1e-12));
}

TEST_CASE("bpm rejects invalid readings") {
  CHECK_THROWS_AS((void)apps::bpm_position_direct({0.0, 0.0, 1.0, 1.0, 1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)apps::bpm_position_direct({1.0, 1.0, 0.0, 0.0, 1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)apps::bpm_position_direct({-0.1, 1.0, 1.0, 1.0, 1.0}),
                  std::invalid_argument);
}

TEST_CASE("dual-core bpm equals the direct formula exactly") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    BpmReading r;
    r.a = 0.01 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
    r.b = 0.01 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
    r.c = 0.01 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
    r.d = 0.01 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
    r.k_scale = 2.5;
    const auto direct = apps::bpm_position_direct(r);
    const auto dual = apps::bpm_position(r, {dualcore::SchedulePolicy::random, rng()});
    CHECK(dual.x_mm == direct.x_mm);
    CHECK(dual.y_mm == direct.y_mm);
  }
}

TEST_CASE("bcm experiment parses and runs the noisy predictor chain") {
  std::istringstream in(predictor_config(1.0));
  const BcmExperiment exp = apps::parse_experiment(in);
  const auto rep = apps::run_bcm_experiment(exp);

  MESSAGE("bcm: in ", rep.input_snr_db, " dB out ", rep.output_snr_db, " dB");
  CHECK(rep.improvement_db >= 6.0);
  CHECK_FALSE(rep.trip.tripped);  // threshold far above the 1 V beam
  CHECK(rep.run.y.size() == rep.contaminated.size());
  CHECK(rep.dac_out.size() == rep.run.y.size());
  // 333 kS/s spacing (3.003 us) never violates the 3 us DAC settle time.
  CHECK(rep.dac_timing_violations == 0);
}

TEST_CASE("bcm with clean input has nothing to remove") {
  std::istringstream in(predictor_config(0.0));
  const BcmExperiment exp = apps::parse_experiment(in);
  const auto rep = apps::run_bcm_experiment(exp);
  // Quantization noise dominates both figures; no big improvement exists.
  CHECK(std::fabs(rep.improvement_db) <= 6.0);
  CHECK_FALSE(rep.trip.tripped);
}

TEST_CASE("bcm with the adc bypassed equals the raw dual-core pipeline") {
  std::istringstream in(predictor_config(1.0));
  BcmExperiment exp = apps::parse_experiment(in);
  exp.adc_enabled = false;
  const auto rep = apps::run_bcm_experiment(exp);

  const auto& pred = std::get<adaptive::PredictorConfig>(exp.topology.topology);
  const auto layout = dualcore::SharedLayout::defaults(
      static_cast<std::uint16_t>(pred.lms.num_taps), exp.topology.block_len);
  const auto direct =
      dualcore::run_dual_pipeline(rep.contaminated, nullptr, exp.topology, layout);
  CHECK(rep.run.y.samples == direct.y.samples);
  CHECK(rep.run.e.samples == direct.e.samples);
  CHECK(rep.run.final.b == direct.final.b);
  CHECK(rep.seen.samples == rep.contaminated.samples);
}

TEST_CASE("bcm reports are bit-reproducible") {
  std::istringstream in1(predictor_config(1.0));
  std::istringstream in2(predictor_config(1.0));
  const auto a = apps::run_bcm_experiment(apps::parse_experiment(in1));
  const auto b = apps::run_bcm_experiment(apps::parse_experiment(in2));
  CHECK(a.run.y.samples == b.run.y.samples);
  CHECK(a.input_snr_db == b.input_snr_db);
  CHECK(a.output_snr_db == b.output_snr_db);
  CHECK(a.dac_out.samples == b.dac_out.samples);
}

TEST_CASE("bcm trip latency is persistence over rate plus measured filter delay") {
  // Beam step: DC(1) + pulse(-1) for the first half, so the current rises
  // from 0 to 1 V at the midpoint.
  std::istringstream in(
      "[signal]\n"
      "duration_s = 0.03\n"
      "rate_hz = 333000\n"
      "component = dc 1.0\n"
      "component = pulse 0.03 0.5 -1.0\n"
      "[filter]\n"
      "topology = predictor\n"
      "taps = 16\n"
      "mu = 0.1\n"
      "normalized = true\n"
      "delay = 1\n"
      "block_len = 1\n"
      "snapshot_stride = 0\n"
      "[trip]\n"
      "threshold_v = 0.5\n"
      "persistence = 5\n"
      "output_line = 0\n");
  const BcmExperiment exp = apps::parse_experiment(in);
  const auto rep = apps::run_bcm_experiment(exp);

  REQUIRE(rep.trip.tripped);
  CHECK(*rep.trip.latency_s == doctest::Approx(5.0 / 333000.0).epsilon(1e-12));

  // Oracle: first index where 5 consecutive filtered samples clear 0.5 V.
  std::size_t expect_index = 0;
  std::uint32_t streak = 0;
  for (std::size_t k = 0; k < rep.run.y.size(); ++k) {
    streak = rep.run.y.samples[k] > 0.5 ? streak + 1 : 0;
    if (streak == 5) {
      expect_index = k;
      break;
    }
  }
  CHECK(*rep.trip.trip_index == expect_index);
  // The filter needs a few samples to pass the step; latency beyond the
  // persistence term is the measured group delay.
  const std::size_t step_at = rep.run.y.size() / 2;
  CHECK(*rep.trip.trip_index >= step_at + 4);
  MESSAGE("measured filter delay: ",
          *rep.trip.trip_index - step_at - 4, " samples");
  CHECK(rep.dio.outputs[0]);
}

TEST_CASE("config errors name the offending key") {
  std::istringstream above_nyquist(
      "[signal]\n"
      "duration_s = 0.01\n"
      "rate_hz = 1000\n"
      "component = sin 600 1.0 0.0\n"
      "[filter]\n"
      "topology = predictor\n"
      "taps = 4\n"
      "mu = 0.1\n"
      "delay = 1\n"
      "block_len = 1\n");
  CHECK_THROWS_WITH_AS((void)apps::parse_experiment(above_nyquist),
                       doctest::Contains("component[0]"), apps::ConfigError);

  std::istringstream bad_key("[signal]\nduration_s = 0.01\nfrobnicate = 3\n");
  CHECK_THROWS_WITH_AS((void)apps::parse_experiment(bad_key),
                       doctest::Contains("frobnicate"), apps::ConfigError);

  std::istringstream bad_section("[warp]\nspeed = 9\n");
  CHECK_THROWS_AS((void)apps::parse_experiment(bad_section), apps::ConfigError);
}

TEST_CASE("bcm rejects the identification topology") {
  std::istringstream in(
      "[signal]\n"
      "duration_s = 0.001\n"
      "rate_hz = 333000\n"
      "component = dc 0.1\n"
      "[filter]\n"
      "topology = identification\n"
      "taps = 4\n"
      "mu = 0.1\n"
      "block_len = 1\n");
  const BcmExperiment exp = apps::parse_experiment(in);
  CHECK_THROWS_AS((void)apps::run_bcm_experiment(exp), std::invalid_argument);
}

TEST_CASE("the vme backing stitches dpram and board registers") {
  board::Board brd;
  apps::BoardVmeBacking backing(brd);
  vme::SlaveState slave;
  slave.decoded_base = 0;
  slave.window_bytes = 2 * static_cast<std::uint32_t>(backing.words());
  slave.backing = &backing;

  // DPRAM half: plain memory semantics, visible on port B.
  vme::VmeTransaction w{vme::Cycle::D16, vme::Dir::write, 0x0100, {0xCAFE}, 0, {}};
  REQUIRE(vme::slave_execute(slave, w).ok());
  CHECK(brd.dpram.read(dualcore::Port::B, 0x80) == 0xCAFE);

  // Register half: ADC at midscale, DIO loopback, write-only kick faults.
  vme::VmeTransaction adc{vme::Cycle::D16, vme::Dir::read, 0x20000, {}, 0, {}};
  CHECK(vme::slave_execute(slave, adc).data[0] == 2048);
  vme::VmeTransaction dio_w{vme::Cycle::D16, vme::Dir::write, 0x20006, {0xA5}, 0, {}};
  REQUIRE(vme::slave_execute(slave, dio_w).ok());
  CHECK(brd.dio.output_mask() == 0xA5);
  vme::VmeTransaction kick_r{vme::Cycle::D16, vme::Dir::read, 0x20008, {}, 0, {}};
  const auto fault = vme::slave_execute(slave, kick_r);
  CHECK(fault.outcome == vme::BusResult::Outcome::berr);
  CHECK(fault.berr_reason.find("backing fault") != std::string::npos);

  // RMW straight into the dual-port RAM.
  vme::VmeTransaction rmw{vme::Cycle::RMW, vme::Dir::read, 0x0100, {}, 0,
                          vme::RmwMasks{0x00FF, 0x0100}};
  CHECK(vme::slave_execute(slave, rmw).data[0] == 0xCAFE);
  CHECK(brd.dpram.read(dualcore::Port::B, 0x80) == 0x01FE);
}

TEST_CASE("seed override renumbers the noise components") {
  signal::SignalSpec spec{0.01, 10000.0,
                          {signal::Sinusoid{100.0, 1.0, 0.0},
                           signal::WhiteNoise{1.0, 5},
                           signal::NarrowbandNoise{1000.0, 100.0, 0.5, 6}}};
  apps::override_seeds(spec, 100);
  CHECK(std::get<signal::WhiteNoise>(spec.components[1]).seed == 101);
  CHECK(std::get<signal::NarrowbandNoise>(spec.components[2]).seed == 102);
}

TEST_CASE("snr_tail measures only the trailing window") {
  signal::SampleStream ref, x;
  ref.rate_hz = x.rate_hz = 1000.0;
  ref.samples.assign(100, 1.0);
  x.samples = ref.samples;
  for (std::size_t k = 0; k < 50; ++k) x.samples[k] += 100.0;  // transient garbage
  const auto r = apps::snr_tail(ref, x, 0.5);
  CHECK(std::isinf(r.snr_db));  // the tail is exact
  CHECK_THROWS_AS((void)apps::snr_tail(ref, x, 1.0), std::invalid_argument);
}

TEST_CASE("report csv and summary carry the headline figures") {
  std::istringstream in(predictor_config(1.0));
  const auto rep = apps::run_bcm_experiment(apps::parse_experiment(in));
  std::stringstream csv;
  apps::write_report_csv(rep, csv);
  CHECK(csv.str().rfind("key,value\n", 0) == 0);
  CHECK(csv.str().find("improvement_db,") != std::string::npos);
  const std::string summary = apps::format_summary(rep);
  CHECK(summary.find("improvement") != std::string::npos);
}
