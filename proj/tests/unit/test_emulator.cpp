#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <vector>

#include "olia/emulator.hpp"
#include "olia/error.hpp"

using namespace olia;
using namespace olia::emulator;

namespace {

constexpr double kPi = std::numbers::pi;

struct Recorder {
  std::vector<TimedFrame> frames;
  void attach(Emulator& emu) {
    emu.set_frame_sink([this](const TimedFrame& f) { frames.push_back(f); });
  }
  const protocol::OutputFrame& last() const { return frames.back().frame; }
};

} // namespace

TEST_SUITE("emulator") {

TEST_CASE("default device emits valid frames ten times a second") {
  Emulator emu;
  Recorder rec;
  rec.attach(emu);
  emu.advance(1.0);
  REQUIRE(rec.frames.size() == 10);
  CHECK(emu.samples_processed() == 200000);
  for (std::size_t i = 0; i < rec.frames.size(); ++i) {
    CHECK(rec.frames[i].index == i + 1);
    CHECK(rec.frames[i].t == doctest::Approx(0.1 * (i + 1)));
    CHECK_NOTHROW(protocol::validate_frame(rec.frames[i].frame));
  }
  const auto& f = rec.last();
  CHECK(f.samples_per_period == 200);
  CHECK(f.f_d == 200000.0);
  CHECK(f.f_r == 1000.0);
  CHECK(f.tau == 0.6);
  CHECK(f.output_gain == 10.0);
  CHECK(f.error_indicator == 0);
  CHECK(f.r1 < 0.01);
}

TEST_CASE("advancing in pieces gives the same frames as one call") {
  auto run = [](std::vector<double> steps) {
    Emulator emu;
    emu.set_signal(signal::parse_signal("sine(10, 1000, 0.3) + noise(1, 3)"));
    Recorder rec;
    rec.attach(emu);
    for (double t : steps) emu.advance_to(t);
    return rec.frames;
  };
  const auto a = run({0.5});
  const auto b = run({0.0371, 0.1, 0.1, 0.2500001, 0.5});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].frame == b[i].frame);
}

TEST_CASE("a 1 kHz sine settles to its amplitude with the anti-alias phase lag") {
  Emulator emu;
  emu.set_signal(signal::SignalSpec(signal::Sine{100.0, 1000.0, 0.0}));
  Recorder rec;
  rec.attach(emu);
  // the noise estimate still remembers the settling ramp well after 10 tau
  emu.advance(12.0);
  const auto& f = rec.last();
  CHECK(f.r1 == doctest::Approx(100.0 / std::sqrt(1.0 + std::pow(1.0 / 94.0, 2))).epsilon(2e-3));
  CHECK(f.phi1 == doctest::Approx(-std::atan(1.0 / 94.0)).epsilon(0.1));
  CHECK(f.s1 < 0.05);
  CHECK(emu.analogue_output() == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("ideal path reproduces the demodulator exactly") {
  EmulatorOptions opt;
  opt.frontend_bypass = true;
  Emulator emu(opt);
  emu.set_signal(signal::SignalSpec(signal::Sine{5.0, 1000.0, 0.7}));
  Recorder rec;
  rec.attach(emu);
  emu.advance(7.0);
  CHECK(rec.last().r1 == doctest::Approx(5.0).epsilon(1e-3));
  CHECK(rec.last().phi1 == doctest::Approx(0.7).epsilon(1e-3));
}

TEST_CASE("clipping sets and clears the error bit") {
  Emulator emu;
  emu.set_signal(signal::SignalSpec(signal::Sine{2000.0, 1000.0, 0.0}));
  Recorder rec;
  rec.attach(emu);
  emu.advance(0.2);
  CHECK((rec.last().error_indicator & 1) == 1);
  emu.set_signal(signal::SignalSpec{});
  emu.advance(0.1); // the latch still holds the clipping from before the change
  emu.advance(0.1);
  CHECK(rec.last().error_indicator == 0);
}

TEST_CASE("commands change the configuration between samples") {
  Emulator emu;
  Recorder rec;
  rec.attach(emu);
  CHECK(emu.apply_line("e2").accepted);
  CHECK(emu.apply_line("g8").accepted);
  CHECK(emu.apply_line("s2.5").accepted);
  CHECK(emu.apply_line("h4").accepted);
  CHECK(emu.apply_line("333").accepted);
  const auto bad = emu.apply_line("g3");
  CHECK_FALSE(bad.accepted);
  CHECK_FALSE(bad.diagnostic.empty());
  CHECK_FALSE(emu.apply_line("c").accepted); // internal mode
  emu.advance(0.1);
  const auto& f = rec.last();
  CHECK(f.tau == 2.0);
  CHECK(f.input_gain == 8);
  CHECK(f.output_gain == 2.5);
  CHECK(f.lowest_harmonic == 4);
  CHECK(f.samples_per_period == 601);
  CHECK(f.f_r == doctest::Approx(200000.0 / 601));
}

TEST_CASE("input gain zero disconnects the input") {
  Emulator emu;
  emu.set_signal(signal::SignalSpec(signal::Sine{100.0, 1000.0, 0.0}));
  Recorder rec;
  rec.attach(emu);
  emu.apply_line("g0");
  emu.advance(1.0);
  CHECK(rec.last().r1 == 0.0);
  CHECK(rec.last().input_gain == 0);
}

TEST_CASE("synchronous filter settles after one period and rejects harmonics") {
  EmulatorOptions opt;
  opt.frontend_bypass = true;
  Emulator emu(opt);
  emu.set_signal(signal::parse_signal("sine(3, 1000, 0.25) + sine(50, 2000) + sine(40, 5000, 1)"));
  Recorder rec;
  rec.attach(emu);
  emu.apply_line("t");
  emu.advance(0.1);
  const auto& f = rec.last();
  CHECK(f.sync_filter);
  CHECK(f.r1 == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(f.phi1 == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("higher harmonics are demodulated next to the fundamental") {
  EmulatorOptions opt;
  opt.frontend_bypass = true;
  Emulator emu(opt);
  emu.set_signal(signal::parse_signal("sine(3, 1000) + sine(2, 3000, 0.5) + sine(1, 4000)"));
  emu.apply_line("h3");
  emu.apply_line("e0.1");
  Recorder rec;
  rec.attach(emu);
  emu.advance(2.0);
  const auto& f = rec.last();
  CHECK(std::hypot(f.xn[0], f.yn[0]) == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(std::atan2(f.yn[0], f.xn[0]) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(std::hypot(f.xn[1], f.yn[1]) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(std::hypot(f.xn[2], f.yn[2]) < 1e-3);
  CHECK(emu.harmonics().size() == emu.harmonic_capacity());
}

TEST_CASE("harmonic capacity follows the digitisation rate") {
  CHECK(harmonic_capacity(200000.0) == 3);
  CHECK(harmonic_capacity(100000.0) == 7);
  InstrumentConfig cfg;
  cfg.f_d = 100000.0;
  Emulator emu({}, cfg);
  CHECK(emu.harmonics().size() == 7);
}

TEST_CASE("external reference locks after a measurement") {
  Emulator emu;
  emu.set_signal(signal::parse_signal("ref(100)"));
  emu.set_ttl(signal::TtlReference{1000.0, 0.0});
  Recorder rec;
  rec.attach(emu);

  emu.apply_line("r");
  emu.advance(0.1);
  CHECK(rec.last().external_reference);
  CHECK(rec.last().error_indicator == 2);
  CHECK(rec.last().samples_per_period == 0);
  CHECK_NOTHROW(protocol::validate_frame(rec.last()));

  emu.advance(0.5);
  CHECK(emu.apply_line("c").accepted);
  emu.advance(7.0);
  const auto& f = rec.last();
  CHECK(f.error_indicator == 0);
  CHECK(f.samples_per_period == 128);
  CHECK(f.undersampling == 0.5);
  CHECK(f.f_r == doctest::Approx(1000.0));
  CHECK(f.f_d == doctest::Approx(128000.0));
  // fundamental of a 0/A square wave
  CHECK(f.r1 == doctest::Approx(2.0 * 100.0 / kPi).epsilon(3e-3));
}

TEST_CASE("out-of-range TTL gives a lock failure") {
  Emulator emu;
  emu.set_ttl(signal::TtlReference{100.0, 0.0});
  Recorder rec;
  rec.attach(emu);
  emu.apply_line("r");
  emu.advance(0.6);
  const auto r = emu.apply_line("c");
  CHECK_FALSE(r.accepted);
  emu.advance(0.1);
  CHECK(rec.last().error_indicator == 2);
  CHECK(emu.lock_failure());

  emu.set_ttl(signal::TtlReference{2000.0, 0.0});
  emu.advance(0.6);
  CHECK(emu.apply_line("c").accepted);
  emu.advance(0.1);
  CHECK(rec.last().error_indicator == 0);
  CHECK(rec.last().undersampling == 1.0);

  emu.set_ttl(signal::TtlReference{7000.0, 0.0});
  emu.advance(0.1);
  CHECK(rec.last().error_indicator == 2);

  emu.apply_line("r");
  emu.advance(0.1);
  CHECK(rec.last().error_indicator == 0);
  CHECK_FALSE(rec.last().external_reference);
}

TEST_CASE("analogue output smoothing step") {
  CHECK(analogue_output_update(0.0, 100.0, 10.0, 1e9) == doctest::Approx(1.0));
  CHECK(analogue_output_update(0.0, 1000.0, 10.0, 1e9) == doctest::Approx(3.3));
  const double one = analogue_output_update(0.0, 100.0, 10.0, 1.0 / (2 * kPi * 1.59));
  CHECK(one == doctest::Approx(1.0 - std::exp(-1.0)));
}

TEST_CASE("invalid configuration is rejected") {
  InstrumentConfig cfg;
  cfg.f_d = 300000.0;
  CHECK_THROWS_AS(Emulator({}, cfg), Error);
  cfg = {};
  cfg.tau = 20.0;
  CHECK_THROWS_AS(Emulator({}, cfg), Error);
  EmulatorOptions opt;
  opt.aa_substeps = 0;
  CHECK_THROWS_AS(Emulator{opt}, Error);
}

TEST_CASE("sample loop throughput" * doctest::skip(false)) {
  Emulator emu;
  emu.set_signal(signal::parse_signal("sine(1, 1000) + noise(1, 1)"));
  const auto start = std::chrono::steady_clock::now();
  emu.advance(2.0);
  const double ns = std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - start).count();
  MESSAGE("ns per sample: " << ns / emu.samples_processed());
  CHECK(emu.samples_processed() == 400000);
}

} // TEST_SUITE
