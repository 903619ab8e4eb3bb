#include <doctest.h>

#include <sstream>
#include <string>

#include "olia/error.hpp"
#include "olia/scenario.hpp"

using namespace olia;
using namespace olia::scenario;

namespace {

const char* kScenario = R"(time,action,argument
# a locked sine, then a gain change
0,option,tau=0.1
0,option,gain=2
0,option,adc_noise=0.5
0,signal,sine(100, 1000) + noise(1, 7)
1.5,command,g4
1.5,command,g3
2,signal,zero
3,end
)";

} // namespace

TEST_SUITE("scenario") {

TEST_CASE("parse reads options, events and the end time") {
  const auto sc = parse_scenario(kScenario);
  CHECK(sc.config.tau == 0.1);
  CHECK(sc.config.gain.gain() == 2);
  CHECK(sc.options.adc_noise_rms_mv == 0.5);
  REQUIRE(sc.events.size() == 4);
  CHECK(sc.events[0] == Event{0.0, Action::Signal, "sine(100, 1000) + noise(1, 7)"});
  CHECK(sc.events[2] == Event{1.5, Action::Command, "g3"});
  CHECK(sc.end_time == 3.0);
}

TEST_CASE("format and parse round trip") {
  const auto sc = parse_scenario(kScenario);
  const auto text = format_scenario(sc);
  const auto again = parse_scenario(text);
  CHECK(format_scenario(again) == text);
  CHECK(again.events == sc.events);
  CHECK(again.config.tau == sc.config.tau);
  CHECK(again.options.adc_noise_rms_mv == sc.options.adc_noise_rms_mv);
}

TEST_CASE("malformed scenarios name the line") {
  const char* bad[] = {
      "time,action,argument\n0,signal,sine(1,1000)\n",              // no end
      "time,action,argument\n0,wobble,1\n1,end\n",                  // unknown action
      "time,action,argument\n1,option,tau=1\n2,end\n",              // option after t=0
      "time,action,argument\n2,command,e\n1,end\n",                 // time goes backwards
      "time,action,argument\n0,signal,sine(1)\n1,end\n",            // bad signal
      "time,action,argument\n0,option,gain=3\n1,end\n",             // gain not allowed
      "time,action,argument\n0,option,tau=100\n1,end\n",            // tau out of range
      "time,action,argument\n0,ttl,fast\n1,end\n",                  // bad ttl
      "time,action,argument\n1,end\n2,command,e\n",                 // after end
      "time,action,argument\nx,command,e\n1,end\n",                 // bad time
  };
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse_scenario(text), Error);
  }
  try {
    parse_scenario("time,action,argument\n0,wobble,1\n1,end\n");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("runs are deterministic and report rejected commands") {
  const auto sc = parse_scenario(kScenario);
  const auto a = run(sc);
  const auto b = run(sc);
  REQUIRE(a.frames.size() == 30); // first frame at 0.1 s
  CHECK(a.frames.size() == b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) CHECK(a.frames[i].frame == b.frames[i].frame);
  REQUIRE(a.diagnostics.size() == 1);
  CHECK(a.diagnostics[0].find("'g3'") != std::string::npos);
  CHECK(a.frames.back().frame.input_gain == 4);

  const auto c = run(sc, 99);
  CHECK(c.frames[12].frame.r1 != a.frames[12].frame.r1);
}

TEST_CASE("frame tables round trip through text") {
  const auto frames = run(parse_scenario(kScenario)).frames;
  std::stringstream buf;
  write_frame_table(buf, frames);
  const auto text = buf.str();
  CHECK(text.rfind("t,", 0) == 0);
  const auto back = read_frame_table(buf);
  REQUIRE(back.size() == frames.size());
  CHECK(back[5].t == doctest::Approx(0.6));
  CHECK(back[5].index == 6);
  std::stringstream again;
  write_frame_table(again, back);
  CHECK(again.str() == text);

  std::stringstream bad("t,nope\n0.0,1\n");
  CHECK_THROWS_AS(read_frame_table(bad), Error);
}

TEST_CASE("settings strings use the option keys") {
  emulator::EmulatorOptions o;
  emulator::InstrumentConfig c;
  apply_settings(o, c, "tau=2; gain=8;mode=external\nbypass=1;");
  CHECK(c.tau == 2.0);
  CHECK(c.gain.gain() == 8);
  CHECK(c.mode == emulator::ReferenceMode::External);
  CHECK(o.frontend_bypass);
  CHECK_THROWS_AS(apply_settings(o, c, "tau"), Error);
  CHECK_THROWS_AS(apply_settings(o, c, "colour=blue"), Error);
  CHECK_THROWS_AS(apply_settings(o, c, "tau=0.6;tau=99"), Error);
  CHECK(c.tau == 2.0); // unchanged after a failure
}

TEST_CASE("single_signal scenario") {
  const auto sc = single_signal({}, {}, signal::Sine{5.0, 1000.0, 0.0}, 1.0);
  const auto r = run(sc);
  CHECK(r.frames.size() == 10);
  CHECK(r.diagnostics.empty());
}

} // TEST_SUITE
