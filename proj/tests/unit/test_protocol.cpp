#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "olia/protocol.hpp"

using namespace olia;
using namespace olia::protocol;

namespace {

ProtocolErrc error_of(std::string_view line) {
  try {
    parse_command(line);
  } catch (const ProtocolError& e) {
    return e.protocol_code();
  }
  FAIL("expected a protocol error for: " << std::string(line));
  return ProtocolErrc::EmptyLine;
}

// A frame whose real fields are already at the precision they are printed
// with, so format -> parse reproduces it exactly.
OutputFrame random_canonical_frame(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> bit(0, 1);
  std::uniform_int_distribution<int> err(0, 3);
  std::uniform_int_distribution<int> gain_idx(0, 7);
  std::uniform_int_distribution<int> rung(0, 5);
  std::uniform_int_distribution<long> cents(0, 100000000);
  std::uniform_int_distribution<long> fifths(-2000000000L, 2000000000L);
  const int gains[] = {0, 1, 2, 4, 8, 16, 32, 64};
  const double ns[] = {0.5, 1, 2, 4, 8, 16};

  OutputFrame f;
  f.error_indicator = err(rng);
  f.output_gain = cents(rng) / 100.0;
  f.input_gain = gains[gain_idx(rng)];
  f.sync_filter = bit(rng);
  f.external_reference = bit(rng);
  if (f.external_reference) {
    const int r = rung(rng);
    f.undersampling = ns[r];
    f.samples_per_period = static_cast<int>(64 / ns[r]);
  } else {
    f.samples_per_period = 4 + static_cast<int>(cents(rng) % 200000);
  }
  f.f_d = cents(rng) / 100.0;
  f.f_r = cents(rng) / 100.0;
  f.tau = cents(rng) % 1000 / 100.0;
  auto five = [&] { return fifths(rng) / 100000.0; };
  f.r1 = std::abs(five());
  f.phi1 = fifths(rng) % 314159 / 100000.0;
  f.s1 = std::abs(five());
  f.x1 = five();
  f.y1 = five();
  for (auto& v : f.xn) v = five();
  for (auto& v : f.yn) v = five();
  f.lowest_harmonic = 2 + static_cast<int>(cents(rng) % 1000);
  return f;
}

} // namespace

TEST_SUITE("protocol") {

TEST_CASE("commands parse") {
  CHECK(parse_command("t") == Command{cmd::ToggleSyncFilter{}});
  CHECK(parse_command("r\r") == Command{cmd::ToggleReferenceMode{}});
  CHECK(parse_command("c\n") == Command{cmd::QueryExternalFrequency{}});
  CHECK(parse_command("200") == Command{cmd::SetFrequency{200.0}});
  CHECK(parse_command("  1234.5 ") == Command{cmd::SetFrequency{1234.5}});
  CHECK(parse_command("g8") == Command{cmd::SetInputGain{8}});
  CHECK(parse_command("g0") == Command{cmd::SetInputGain{0}});
  CHECK(parse_command("e6") == Command{cmd::SetTimeConstant{6.0}});
  CHECK(parse_command("e0.01") == Command{cmd::SetTimeConstant{0.01}});
  CHECK(parse_command("s2.5") == Command{cmd::SetOutputGain{2.5}});
  CHECK(parse_command("h5") == Command{cmd::SetLowestHarmonic{5}});
}

TEST_CASE("invalid commands are rejected with a reason") {
  CHECK(error_of("") == ProtocolErrc::EmptyLine);
  CHECK(error_of("\r\n") == ProtocolErrc::EmptyLine);
  CHECK(error_of("x") == ProtocolErrc::UnknownCommand);
  CHECK(error_of("g3") == ProtocolErrc::GainNotAllowed);
  CHECK(error_of("g") == ProtocolErrc::MissingArgument);
  CHECK(error_of("t1") == ProtocolErrc::UnexpectedArgument);
  CHECK(error_of("e") == ProtocolErrc::MissingArgument);
  CHECK(error_of("e0.001") == ProtocolErrc::TimeConstantOutOfRange);
  CHECK(error_of("e11") == ProtocolErrc::TimeConstantOutOfRange);
  CHECK(error_of("eabc") == ProtocolErrc::MalformedNumber);
  CHECK(error_of("0.5") == ProtocolErrc::FrequencyOutOfRange);
  CHECK(error_of("60000") == ProtocolErrc::FrequencyOutOfRange);
  CHECK(error_of("12x") == ProtocolErrc::MalformedNumber);
  CHECK(error_of("h1") == ProtocolErrc::HarmonicOutOfRange);
  CHECK(error_of("s-1") == ProtocolErrc::OutputGainOutOfRange);
}

TEST_CASE("format_command round trips") {
  const Command all[] = {cmd::ToggleSyncFilter{},   cmd::ToggleReferenceMode{}, cmd::SetFrequency{333.25},
                         cmd::SetInputGain{64},     cmd::SetTimeConstant{2.5},  cmd::SetOutputGain{100},
                         cmd::SetLowestHarmonic{7}, cmd::QueryExternalFrequency{}};
  for (const auto& c : all) CHECK(parse_command(format_command(c)) == c);
}

TEST_CASE("reference frame line parses and reformats byte for byte") {
  const std::string line =
      "0 10.00 1 0 0 200 200000.00 1000.00 0.60 0 416.40687 -0.03235 0.01083 416.18902 -13.46777 "
      "-0.33040 138.06182 -0.60012 -4.63077 -13.43283 -4.57161 2\r\n";
  const auto f = parse_frame(line);
  CHECK(f.samples_per_period == 200);
  CHECK(f.f_d == 200000.0);
  CHECK(f.tau == 0.6);
  CHECK(f.r1 == doctest::Approx(416.40687));
  CHECK(f.phi1 == doctest::Approx(-0.03235));
  CHECK(f.yn[2] == doctest::Approx(-4.57161));
  CHECK(f.lowest_harmonic == 2);
  CHECK(format_frame(f) == line);
}

TEST_CASE("default frame text") {
  OutputFrame f;
  CHECK(format_frame(f) ==
        "0 10.00 1 0 0 0 0.00 0.00 0.00 0 0.00000 0.00000 0.00000 0.00000 0.00000 0.00000 0.00000 "
        "0.00000 0.00000 0.00000 0.00000 2\r\n");
}

TEST_CASE("undersampling field formats") {
  OutputFrame f;
  f.external_reference = true;
  f.samples_per_period = 128;
  f.undersampling = 0.5;
  CHECK(format_frame_fields(f)[9] == "0.5");
  f.samples_per_period = 16;
  f.undersampling = 4.0;
  CHECK(format_frame_fields(f)[9] == "4");
  CHECK(parse_frame(format_frame(f)) == f);
}

TEST_CASE("frame invariants are enforced") {
  OutputFrame f;
  f.error_indicator = 4;
  CHECK_THROWS_AS(validate_frame(f), ProtocolError);
  f = {};
  f.undersampling = 2.0; // N set in internal mode
  CHECK_THROWS_AS(validate_frame(f), ProtocolError);
  f = {};
  f.input_gain = 3;
  CHECK_THROWS_AS(validate_frame(f), ProtocolError);
  f = {};
  f.r1 = -1.0;
  CHECK_THROWS_AS(validate_frame(f), ProtocolError);
  f = {};
  f.lowest_harmonic = 1;
  CHECK_THROWS_AS(validate_frame(f), ProtocolError);
  f = {};
  f.x1 = std::nan("");
  CHECK_THROWS_AS(validate_frame(f), ProtocolError);
  CHECK_NOTHROW(validate_frame(OutputFrame{}));
}

TEST_CASE("malformed frame lines are rejected") {
  CHECK_THROWS_AS(parse_frame("0 10.00 1"), ProtocolError);
  CHECK_THROWS_AS(parse_frame(std::string(format_frame(OutputFrame{})).replace(0, 1, "x")), ProtocolError);
  CHECK_THROWS_AS(parse_frame(format_frame(OutputFrame{}) + " 5"), ProtocolError);
}

TEST_CASE("random canonical frames survive format -> parse") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 10000; ++i) {
    const auto f = random_canonical_frame(rng);
    const auto text = format_frame(f);
    const auto back = parse_frame(text);
    CHECK(back == f);
    CHECK(format_frame(back) == text);
  }
}

TEST_CASE("field names") {
  CHECK(kFrameFieldNames.size() == 22);
  CHECK(std::string(kFrameFieldNames[10]) == "R1");
  CHECK(std::string(kFrameFieldNames[21]) == "n");
}

} // TEST_SUITE
