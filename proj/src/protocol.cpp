#include "olia/protocol.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <vector>

#include "olia/frontend.hpp"

namespace olia::protocol {

const std::array<const char*, kFrameFieldCount> kFrameFieldNames{
    "error",   "output_gain", "input_gain", "sync",  "ext",   "samples_per_period",
    "f_d",     "f_r",         "tau",        "N",     "R1",    "phi1",
    "S1",      "X1",          "Y1",         "Xn",    "Xn1",   "Xn2",
    "Yn",      "Yn1",         "Yn2",        "n"};

const char* to_string(ProtocolErrc code) noexcept {
  switch (code) {
    case ProtocolErrc::EmptyLine: return "empty command";
    case ProtocolErrc::UnknownCommand: return "unknown command";
    case ProtocolErrc::MissingArgument: return "missing argument";
    case ProtocolErrc::UnexpectedArgument: return "unexpected argument";
    case ProtocolErrc::MalformedNumber: return "malformed number";
    case ProtocolErrc::FrequencyOutOfRange: return "frequency out of range";
    case ProtocolErrc::GainNotAllowed: return "gain not allowed";
    case ProtocolErrc::TimeConstantOutOfRange: return "time constant out of range";
    case ProtocolErrc::OutputGainOutOfRange: return "output gain out of range";
    case ProtocolErrc::HarmonicOutOfRange: return "harmonic out of range";
    case ProtocolErrc::FieldCount: return "wrong field count";
    case ProtocolErrc::FieldFormat: return "unparseable field";
    case ProtocolErrc::FrameInvariant: return "frame invariant violated";
  }
  return "protocol error";
}

namespace {

ErrorCode category(ProtocolErrc code) {
  switch (code) {
    case ProtocolErrc::FrequencyOutOfRange:
    case ProtocolErrc::GainNotAllowed:
    case ProtocolErrc::TimeConstantOutOfRange:
    case ProtocolErrc::OutputGainOutOfRange:
    case ProtocolErrc::HarmonicOutOfRange:
      return ErrorCode::OutOfRange;
    default:
      return ErrorCode::Parse;
  }
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_full(std::string_view text, T& out) {
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

double command_real(std::string_view arg, char letter) {
  if (arg.empty()) {
    throw ProtocolError(ProtocolErrc::MissingArgument, std::string("'") + letter + "' needs a value");
  }
  double v = 0.0;
  if (!parse_full(arg, v)) {
    throw ProtocolError(ProtocolErrc::MalformedNumber, "'" + std::string(arg) + "'");
  }
  return v;
}

int command_int(std::string_view arg, char letter) {
  if (arg.empty()) {
    throw ProtocolError(ProtocolErrc::MissingArgument, std::string("'") + letter + "' needs a value");
  }
  int v = 0;
  if (!parse_full(arg, v)) {
    throw ProtocolError(ProtocolErrc::MalformedNumber, "'" + std::string(arg) + "' is not an integer");
  }
  return v;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string undersampling_text(double n) {
  if (n == 0.0) return "0";
  if (n == 0.5) return "0.5";
  return std::to_string(static_cast<int>(n));
}

bool is_ladder_n(double n) {
  return n == 0.5 || n == 1.0 || n == 2.0 || n == 4.0 || n == 8.0 || n == 16.0;
}

bool is_external_samples(int m) {
  return m == 0 || m == 4 || m == 8 || m == 16 || m == 32 || m == 64 || m == 128;
}

} // namespace

ProtocolError::ProtocolError(ProtocolErrc code, const std::string& detail)
    : Error(category(code), std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
      code_(code) {}

Command parse_command(std::string_view line) {
  const auto text = trim(line);
  if (text.empty()) throw ProtocolError(ProtocolErrc::EmptyLine, "");
  const char lead = text.front();
  const auto arg = text.substr(1);

  switch (lead) {
    case 't':
    case 'r':
    case 'c':
      if (!arg.empty()) {
        throw ProtocolError(ProtocolErrc::UnexpectedArgument, std::string("'") + lead + "' takes no value");
      }
      if (lead == 't') return cmd::ToggleSyncFilter{};
      if (lead == 'r') return cmd::ToggleReferenceMode{};
      return cmd::QueryExternalFrequency{};
    case 'g': {
      const int n = command_int(arg, lead);
      if (!frontend::PgaSetting::is_allowed(n)) {
        throw ProtocolError(ProtocolErrc::GainNotAllowed, std::to_string(n) + " not in {0,1,2,4,8,16,32,64}");
      }
      return cmd::SetInputGain{n};
    }
    case 'h': {
      const int n = command_int(arg, lead);
      if (n < kMinLowestHarmonic || n > kMaxLowestHarmonic) {
        throw ProtocolError(ProtocolErrc::HarmonicOutOfRange, "lowest higher harmonic must be >= 2");
      }
      return cmd::SetLowestHarmonic{n};
    }
    case 'e': {
      const double s = command_real(arg, lead);
      if (!(s >= kMinTimeConstant && s <= kMaxTimeConstant)) {
        throw ProtocolError(ProtocolErrc::TimeConstantOutOfRange, shortest(s) + " s outside [0.01, 10]");
      }
      return cmd::SetTimeConstant{s};
    }
    case 's': {
      const double x = command_real(arg, lead);
      if (!(x >= 0.0 && x <= kMaxOutputGain)) {
        throw ProtocolError(ProtocolErrc::OutputGainOutOfRange, shortest(x) + " outside [0, 1e6]");
      }
      return cmd::SetOutputGain{x};
    }
    default:
      break;
  }

  if ((lead >= '0' && lead <= '9') || lead == '.' || lead == '-') {
    double hz = 0.0;
    if (!parse_full(text, hz)) {
      throw ProtocolError(ProtocolErrc::MalformedNumber, "'" + std::string(text) + "'");
    }
    if (!(hz >= 1.0 && hz <= 50000.0)) {
      throw ProtocolError(ProtocolErrc::FrequencyOutOfRange, shortest(hz) + " Hz outside [1, 50000]");
    }
    return cmd::SetFrequency{hz};
  }
  throw ProtocolError(ProtocolErrc::UnknownCommand, "'" + std::string(text) + "'");
}

std::string format_command(const Command& command) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, cmd::ToggleSyncFilter>) return "t";
        else if constexpr (std::is_same_v<T, cmd::ToggleReferenceMode>) return "r";
        else if constexpr (std::is_same_v<T, cmd::QueryExternalFrequency>) return "c";
        else if constexpr (std::is_same_v<T, cmd::SetFrequency>) return shortest(c.hz);
        else if constexpr (std::is_same_v<T, cmd::SetInputGain>) return "g" + std::to_string(c.n);
        else if constexpr (std::is_same_v<T, cmd::SetTimeConstant>) return "e" + shortest(c.s);
        else if constexpr (std::is_same_v<T, cmd::SetOutputGain>) return "s" + shortest(c.x);
        else return "h" + std::to_string(c.n);
      },
      command);
}

void validate_frame(const OutputFrame& f) {
  const auto fail = [](const std::string& what) { throw ProtocolError(ProtocolErrc::FrameInvariant, what); };
  if (f.error_indicator < 0 || f.error_indicator > 3) fail("error indicator must be 0..3");
  if (!(f.output_gain >= 0.0 && f.output_gain <= kMaxOutputGain)) fail("output gain outside [0, 1e6]");
  if (!frontend::PgaSetting::is_allowed(f.input_gain)) fail("input gain not in the allowed set");
  if (f.samples_per_period < 0) fail("samples per period must be non-negative");
  if (!(f.f_d >= 0.0) || !(f.f_r >= 0.0) || !(f.tau >= 0.0)) fail("rates and time constant must be non-negative");
  if (f.external_reference) {
    if (!is_ladder_n(f.undersampling)) fail("external mode needs N in {0.5,1,2,4,8,16}");
    if (!is_external_samples(f.samples_per_period)) fail("external samples per period not in {0,4,...,128}");
  } else if (f.undersampling != 0.0) {
    fail("N must be 0 in internal reference mode");
  }
  if (!(f.r1 >= 0.0)) fail("R(1) must be non-negative");
  if (f.lowest_harmonic < kMinLowestHarmonic) fail("lowest higher harmonic must be >= 2");
  for (double v : {f.f_d, f.f_r, f.tau, f.r1, f.phi1, f.s1, f.x1, f.y1, f.xn[0], f.xn[1], f.xn[2],
                   f.yn[0], f.yn[1], f.yn[2]}) {
    if (!std::isfinite(v)) fail("non-finite value");
  }
}

std::array<std::string, kFrameFieldCount> format_frame_fields(const OutputFrame& f) {
  return {std::to_string(f.error_indicator),
          fixed(f.output_gain, 2),
          std::to_string(f.input_gain),
          f.sync_filter ? "1" : "0",
          f.external_reference ? "1" : "0",
          std::to_string(f.samples_per_period),
          fixed(f.f_d, 2),
          fixed(f.f_r, 2),
          fixed(f.tau, 2),
          undersampling_text(f.undersampling),
          fixed(f.r1, 5),
          fixed(f.phi1, 5),
          fixed(f.s1, 5),
          fixed(f.x1, 5),
          fixed(f.y1, 5),
          fixed(f.xn[0], 5),
          fixed(f.xn[1], 5),
          fixed(f.xn[2], 5),
          fixed(f.yn[0], 5),
          fixed(f.yn[1], 5),
          fixed(f.yn[2], 5),
          std::to_string(f.lowest_harmonic)};
}

std::string format_frame(const OutputFrame& frame) {
  std::string out;
  out.reserve(160);
  const auto fields = format_frame_fields(frame);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ' ';
    out += fields[i];
  }
  out += "\r\n";
  return out;
}

OutputFrame parse_frame(std::string_view line) {
  const auto text = trim(line);
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    if (pos >= text.size()) break;
    const auto start = pos;
    while (pos < text.size() && text[pos] != ' ' && text[pos] != '\t') ++pos;
    fields.push_back(text.substr(start, pos - start));
  }
  if (fields.size() != kFrameFieldCount) {
    throw ProtocolError(ProtocolErrc::FieldCount,
                        "expected 22 fields, got " + std::to_string(fields.size()));
  }

  const auto integer = [&](std::size_t i) {
    int v = 0;
    if (!parse_full(fields[i], v)) {
      throw ProtocolError(ProtocolErrc::FieldFormat,
                          std::string("field ") + std::to_string(i) + " (" + kFrameFieldNames[i] + ")");
    }
    return v;
  };
  const auto real = [&](std::size_t i) {
    double v = 0.0;
    if (!parse_full(fields[i], v)) {
      throw ProtocolError(ProtocolErrc::FieldFormat,
                          std::string("field ") + std::to_string(i) + " (" + kFrameFieldNames[i] + ")");
    }
    return v;
  };
  const auto flag = [&](std::size_t i) {
    const int v = integer(i);
    if (v != 0 && v != 1) {
      throw ProtocolError(ProtocolErrc::FieldFormat,
                          std::string("field ") + std::to_string(i) + " must be 0 or 1");
    }
    return v == 1;
  };

  OutputFrame f;
  f.error_indicator = integer(0);
  f.output_gain = real(1);
  f.input_gain = integer(2);
  f.sync_filter = flag(3);
  f.external_reference = flag(4);
  f.samples_per_period = integer(5);
  f.f_d = real(6);
  f.f_r = real(7);
  f.tau = real(8);
  f.undersampling = real(9);
  f.r1 = real(10);
  f.phi1 = real(11);
  f.s1 = real(12);
  f.x1 = real(13);
  f.y1 = real(14);
  for (std::size_t i = 0; i < 3; ++i) {
    f.xn[i] = real(15 + i);
    f.yn[i] = real(18 + i);
  }
  f.lowest_harmonic = integer(21);
  validate_frame(f);
  return f;
}

} // namespace olia::protocol
