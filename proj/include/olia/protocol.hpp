#ifndef OLIA_PROTOCOL_HPP
#define OLIA_PROTOCOL_HPP

// Serial line protocol.
//
// Commands (one per line, terminated by '\r' or '\n'):
//   t        toggle synchronous filter          r     toggle reference mode
//   <x>      set internal reference frequency   g<n>  set input gain
//   e<x>     set time constant (s)              s<x>  set analogue output gain
//   h<n>     set lowest higher harmonic         c     re-measure external reference
//
// Output frames: 22 space-separated fields ending in "\r\n". Field formats:
//   0, 2, 3, 4, 5, 21   bare integers
//   1, 6, 7, 8          two decimals
//   9                   "0", "0.5" or the integer N
//   10 - 20             five decimals

#include <array>
#include <string>
#include <string_view>
#include <variant>

#include "olia/error.hpp"

namespace olia::protocol {

enum class ProtocolErrc {
  EmptyLine,
  UnknownCommand,
  MissingArgument,
  UnexpectedArgument,
  MalformedNumber,
  FrequencyOutOfRange,
  GainNotAllowed,
  TimeConstantOutOfRange,
  OutputGainOutOfRange,
  HarmonicOutOfRange,
  FieldCount,
  FieldFormat,
  FrameInvariant,
};

const char* to_string(ProtocolErrc code) noexcept;

class ProtocolError : public Error {
public:
  ProtocolError(ProtocolErrc code, const std::string& detail);
  ProtocolErrc protocol_code() const noexcept { return code_; }

private:
  ProtocolErrc code_;
};

inline constexpr double kMinTimeConstant = 0.01;
inline constexpr double kMaxTimeConstant = 10.0;
inline constexpr double kMaxOutputGain = 1e6;
inline constexpr int kMinLowestHarmonic = 2;
inline constexpr int kMaxLowestHarmonic = 1 << 20;

namespace cmd {
struct ToggleSyncFilter {
  friend bool operator==(const ToggleSyncFilter&, const ToggleSyncFilter&) = default;
};
struct ToggleReferenceMode {
  friend bool operator==(const ToggleReferenceMode&, const ToggleReferenceMode&) = default;
};
struct SetFrequency {
  double hz = 0.0;
  friend bool operator==(const SetFrequency&, const SetFrequency&) = default;
};
struct SetInputGain {
  int n = 1;
  friend bool operator==(const SetInputGain&, const SetInputGain&) = default;
};
struct SetTimeConstant {
  double s = 0.6;
  friend bool operator==(const SetTimeConstant&, const SetTimeConstant&) = default;
};
struct SetOutputGain {
  double x = 10.0;
  friend bool operator==(const SetOutputGain&, const SetOutputGain&) = default;
};
struct SetLowestHarmonic {
  int n = 2;
  friend bool operator==(const SetLowestHarmonic&, const SetLowestHarmonic&) = default;
};
struct QueryExternalFrequency {
  friend bool operator==(const QueryExternalFrequency&, const QueryExternalFrequency&) = default;
};
} // namespace cmd

using Command = std::variant<cmd::ToggleSyncFilter, cmd::ToggleReferenceMode, cmd::SetFrequency,
                             cmd::SetInputGain, cmd::SetTimeConstant, cmd::SetOutputGain,
                             cmd::SetLowestHarmonic, cmd::QueryExternalFrequency>;

/// Parses one command line. Surrounding whitespace and the terminator are
/// ignored. Throws ProtocolError on anything else.
Command parse_command(std::string_view line);

/// Canonical text of a command, without terminator.
std::string format_command(const Command& command);

struct OutputFrame {
  int error_indicator = 0; // bit 1 (value 1) clipping, bit 2 (value 2) lock failure
  double output_gain = 10.0;
  int input_gain = 1;
  bool sync_filter = false;
  bool external_reference = false;
  int samples_per_period = 0;
  double f_d = 0.0;
  double f_r = 0.0;
  double tau = 0.0;
  double undersampling = 0.0; // N; 0 in internal mode
  double r1 = 0.0;
  double phi1 = 0.0; // rad
  double s1 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
  std::array<double, 3> xn{}; // X(n), X(n+1), X(n+2)
  std::array<double, 3> yn{};
  int lowest_harmonic = 2;

  friend bool operator==(const OutputFrame&, const OutputFrame&) = default;
};

inline constexpr std::size_t kFrameFieldCount = 22;
extern const std::array<const char*, kFrameFieldCount> kFrameFieldNames;

/// Throws ProtocolError(FrameInvariant) describing the first violated rule.
void validate_frame(const OutputFrame& frame);

/// Text line including the trailing "\r\n".
std::string format_frame(const OutputFrame& frame);

/// The 22 field strings of format_frame, without separators.
std::array<std::string, kFrameFieldCount> format_frame_fields(const OutputFrame& frame);

/// Parses a frame line (terminator optional) and checks its invariants.
OutputFrame parse_frame(std::string_view line);

} // namespace olia::protocol

#endif // OLIA_PROTOCOL_HPP
