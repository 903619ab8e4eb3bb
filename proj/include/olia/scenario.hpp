#ifndef OLIA_SCENARIO_HPP
#define OLIA_SCENARIO_HPP

// Scenario files and frame tables.
//
// A scenario is comma-separated text with the header "time,action,argument".
// Everything after the second comma is the argument, so signal expressions
// need no quoting. Lines starting with '#' are comments.
//
//   time  action   argument
//   0     option   key=value        device options and initial settings, t = 0 only
//   t     signal   <signal text>    replaces the input signal
//   t     ttl      <hz>[ <phase>]   TTL on the external reference input, or "off"
//   t     command  <protocol line>  e.g. "e2", "g8", "c"
//   t     end                       stop time (required, last)
//
// Option keys: f_d, f_r, tau, gain, output_gain, harmonic, sync (0/1),
// mode (internal/external), bypass (0/1), substeps, f_aa, adc_noise,
// adc_seed, pll_min, pll_max, pll_tuned (0/1), window.
//
// Frame tables are CSV with a header "t" followed by the 22 frame field
// names; values use the wire formats, t has one decimal.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "olia/emulator.hpp"
#include "olia/signal.hpp"

namespace olia::scenario {

enum class Action { Signal, Ttl, Command };

struct Event {
  double t = 0.0;
  Action action = Action::Command;
  std::string argument;
  friend bool operator==(const Event&, const Event&) = default;
};

struct Scenario {
  emulator::EmulatorOptions options;
  emulator::InstrumentConfig config;
  std::vector<Event> events; // non-decreasing in t
  double end_time = 0.0;
};

/// Throws olia::Error(Parse) naming the line on malformed input, and
/// validates option values, signal text and TTL arguments up front.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);
std::string format_scenario(const Scenario& scenario);

/// Applies "key=value" settings separated by ';' or newlines, using the
/// option keys above. Throws Error(Parse) on unknown keys or bad values and
/// the validation error for out-of-range settings; on error nothing changes.
void apply_settings(emulator::EmulatorOptions& options, emulator::InstrumentConfig& config, std::string_view text);

struct Result {
  std::vector<emulator::TimedFrame> frames;
  std::vector<std::string> diagnostics; // rejected commands, with their time
};

/// Plays the events in order: an event at time t is applied after every
/// frame due at or before t and before the sample at t. Noise seeds are
/// rehashed with `seed` unless it is 0.
Result run(const Scenario& scenario, std::uint64_t seed = 0);

/// Scenario holding a single signal for `duration` seconds.
Scenario single_signal(const emulator::EmulatorOptions& options, const emulator::InstrumentConfig& config,
                       const signal::SignalSpec& spec, double duration);

std::string frame_table_header();
std::string frame_table_row(const emulator::TimedFrame& frame);
void write_frame_table(std::ostream& out, std::span<const emulator::TimedFrame> frames);
void save_frame_table(const std::filesystem::path& path, std::span<const emulator::TimedFrame> frames);
std::vector<emulator::TimedFrame> read_frame_table(std::istream& in);

} // namespace olia::scenario

#endif // OLIA_SCENARIO_HPP
