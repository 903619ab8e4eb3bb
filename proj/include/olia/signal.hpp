#ifndef OLIA_SIGNAL_HPP
#define OLIA_SIGNAL_HPP

// Composable, deterministic test signals in millivolts as a function of time.
//
// Text form (used by scenario files and the CLI):
//   sine(amplitude_mv, frequency_hz[, phase_rad])
//   square(amplitude_mv, frequency_hz)          peak amplitude, +A while sin >= 0
//   noise(rms_mv, seed[, draw_rate_hz])         Gaussian, held per draw
//   step(<signal>, t_on_s)                      zero before t_on
//   ref(amplitude_mv)                           0 / A following the instrument's
//                                               square-wave reference output
//   sum(<signal>, ...)  or  <signal> + <signal>
//   zero

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace olia::signal {

inline constexpr double kDefaultNoiseRate = 200000.0; // one draw per ADC tick at 200 kHz

struct Sine {
  double amplitude = 0.0; // mV
  double frequency = 1000.0;
  double phase = 0.0; // rad
};

struct Square {
  double amplitude = 0.0; // mV, peak
  double frequency = 1000.0;
};

struct WhiteNoise {
  double rms = 0.0; // mV
  std::uint64_t seed = 0;
  double rate = kDefaultNoiseRate; // fresh draw every 1/rate seconds
};

struct ReferenceDriven {
  double amplitude = 0.0; // mV while the reference output is high
};

class SignalSpec;

struct Sum {
  std::vector<SignalSpec> parts;
};

struct StepEnvelope {
  std::shared_ptr<const SignalSpec> inner;
  double t_on = 0.0;
};

class SignalSpec {
public:
  using Node = std::variant<Sine, Square, WhiteNoise, Sum, StepEnvelope, ReferenceDriven>;

  SignalSpec() : node_(Sum{}) {}
  // Throws olia::Error if an amplitude is negative or a frequency non-positive.
  SignalSpec(Sine v);
  SignalSpec(Square v);
  SignalSpec(WhiteNoise v);
  SignalSpec(Sum v) : node_(std::move(v)) {}
  SignalSpec(ReferenceDriven v);

  static SignalSpec step(SignalSpec inner, double t_on);
  static SignalSpec sum(std::vector<SignalSpec> parts) { return SignalSpec(Sum{std::move(parts)}); }

  const Node& node() const noexcept { return node_; }

  /// Copy with every noise seed replaced by a hash of (seed, global_seed);
  /// global_seed 0 leaves the signal unchanged.
  SignalSpec reseeded(std::uint64_t global_seed) const;

private:
  explicit SignalSpec(StepEnvelope v) : node_(std::move(v)) {}
  Node node_;
};

SignalSpec operator+(SignalSpec a, SignalSpec b);

/// Where the instrument's square-wave output is, for ReferenceDriven signals.
/// The output is set at each sample instant origin + n * tick_period and held
/// until the next.
struct ReferenceContext {
  double origin = 0.0;
  double tick_period = 1.0 / 200000.0;
  std::uint32_t samples_per_period = 200;
  bool active = true;

  /// Output level at t: 1 while high, 0 while low, 0.5 exactly on an edge
  /// (the output switches on the same tick the ADC samples).
  double level(double t) const noexcept;
};

/// Evaluates the signal at time t (seconds). ReferenceDriven reads 0 without a
/// context.
double generate(const SignalSpec& spec, double t, const ReferenceContext* ref = nullptr);

/// Standard normal draw number `index` of stream `seed`. Counter based: any
/// draw can be computed directly, so streams are reproducible and can be
/// split across threads.
double gaussian_draw(std::uint64_t seed, std::uint64_t index) noexcept;

/// Stateful evaluator for the sample loop. Gives the same values as
/// generate() but caches the current draw of each noise source, which the
/// anti-alias sub-steps of a single tick would otherwise recompute.
class SignalSource {
public:
  SignalSource();
  explicit SignalSource(const SignalSpec& spec);
  ~SignalSource();
  SignalSource(SignalSource&&) noexcept;
  SignalSource& operator=(SignalSource&&) noexcept;

  double sample(double t, const ReferenceContext* ref = nullptr);
  /// out[j] = value at t0 + j*h for every j. Sine components are advanced by
  /// rotation from one sincos per call, so values agree with sample() to
  /// rounding (about 1e-15 relative), not bit for bit.
  void sample_block(double t0, double h, std::span<double> out, const ReferenceContext* ref = nullptr);

private:
  struct Compiled;
  std::unique_ptr<Compiled> root_;
};

/// Parses the text form documented at the top of this header. Throws
/// olia::Error(Parse) with the offending position on malformed input.
SignalSpec parse_signal(std::string_view text);
std::string to_string(const SignalSpec& spec);

/// TTL reference on the external-reference input: rising edges at
/// t = (j - phase/(2*pi)) / frequency.
struct TtlReference {
  double frequency = 1000.0;
  double phase = 0.0; // rad

  /// Rising edges in [t_begin, t_end).
  std::vector<double> rising_edges(double t_begin, double t_end) const;
  /// First rising edge at or after t.
  double next_rising_edge(double t) const;
};

} // namespace olia::signal

#endif // OLIA_SIGNAL_HPP
