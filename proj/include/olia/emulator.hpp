#ifndef OLIA_EMULATOR_HPP
#define OLIA_EMULATOR_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "olia/dsp.hpp"
#include "olia/frontend.hpp"
#include "olia/protocol.hpp"
#include "olia/signal.hpp"
#include "olia/timing.hpp"

namespace olia::emulator {

enum class ReferenceMode { Internal, External };
enum class ClockMode { Accelerated, RealTime };

/// Settings a client can change over the line protocol, plus f_d which is
/// fixed when the device is built.
struct InstrumentConfig {
  ReferenceMode mode = ReferenceMode::Internal;
  double requested_f_r = 1000.0;
  frontend::PgaSetting gain{1};
  double tau = 0.6;
  bool sync_filter = false;
  int lowest_harmonic = 2;
  double output_gain = 10.0;
  double f_d = timing::kMaxDigitisationRate;
  ClockMode clock = ClockMode::Accelerated;
};

/// Throws olia::Error if any field is outside the ranges the protocol allows.
void validate(const InstrumentConfig& config);

/// Device build options that are not reachable through the protocol.
struct EmulatorOptions {
  bool frontend_bypass = false;  ///< feed the generated mV straight to the DSP
  int aa_substeps = 8;           ///< anti-alias integration steps per sample interval
  double f_aa = frontend::kAntiAliasCutoff;
  double adc_noise_rms_mv = 0.0; ///< Gaussian noise at the ADC input
  std::uint64_t adc_noise_seed = 0x0A1Au;
  timing::LockRange pll{};
  double measurement_window = timing::kDefaultMeasurementWindow;
  double analogue_cutoff = 1.59; ///< Hz, smoothing of the analogue output
};

struct TimedFrame {
  std::uint64_t index = 0; ///< frame k is emitted at t = k * 0.1 s
  double t = 0.0;
  protocol::OutputFrame frame;
};

using FrameSink = std::function<void(const TimedFrame&)>;

struct CommandResult {
  bool accepted = true;
  std::string diagnostic;
};

struct HarmonicOutput {
  std::uint32_t k = 0;
  double x2 = 0.0;
  double y2 = 0.0;
};

inline constexpr int kFramesPerSecond = 10;

/// Fundamental plus this many higher harmonics are computed each sample:
/// three at 200 kHz, seven at 100 kHz.
std::size_t harmonic_capacity(double f_d) noexcept;

/// One smoothing step of the analogue output towards clamp(s*r/1000, 0, 3.3) V.
double analogue_output_update(double value, double r_mv, double output_gain, double dt,
                              double cutoff_hz = 1.59);

/// The virtual instrument. Time is simulated: advance() runs the sample
/// loop and calls the frame sink every 0.1 s. Commands are applied between
/// samples, never inside one.
class Emulator {
public:
  explicit Emulator(EmulatorOptions options = {}, InstrumentConfig config = {});

  void set_frame_sink(FrameSink sink) { sink_ = std::move(sink); }
  void set_signal(const signal::SignalSpec& spec);
  /// TTL on the external reference input; nullopt disconnects it.
  void set_ttl(std::optional<signal::TtlReference> ttl);

  CommandResult apply_command(const protocol::Command& command);
  /// Parses and applies one protocol line. Invalid lines change nothing.
  CommandResult apply_line(std::string_view line);

  /// Runs every sample and frame up to t_end. A frame due exactly at t_end is
  /// emitted; a sample due exactly at t_end is left for the next call.
  void advance_to(double t_end);
  void advance(double seconds) { advance_to(now_ + seconds); }

  double time() const noexcept { return now_; }
  std::uint64_t samples_processed() const noexcept { return samples_; }
  const InstrumentConfig& config() const noexcept { return config_; }
  const EmulatorOptions& options() const noexcept { return options_; }
  bool lock_failure() const noexcept { return lock_failure_; }
  double analogue_output() const noexcept { return analogue_out_; }
  std::size_t harmonic_capacity() const noexcept { return harmonic_capacity_; }

  /// Frame describing the current state (the clip latch is not cleared).
  protocol::OutputFrame snapshot() const;
  std::vector<HarmonicOutput> harmonics() const;

private:
  enum class Clock { Internal, External, Stopped };

  void rebuild_demodulator(bool keep_fundamental);
  void reset_processing();
  void plan_internal_schedule();
  void start_internal_clock();
  CommandResult query_external();
  void lock_to(const signal::TtlReference& ttl, const timing::ExternalSchedule& schedule);
  void configure_interval(double dt);

  double next_sample_time() const noexcept;
  void process_sample(double t, std::uint64_t n);
  void emit_frame();
  signal::ReferenceContext reference_context() const noexcept;

  EmulatorOptions options_;
  InstrumentConfig config_;
  FrameSink sink_;

  signal::SignalSource source_;
  std::optional<signal::TtlReference> ttl_;

  timing::InternalSchedule internal_{};
  std::optional<timing::ExternalSchedule> external_;
  double last_undersampling_ = 0.5;
  bool lock_failure_ = false;

  Clock clock_ = Clock::Internal;
  std::uint64_t next_n_ = 0;      ///< sample index of the next sample on the active clock
  double ext_origin_ = 0.0;       ///< time of external sample 0
  double ext_rate_ = 0.0;         ///< true external sample rate
  double sample_interval_ = 0.0;  ///< nominal spacing of the active clock

  double now_ = 0.0;
  std::uint64_t next_frame_ = 1;
  std::uint64_t samples_ = 0;

  dsp::FilterCoefficient coefficient_{};
  std::optional<dsp::Demodulator> demod_;
  dsp::SyncAccumulator sync_{};
  dsp::SyncOutput sync_out_{};
  dsp::NoiseTracker noise_{};
  double noise_sd_ = 0.0;
  std::size_t harmonic_capacity_ = 3;

  frontend::FrontEndState frontend_{};
  double substep_decay_ = 0.0;
  std::vector<double> substep_inputs_;
  bool clip_latch_ = false;

  double analogue_out_ = 0.0;
  double analogue_decay_ = 1.0;
};

} // namespace olia::emulator

#endif // OLIA_EMULATOR_HPP
