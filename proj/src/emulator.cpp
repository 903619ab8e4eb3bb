#include "olia/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "olia/error.hpp"

namespace olia::emulator {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

} // namespace

void validate(const InstrumentConfig& c) {
  if (!(c.f_d > 0.0 && c.f_d <= timing::kMaxDigitisationRate)) {
    throw Error(ErrorCode::OutOfRange, "digitisation rate must lie in (0, 200000] Hz");
  }
  if (!(c.requested_f_r >= timing::kMinReferenceFrequency && c.requested_f_r <= timing::kMaxReferenceFrequency)) {
    throw Error(ErrorCode::OutOfRange, "reference frequency outside [1, 50000] Hz");
  }
  if (!(c.tau >= protocol::kMinTimeConstant && c.tau <= protocol::kMaxTimeConstant)) {
    throw Error(ErrorCode::OutOfRange, "time constant outside [0.01, 10] s");
  }
  if (c.lowest_harmonic < protocol::kMinLowestHarmonic || c.lowest_harmonic > protocol::kMaxLowestHarmonic) {
    throw Error(ErrorCode::OutOfRange, "lowest higher harmonic must be >= 2");
  }
  if (!(c.output_gain >= 0.0 && c.output_gain <= protocol::kMaxOutputGain)) {
    throw Error(ErrorCode::OutOfRange, "output gain outside [0, 1e6]");
  }
}

std::size_t harmonic_capacity(double f_d) noexcept {
  // Four channels fit a 5 us sample interval.
  const auto channels = static_cast<std::size_t>(std::floor(4.0 * timing::kMaxDigitisationRate / f_d + 1e-9));
  return std::max<std::size_t>(channels, 4) - 1;
}

double analogue_output_update(double value, double r_mv, double output_gain, double dt, double cutoff_hz) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "time step must be positive");
  const double target = std::clamp(output_gain * r_mv / 1000.0, 0.0, frontend::kSupplyVolts);
  const double decay = std::exp(-2.0 * std::numbers::pi * cutoff_hz * dt);
  return target + decay * (value - target);
}

Emulator::Emulator(EmulatorOptions options, InstrumentConfig config)
    : options_(options), config_(config) {
  validate(config_);
  if (options_.aa_substeps < 1) throw Error(ErrorCode::InvalidArgument, "anti-alias sub-steps must be >= 1");
  if (!(options_.f_aa > 0.0)) throw Error(ErrorCode::InvalidArgument, "anti-alias cutoff must be positive");
  if (!(options_.measurement_window > 0.0)) throw Error(ErrorCode::InvalidArgument, "measurement window must be positive");
  if (!(options_.adc_noise_rms_mv >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ADC noise must be non-negative");
  frontend_.f_aa = options_.f_aa;
  substep_inputs_.assign(static_cast<std::size_t>(options_.aa_substeps), 0.0);
  harmonic_capacity_ = emulator::harmonic_capacity(config_.f_d);

  if (config_.mode == ReferenceMode::Internal) {
    plan_internal_schedule();
    start_internal_clock();
  } else {
    // External mode starts unlocked until the reference is measured.
    plan_internal_schedule();
    clock_ = Clock::Stopped;
    lock_failure_ = true;
  }
  rebuild_demodulator(false);
}

void Emulator::set_signal(const signal::SignalSpec& spec) { source_ = signal::SignalSource(spec); }

void Emulator::set_ttl(std::optional<signal::TtlReference> ttl) {
  ttl_ = ttl;
  if (config_.mode != ReferenceMode::External || clock_ != Clock::External) return;
  // The multiplier follows the new input if it can; N stays as planned.
  if (ttl_ && options_.pll.accepts(ttl_->frequency)) {
    lock_to(*ttl_, *external_);
  } else {
    clock_ = Clock::Stopped;
    lock_failure_ = true;
  }
}

void Emulator::plan_internal_schedule() { internal_ = timing::plan_internal(config_.requested_f_r, config_.f_d); }

void Emulator::start_internal_clock() {
  clock_ = Clock::Internal;
  next_n_ = static_cast<std::uint64_t>(std::ceil(now_ * config_.f_d));
  while (static_cast<double>(next_n_) / config_.f_d < now_) ++next_n_;
  configure_interval(1.0 / config_.f_d);
}

void Emulator::configure_interval(double dt) {
  sample_interval_ = dt;
  substep_decay_ = std::exp(-2.0 * std::numbers::pi * options_.f_aa * dt / options_.aa_substeps);
  analogue_decay_ = std::exp(-2.0 * std::numbers::pi * options_.analogue_cutoff * dt);
}

void Emulator::rebuild_demodulator(bool keep_fundamental) {
  const bool external = config_.mode == ReferenceMode::External && external_.has_value();
  const std::uint32_t m = external ? external_->samples_per_period : internal_.m;
  const double rate = external ? external_->f_d_effective : config_.f_d;
  coefficient_ = dsp::compute_alpha(config_.tau, rate);

  std::vector<std::uint32_t> harmonics{1};
  for (std::size_t i = 0; i < harmonic_capacity_; ++i) {
    harmonics.push_back(static_cast<std::uint32_t>(config_.lowest_harmonic) + static_cast<std::uint32_t>(i));
  }
  std::optional<dsp::HarmonicChannel> fundamental;
  if (keep_fundamental && demod_ && demod_->samples_per_period() == m) fundamental = demod_->channels()[0];
  demod_.emplace(m, std::move(harmonics), coefficient_.alpha);
  if (fundamental) demod_->channels()[0] = *fundamental;
  sync_.m = m;
}

void Emulator::reset_processing() {
  rebuild_demodulator(false);
  sync_.reset();
  sync_out_ = {};
  noise_.reset();
  noise_sd_ = 0.0;
}

CommandResult Emulator::apply_line(std::string_view line) {
  try {
    return apply_command(protocol::parse_command(line));
  } catch (const Error& e) {
    return {false, e.what()};
  }
}

CommandResult Emulator::apply_command(const protocol::Command& command) {
  namespace cmd = protocol::cmd;
  try {
    return std::visit(
        overloaded{
            [&](const cmd::ToggleSyncFilter&) -> CommandResult {
              config_.sync_filter = !config_.sync_filter;
              reset_processing();
              return {};
            },
            [&](const cmd::ToggleReferenceMode&) -> CommandResult {
              if (config_.mode == ReferenceMode::Internal) {
                config_.mode = ReferenceMode::External;
                external_.reset();
                clock_ = Clock::Stopped;
                lock_failure_ = true;
              } else {
                config_.mode = ReferenceMode::Internal;
                external_.reset();
                lock_failure_ = false;
                plan_internal_schedule();
                start_internal_clock();
              }
              reset_processing();
              return {};
            },
            [&](const cmd::SetFrequency& c) -> CommandResult {
              const auto schedule = timing::plan_internal(c.hz, config_.f_d);
              config_.requested_f_r = c.hz;
              if (config_.mode == ReferenceMode::Internal) {
                internal_ = schedule;
                reset_processing();
              }
              return {};
            },
            [&](const cmd::SetInputGain& c) -> CommandResult {
              config_.gain = frontend::PgaSetting(c.n);
              reset_processing();
              return {};
            },
            [&](const cmd::SetTimeConstant& c) -> CommandResult {
              const double rate = (config_.mode == ReferenceMode::External && external_)
                                      ? external_->f_d_effective
                                      : config_.f_d;
              dsp::compute_alpha(c.s, rate); // rejects before any state changes
              config_.tau = c.s;
              reset_processing();
              return {};
            },
            [&](const cmd::SetOutputGain& c) -> CommandResult {
              config_.output_gain = c.x;
              return {};
            },
            [&](const cmd::SetLowestHarmonic& c) -> CommandResult {
              config_.lowest_harmonic = c.n;
              rebuild_demodulator(true);
              return {};
            },
            [&](const cmd::QueryExternalFrequency&) -> CommandResult { return query_external(); },
        },
        command);
  } catch (const Error& e) {
    return {false, e.what()};
  }
}

CommandResult Emulator::query_external() {
  if (config_.mode != ReferenceMode::External) {
    return {false, "'c' ignored: only used in external reference mode"};
  }
  const double window = options_.measurement_window;
  const auto edges = ttl_ ? ttl_->rising_edges(now_ - window, now_) : std::vector<double>{};
  const auto measured = timing::measure_external_frequency(edges, now_ - window, window, options_.pll);
  if (!measured.locked() || !options_.pll.accepts(ttl_->frequency)) {
    clock_ = Clock::Stopped;
    lock_failure_ = true;
    external_.reset();
    reset_processing();
    return {false, std::string("lock failure: ") +
                       timing::to_string(measured.locked() ? timing::LockStatus::OutOfRange : measured.status)};
  }
  timing::ExternalSchedule schedule;
  try {
    schedule = timing::plan_external(measured.hz);
  } catch (const Error& e) {
    clock_ = Clock::Stopped;
    lock_failure_ = true;
    external_.reset();
    reset_processing();
    return {false, std::string("lock failure: ") + e.what()};
  }
  lock_to(*ttl_, schedule);
  return {};
}

void Emulator::lock_to(const signal::TtlReference& ttl, const timing::ExternalSchedule& schedule) {
  external_ = schedule;
  last_undersampling_ = schedule.undersampling;
  lock_failure_ = false;
  clock_ = Clock::External;
  // The sample clock is the multiplied TTL itself, so it runs at the true
  // reference rate even though the plan used the measured frequency.
  ext_rate_ = schedule.samples_per_period * ttl.frequency;
  ext_origin_ = ttl.next_rising_edge(now_);
  next_n_ = 0;
  configure_interval(1.0 / ext_rate_);
  reset_processing();
}

double Emulator::next_sample_time() const noexcept {
  switch (clock_) {
    case Clock::Internal: return static_cast<double>(next_n_) / config_.f_d;
    case Clock::External: return ext_origin_ + static_cast<double>(next_n_) / ext_rate_;
    case Clock::Stopped: return kInf;
  }
  return kInf;
}

signal::ReferenceContext Emulator::reference_context() const noexcept {
  signal::ReferenceContext ref;
  switch (clock_) {
    case Clock::Internal:
      ref.origin = 0.0;
      ref.tick_period = 1.0 / config_.f_d;
      ref.samples_per_period = internal_.m;
      break;
    case Clock::External:
      ref.origin = ext_origin_;
      ref.tick_period = 1.0 / ext_rate_;
      ref.samples_per_period = external_->samples_per_period;
      break;
    case Clock::Stopped:
      ref.active = false;
      break;
  }
  return ref;
}

void Emulator::advance_to(double t_end) {
  if (!(t_end >= now_)) return;
  for (;;) {
    const double t_frame = static_cast<double>(next_frame_) / kFramesPerSecond;
    const double t_sample = next_sample_time();
    if (t_frame <= t_sample) {
      if (t_frame > t_end) break;
      now_ = t_frame;
      emit_frame();
      ++next_frame_;
    } else {
      if (t_sample >= t_end) break;
      now_ = t_sample;
      process_sample(t_sample, next_n_);
      ++next_n_;
    }
  }
  now_ = t_end;
}

void Emulator::process_sample(double t, std::uint64_t n) {
  const auto ref = reference_context();
  double s_mv = 0.0;
  if (options_.frontend_bypass) {
    s_mv = source_.sample(t, &ref);
  } else {
    // Input held at each sub-step midpoint across the previous interval.
    const double h = sample_interval_ / options_.aa_substeps;
    source_.sample_block(t - sample_interval_ + 0.5 * h, h, substep_inputs_, &ref);
    for (const double v_mv : substep_inputs_) {
      frontend::condition_with_decay(frontend_, v_mv * 1e-3, config_.gain, substep_decay_);
    }
    double v_adc = frontend_.aa_state;
    if (options_.adc_noise_rms_mv > 0.0) {
      v_adc += options_.adc_noise_rms_mv * 1e-3 * signal::gaussian_draw(options_.adc_noise_seed, samples_);
    }
    const auto sample = frontend::adc_sample(v_adc);
    frontend_.clip_low = sample.clip_low;
    frontend_.clip_high = sample.clip_high;
    clip_latch_ = clip_latch_ || sample.clip_low || sample.clip_high;
    if (!config_.gain.off()) s_mv = frontend::code_to_signal(sample.code, config_.gain);
  }

  demod_->update(s_mv, n);
  double x = 0.0;
  double y = 0.0;
  if (config_.sync_filter) {
    const auto [x0, y0] = dsp::mix(s_mv, demod_->fundamental(n));
    if (const auto out = dsp::sync_update(sync_, x0, y0)) sync_out_ = *out;
    x = sync_out_.x;
    y = sync_out_.y;
  } else {
    const auto& fundamental = demod_->channels()[0];
    x = fundamental.x2;
    y = fundamental.y2;
  }
  const double r = std::sqrt(x * x + y * y);
  noise_sd_ = dsp::noise_update(noise_, r, coefficient_.alpha);

  const double target = std::clamp(config_.output_gain * r / 1000.0, 0.0, frontend::kSupplyVolts);
  analogue_out_ = target + analogue_decay_ * (analogue_out_ - target);
  ++samples_;
}

protocol::OutputFrame Emulator::snapshot() const {
  protocol::OutputFrame f;
  f.error_indicator = (clip_latch_ ? 1 : 0) | (lock_failure_ ? 2 : 0);
  f.output_gain = config_.output_gain;
  f.input_gain = config_.gain.gain();
  f.sync_filter = config_.sync_filter;
  f.external_reference = config_.mode == ReferenceMode::External;
  if (config_.mode == ReferenceMode::Internal) {
    f.samples_per_period = static_cast<int>(internal_.m);
    f.f_d = internal_.f_d;
    f.f_r = internal_.f_r_actual;
    f.undersampling = 0.0;
  } else if (external_ && clock_ == Clock::External) {
    f.samples_per_period = static_cast<int>(external_->samples_per_period);
    f.f_d = external_->f_d_effective;
    f.f_r = external_->f_ext;
    f.undersampling = external_->undersampling;
  } else {
    f.undersampling = last_undersampling_;
  }
  f.tau = config_.tau;

  double x = 0.0;
  double y = 0.0;
  if (config_.sync_filter) {
    x = sync_out_.x;
    y = sync_out_.y;
  } else {
    x = demod_->channels()[0].x2;
    y = demod_->channels()[0].y2;
  }
  const auto fundamental = dsp::amplitude_phase(x, y);
  f.r1 = fundamental.r2;
  f.phi1 = fundamental.phi2;
  f.x1 = x;
  f.y1 = y;
  f.s1 = noise_sd_;
  const auto channels = demod_->channels();
  for (std::size_t i = 0; i < 3 && i + 1 < channels.size(); ++i) {
    f.xn[i] = channels[i + 1].x2;
    f.yn[i] = channels[i + 1].y2;
  }
  f.lowest_harmonic = config_.lowest_harmonic;
  return f;
}

std::vector<HarmonicOutput> Emulator::harmonics() const {
  std::vector<HarmonicOutput> out;
  for (const auto& ch : demod_->channels().subspan(1)) out.push_back({ch.k, ch.x2, ch.y2});
  return out;
}

void Emulator::emit_frame() {
  TimedFrame frame{next_frame_, static_cast<double>(next_frame_) / kFramesPerSecond, snapshot()};
  clip_latch_ = false;
  if (sink_) sink_(frame);
}

} // namespace olia::emulator
