#ifndef OLIA_FRONTEND_HPP
#define OLIA_FRONTEND_HPP

// Behavioral model of the analogue input chain: programmable gain, +1.65 V
// level shift, one-pole 94 kHz anti-alias filter, 12-bit unipolar ADC with
// clip detection in the outer 2 % of the range.

#include <array>
#include <cstdint>

namespace olia::frontend {

inline constexpr double kSupplyVolts = 3.3;
inline constexpr double kOffsetVolts = 1.65;
inline constexpr double kAntiAliasCutoff = 94000.0; // Hz
inline constexpr int kAdcMaxCode = 4095;
inline constexpr double kClipFraction = 0.02;

/// Programmable gain: 0 ("off"), 1, 2, 4, ..., 64.
class PgaSetting {
public:
  static constexpr std::array<int, 8> kAllowed{0, 1, 2, 4, 8, 16, 32, 64};

  constexpr PgaSetting() = default;
  /// Throws olia::Error if gain is not one of kAllowed.
  explicit PgaSetting(int gain);

  static bool is_allowed(int gain) noexcept;

  constexpr int gain() const noexcept { return gain_; }
  constexpr bool off() const noexcept { return gain_ == 0; }
  friend constexpr bool operator==(PgaSetting, PgaSetting) = default;

private:
  int gain_ = 1;
};

struct AdcCode {
  std::uint16_t value = 0;
  friend constexpr bool operator==(AdcCode, AdcCode) = default;
};

struct FrontEndState {
  double aa_state = kOffsetVolts; // filter output; starts settled at zero input
  double f_aa = kAntiAliasCutoff;
  bool clip_low = false;
  bool clip_high = false;
};

/// gain * v_in + 1.65 V, then one anti-alias filter step of length dt with the
/// input held. Returns the filter output in volts.
double condition(FrontEndState& state, double v_in, PgaSetting gain, double dt);

/// condition() with the per-step decay exp(-2*pi*f_aa*dt) already computed.
inline double condition_with_decay(FrontEndState& state, double v_in, PgaSetting gain,
                                   double decay) noexcept {
  const double v1 = gain.off() ? 0.0 : gain.gain() * v_in;
  const double v2 = v1 + kOffsetVolts;
  state.aa_state = v2 + decay * (state.aa_state - v2);
  return state.aa_state;
}

struct AdcSample {
  AdcCode code;
  bool clip_low = false;
  bool clip_high = false;
};

/// Round-to-nearest 12-bit conversion of [0, 3.3] V; over-range inputs
/// saturate. Clip flags are computed on the unquantized voltage.
AdcSample adc_sample(double v_adc) noexcept;

/// Input-referred millivolts for a code. Throws for gain 0 (input off).
double code_to_signal(AdcCode code, PgaSetting gain);

/// Largest quantization error of code_to_signal(adc_sample(...)), in mV.
double half_lsb_mv(PgaSetting gain);

} // namespace olia::frontend

#endif // OLIA_FRONTEND_HPP
