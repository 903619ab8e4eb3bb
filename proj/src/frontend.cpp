#include "olia/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "olia/error.hpp"

namespace olia::frontend {

PgaSetting::PgaSetting(int gain) : gain_(gain) {
  if (!is_allowed(gain)) {
    throw Error(ErrorCode::OutOfRange,
                "input gain " + std::to_string(gain) + " not in {0,1,2,4,8,16,32,64}");
  }
}

bool PgaSetting::is_allowed(int gain) noexcept {
  return std::find(kAllowed.begin(), kAllowed.end(), gain) != kAllowed.end();
}

double condition(FrontEndState& state, double v_in, PgaSetting gain, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "time step must be positive");
  // Exact response of the RC stage to a held input over dt.
  return condition_with_decay(state, v_in, gain, std::exp(-2.0 * std::numbers::pi * state.f_aa * dt));
}

AdcSample adc_sample(double v_adc) noexcept {
  constexpr double low = kClipFraction * kSupplyVolts;
  constexpr double high = kSupplyVolts - low;
  const double clamped = std::clamp(v_adc, 0.0, kSupplyVolts);
  const auto code = static_cast<std::uint16_t>(std::lround(clamped / kSupplyVolts * kAdcMaxCode));
  return {AdcCode{code}, v_adc <= low, v_adc >= high};
}

double code_to_signal(AdcCode code, PgaSetting gain) {
  if (gain.off()) throw Error(ErrorCode::State, "input gain is 0: input disabled");
  constexpr double full_scale_mv = kSupplyVolts * 1000.0;
  constexpr double offset_mv = kOffsetVolts * 1000.0;
  return (static_cast<double>(code.value) / kAdcMaxCode * full_scale_mv - offset_mv) / gain.gain();
}

double half_lsb_mv(PgaSetting gain) {
  if (gain.off()) throw Error(ErrorCode::State, "input gain is 0: input disabled");
  return kSupplyVolts * 1000.0 / kAdcMaxCode / (2.0 * gain.gain());
}

} // namespace olia::frontend
