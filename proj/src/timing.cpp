#include "olia/timing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "olia/error.hpp"

namespace olia::timing {

InternalSchedule plan_internal(double f_requested, double f_d) {
  if (!(f_d > 0.0) || !std::isfinite(f_d)) {
    throw Error(ErrorCode::InvalidArgument, "digitisation rate must be positive");
  }
  if (!(f_requested >= kMinReferenceFrequency && f_requested <= kMaxReferenceFrequency)) {
    throw Error(ErrorCode::OutOfRange, "reference frequency " + std::to_string(f_requested) +
                                           " Hz outside [1, 50000] Hz");
  }
  const double ratio = std::round(f_d / f_requested);
  const auto m = static_cast<std::uint32_t>(std::max(3.0, ratio));
  return {f_d, m, f_d / static_cast<double>(m)};
}

ExternalSchedule plan_external(double f_ext) {
  if (!(f_ext > 0.0) || !std::isfinite(f_ext)) {
    throw Error(ErrorCode::InvalidArgument, "external reference frequency must be positive");
  }
  struct Rung {
    double upper_hz;
    double n;
    std::uint32_t samples;
  };
  static constexpr std::array<Rung, 6> kLadder{{
      {1562.5, 0.5, 128},
      {3125.0, 1.0, 64},
      {6250.0, 2.0, 32},
      {12500.0, 4.0, 16},
      {25000.0, 8.0, 8},
      {50000.0, 16.0, 4},
  }};
  for (const auto& rung : kLadder) {
    if (f_ext <= rung.upper_hz) {
      return {f_ext, rung.samples, rung.n, rung.samples * f_ext};
    }
  }
  throw Error(ErrorCode::OutOfRange, "external reference " + std::to_string(f_ext) +
                                         " Hz is above 50 kHz");
}

bool reference_square(std::uint64_t n, std::uint32_t m) {
  if (m < 3) throw Error(ErrorCode::InvalidArgument, "samples per period must be at least 3");
  // n mod m < m/2, kept in integers: 2 * (n mod m) < m.
  return 2 * (n % m) < m;
}

FrequencyMeasurement measure_external_frequency(std::span<const double> rising_edges,
                                                double window_start, double window,
                                                const LockRange& lock) {
  if (!(window > 0.0)) throw Error(ErrorCode::InvalidArgument, "measurement window must be positive");
  const double window_end = window_start + window;
  const auto count = std::count_if(rising_edges.begin(), rising_edges.end(), [&](double t) {
    return t >= window_start && t < window_end;
  });
  FrequencyMeasurement out;
  out.hz = static_cast<double>(count) / window;
  if (count < 2) {
    out.status = LockStatus::TooFewEdges;
  } else if (!lock.tuned) {
    out.status = LockStatus::Untuned;
  } else if (!lock.accepts(out.hz)) {
    out.status = LockStatus::OutOfRange;
  } else {
    out.status = LockStatus::Locked;
  }
  return out;
}

const char* to_string(LockStatus status) noexcept {
  switch (status) {
    case LockStatus::Locked: return "locked";
    case LockStatus::TooFewEdges: return "fewer than two reference edges";
    case LockStatus::OutOfRange: return "reference outside multiplier lock range";
    case LockStatus::Untuned: return "multiplier not tuned";
  }
  return "unknown";
}

} // namespace olia::timing
