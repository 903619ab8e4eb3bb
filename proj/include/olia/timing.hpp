#ifndef OLIA_TIMING_HPP
#define OLIA_TIMING_HPP

#include <cstdint>
#include <span>

namespace olia::timing {

inline constexpr double kMaxDigitisationRate = 200000.0; // Hz
inline constexpr double kMinReferenceFrequency = 1.0;    // Hz
inline constexpr double kMaxReferenceFrequency = 50000.0;
inline constexpr double kDefaultMeasurementWindow = 0.5; // s

/// Internal referencing: the reference is an exact integer fraction of f_d.
struct InternalSchedule {
  double f_d = kMaxDigitisationRate;
  std::uint32_t m = 200;
  double f_r_actual = 1000.0;
};

/// External referencing: the 64x multiplied TTL clock, sampled on both
/// edges (N = 0.5) or on every Nth rising edge.
struct ExternalSchedule {
  double f_ext = 0.0;
  std::uint32_t samples_per_period = 128; // 64 / N
  double undersampling = 0.5;             // N
  double f_d_effective = 0.0;             // samples_per_period * f_ext
};

/// m = nearest integer to f_d / f_requested, at least 3. Rejects requests
/// outside [1 Hz, 50 kHz] and non-positive f_d.
InternalSchedule plan_internal(double f_requested, double f_d = kMaxDigitisationRate);

/// Picks the undersampling rung for f_ext (upper bounds inclusive):
/// N = 0.5 up to 1562.5 Hz, then 1, 2, 4, 8, 16 up to 50 kHz.
ExternalSchedule plan_external(double f_ext);

/// Logic level of the square-wave reference output at sample n: high while
/// n mod m lies in [0, m/2).
bool reference_square(std::uint64_t n, std::uint32_t m);

/// Lock range of the simulated frequency multiplier. `tuned` stands in for
/// the hand-adjusted loop potentiometer.
struct LockRange {
  double min_hz = 130.0;
  double max_hz = 6000.0;
  bool tuned = true;

  bool accepts(double f) const noexcept { return tuned && f >= min_hz && f <= max_hz; }
};

enum class LockStatus { Locked, TooFewEdges, OutOfRange, Untuned };

struct FrequencyMeasurement {
  double hz = 0.0;
  LockStatus status = LockStatus::TooFewEdges;

  bool locked() const noexcept { return status == LockStatus::Locked; }
};

/// Counts rising edges falling in [window_start, window_start + window) and
/// divides by the window length.
FrequencyMeasurement measure_external_frequency(std::span<const double> rising_edges,
                                                double window_start, double window,
                                                const LockRange& lock = {});

const char* to_string(LockStatus status) noexcept;

} // namespace olia::timing

#endif // OLIA_TIMING_HPP
