#ifndef OLIA_DSP_HPP
#define OLIA_DSP_HPP

// Dual-phase lock-in demodulation: reference synthesis, mixing, two cascaded
// exponential filters, synchronous (one-period) averaging, amplitude/phase
// extraction and the exponentially weighted noise estimate. Everything runs
// in double precision and every stateful piece starts at exactly zero.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace olia::dsp {

/// Weight of the exponential filter together with the settings it came from.
struct FilterCoefficient {
  double alpha = 1.0;
  double tau = 0.0; // s
  double f_d = 0.0; // Hz
};

/// Closed-form weight for a single-pole exponential filter with cutoff
/// f_c = 1/(2*pi*tau) at digitisation rate f_d:
///   alpha = cos(g) - 1 + sqrt(cos(g)^2 - 4 cos(g) + 3),  g = 2*pi*f_c/f_d.
/// Evaluated as -c + sqrt(c*(2+c)) with c = 1 - cos(g) = 2 sin^2(g/2), which
/// is the same expression without the cancellation at small g.
/// Throws olia::Error for tau <= 0, f_d <= 0 or f_c >= f_d/2.
FilterCoefficient compute_alpha(double tau, double f_d);

struct QuadraturePair {
  double qx = 0.0;
  double qy = 0.0;
};

/// qx = 2 sin(2*pi*k*n/m), qy = 2 cos(2*pi*k*n/m). The phase index is
/// reduced modulo m in integers first, so the result does not lose accuracy
/// as n grows. Throws for m < 3 or k < 1.
QuadraturePair reference_pair(std::uint64_t n, std::uint32_t m, std::uint32_t k);

struct Mixed {
  double x0 = 0.0;
  double y0 = 0.0;
};

constexpr Mixed mix(double s, QuadraturePair q) noexcept { return {q.qx * s, q.qy * s}; }

constexpr double filter_step(double state, double input, double alpha) noexcept {
  return state + alpha * (input - state);
}

struct HarmonicChannel {
  std::uint32_t k = 1;
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  void reset() noexcept { x1 = y1 = x2 = y2 = 0.0; }
};

/// One sample through every channel: reference at (n, m, k), mix, then
/// x0 -> x1 -> x2 and y0 -> y1 -> y2.
void demod_update(std::span<HarmonicChannel> channels, double s, std::uint64_t n,
                  std::uint32_t m, double alpha);

struct DemodOutput {
  double x2 = 0.0;
  double y2 = 0.0;
  double r2 = 0.0;
  double phi2 = 0.0; // radians, (-pi, pi]
};

/// Four-quadrant amplitude and phase; (0, 0) maps to phase 0.
DemodOutput amplitude_phase(double x2, double y2) noexcept;

struct SyncAccumulator {
  double sum_x = 0.0;
  double sum_y = 0.0;
  std::uint32_t count = 0;
  std::uint32_t m = 3;

  void reset() noexcept {
    sum_x = sum_y = 0.0;
    count = 0;
  }
};

struct SyncOutput {
  double x = 0.0;
  double y = 0.0;
};

/// Adds one mixed sample; once m samples are in, returns their mean and
/// restarts the period.
std::optional<SyncOutput> sync_update(SyncAccumulator& acc, double x0, double y0) noexcept;

struct NoiseTracker {
  double mean_r = 0.0;
  double var_r = 0.0;

  void reset() noexcept { mean_r = var_r = 0.0; }
};

/// Incremental weighted mean/variance of R. The variance term uses the mean
/// from before this sample. Returns the standard deviation.
double noise_update(NoiseTracker& tracker, double r2, double alpha) noexcept;

/// Step response of two identical cascaded first-order filters:
/// r_inf * (1 - exp(-t/tau) * (1 + t/tau)).
double step_response_model(double t, double tau, double r_inf) noexcept;

/// Table-driven form of demod_update for the sample loop. The sine/cosine
/// table holds exactly the values reference_pair() produces for each phase
/// index, so both routes give bit-identical states.
class Demodulator {
public:
  Demodulator(std::uint32_t m, std::vector<std::uint32_t> harmonics, double alpha);

  /// Processes sample number n (only n mod m matters).
  void update(double s, std::uint64_t n) noexcept;

  /// Fundamental-only reference for the synchronous filter path.
  QuadraturePair fundamental(std::uint64_t n) const noexcept;

  void reset() noexcept;
  void reset_channel(std::size_t index) noexcept { channels_[index].reset(); }

  std::uint32_t samples_per_period() const noexcept { return m_; }
  double alpha() const noexcept { return alpha_; }
  std::span<const HarmonicChannel> channels() const noexcept { return channels_; }
  std::span<HarmonicChannel> channels() noexcept { return channels_; }

private:
  std::uint32_t m_;
  double alpha_;
  std::vector<double> sin_table_;
  std::vector<double> cos_table_;
  std::vector<HarmonicChannel> channels_;
};

} // namespace olia::dsp

#endif // OLIA_DSP_HPP
