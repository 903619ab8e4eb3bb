#include "olia/dsp.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "olia/error.hpp"

namespace olia::dsp {

namespace {

// Shared by reference_pair and the Demodulator table so both agree bit-for-bit.
inline double phase_angle(std::uint64_t j, std::uint32_t m) noexcept {
  return 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m);
}

inline std::uint64_t phase_index(std::uint64_t n, std::uint32_t m, std::uint32_t k) noexcept {
  return (static_cast<std::uint64_t>(k % m) * (n % m)) % m;
}

} // namespace

FilterCoefficient compute_alpha(double tau, double f_d) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::InvalidArgument, "time constant must be positive, got " + std::to_string(tau));
  }
  if (!(f_d > 0.0) || !std::isfinite(f_d)) {
    throw Error(ErrorCode::InvalidArgument, "digitisation rate must be positive, got " + std::to_string(f_d));
  }
  const double f_c = 1.0 / (2.0 * std::numbers::pi * tau);
  if (f_c >= f_d / 2.0) {
    throw Error(ErrorCode::OutOfRange, "filter cutoff " + std::to_string(f_c) +
                                           " Hz is not below half the digitisation rate");
  }
  const double gamma = 2.0 * std::numbers::pi * f_c / f_d;
  const double half = std::sin(gamma / 2.0);
  const double c = 2.0 * half * half;
  const double alpha = -c + std::sqrt(c * (2.0 + c));
  return {alpha, tau, f_d};
}

QuadraturePair reference_pair(std::uint64_t n, std::uint32_t m, std::uint32_t k) {
  if (m < 3) throw Error(ErrorCode::InvalidArgument, "samples per period must be at least 3");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "harmonic number must be at least 1");
  const double angle = phase_angle(phase_index(n, m, k), m);
  return {2.0 * std::sin(angle), 2.0 * std::cos(angle)};
}

void demod_update(std::span<HarmonicChannel> channels, double s, std::uint64_t n,
                  std::uint32_t m, double alpha) {
  for (auto& ch : channels) {
    const auto [x0, y0] = mix(s, reference_pair(n, m, ch.k));
    ch.x1 = filter_step(ch.x1, x0, alpha);
    ch.y1 = filter_step(ch.y1, y0, alpha);
    ch.x2 = filter_step(ch.x2, ch.x1, alpha);
    ch.y2 = filter_step(ch.y2, ch.y1, alpha);
  }
}

DemodOutput amplitude_phase(double x2, double y2) noexcept {
  DemodOutput out{x2, y2, std::hypot(x2, y2), 0.0};
  if (x2 != 0.0 || y2 != 0.0) {
    out.phi2 = std::atan2(y2, x2);
    // atan2 returns -pi for (negative, -0.0); the convention here is (-pi, pi].
    if (out.phi2 == -std::numbers::pi) out.phi2 = std::numbers::pi;
  }
  return out;
}

std::optional<SyncOutput> sync_update(SyncAccumulator& acc, double x0, double y0) noexcept {
  acc.sum_x += x0;
  acc.sum_y += y0;
  if (++acc.count < acc.m) return std::nullopt;
  const double m = static_cast<double>(acc.m);
  SyncOutput out{acc.sum_x / m, acc.sum_y / m};
  acc.reset();
  return out;
}

double noise_update(NoiseTracker& tracker, double r2, double alpha) noexcept {
  const double deviation = r2 - tracker.mean_r;
  tracker.mean_r += alpha * deviation;
  tracker.var_r = (1.0 - alpha) * (tracker.var_r + alpha * deviation * deviation);
  if (tracker.var_r < 0.0) tracker.var_r = 0.0;
  return std::sqrt(tracker.var_r);
}

double step_response_model(double t, double tau, double r_inf) noexcept {
  const double x = t / tau;
  return r_inf * (1.0 - std::exp(-x) * (1.0 + x));
}

Demodulator::Demodulator(std::uint32_t m, std::vector<std::uint32_t> harmonics, double alpha)
    : m_(m), alpha_(alpha), sin_table_(m), cos_table_(m) {
  if (m < 3) throw Error(ErrorCode::InvalidArgument, "samples per period must be at least 3");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1]");
  for (std::uint32_t j = 0; j < m; ++j) {
    const double angle = phase_angle(j, m);
    sin_table_[j] = 2.0 * std::sin(angle);
    cos_table_[j] = 2.0 * std::cos(angle);
  }
  channels_.reserve(harmonics.size());
  for (auto k : harmonics) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "harmonic number must be at least 1");
    channels_.push_back(HarmonicChannel{k});
  }
}

void Demodulator::update(double s, std::uint64_t n) noexcept {
  const std::uint64_t base = n % m_;
  for (auto& ch : channels_) {
    const std::uint64_t j = (static_cast<std::uint64_t>(ch.k % m_) * base) % m_;
    const double x0 = sin_table_[j] * s;
    const double y0 = cos_table_[j] * s;
    ch.x1 = filter_step(ch.x1, x0, alpha_);
    ch.y1 = filter_step(ch.y1, y0, alpha_);
    ch.x2 = filter_step(ch.x2, ch.x1, alpha_);
    ch.y2 = filter_step(ch.y2, ch.y1, alpha_);
  }
}

QuadraturePair Demodulator::fundamental(std::uint64_t n) const noexcept {
  const std::uint64_t j = n % m_;
  return {sin_table_[j], cos_table_[j]};
}

void Demodulator::reset() noexcept {
  for (auto& ch : channels_) ch.reset();
}

} // namespace olia::dsp
