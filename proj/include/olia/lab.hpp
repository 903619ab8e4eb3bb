#ifndef OLIA_LAB_HPP
#define OLIA_LAB_HPP

// Bench experiments on the simulated instrument: each one builds scenarios,
// runs them and reduces the frames to the quantities a bench user would
// read off (settled amplitude, fitted time constant, response curves).

#include <cstdint>
#include <span>
#include <vector>

#include "olia/emulator.hpp"
#include "olia/scenario.hpp"
#include "olia/signal.hpp"
#include "olia/timing.hpp"

namespace olia::lab {

using emulator::TimedFrame;

/// Device options plus the settings every run of an experiment starts from.
struct Bench {
  emulator::EmulatorOptions options;
  emulator::InstrumentConfig config;
};

scenario::Result run_scenario(const Bench& bench, const signal::SignalSpec& spec, double duration,
                              std::uint64_t seed = 0);

struct Settled {
  double r = 0.0;   ///< mean of the per-frame R(1)
  double phi = 0.0; ///< phase of the mean (X, Y)
  double x = 0.0;
  double y = 0.0;
  double s = 0.0;   ///< mean noise estimate
  std::size_t frames = 0;
  double t_begin = 0.0;
  double t_end = 0.0;
};

/// Mean over frames with t_begin <= t <= t_end. Throws if none qualify.
Settled average_frames(std::span<const TimedFrame> frames, double t_begin, double t_end);

/// The final 10% of the run's frames, never earlier than 10 tau. If
/// beat_period > 0 the window is widened backwards to a whole number of beat
/// periods (at least one).
Settled settled_value(std::span<const TimedFrame> frames, double tau, double beat_period = 0.0);

// --- step response ---------------------------------------------------------

struct StepFit {
  double r_inf = 0.0;
  double tau_star = 0.0;
  double residual_norm = 0.0; ///< sqrt of the sum of squared residuals
  int iterations = 0;
};

/// Damped least squares fit of r_inf * (1 - exp(-t/tau)(1 + t/tau)) to
/// (t, r), t measured from the step. Starts from the last value and the
/// 26.4% crossing. Throws Error(Convergence) if the fit does not settle.
StepFit fit_step_response(std::span<const double> t, std::span<const double> r);
/// Same, on frames after t0 (the step time).
StepFit fit_step_response(std::span<const TimedFrame> frames, double t0);

struct StepExperiment {
  double tau = 0.0;
  StepFit fit;
  std::vector<TimedFrame> frames;
};

/// A sine of `amplitude` at the reference frequency switched on at t_on,
/// recorded for 10 tau afterwards plus one second.
StepExperiment step_experiment(const Bench& bench, double tau, double amplitude, double t_on = 0.0);

// --- frequency selectivity -------------------------------------------------

/// Response of two cascaded one-pole stages to a detuning df: 1/(1+(2 pi df tau)^2).
double cascade_response(double detuning, double tau) noexcept;

struct ResponsePoint {
  double f_s = 0.0;
  double detuning = 0.0;
  double r = 0.0;
  double normalized = 0.0;
};

struct FrequencyResponse {
  double peak = 0.0;
  std::vector<ResponsePoint> points;
  double half_width_1pct = 0.0; ///< detuning where the response falls to 1% of the peak
};

/// Runs one scenario per input frequency with the reference at f_r (which
/// must be exactly reachable) and normalises by the response at f_s = f_r.
FrequencyResponse frequency_response_sweep(const Bench& bench, double f_r, std::span<const double> f_list,
                                           double tau, double amplitude);

/// Detuning at which the normalised response first drops to 1%, by
/// log-linear interpolation between the bracketing points.
double one_percent_half_width(std::span<const ResponsePoint> points);

// --- harmonics -------------------------------------------------------------

struct HarmonicPoint {
  int k = 0;
  double r = 0.0;
};

/// Amplitude at harmonics 1..k_max of a square wave with the reference at
/// its frequency. Harmonic k comes from the channel demodulating at exactly
/// k times the reference. Rejects k_max * f at or above f_d / 2 and square
/// frequencies that are not f_d / m for an integer m.
std::vector<HarmonicPoint> harmonic_table(const Bench& bench, const signal::Square& square, int k_max, double tau);

// --- noise -----------------------------------------------------------------

struct SnrPoint {
  double snr = 0.0; ///< sine amplitude / noise rms
  double noise_rms = 0.0;
  std::uint64_t seed = 0;
  double r = 0.0;
  double error_pct = 0.0; ///< relative to the noise-free run
};

struct SnrSweep {
  double baseline_r = 0.0;
  std::vector<SnrPoint> points;
};

SnrSweep snr_sweep(const Bench& bench, const signal::Sine& sine, std::span<const double> noise_rms_list,
                   double tau, std::span<const std::uint64_t> seeds, double duration);

// --- frequency roll-off ----------------------------------------------------

struct RolloffPoint {
  double f = 0.0;
  double r = 0.0;
  double normalized = 0.0;
};

/// Locked amplitude at each frequency (reference set to it, sine at the
/// planned f_r exactly), normalised to the point at f_norm.
std::vector<RolloffPoint> rolloff_sweep(const Bench& bench, std::span<const double> frequencies, double amplitude,
                                        double tau, double f_norm = 1000.0);

// --- phase -----------------------------------------------------------------

struct PhasePoint {
  double input_phase = 0.0; ///< rad
  double phi = 0.0;         ///< settled phase, rad
  double r = 0.0;
};

struct PhaseSweep {
  std::vector<PhasePoint> points;
  double slope = 0.0;      ///< least squares d(phi)/d(input)
  double offset = 0.0;     ///< intercept, rad
  double r_spread = 0.0;   ///< (max R - min R) / mean R
};

PhaseSweep phase_sweep(const Bench& bench, std::span<const double> input_phases, double amplitude, double tau);

/// Settled phase with the instrument's own square-wave reference output
/// connected to the input: the systematic offset to subtract.
double calibrate_phase_offset(const Bench& bench, double amplitude = 100.0, double tau = 0.6);

// --- filter latency --------------------------------------------------------

struct LatencyResult {
  double sync_settled = 0.0; ///< s after onset until sync mode output is within 0.5% for good
  double exp_t995 = 0.0;     ///< s after onset until exponential mode first reaches 99.5%
  double exp_t9995 = 0.0;    ///< same for 99.95%
};

LatencyResult latency_comparison(const Bench& bench, double f, double amplitude, double tau_exp, double onset);

// --- external referencing --------------------------------------------------

struct ExternalComparison {
  double internal_r = 0.0;
  double external_r = 0.0;
  double relative_difference = 0.0;
  std::uint32_t samples_per_period = 0;
  double undersampling = 0.0;
};

/// The same sine measured with the internal reference and with a TTL
/// reference at the same frequency.
ExternalComparison external_vs_internal(const Bench& bench, double f, double amplitude, double tau);

} // namespace olia::lab

#endif // OLIA_LAB_HPP
