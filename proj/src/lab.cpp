#include "olia/lab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "olia/dsp.hpp"
#include "olia/error.hpp"

namespace olia::lab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFramePeriod = 1.0 / emulator::kFramesPerSecond;

// The cascade still lags by 0.05% at 10 tau, so run to 20 tau and average
// the final 10% (at least five frames). Rounded up to the frame grid.
double settling_duration(double tau) {
  const double d = std::max(20.0 * tau, 10.0 * tau + 0.5);
  return std::ceil(d * emulator::kFramesPerSecond - 1e-9) / emulator::kFramesPerSecond;
}

void require_exact_reference(double f, double f_d) {
  const auto plan = timing::plan_internal(f, f_d);
  if (std::abs(plan.f_r_actual - f) > 1e-9 * f) {
    throw Error(ErrorCode::InvalidArgument, "reference " + std::to_string(f) + " Hz is not f_d/m for an integer m (nearest is " +
                                                std::to_string(plan.f_r_actual) + " Hz)");
  }
}

double frame_r(const protocol::OutputFrame& f) { return f.r1; }

} // namespace

scenario::Result run_scenario(const Bench& bench, const signal::SignalSpec& spec, double duration, std::uint64_t seed) {
  return scenario::run(scenario::single_signal(bench.options, bench.config, spec, duration), seed);
}

Settled average_frames(std::span<const TimedFrame> frames, double t_begin, double t_end) {
  Settled out;
  out.t_begin = t_begin;
  out.t_end = t_end;
  double sx = 0.0;
  double sy = 0.0;
  double sr = 0.0;
  double ss = 0.0;
  for (const auto& f : frames) {
    if (f.t < t_begin || f.t > t_end) continue;
    sr += frame_r(f.frame);
    sx += f.frame.x1;
    sy += f.frame.y1;
    ss += f.frame.s1;
    ++out.frames;
  }
  if (out.frames == 0) throw Error(ErrorCode::InvalidArgument, "no frames in the averaging window");
  const double n = static_cast<double>(out.frames);
  out.r = sr / n;
  out.x = sx / n;
  out.y = sy / n;
  out.s = ss / n;
  out.phi = std::atan2(out.y, out.x);
  return out;
}

Settled settled_value(std::span<const TimedFrame> frames, double tau, double beat_period) {
  if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "no frames");
  const std::size_t n_tail = std::max<std::size_t>(1, (frames.size() + 9) / 10);
  const double t_last = frames.back().t;
  double t_begin = std::max(frames[frames.size() - n_tail].t, 10.0 * tau);
  if (beat_period > 0.0) {
    const double beats = std::max(1.0, std::ceil((t_last - t_begin + kFramePeriod) / beat_period - 1e-9));
    // half-open window (t_last - beats * period, t_last]
    t_begin = t_last - beats * beat_period + 1e-9;
  }
  return average_frames(frames, t_begin, t_last);
}

// ---------------------------------------------------------------------------

StepFit fit_step_response(std::span<const double> t, std::span<const double> r) {
  if (t.size() != r.size() || t.size() < 3) throw Error(ErrorCode::InvalidArgument, "step fit needs at least 3 points");

  StepFit fit;
  fit.r_inf = r.back();
  if (!(std::abs(fit.r_inf) > 0.0)) throw Error(ErrorCode::Convergence, "step fit: final value is zero");
  // r reaches 1 - 2/e = 26.4% of its final value at t = tau
  const double target = (1.0 - 2.0 / std::numbers::e) * fit.r_inf;
  fit.tau_star = t.back() / 10.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (r[i] >= target) {
      if (i == 0) {
        fit.tau_star = t[0];
      } else {
        const double w = (target - r[i - 1]) / (r[i] - r[i - 1]);
        fit.tau_star = t[i - 1] + w * (t[i] - t[i - 1]);
      }
      break;
    }
  }
  if (!(fit.tau_star > 0.0)) fit.tau_star = t.back() / 10.0;

  auto sse = [&](double r_inf, double tau) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double e = r[i] - dsp::step_response_model(t[i], tau, r_inf);
      s += e * e;
    }
    return s;
  };

  double lambda = 1e-3;
  double cost = sse(fit.r_inf, fit.tau_star);
  bool converged = false;
  for (fit.iterations = 1; fit.iterations <= 500; ++fit.iterations) {
    // normal equations of the linearised problem
    double a11 = 0.0, a12 = 0.0, a22 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double x = t[i] / fit.tau_star;
      const double ex = std::exp(-x);
      const double j1 = 1.0 - ex * (1.0 + x);
      const double j2 = -fit.r_inf * x * x * ex / fit.tau_star;
      const double e = r[i] - fit.r_inf * j1;
      a11 += j1 * j1;
      a12 += j1 * j2;
      a22 += j2 * j2;
      g1 += j1 * e;
      g2 += j2 * e;
    }
    bool stepped = false;
    while (lambda < 1e12) {
      const double b11 = a11 * (1.0 + lambda);
      const double b22 = a22 * (1.0 + lambda);
      const double det = b11 * b22 - a12 * a12;
      if (det == 0.0) {
        lambda *= 10.0;
        continue;
      }
      const double d_r = (g1 * b22 - g2 * a12) / det;
      const double d_tau = (b11 * g2 - a12 * g1) / det;
      const double new_tau = fit.tau_star + d_tau;
      if (new_tau > 0.0) {
        const double new_cost = sse(fit.r_inf + d_r, new_tau);
        if (new_cost <= cost) {
          const double rel = std::abs(d_tau) / fit.tau_star + std::abs(d_r) / std::abs(fit.r_inf);
          fit.r_inf += d_r;
          fit.tau_star = new_tau;
          cost = new_cost;
          lambda = std::max(lambda / 10.0, 1e-12);
          stepped = true;
          if (rel < 1e-12) converged = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    // no downhill step left: we are at the minimum to working precision
    if (!stepped || converged) {
      converged = true;
      break;
    }
  }
  if (!converged || !(fit.tau_star > 0.0)) throw Error(ErrorCode::Convergence, "step fit did not converge");
  fit.residual_norm = std::sqrt(cost);
  return fit;
}

StepFit fit_step_response(std::span<const TimedFrame> frames, double t0) {
  std::vector<double> t;
  std::vector<double> r;
  for (const auto& f : frames) {
    if (f.t <= t0) continue;
    t.push_back(f.t - t0);
    r.push_back(f.frame.r1);
  }
  return fit_step_response(t, r);
}

StepExperiment step_experiment(const Bench& bench, double tau, double amplitude, double t_on) {
  Bench b = bench;
  b.config.tau = tau;
  const auto plan = timing::plan_internal(b.config.requested_f_r, b.config.f_d);
  const auto spec = signal::SignalSpec::step(signal::Sine{amplitude, plan.f_r_actual, 0.0}, t_on);
  StepExperiment out;
  out.tau = tau;
  out.frames = run_scenario(b, spec, t_on + 10.0 * tau + 1.0).frames;
  out.fit = fit_step_response(out.frames, t_on);
  return out;
}

// ---------------------------------------------------------------------------

double cascade_response(double detuning, double tau) noexcept {
  const double x = 2.0 * kPi * detuning * tau;
  return 1.0 / (1.0 + x * x);
}

double one_percent_half_width(std::span<const ResponsePoint> points) {
  std::vector<ResponsePoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return std::abs(a.detuning) < std::abs(b.detuning); });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const auto& lo = sorted[i - 1];
    const auto& hi = sorted[i];
    if (hi.normalized <= 0.01 && lo.normalized > 0.01) {
      const double a = std::log(lo.normalized);
      const double b = std::log(std::max(hi.normalized, 1e-300));
      const double w = (std::log(0.01) - a) / (b - a);
      return std::abs(lo.detuning) + w * (std::abs(hi.detuning) - std::abs(lo.detuning));
    }
  }
  throw Error(ErrorCode::InvalidArgument, "sweep does not cross 1% of the peak");
}

FrequencyResponse frequency_response_sweep(const Bench& bench, double f_r, std::span<const double> f_list, double tau,
                                           double amplitude) {
  Bench b = bench;
  b.config.tau = tau;
  b.config.requested_f_r = f_r;
  require_exact_reference(f_r, b.config.f_d);

  auto measure = [&](double f_s) {
    const double df = std::abs(f_s - f_r);
    // settle for 20 tau, then average over whole beat periods spanning >= 1 s
    double window = 1.0;
    if (df > 0.0) window = std::ceil(df * 1.0 - 1e-9) / df;
    const double settle = 20.0 * tau;
    const double duration = std::ceil((settle + window) * emulator::kFramesPerSecond - 1e-9) / emulator::kFramesPerSecond;
    const auto frames = run_scenario(b, signal::Sine{amplitude, f_s, 0.0}, duration).frames;
    return average_frames(frames, duration - window + 1e-9, duration).r;
  };

  FrequencyResponse out;
  out.peak = measure(f_r);
  for (double f_s : f_list) {
    ResponsePoint p;
    p.f_s = f_s;
    p.detuning = f_s - f_r;
    p.r = p.detuning == 0.0 ? out.peak : measure(f_s);
    p.normalized = p.r / out.peak;
    out.points.push_back(p);
  }
  out.half_width_1pct = one_percent_half_width(out.points);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<HarmonicPoint> harmonic_table(const Bench& bench, const signal::Square& square, int k_max, double tau) {
  if (k_max < 1) throw Error(ErrorCode::InvalidArgument, "k_max must be >= 1");
  Bench b = bench;
  b.config.tau = tau;
  b.config.requested_f_r = square.frequency;
  require_exact_reference(square.frequency, b.config.f_d);
  if (k_max * square.frequency >= b.config.f_d / 2.0) {
    throw Error(ErrorCode::OutOfRange, "harmonic " + std::to_string(k_max) + " of " + std::to_string(square.frequency) +
                                           " Hz is at or beyond the Nyquist limit");
  }
  const double duration = settling_duration(tau);
  constexpr int kPerRun = 3; // higher harmonics carried by each frame

  std::vector<HarmonicPoint> out;
  std::vector<double> sums(static_cast<std::size_t>(k_max) + 1, 0.0);
  for (int lowest = 2; lowest <= std::max(k_max, 2); lowest += kPerRun) {
    b.config.lowest_harmonic = lowest;
    const auto frames = run_scenario(b, square, duration).frames;
    const auto settled = settled_value(frames, tau);
    if (lowest == 2) sums[1] = settled.r;
    for (int i = 0; i < kPerRun && lowest + i <= k_max; ++i) {
      double acc = 0.0;
      std::size_t n = 0;
      for (const auto& f : frames) {
        if (f.t < settled.t_begin) continue;
        acc += std::hypot(f.frame.xn[static_cast<std::size_t>(i)], f.frame.yn[static_cast<std::size_t>(i)]);
        ++n;
      }
      sums[static_cast<std::size_t>(lowest + i)] = acc / static_cast<double>(n);
    }
    if (k_max == 1) break;
  }
  for (int k = 1; k <= k_max; ++k) out.push_back({k, sums[static_cast<std::size_t>(k)]});
  return out;
}

// ---------------------------------------------------------------------------

SnrSweep snr_sweep(const Bench& bench, const signal::Sine& sine, std::span<const double> noise_rms_list, double tau,
                   std::span<const std::uint64_t> seeds, double duration) {
  Bench b = bench;
  b.config.tau = tau;
  b.config.requested_f_r = sine.frequency;
  SnrSweep out;
  out.baseline_r = settled_value(run_scenario(b, sine, duration).frames, tau).r;
  for (double rms : noise_rms_list) {
    for (std::uint64_t seed : seeds) {
      const auto spec = signal::SignalSpec(sine) + signal::SignalSpec(signal::WhiteNoise{rms, seed});
      SnrPoint p;
      p.noise_rms = rms;
      p.snr = sine.amplitude / rms;
      p.seed = seed;
      p.r = settled_value(run_scenario(b, spec, duration).frames, tau).r;
      p.error_pct = 100.0 * (p.r - out.baseline_r) / out.baseline_r;
      out.points.push_back(p);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<RolloffPoint> rolloff_sweep(const Bench& bench, std::span<const double> frequencies, double amplitude,
                                        double tau, double f_norm) {
  Bench b = bench;
  b.config.tau = tau;
  const double duration = settling_duration(tau);
  auto measure = [&](double f) {
    b.config.requested_f_r = f;
    const auto plan = timing::plan_internal(f, b.config.f_d);
    return settled_value(run_scenario(b, signal::Sine{amplitude, plan.f_r_actual, 0.0}, duration).frames, tau).r;
  };
  std::vector<RolloffPoint> out;
  double norm = 0.0;
  for (double f : frequencies) {
    out.push_back({f, measure(f), 0.0});
    if (f == f_norm) norm = out.back().r;
  }
  if (norm == 0.0) norm = measure(f_norm);
  for (auto& p : out) p.normalized = p.r / norm;
  return out;
}

// ---------------------------------------------------------------------------

PhaseSweep phase_sweep(const Bench& bench, std::span<const double> input_phases, double amplitude, double tau) {
  if (input_phases.size() < 2) throw Error(ErrorCode::InvalidArgument, "phase sweep needs at least two points");
  Bench b = bench;
  b.config.tau = tau;
  const auto plan = timing::plan_internal(b.config.requested_f_r, b.config.f_d);
  const double duration = settling_duration(tau);
  PhaseSweep out;
  for (double phase : input_phases) {
    const auto s = settled_value(run_scenario(b, signal::Sine{amplitude, plan.f_r_actual, phase}, duration).frames, tau);
    out.points.push_back({phase, s.phi, s.r});
  }
  const double n = static_cast<double>(out.points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : out.points) {
    mx += p.input_phase;
    my += p.phi;
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (const auto& p : out.points) {
    sxy += (p.input_phase - mx) * (p.phi - my);
    sxx += (p.input_phase - mx) * (p.input_phase - mx);
  }
  out.slope = sxy / sxx;
  out.offset = my - out.slope * mx;
  const auto [lo, hi] = std::minmax_element(out.points.begin(), out.points.end(),
                                            [](const auto& a, const auto& c) { return a.r < c.r; });
  double mean_r = 0.0;
  for (const auto& p : out.points) mean_r += p.r;
  mean_r /= n;
  out.r_spread = (hi->r - lo->r) / mean_r;
  return out;
}

double calibrate_phase_offset(const Bench& bench, double amplitude, double tau) {
  Bench b = bench;
  b.config.tau = tau;
  b.config.mode = emulator::ReferenceMode::Internal;
  const auto frames = run_scenario(b, signal::ReferenceDriven{amplitude}, settling_duration(tau)).frames;
  return settled_value(frames, tau).phi;
}

// ---------------------------------------------------------------------------

LatencyResult latency_comparison(const Bench& bench, double f, double amplitude, double tau_exp, double onset) {
  LatencyResult out;
  const auto plan = timing::plan_internal(f, bench.config.f_d);
  const auto spec = signal::SignalSpec::step(signal::Sine{amplitude, plan.f_r_actual, 0.0}, onset);

  Bench sync = bench;
  sync.config.requested_f_r = f;
  sync.config.sync_filter = true;
  const auto sync_frames = run_scenario(sync, spec, onset + 6.0 / plan.f_r_actual).frames;
  const double sync_final = sync_frames.back().frame.r1;
  out.sync_settled = sync_frames.back().t - onset;
  for (auto it = sync_frames.rbegin(); it != sync_frames.rend(); ++it) {
    if (std::abs(it->frame.r1 - sync_final) > 0.005 * sync_final) break;
    out.sync_settled = it->t - onset;
  }

  Bench expo = bench;
  expo.config.requested_f_r = f;
  expo.config.sync_filter = false;
  expo.config.tau = tau_exp;
  const auto frames = run_scenario(expo, spec, onset + 16.0 * tau_exp).frames;
  const double final_r = frames.back().frame.r1;
  auto crossing = [&](double fraction) {
    const double target = fraction * final_r;
    for (std::size_t i = 1; i < frames.size(); ++i) {
      const auto& a = frames[i - 1];
      const auto& c = frames[i];
      if (a.t >= onset && a.frame.r1 < target && c.frame.r1 >= target) {
        const double w = (target - a.frame.r1) / (c.frame.r1 - a.frame.r1);
        return a.t + w * (c.t - a.t) - onset;
      }
    }
    throw Error(ErrorCode::Convergence, "exponential mode never reached the target fraction");
  };
  out.exp_t995 = crossing(0.995);
  out.exp_t9995 = crossing(0.9995);
  return out;
}

// ---------------------------------------------------------------------------

ExternalComparison external_vs_internal(const Bench& bench, double f, double amplitude, double tau) {
  ExternalComparison out;
  Bench internal = bench;
  internal.config.mode = emulator::ReferenceMode::Internal;
  internal.config.requested_f_r = f;
  internal.config.tau = tau;
  require_exact_reference(f, internal.config.f_d);
  const double duration = settling_duration(tau);
  out.internal_r = settled_value(run_scenario(internal, signal::Sine{amplitude, f, 0.0}, duration).frames, tau).r;

  scenario::Scenario sc;
  sc.options = bench.options;
  sc.config = bench.config;
  sc.config.mode = emulator::ReferenceMode::External;
  sc.config.tau = tau;
  const double lock_at = sc.options.measurement_window;
  sc.events.push_back({0.0, scenario::Action::Signal, signal::to_string(signal::Sine{amplitude, f, 0.0})});
  sc.events.push_back({0.0, scenario::Action::Ttl, std::to_string(f)});
  sc.events.push_back({lock_at, scenario::Action::Command, "c"});
  sc.end_time = std::ceil((lock_at + duration) * emulator::kFramesPerSecond) / emulator::kFramesPerSecond;
  const auto result = scenario::run(sc);
  if (!result.diagnostics.empty()) throw Error(ErrorCode::State, "external lock failed: " + result.diagnostics.front());
  const auto& frames = result.frames;
  const auto& last = frames.back().frame;
  out.samples_per_period = static_cast<std::uint32_t>(last.samples_per_period);
  out.undersampling = last.undersampling;
  const double t_last = frames.back().t;
  out.external_r = average_frames(frames, std::max(lock_at + 10.0 * tau, t_last - 0.1 * (t_last - lock_at)), t_last).r;
  out.relative_difference = (out.external_r - out.internal_r) / out.internal_r;
  return out;
}

} // namespace olia::lab
