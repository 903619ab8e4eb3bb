#include "olia/olia.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <new>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "olia/emulator.hpp"
#include "olia/error.hpp"
#include "olia/lab.hpp"
#include "olia/protocol.hpp"
#include "olia/scenario.hpp"
#include "olia/signal.hpp"
#include "olia/transport.hpp"

using namespace olia;

struct olia_device {
  explicit olia_device(emulator::EmulatorOptions o, emulator::InstrumentConfig c) : emu(o, c) {
    emu.set_frame_sink([this](const emulator::TimedFrame& f) {
      if (frames.size() == kCapacity) {
        frames.pop_front();
        ++dropped;
      }
      frames.push_back(f);
    });
  }
  static constexpr std::size_t kCapacity = 65536;
  emulator::Emulator emu;
  std::deque<emulator::TimedFrame> frames;
  std::uint64_t dropped = 0;
};

struct olia_server {
  olia_server(emulator::EmulatorOptions o, emulator::InstrumentConfig c, transport::ServerOptions s)
      : device(o, c, s) {}
  transport::DeviceServer device;
  std::unique_ptr<transport::NetworkServer> network;
};

namespace {

thread_local std::string g_last_error;

olia_status to_status(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidArgument: return OLIA_INVALID_ARGUMENT;
  case ErrorCode::OutOfRange: return OLIA_RANGE;
  case ErrorCode::Parse: return OLIA_PARSE;
  case ErrorCode::State: return OLIA_STATE;
  case ErrorCode::Io: return OLIA_IO;
  case ErrorCode::Convergence: return OLIA_CONVERGENCE;
  }
  return OLIA_INTERNAL;
}

olia_status fail(olia_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename F>
olia_status guard(F&& body) noexcept {
  try {
    return body();
  } catch (const Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(OLIA_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(OLIA_INTERNAL, e.what());
  } catch (...) {
    return fail(OLIA_INTERNAL, "unknown exception");
  }
}

std::string_view text_or_empty(const char* s) { return s ? std::string_view(s) : std::string_view{}; }

olia_status copy_out(const std::string& s, char* buf, std::size_t len) {
  if (!buf || len == 0) return fail(OLIA_INVALID_ARGUMENT, "output buffer is empty");
  const std::size_t n = std::min(s.size(), len - 1);
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
  if (n < s.size()) return fail(OLIA_RANGE, "output truncated: " + std::to_string(s.size() + 1) + " bytes needed");
  return OLIA_OK;
}

olia_frame to_c(const protocol::OutputFrame& f) {
  olia_frame c{};
  c.error_indicator = f.error_indicator;
  c.output_gain = f.output_gain;
  c.input_gain = f.input_gain;
  c.sync_filter = f.sync_filter ? 1 : 0;
  c.external_reference = f.external_reference ? 1 : 0;
  c.samples_per_period = f.samples_per_period;
  c.f_d = f.f_d;
  c.f_r = f.f_r;
  c.tau = f.tau;
  c.undersampling = f.undersampling;
  c.r1 = f.r1;
  c.phi1 = f.phi1;
  c.s1 = f.s1;
  c.x1 = f.x1;
  c.y1 = f.y1;
  for (int i = 0; i < 3; ++i) {
    c.xn[i] = f.xn[i];
    c.yn[i] = f.yn[i];
  }
  c.lowest_harmonic = f.lowest_harmonic;
  return c;
}

protocol::OutputFrame from_c(const olia_frame& c) {
  protocol::OutputFrame f;
  f.error_indicator = c.error_indicator;
  f.output_gain = c.output_gain;
  f.input_gain = c.input_gain;
  f.sync_filter = c.sync_filter != 0;
  f.external_reference = c.external_reference != 0;
  f.samples_per_period = c.samples_per_period;
  f.f_d = c.f_d;
  f.f_r = c.f_r;
  f.tau = c.tau;
  f.undersampling = c.undersampling;
  f.r1 = c.r1;
  f.phi1 = c.phi1;
  f.s1 = c.s1;
  f.x1 = c.x1;
  f.y1 = c.y1;
  for (int i = 0; i < 3; ++i) {
    f.xn[i] = c.xn[i];
    f.yn[i] = c.yn[i];
  }
  f.lowest_harmonic = c.lowest_harmonic;
  return f;
}

std::optional<signal::TtlReference> ttl_from(double hz, double phase) {
  if (!(hz > 0.0)) return std::nullopt;
  if (!std::isfinite(hz) || !std::isfinite(phase)) throw Error(ErrorCode::InvalidArgument, "TTL frequency and phase must be finite");
  return signal::TtlReference{hz, phase};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view key, std::string_view text) {
  const std::string s(trim(text));
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    throw Error(ErrorCode::Parse, "'" + std::string(key) + "' expects a number, got '" + s + "'");
  return v;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// "key=value" items; keys the experiment takes are removed, the rest become
// device settings.
class Params {
public:
  explicit Params(std::string_view text) {
    while (!text.empty()) {
      const auto end = text.find_first_of(";\n");
      const auto item = trim(text.substr(0, end));
      text = end == std::string_view::npos ? std::string_view{} : text.substr(end + 1);
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) throw Error(ErrorCode::Parse, "parameter '" + std::string(item) + "' is not key=value");
      items_[std::string(trim(item.substr(0, eq)))] = std::string(trim(item.substr(eq + 1)));
    }
  }

  double number(const std::string& key, double fallback) {
    const auto it = items_.find(key);
    if (it == items_.end()) return fallback;
    const double v = parse_number(key, it->second);
    items_.erase(it);
    return v;
  }

  std::vector<double> list(const std::string& key, std::vector<double> fallback) {
    const auto it = items_.find(key);
    if (it == items_.end()) return fallback;
    std::vector<double> out;
    std::string_view rest = it->second;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      out.push_back(parse_number(key, rest.substr(0, comma)));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (out.empty()) throw Error(ErrorCode::Parse, "'" + key + "' is an empty list");
    items_.erase(it);
    return out;
  }

  lab::Bench bench() const {
    lab::Bench b;
    std::string settings;
    for (const auto& [k, v] : items_) settings += k + "=" + v + ";";
    scenario::apply_settings(b.options, b.config, settings);
    return b;
  }

private:
  std::map<std::string, std::string> items_;
};

class Output {
public:
  void summary(const std::string& key, double value) { summary_ += key + "=" + format_number(value) + "\n"; }
  void header(std::string h) { table_ = std::move(h) + "\n"; }
  void row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      if (!first) table_ += ',';
      table_ += format_number(v);
      first = false;
    }
    table_ += '\n';
  }
  const std::string& summary_text() const { return summary_; }
  const std::string& table_text() const { return table_; }

private:
  std::string summary_;
  std::string table_;
};

constexpr double kDeg = std::numbers::pi / 180.0;

Output run_experiment(std::string_view name, Params& p) {
  Output out;
  if (name == "step") {
    const double tau = p.number("tau", 0.6);
    const double amplitude = p.number("amplitude", 380.0);
    const double t_on = p.number("t_on", 0.0);
    const auto r = lab::step_experiment(p.bench(), tau, amplitude, t_on);
    out.header("t,r,model");
    for (const auto& f : r.frames) {
      const double x = (f.t - t_on) / r.fit.tau_star;
      const double model = f.t > t_on ? r.fit.r_inf * (1.0 - std::exp(-x) * (1.0 + x)) : 0.0;
      out.row({f.t, f.frame.r1, model});
    }
    out.summary("tau", tau);
    out.summary("tau_star", r.fit.tau_star);
    out.summary("tau_error_pct", 100.0 * (r.fit.tau_star - tau) / tau);
    out.summary("r_inf", r.fit.r_inf);
    out.summary("residual_norm", r.fit.residual_norm);
    out.summary("iterations", r.fit.iterations);
  } else if (name == "freq") {
    const double f_r = p.number("f_r", 1000.0);
    const double tau = p.number("tau", 0.6);
    const double amplitude = p.number("amplitude", 100.0);
    const auto detunings = p.list("detunings", {-30, -10, -5, -3, -2, -1, -0.5, 0.5, 1, 2, 3, 5, 10, 30});
    std::vector<double> f_list;
    for (double d : detunings) f_list.push_back(f_r + d);
    const auto r = lab::frequency_response_sweep(p.bench(), f_r, f_list, tau, amplitude);
    out.header("f_s,detuning,r,normalized,model");
    for (const auto& pt : r.points) out.row({pt.f_s, pt.detuning, pt.r, pt.normalized, lab::cascade_response(pt.detuning, tau)});
    out.summary("peak", r.peak);
    out.summary("half_width_1pct", r.half_width_1pct);
  } else if (name == "harmonics") {
    const double f = p.number("f", 100.0);
    const double amplitude = p.number("amplitude", 100.0);
    const double k_max = p.number("k_max", 21);
    const double tau = p.number("tau", 0.6);
    const auto table = lab::harmonic_table(p.bench(), signal::Square{amplitude, f}, static_cast<int>(k_max), tau);
    const double r1 = table.at(0).r;
    out.header("k,r,k_r_over_r1,ideal");
    for (const auto& h : table) {
      const double ideal = h.k % 2 ? 4.0 * amplitude / (std::numbers::pi * h.k) : 0.0;
      out.row({static_cast<double>(h.k), h.r, h.k * h.r / r1, ideal});
    }
    out.summary("r1", r1);
    out.summary("r1_ideal", 4.0 * amplitude / std::numbers::pi);
  } else if (name == "snr") {
    const double f = p.number("f", 1000.0);
    const double amplitude = p.number("amplitude", 1.0);
    const auto noise = p.list("noise", {0.01, 0.1, 1, 10, 100, 1000});
    const auto seed_values = p.list("seeds", {1});
    const double tau = p.number("tau", 6.0);
    const double duration = p.number("duration", 100.0);
    std::vector<std::uint64_t> seeds;
    for (double s : seed_values) seeds.push_back(static_cast<std::uint64_t>(s));
    const auto r = lab::snr_sweep(p.bench(), signal::Sine{amplitude, f, 0.0}, noise, tau, seeds, duration);
    out.header("snr,noise_rms,seed,r,error_pct");
    for (const auto& pt : r.points) out.row({pt.snr, pt.noise_rms, static_cast<double>(pt.seed), pt.r, pt.error_pct});
    out.summary("baseline_r", r.baseline_r);
  } else if (name == "rolloff") {
    const auto freqs = p.list("freqs", {1000, 2000, 5000, 10000, 20000, 25000, 40000, 50000});
    const double amplitude = p.number("amplitude", 1000.0);
    const double tau = p.number("tau", 0.6);
    const double f_norm = p.number("f_norm", 1000.0);
    const auto r = lab::rolloff_sweep(p.bench(), freqs, amplitude, tau, f_norm);
    out.header("f,r,normalized");
    for (const auto& pt : r) out.row({pt.f, pt.r, pt.normalized});
    out.summary("droop_pct", 100.0 * (1.0 - r.back().normalized));
  } else if (name == "phase") {
    auto phases = p.list("phases", {0, 10, 20, 30, 40, 50, 60, 70, 80, 90});
    const double amplitude = p.number("amplitude", 240.0);
    const double tau = p.number("tau", 0.6);
    const bool calibrate = p.number("calibrate", 1.0) != 0.0;
    for (double& v : phases) v *= kDeg;
    const auto bench = p.bench();
    const auto r = lab::phase_sweep(bench, phases, amplitude, tau);
    out.header("input_deg,phi_deg,r");
    for (const auto& pt : r.points) out.row({pt.input_phase / kDeg, pt.phi / kDeg, pt.r});
    out.summary("slope", r.slope);
    out.summary("offset_deg", r.offset / kDeg);
    out.summary("r_spread", r.r_spread);
    if (calibrate) out.summary("calibration_deg", lab::calibrate_phase_offset(bench, 100.0, tau) / kDeg);
  } else if (name == "latency") {
    const double f = p.number("f", 1.0);
    const double amplitude = p.number("amplitude", 100.0);
    const double tau = p.number("tau", 2.5);
    const double onset = p.number("onset", 0.35);
    const auto r = lab::latency_comparison(p.bench(), f, amplitude, tau, onset);
    out.header("mode,seconds");
    out.row({0, r.sync_settled});
    out.row({1, r.exp_t995});
    out.summary("sync_settled", r.sync_settled);
    out.summary("exp_t995", r.exp_t995);
    out.summary("exp_t9995", r.exp_t9995);
  } else if (name == "external") {
    const double f = p.number("f", 1000.0);
    const double amplitude = p.number("amplitude", 100.0);
    const double tau = p.number("tau", 0.6);
    const auto r = lab::external_vs_internal(p.bench(), f, amplitude, tau);
    out.header("mode,r");
    out.row({0, r.internal_r});
    out.row({1, r.external_r});
    out.summary("internal_r", r.internal_r);
    out.summary("external_r", r.external_r);
    out.summary("relative_difference", r.relative_difference);
    out.summary("samples_per_period", r.samples_per_period);
    out.summary("undersampling", r.undersampling);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown experiment '" + std::string(name) +
                                                "' (step, freq, harmonics, snr, rolloff, phase, latency, external)");
  }
  return out;
}

transport::ServerOptions server_options(std::string_view text) {
  transport::ServerOptions s;
  while (!text.empty()) {
    const auto end = text.find_first_of(";\n");
    const auto item = trim(text.substr(0, end));
    text = end == std::string_view::npos ? std::string_view{} : text.substr(end + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::Parse, "server setting '" + std::string(item) + "' is not key=value");
    const auto key = trim(item.substr(0, eq));
    const auto value = trim(item.substr(eq + 1));
    if (key == "clock") {
      if (value == "realtime") s.clock = emulator::ClockMode::RealTime;
      else if (value == "accelerated") s.clock = emulator::ClockMode::Accelerated;
      else throw Error(ErrorCode::Parse, "clock must be realtime or accelerated");
    } else if (key == "queue") {
      const double q = parse_number(key, value);
      if (q < 1 || q != std::floor(q)) throw Error(ErrorCode::OutOfRange, "queue must be a positive integer");
      s.queue_capacity = static_cast<std::size_t>(q);
    } else if (key == "chunk") {
      s.chunk = parse_number(key, value);
      if (!(s.chunk > 0.0 && s.chunk <= 0.1)) throw Error(ErrorCode::OutOfRange, "chunk must be in (0, 0.1] s");
    } else if (key == "stop_after") {
      s.stop_after = parse_number(key, value);
      if (s.stop_after < 0.0) throw Error(ErrorCode::OutOfRange, "stop_after must not be negative");
    } else {
      throw Error(ErrorCode::Parse, "unknown server setting '" + std::string(key) + "'");
    }
  }
  return s;
}

} // namespace

extern "C" {

const char* olia_version(void) { return "1.0.0"; }

const char* olia_status_string(olia_status status) {
  switch (status) {
  case OLIA_OK: return "ok";
  case OLIA_INVALID_ARGUMENT: return "invalid argument";
  case OLIA_PARSE: return "parse error";
  case OLIA_RANGE: return "out of range";
  case OLIA_STATE: return "invalid state";
  case OLIA_IO: return "i/o error";
  case OLIA_EMPTY: return "empty";
  case OLIA_CONVERGENCE: return "no convergence";
  case OLIA_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* olia_last_error(void) { return g_last_error.c_str(); }

olia_status olia_frame_decode(const char* line, olia_frame* out) {
  if (!line || !out) return fail(OLIA_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    *out = to_c(protocol::parse_frame(line));
    return OLIA_OK;
  });
}

olia_status olia_frame_encode(const olia_frame* frame, char* buf, size_t len) {
  if (!frame) return fail(OLIA_INVALID_ARGUMENT, "null frame");
  return guard([&] {
    const auto f = from_c(*frame);
    protocol::validate_frame(f);
    return copy_out(protocol::format_frame(f), buf, len);
  });
}

olia_status olia_command_check(const char* line, char* canonical, size_t len) {
  if (!line) return fail(OLIA_INVALID_ARGUMENT, "null line");
  return guard([&] {
    const auto cmd = protocol::parse_command(line);
    return canonical ? copy_out(protocol::format_command(cmd), canonical, len) : OLIA_OK;
  });
}

olia_status olia_device_create(const char* settings, olia_device** out) {
  if (!out) return fail(OLIA_INVALID_ARGUMENT, "null output handle");
  *out = nullptr;
  return guard([&] {
    emulator::EmulatorOptions o;
    emulator::InstrumentConfig c;
    scenario::apply_settings(o, c, text_or_empty(settings));
    *out = new olia_device(o, c);
    return OLIA_OK;
  });
}

void olia_device_destroy(olia_device* device) { delete device; }

olia_status olia_device_set_signal(olia_device* device, const char* text) {
  if (!device || !text) return fail(OLIA_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    device->emu.set_signal(signal::parse_signal(text));
    return OLIA_OK;
  });
}

olia_status olia_device_set_ttl(olia_device* device, double hz, double phase) {
  if (!device) return fail(OLIA_INVALID_ARGUMENT, "null device");
  return guard([&] {
    device->emu.set_ttl(ttl_from(hz, phase));
    return OLIA_OK;
  });
}

olia_status olia_device_command(olia_device* device, const char* line) {
  if (!device || !line) return fail(OLIA_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    const auto cmd = protocol::parse_command(line);
    const auto r = device->emu.apply_command(cmd);
    if (!r.accepted) return fail(OLIA_STATE, r.diagnostic);
    return OLIA_OK;
  });
}

olia_status olia_device_advance(olia_device* device, double seconds) {
  if (!device) return fail(OLIA_INVALID_ARGUMENT, "null device");
  if (!(seconds >= 0.0) || !std::isfinite(seconds)) return fail(OLIA_INVALID_ARGUMENT, "seconds must be finite and >= 0");
  return guard([&] {
    device->emu.advance(seconds);
    return OLIA_OK;
  });
}

olia_status olia_device_pop_frame(olia_device* device, olia_frame* frame, double* t) {
  if (!device || !frame) return fail(OLIA_INVALID_ARGUMENT, "null argument");
  if (device->frames.empty()) return OLIA_EMPTY;
  const auto f = device->frames.front();
  device->frames.pop_front();
  *frame = to_c(f.frame);
  if (t) *t = f.t;
  return OLIA_OK;
}

olia_status olia_device_pop_line(olia_device* device, char* buf, size_t len, double* t) {
  if (!device) return fail(OLIA_INVALID_ARGUMENT, "null device");
  if (device->frames.empty()) return OLIA_EMPTY;
  return guard([&] {
    const auto f = device->frames.front();
    const auto status = copy_out(protocol::format_frame(f.frame), buf, len);
    if (status != OLIA_OK) return status; // frame stays queued
    device->frames.pop_front();
    if (t) *t = f.t;
    return OLIA_OK;
  });
}

double olia_device_time(const olia_device* device) { return device ? device->emu.time() : 0.0; }

double olia_device_analogue_output(const olia_device* device) { return device ? device->emu.analogue_output() : 0.0; }

uint64_t olia_device_dropped_frames(const olia_device* device) { return device ? device->dropped : 0; }

olia_status olia_scenario_run(const char* scenario_path, uint64_t seed, const char* table_path, size_t* frames,
                              size_t* rejected) {
  if (!scenario_path) return fail(OLIA_INVALID_ARGUMENT, "null scenario path");
  return guard([&] {
    const auto result = scenario::run(scenario::load_scenario(scenario_path), seed);
    if (table_path) scenario::save_frame_table(table_path, result.frames);
    if (frames) *frames = result.frames.size();
    if (rejected) *rejected = result.diagnostics.size();
    return OLIA_OK;
  });
}

olia_status olia_lab_run(const char* experiment, const char* params, const char* table_path, char* summary,
                         size_t len) {
  if (!experiment) return fail(OLIA_INVALID_ARGUMENT, "null experiment");
  return guard([&] {
    Params p(text_or_empty(params));
    const auto out = run_experiment(experiment, p);
    if (table_path) {
      std::ofstream f(table_path, std::ios::binary);
      if (!f) throw Error(ErrorCode::Io, std::string("cannot write ") + table_path);
      f << out.table_text();
      if (!f) throw Error(ErrorCode::Io, std::string("write failed: ") + table_path);
    }
    return summary ? copy_out(out.summary_text(), summary, len) : OLIA_OK;
  });
}

olia_status olia_server_create(const char* settings, const char* server_settings, olia_server** out) {
  if (!out) return fail(OLIA_INVALID_ARGUMENT, "null output handle");
  *out = nullptr;
  return guard([&] {
    emulator::EmulatorOptions o;
    emulator::InstrumentConfig c;
    scenario::apply_settings(o, c, text_or_empty(settings));
    const auto s = server_options(text_or_empty(server_settings));
    c.clock = s.clock;
    *out = new olia_server(o, c, s);
    return OLIA_OK;
  });
}

void olia_server_destroy(olia_server* server) {
  if (!server) return;
  if (server->network) server->network->stop();
  server->device.stop();
  delete server;
}

olia_status olia_server_set_diagnostic_callback(olia_server* server, olia_diagnostic_fn fn, void* user) {
  if (!server) return fail(OLIA_INVALID_ARGUMENT, "null server");
  return guard([&] {
    if (fn) server->device.set_diagnostic_sink([fn, user](const std::string& m) { fn(m.c_str(), user); });
    else server->device.set_diagnostic_sink({});
    return OLIA_OK;
  });
}

olia_status olia_server_start(olia_server* server) {
  if (!server) return fail(OLIA_INVALID_ARGUMENT, "null server");
  return guard([&] {
    server->device.start();
    return OLIA_OK;
  });
}

olia_status olia_server_listen(olia_server* server, const char* address, int tcp_port, int websocket_port) {
  if (!server) return fail(OLIA_INVALID_ARGUMENT, "null server");
  if (server->network) return fail(OLIA_STATE, "already listening");
  if (tcp_port < -1 || tcp_port > 65535 || websocket_port < -1 || websocket_port > 65535)
    return fail(OLIA_RANGE, "ports must be in [-1, 65535]");
  return guard([&] {
    transport::NetworkOptions n;
    if (address) n.address = address;
    n.tcp_port = tcp_port;
    n.websocket_port = websocket_port;
    auto net = std::make_unique<transport::NetworkServer>(server->device, n);
    net->start();
    server->network = std::move(net);
    return OLIA_OK;
  });
}

int olia_server_tcp_port(const olia_server* server) {
  return server && server->network ? server->network->tcp_port() : -1;
}

int olia_server_websocket_port(const olia_server* server) {
  return server && server->network ? server->network->websocket_port() : -1;
}

olia_status olia_server_submit(olia_server* server, const char* line) {
  if (!server || !line) return fail(OLIA_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    server->device.submit(line);
    return OLIA_OK;
  });
}

olia_status olia_server_set_signal(olia_server* server, const char* text) {
  if (!server || !text) return fail(OLIA_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    server->device.set_signal(signal::parse_signal(text));
    return OLIA_OK;
  });
}

olia_status olia_server_set_ttl(olia_server* server, double hz, double phase) {
  if (!server) return fail(OLIA_INVALID_ARGUMENT, "null server");
  return guard([&] {
    server->device.set_ttl(ttl_from(hz, phase));
    return OLIA_OK;
  });
}

olia_status olia_server_pop_line(olia_server* server, int timeout_ms, char* buf, size_t len, double* t) {
  if (!server) return fail(OLIA_INVALID_ARGUMENT, "null server");
  return guard([&] {
    const auto f = server->device.pop_frame(std::chrono::milliseconds(std::max(timeout_ms, 0)));
    if (!f) return OLIA_EMPTY;
    if (t) *t = f->t;
    return copy_out(protocol::format_frame(f->frame), buf, len);
  });
}

olia_status olia_server_run_stdio(olia_server* server) {
  if (!server) return fail(OLIA_INVALID_ARGUMENT, "null server");
  return guard([&] {
    transport::run_stdio(server->device, std::cin, std::cout, std::cerr);
    return OLIA_OK;
  });
}

olia_status olia_server_wait(olia_server* server) {
  if (!server) return fail(OLIA_INVALID_ARGUMENT, "null server");
  return guard([&] {
    server->device.wait();
    return OLIA_OK;
  });
}

void olia_server_stop(olia_server* server) {
  if (!server) return;
  if (server->network) server->network->stop();
  server->device.stop();
}

int olia_server_running(const olia_server* server) { return server && server->device.running() ? 1 : 0; }

double olia_server_time(const olia_server* server) { return server ? server->device.time() : 0.0; }

uint64_t olia_server_dropped_frames(const olia_server* server) { return server ? server->device.dropped_frames() : 0; }

} // extern "C"
