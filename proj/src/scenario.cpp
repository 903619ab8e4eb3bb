#include "olia/scenario.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "olia/error.hpp"
#include "olia/protocol.hpp"

namespace olia::scenario {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

// line 0 means the text did not come from a scenario file
[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  if (line_no == 0) throw Error(ErrorCode::Parse, what);
  throw Error(ErrorCode::Parse, "scenario line " + std::to_string(line_no) + ": " + what);
}

double to_number(std::string_view s, std::size_t line_no) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(line_no, "'" + std::string(s) + "' is not a number");
  }
  return v;
}

int to_int(std::string_view s, std::size_t line_no) {
  const double v = to_number(s, line_no);
  if (v != std::floor(v) || std::abs(v) > 1e9) fail(line_no, "'" + std::string(s) + "' is not an integer");
  return static_cast<int>(v);
}

bool to_flag(std::string_view s, std::size_t line_no) {
  s = trim(s);
  if (s == "1" || s == "true" || s == "on") return true;
  if (s == "0" || s == "false" || s == "off") return false;
  fail(line_no, "'" + std::string(s) + "' is not 0 or 1");
}

void apply_option(Scenario& sc, std::string_view key, std::string_view value, std::size_t line_no) {
  auto& o = sc.options;
  auto& c = sc.config;
  if (key == "f_d") c.f_d = to_number(value, line_no);
  else if (key == "f_r") c.requested_f_r = to_number(value, line_no);
  else if (key == "tau") c.tau = to_number(value, line_no);
  else if (key == "gain") {
    const int g = to_int(value, line_no);
    if (!frontend::PgaSetting::is_allowed(g)) fail(line_no, "input gain not in {0,1,2,4,8,16,32,64}");
    c.gain = frontend::PgaSetting(g);
  } else if (key == "output_gain") c.output_gain = to_number(value, line_no);
  else if (key == "harmonic") c.lowest_harmonic = to_int(value, line_no);
  else if (key == "sync") c.sync_filter = to_flag(value, line_no);
  else if (key == "mode") {
    const auto v = trim(value);
    if (v == "internal") c.mode = emulator::ReferenceMode::Internal;
    else if (v == "external") c.mode = emulator::ReferenceMode::External;
    else fail(line_no, "mode must be internal or external");
  } else if (key == "bypass") o.frontend_bypass = to_flag(value, line_no);
  else if (key == "substeps") o.aa_substeps = to_int(value, line_no);
  else if (key == "f_aa") o.f_aa = to_number(value, line_no);
  else if (key == "adc_noise") o.adc_noise_rms_mv = to_number(value, line_no);
  else if (key == "adc_seed") o.adc_noise_seed = static_cast<std::uint64_t>(to_int(value, line_no));
  else if (key == "pll_min") o.pll.min_hz = to_number(value, line_no);
  else if (key == "pll_max") o.pll.max_hz = to_number(value, line_no);
  else if (key == "pll_tuned") o.pll.tuned = to_flag(value, line_no);
  else if (key == "window") o.measurement_window = to_number(value, line_no);
  else fail(line_no, "unknown option '" + std::string(key) + "'");
}

std::optional<signal::TtlReference> parse_ttl(std::string_view arg, std::size_t line_no) {
  arg = trim(arg);
  if (arg == "off") return std::nullopt;
  std::string text(arg);
  for (auto& ch : text) {
    if (ch == ',') ch = ' ';
  }
  std::istringstream in(text);
  std::string f;
  std::string phase;
  std::string extra;
  in >> f >> phase >> extra;
  if (f.empty() || !extra.empty()) fail(line_no, "ttl expects '<hz> [phase]' or 'off'");
  signal::TtlReference ttl;
  ttl.frequency = to_number(f, line_no);
  if (!(ttl.frequency > 0.0)) fail(line_no, "ttl frequency must be positive");
  if (!phase.empty()) ttl.phase = to_number(phase, line_no);
  return ttl;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc{} ? ptr : buf);
}

} // namespace

Scenario parse_scenario(std::string_view text) {
  Scenario sc;
  bool have_end = false;
  bool seen_header = false;
  std::size_t line_no = 0;
  double last_t = 0.0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!seen_header) {
      seen_header = true;
      if (line.substr(0, 4) == "time") continue;
    }
    if (have_end) fail(line_no, "nothing may follow 'end'");

    const auto c1 = line.find(',');
    if (c1 == std::string_view::npos) fail(line_no, "expected time,action[,argument]");
    const auto c2 = line.find(',', c1 + 1);
    const auto action = trim(line.substr(c1 + 1, c2 == std::string_view::npos ? c2 : c2 - c1 - 1));
    const auto argument = c2 == std::string_view::npos ? std::string_view{} : trim(line.substr(c2 + 1));
    const double t = to_number(line.substr(0, c1), line_no);
    if (t < 0.0) fail(line_no, "time must be non-negative");
    if (t < last_t) fail(line_no, "times must not decrease");
    last_t = t;

    if (action == "option") {
      if (t != 0.0) fail(line_no, "options are only allowed at time 0");
      const auto eq = argument.find('=');
      if (eq == std::string_view::npos) fail(line_no, "option expects key=value");
      apply_option(sc, trim(argument.substr(0, eq)), argument.substr(eq + 1), line_no);
    } else if (action == "signal") {
      try {
        signal::parse_signal(argument);
      } catch (const Error& e) {
        fail(line_no, e.what());
      }
      sc.events.push_back({t, Action::Signal, std::string(argument)});
    } else if (action == "ttl") {
      parse_ttl(argument, line_no);
      sc.events.push_back({t, Action::Ttl, std::string(argument)});
    } else if (action == "command") {
      if (argument.empty()) fail(line_no, "command expects a protocol line");
      sc.events.push_back({t, Action::Command, std::string(argument)});
    } else if (action == "end") {
      sc.end_time = t;
      have_end = true;
    } else {
      fail(line_no, "unknown action '" + std::string(action) + "'");
    }
  }
  if (!have_end) throw Error(ErrorCode::Parse, "scenario has no 'end' row");
  try {
    emulator::validate(sc.config);
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, std::string("scenario options: ") + e.what());
  }
  return sc;
}

void apply_settings(emulator::EmulatorOptions& options, emulator::InstrumentConfig& config, std::string_view text) {
  Scenario sc;
  sc.options = options;
  sc.config = config;
  while (!text.empty()) {
    const auto end = text.find_first_of(";\n");
    const auto item = trim(text.substr(0, end));
    text = end == std::string_view::npos ? std::string_view{} : text.substr(end + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) fail(0, "setting '" + std::string(item) + "' is not key=value");
    apply_option(sc, trim(item.substr(0, eq)), item.substr(eq + 1), 0);
  }
  emulator::validate(sc.config);
  options = sc.options;
  config = sc.config;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open scenario " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string format_scenario(const Scenario& sc) {
  const emulator::EmulatorOptions o{};
  const emulator::InstrumentConfig c{};
  std::string out = "time,action,argument\n";
  auto option = [&](const char* key, const std::string& value) {
    out += "0,option," + std::string(key) + "=" + value + "\n";
  };
  const auto& so = sc.options;
  const auto& sc_c = sc.config;
  if (sc_c.f_d != c.f_d) option("f_d", format_number(sc_c.f_d));
  if (sc_c.requested_f_r != c.requested_f_r) option("f_r", format_number(sc_c.requested_f_r));
  if (sc_c.tau != c.tau) option("tau", format_number(sc_c.tau));
  if (sc_c.gain != c.gain) option("gain", std::to_string(sc_c.gain.gain()));
  if (sc_c.output_gain != c.output_gain) option("output_gain", format_number(sc_c.output_gain));
  if (sc_c.lowest_harmonic != c.lowest_harmonic) option("harmonic", std::to_string(sc_c.lowest_harmonic));
  if (sc_c.sync_filter != c.sync_filter) option("sync", sc_c.sync_filter ? "1" : "0");
  if (sc_c.mode != c.mode) option("mode", sc_c.mode == emulator::ReferenceMode::External ? "external" : "internal");
  if (so.frontend_bypass != o.frontend_bypass) option("bypass", so.frontend_bypass ? "1" : "0");
  if (so.aa_substeps != o.aa_substeps) option("substeps", std::to_string(so.aa_substeps));
  if (so.f_aa != o.f_aa) option("f_aa", format_number(so.f_aa));
  if (so.adc_noise_rms_mv != o.adc_noise_rms_mv) option("adc_noise", format_number(so.adc_noise_rms_mv));
  if (so.adc_noise_seed != o.adc_noise_seed) option("adc_seed", std::to_string(so.adc_noise_seed));
  if (so.pll.min_hz != o.pll.min_hz) option("pll_min", format_number(so.pll.min_hz));
  if (so.pll.max_hz != o.pll.max_hz) option("pll_max", format_number(so.pll.max_hz));
  if (so.pll.tuned != o.pll.tuned) option("pll_tuned", so.pll.tuned ? "1" : "0");
  if (so.measurement_window != o.measurement_window) option("window", format_number(so.measurement_window));
  for (const auto& ev : sc.events) {
    const char* name = ev.action == Action::Signal ? "signal" : ev.action == Action::Ttl ? "ttl" : "command";
    out += format_number(ev.t) + "," + name + "," + ev.argument + "\n";
  }
  out += format_number(sc.end_time) + ",end\n";
  return out;
}

Result run(const Scenario& sc, std::uint64_t seed) {
  Result result;
  emulator::Emulator emu(sc.options, sc.config);
  emu.set_frame_sink([&](const emulator::TimedFrame& f) { result.frames.push_back(f); });
  for (const auto& ev : sc.events) {
    if (ev.t > sc.end_time) break;
    emu.advance_to(ev.t);
    switch (ev.action) {
      case Action::Signal: emu.set_signal(signal::parse_signal(ev.argument).reseeded(seed)); break;
      case Action::Ttl: emu.set_ttl(parse_ttl(ev.argument, 0)); break;
      case Action::Command: {
        const auto r = emu.apply_line(ev.argument);
        if (!r.accepted) result.diagnostics.push_back("t=" + format_number(ev.t) + " '" + ev.argument + "': " + r.diagnostic);
        break;
      }
    }
  }
  emu.advance_to(sc.end_time);
  return result;
}

Scenario single_signal(const emulator::EmulatorOptions& options, const emulator::InstrumentConfig& config,
                       const signal::SignalSpec& spec, double duration) {
  Scenario sc;
  sc.options = options;
  sc.config = config;
  sc.events.push_back({0.0, Action::Signal, signal::to_string(spec)});
  sc.end_time = duration;
  return sc;
}

std::string frame_table_header() {
  std::string h = "t";
  for (const char* name : protocol::kFrameFieldNames) {
    h += ',';
    h += name;
  }
  return h;
}

std::string frame_table_row(const emulator::TimedFrame& frame) {
  char t[32];
  std::snprintf(t, sizeof t, "%.1f", frame.t);
  std::string row = t;
  for (const auto& field : protocol::format_frame_fields(frame.frame)) {
    row += ',';
    row += field;
  }
  return row;
}

void write_frame_table(std::ostream& out, std::span<const emulator::TimedFrame> frames) {
  out << frame_table_header() << '\n';
  for (const auto& f : frames) out << frame_table_row(f) << '\n';
}

void save_frame_table(const std::filesystem::path& path, std::span<const emulator::TimedFrame> frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_frame_table(out, frames);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<emulator::TimedFrame> read_frame_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != frame_table_header()) {
    throw Error(ErrorCode::Parse, "frame table: missing or unexpected header");
  }
  std::vector<emulator::TimedFrame> frames;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) fail(line_no, "frame table row without fields");
    emulator::TimedFrame f;
    f.t = to_number(row.substr(0, comma), line_no);
    f.index = static_cast<std::uint64_t>(std::llround(f.t * emulator::kFramesPerSecond));
    std::string fields(row.substr(comma + 1));
    for (auto& ch : fields) {
      if (ch == ',') ch = ' ';
    }
    try {
      f.frame = protocol::parse_frame(fields);
    } catch (const Error& e) {
      fail(line_no, e.what());
    }
    frames.push_back(f);
  }
  return frames;
}

} // namespace olia::scenario
