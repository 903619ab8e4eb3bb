// olia: command line front end over libolia.
//
//   olia emulate   run the device on stdio, TCP and/or WebSocket
//   olia scenario  play a scenario file into a frame table
//   olia lab       run a bench experiment
//   olia decode    frame lines on stdin to a CSV table
//   olia plot      one or more CSV columns to an SVG line chart

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "olia/olia.h"

namespace {

std::atomic<bool> g_interrupted{false};

int report(olia_status status, const std::string& what) {
  if (status == OLIA_OK) return 0;
  std::cerr << "olia: " << what << ": " << olia_status_string(status) << ": " << olia_last_error() << "\n";
  return 1;
}

struct EmulateArgs {
  std::string endpoint = "stdio";
  std::string address = "127.0.0.1";
  int port = 5025;
  int ws_port = 8081;
  std::string clock = "realtime";
  std::string settings;
  std::string signal = "zero";
  double ttl = 0.0;
  double ttl_phase = 0.0;
  double duration = 0.0;
  int queue = 64;
};

int emulate(const EmulateArgs& a) {
  std::string server_settings = "clock=" + a.clock + ";queue=" + std::to_string(a.queue);
  if (a.duration > 0.0) server_settings += ";stop_after=" + std::to_string(a.duration);
  olia_server* srv = nullptr;
  if (int rc = report(olia_server_create(a.settings.c_str(), server_settings.c_str(), &srv), "emulate")) return rc;
  int rc = report(olia_server_set_signal(srv, a.signal.c_str()), "signal");
  if (!rc && a.ttl > 0.0) rc = report(olia_server_set_ttl(srv, a.ttl, a.ttl_phase), "ttl");

  if (!rc && a.endpoint == "stdio") {
    rc = report(olia_server_run_stdio(srv), "stdio");
  } else if (!rc) {
    const int tcp = a.endpoint == "ws" ? -1 : a.port;
    const int ws = a.endpoint == "tcp" ? -1 : a.ws_port;
    olia_server_set_diagnostic_callback(srv, [](const char* m, void*) { std::cerr << "rejected " << m << "\n"; }, nullptr);
    rc = report(olia_server_listen(srv, a.address.c_str(), tcp, ws), "listen");
    if (!rc) rc = report(olia_server_start(srv), "start");
    if (!rc) {
      std::cerr << "listening";
      if (tcp >= 0) std::cerr << " tcp=" << a.address << ":" << olia_server_tcp_port(srv);
      if (ws >= 0) std::cerr << " ws=ws://" << a.address << ":" << olia_server_websocket_port(srv) << "/";
      std::cerr << std::endl;
      std::signal(SIGINT, [](int) { g_interrupted = true; });
      std::signal(SIGTERM, [](int) { g_interrupted = true; });
      while (olia_server_running(srv) && !g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(50));
      olia_server_stop(srv);
    }
  }
  if (const auto dropped = olia_server_dropped_frames(srv); dropped > 0)
    std::cerr << "dropped " << dropped << " frames in total\n";
  olia_server_destroy(srv);
  return rc;
}

int decode(std::istream& in, std::ostream& out) {
  out << "error_indicator,output_gain,input_gain,sync_filter,external_reference,samples_per_period,f_d,f_r,tau,"
         "undersampling,r1,phi1,s1,x1,y1,xn0,xn1,xn2,yn0,yn1,yn2,lowest_harmonic\n";
  std::string line;
  int bad = 0;
  long n = 0;
  out.precision(10);
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    olia_frame f{};
    if (olia_frame_decode(line.c_str(), &f) != OLIA_OK) {
      std::cerr << "line " << n << ": " << olia_last_error() << "\n";
      ++bad;
      continue;
    }
    out << f.error_indicator << ',' << f.output_gain << ',' << f.input_gain << ',' << f.sync_filter << ','
        << f.external_reference << ',' << f.samples_per_period << ',' << f.f_d << ',' << f.f_r << ',' << f.tau << ','
        << f.undersampling << ',' << f.r1 << ',' << f.phi1 << ',' << f.s1 << ',' << f.x1 << ',' << f.y1;
    for (double v : f.xn) out << ',' << v;
    for (double v : f.yn) out << ',' << v;
    out << ',' << f.lowest_harmonic << '\n';
  }
  return bad ? 1 : 0;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty() && item.back() == '\r') item.pop_back();
    out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

int plot(const std::string& csv, const std::string& x_col, const std::vector<std::string>& y_cols,
         const std::string& svg, const std::string& title) {
  std::ifstream in(csv);
  if (!in) {
    std::cerr << "olia: cannot open " << csv << "\n";
    return 1;
  }
  std::string line;
  std::getline(in, line);
  const auto header = split(line, ',');
  auto column = [&](const std::string& name) -> long {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const long xi = column(x_col);
  if (xi < 0) {
    std::cerr << "olia: no column '" << x_col << "' in " << csv << "\n";
    return 1;
  }
  std::vector<long> yi;
  for (const auto& c : y_cols) {
    yi.push_back(column(c));
    if (yi.back() < 0) {
      std::cerr << "olia: no column '" << c << "' in " << csv << "\n";
      return 1;
    }
  }
  std::vector<double> xs;
  std::vector<std::vector<double>> ys(yi.size());
  while (std::getline(in, line)) {
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) continue;
    try {
      xs.push_back(std::stod(cells[xi]));
      for (std::size_t k = 0; k < yi.size(); ++k) ys[k].push_back(std::stod(cells[yi[k]]));
    } catch (const std::exception&) {
      if (xs.size() > ys[0].size()) xs.pop_back();
      for (auto& y : ys) y.resize(xs.size());
    }
  }
  if (xs.size() < 2) {
    std::cerr << "olia: fewer than two numeric rows in " << csv << "\n";
    return 1;
  }
  double x0 = *std::min_element(xs.begin(), xs.end()), x1 = *std::max_element(xs.begin(), xs.end());
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const auto& y : ys)
    for (double v : y) {
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double w = 720, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb); };
  const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ofstream out(svg);
  if (!out) {
    std::cerr << "olia: cannot write " << svg << "\n";
    return 1;
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n"
      << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << w - ml - mr << "\" height=\"" << h - mt - mb
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    out << "<text x=\"" << px(xv) << "\" y=\"" << h - mb + 16 << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n"
        << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
  }
  out << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">" << x_col << "</text>\n";
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const char* c = colours[k % 6];
    out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) out << px(xs[i]) << ',' << py(ys[k][i]) << ' ';
    out << "\"/>\n<text x=\"" << ml + 8 << "\" y=\"" << mt + 16 + 14 * k << "\" fill=\"" << c << "\">" << y_cols[k]
        << "</text>\n";
  }
  out << "</svg>\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"OLIA digital lock-in amplifier emulator"};
  app.set_version_flag("--version", std::string(olia_version()));
  app.require_subcommand(1);

  EmulateArgs em;
  auto* emulate_cmd = app.add_subcommand("emulate", "Run the emulated device");
  emulate_cmd->add_option("--endpoint", em.endpoint, "stdio, tcp, ws or net (tcp and ws)")
      ->check(CLI::IsMember({"stdio", "tcp", "ws", "net"}));
  emulate_cmd->add_option("--address", em.address, "Listen address");
  emulate_cmd->add_option("--port", em.port, "TCP line port (0 picks one)")->check(CLI::Range(0, 65535));
  emulate_cmd->add_option("--ws-port", em.ws_port, "WebSocket port (0 picks one)")->check(CLI::Range(0, 65535));
  emulate_cmd->add_option("--clock", em.clock, "realtime or accelerated")
      ->check(CLI::IsMember({"realtime", "accelerated"}));
  emulate_cmd->add_option("--settings", em.settings, "Device settings, e.g. \"tau=0.6;gain=2;f_d=100000\"");
  emulate_cmd->add_option("--signal", em.signal, "Input signal, e.g. \"sine(100, 1000)\"");
  emulate_cmd->add_option("--ttl", em.ttl, "TTL reference frequency in Hz (0: not connected)");
  emulate_cmd->add_option("--ttl-phase", em.ttl_phase, "TTL reference phase in rad");
  emulate_cmd->add_option("--duration", em.duration, "Stop after this many simulated seconds (0: run until killed)");
  emulate_cmd->add_option("--queue", em.queue, "Frame queue length before the oldest are dropped")
      ->check(CLI::PositiveNumber);

  std::string scenario_path, table_path;
  std::uint64_t seed = 0;
  auto* scenario_cmd = app.add_subcommand("scenario", "Play a scenario file");
  scenario_cmd->add_option("file", scenario_path, "Scenario CSV")->required();
  scenario_cmd->add_option("-o,--table", table_path, "Frame table output (CSV)");
  scenario_cmd->add_option("--seed", seed, "Noise reseed (0 keeps the file's seeds)");

  std::string experiment, params, lab_table;
  auto* lab_cmd = app.add_subcommand("lab", "Run a bench experiment");
  lab_cmd->add_option("experiment", experiment, "step, freq, harmonics, snr, rolloff, phase, latency, external")
      ->required();
  lab_cmd->add_option("-p,--params", params, "Experiment keys and device settings, e.g. \"tau=0.06;amplitude=380\"");
  lab_cmd->add_option("-o,--table", lab_table, "Per-point table output (CSV)");

  auto* decode_cmd = app.add_subcommand("decode", "Frame lines on stdin to CSV on stdout");

  std::string plot_csv, plot_x = "t", plot_svg = "plot.svg", plot_title;
  std::vector<std::string> plot_y{"r1"};
  auto* plot_cmd = app.add_subcommand("plot", "Plot CSV columns as SVG");
  plot_cmd->add_option("csv", plot_csv, "Input CSV")->required();
  plot_cmd->add_option("-x", plot_x, "X column");
  plot_cmd->add_option("-y", plot_y, "Y column(s)");
  plot_cmd->add_option("-o,--out", plot_svg, "Output SVG");
  plot_cmd->add_option("--title", plot_title, "Chart title");

  CLI11_PARSE(app, argc, argv);

  if (*emulate_cmd) return emulate(em);
  if (*scenario_cmd) {
    std::size_t frames = 0, rejected = 0;
    const auto status = olia_scenario_run(scenario_path.c_str(), seed, table_path.empty() ? nullptr : table_path.c_str(),
                                          &frames, &rejected);
    if (int rc = report(status, "scenario")) return rc;
    std::cout << "frames=" << frames << "\nrejected=" << rejected << "\n";
    return 0;
  }
  if (*lab_cmd) {
    std::string summary(64 * 1024, '\0');
    const auto status = olia_lab_run(experiment.c_str(), params.c_str(), lab_table.empty() ? nullptr : lab_table.c_str(),
                                     summary.data(), summary.size());
    if (int rc = report(status, "lab " + experiment)) return rc;
    std::cout << summary.c_str();
    return 0;
  }
  if (*decode_cmd) return decode(std::cin, std::cout);
  if (*plot_cmd) return plot(plot_csv, plot_x, plot_y, plot_svg, plot_title.empty() ? plot_csv : plot_title);
  return 0;
}
