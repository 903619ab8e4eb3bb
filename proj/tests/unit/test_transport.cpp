#include <doctest.h>

#include <chrono>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "olia/protocol.hpp"
#include "olia/transport.hpp"

using namespace olia;
using namespace olia::transport;
namespace asio = boost::asio;
namespace websocket = boost::beast::websocket;
using tcp = asio::ip::tcp;
using namespace std::chrono_literals;

namespace {

ServerOptions accelerated(double stop_after) {
  ServerOptions s;
  s.clock = emulator::ClockMode::Accelerated;
  s.queue_capacity = 1000;
  s.stop_after = stop_after;
  return s;
}

template <typename Pred>
bool eventually(Pred pred, std::chrono::milliseconds limit = 3000ms) {
  const auto until = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < until) {
    if (pred()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return pred();
}

std::string read_line(tcp::socket& socket, asio::streambuf& buf) {
  asio::read_until(socket, buf, "\r\n");
  std::istream is(&buf);
  std::string line;
  std::getline(is, line);
  return line + "\n";
}

} // namespace

TEST_SUITE("transport") {

TEST_CASE("drop-oldest queue counts what it discards") {
  DropOldestQueue<int> q(3);
  for (int i = 1; i <= 5; ++i) q.push(i);
  CHECK(q.dropped() == 2);
  CHECK(q.size() == 3);
  CHECK(*q.pop() == 3);
  CHECK(*q.pop() == 4);
  CHECK(*q.pop() == 5);
  CHECK_FALSE(q.pop().has_value());
  q.close();
  CHECK_FALSE(q.pop(1000ms).has_value()); // closed: returns at once
}

TEST_CASE("line splitter accepts either terminator") {
  LineSplitter s;
  std::vector<std::string> lines;
  auto collect = [&](std::string l) { lines.push_back(std::move(l)); };
  s.feed("e2\r\ng8\n\nc", collect);
  CHECK(lines == std::vector<std::string>{"e2", "g8"});
  s.feed("\r", collect);
  CHECK(lines.back() == "c");
}

TEST_CASE("device server applies queued commands between steps") {
  DeviceServer server({}, {}, accelerated(1.0));
  std::vector<std::string> diagnostics;
  server.set_diagnostic_sink([&](const std::string& d) { diagnostics.push_back(d); });
  server.submit("e2");
  server.submit("g3");
  server.start();
  server.wait();
  std::vector<TimedFrame> frames;
  while (auto f = server.pop_frame()) frames.push_back(*f);
  REQUIRE(frames.size() == 10);
  for (const auto& f : frames) CHECK(f.frame.tau == 2.0);
  CHECK(frames.back().t == doctest::Approx(1.0));
  REQUIRE(diagnostics.size() == 1);
  CHECK(diagnostics[0].find("'g3'") != std::string::npos);
  CHECK(server.dropped_frames() == 0);
}

TEST_CASE("a slow consumer loses the oldest frames, counted") {
  auto opts = accelerated(2.0);
  opts.queue_capacity = 4;
  DeviceServer server({}, {}, opts);
  server.start();
  server.wait();
  CHECK(server.dropped_frames() == 16);
  CHECK(server.pop_frame()->index == 17);
}

TEST_CASE("stdio endpoint") {
  ServerOptions opts;
  opts.clock = emulator::ClockMode::RealTime;
  opts.stop_after = 0.5;
  DeviceServer server({}, {}, opts);
  std::istringstream in("e2\ng3\n");
  std::ostringstream out;
  std::ostringstream err;
  run_stdio(server, in, out, err);
  std::istringstream lines(out.str());
  std::string line;
  std::string last;
  int n = 0;
  while (std::getline(lines, line)) {
    ++n;
    CHECK_NOTHROW(protocol::parse_frame(line + "\n"));
    last = line;
  }
  CHECK(n == 5);
  CHECK(protocol::parse_frame(last + "\n").tau == 2.0);
  CHECK(err.str().find("rejected 'g3'") != std::string::npos);
}

TEST_CASE("TCP line endpoint and WebSocket bridge share one client slot") {
  DeviceServer device({}, {});
  NetworkOptions net;
  net.tcp_port = 0;
  net.websocket_port = 0;
  NetworkServer network(device, net);
  device.start();
  network.start();
  REQUIRE(network.tcp_port() > 0);
  REQUIRE(network.websocket_port() > 0);

  asio::io_context io;
  {
    tcp::socket client(io);
    client.connect({asio::ip::make_address("127.0.0.1"), static_cast<unsigned short>(network.tcp_port())});
    asio::streambuf buf;
    const auto first = read_line(client, buf);
    CHECK(first.size() > 2);
    CHECK(first.substr(first.size() - 2) == "\r\n");
    CHECK_NOTHROW(protocol::parse_frame(first));
    REQUIRE(eventually([&] { return network.client_connected(); }));

    // a second client is turned away while the first is connected
    tcp::socket second(io);
    second.connect({asio::ip::make_address("127.0.0.1"), static_cast<unsigned short>(network.tcp_port())});
    char byte = 0;
    boost::system::error_code ec;
    second.read_some(asio::buffer(&byte, 1), ec);
    CHECK(ec == asio::error::eof);

    asio::write(client, asio::buffer(std::string("e2\r")));
    bool seen = false;
    for (int i = 0; i < 30 && !seen; ++i) seen = protocol::parse_frame(read_line(client, buf)).tau == 2.0;
    CHECK(seen);
  }
  REQUIRE(eventually([&] { return !network.client_connected(); }));

  {
    websocket::stream<tcp::socket> ws(io);
    ws.next_layer().connect({asio::ip::make_address("127.0.0.1"), static_cast<unsigned short>(network.websocket_port())});
    ws.handshake("127.0.0.1", "/");
    boost::beast::flat_buffer buf;
    ws.read(buf);
    const auto first = boost::beast::buffers_to_string(buf.data());
    CHECK_NOTHROW(protocol::parse_frame(first));
    CHECK(first.substr(first.size() - 2) == "\r\n");
    ws.text(true);
    ws.write(asio::buffer(std::string("g8")));
    bool seen = false;
    for (int i = 0; i < 30 && !seen; ++i) {
      buf.consume(buf.size());
      ws.read(buf);
      seen = protocol::parse_frame(boost::beast::buffers_to_string(buf.data())).input_gain == 8;
    }
    CHECK(seen);
    ws.close(websocket::close_code::normal);
  }

  network.stop();
  device.stop();
}

} // TEST_SUITE
