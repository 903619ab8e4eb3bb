#ifndef OLIA_TRANSPORT_HPP
#define OLIA_TRANSPORT_HPP

// Running the emulator as a device: a sample-loop thread fed through a
// command queue, frames handed out through a bounded queue, and the stdio,
// TCP line and WebSocket endpoints that carry the wire protocol.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "olia/emulator.hpp"
#include "olia/signal.hpp"

namespace olia::transport {

using emulator::TimedFrame;

/// Bounded FIFO that never blocks the producer: when full, the oldest entry
/// is discarded and counted.
template <typename T>
class DropOldestQueue {
public:
  explicit DropOldestQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  void push(T value) {
    {
      std::lock_guard lock(mutex_);
      if (items_.size() == capacity_) {
        items_.pop_front();
        ++dropped_;
      }
      items_.push_back(std::move(value));
    }
    ready_.notify_one();
  }

  std::optional<T> pop(std::chrono::milliseconds timeout = std::chrono::milliseconds{0}) {
    std::unique_lock lock(mutex_);
    if (timeout.count() > 0) ready_.wait_for(lock, timeout, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    return value;
  }

  void clear() {
    std::lock_guard lock(mutex_);
    items_.clear();
  }

  /// Wakes any waiting pop().
  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    ready_.notify_all();
  }

  std::uint64_t dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
  }

private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<T> items_;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

struct ServerOptions {
  emulator::ClockMode clock = emulator::ClockMode::RealTime;
  std::size_t queue_capacity = 64;
  double chunk = 0.01; ///< simulated seconds advanced per loop step
  double stop_after = 0.0; ///< stop once simulated time reaches this; 0 runs until stop()
};

/// Owns an Emulator and advances it on its own thread. Commands, signal and
/// TTL changes are queued and applied between loop steps, in order.
class DeviceServer {
public:
  using DiagnosticSink = std::function<void(const std::string&)>;

  DeviceServer(emulator::EmulatorOptions options, emulator::InstrumentConfig config, ServerOptions server = {});
  ~DeviceServer();
  DeviceServer(const DeviceServer&) = delete;
  DeviceServer& operator=(const DeviceServer&) = delete;

  void start();
  void stop();
  bool running() const noexcept { return running_.load(); }
  /// Blocks until the loop has stopped (stop() or stop_after reached).
  void wait();

  void submit(std::string line);
  void set_signal(signal::SignalSpec spec);
  void set_ttl(std::optional<signal::TtlReference> ttl);
  /// Called on the loop thread for every rejected command.
  void set_diagnostic_sink(DiagnosticSink sink);

  std::optional<TimedFrame> pop_frame(std::chrono::milliseconds timeout = std::chrono::milliseconds{0});
  void clear_frames() { frames_.clear(); }
  std::uint64_t dropped_frames() const { return frames_.dropped(); }
  double time() const noexcept { return time_.load(); }

private:
  using Message = std::variant<std::string, signal::SignalSpec, std::optional<signal::TtlReference>>;

  void loop();
  void drain_messages();

  emulator::Emulator emulator_;
  ServerOptions server_;
  DropOldestQueue<TimedFrame> frames_;
  std::mutex inbox_mutex_;
  std::vector<Message> inbox_;
  std::mutex sink_mutex_;
  DiagnosticSink diagnostics_;
  std::atomic<bool> running_{false};
  std::atomic<bool> stop_requested_{false};
  std::atomic<double> time_{0.0};
  std::thread thread_;
  std::condition_variable wake_; // paces the loop, with inbox_mutex_
  std::mutex done_mutex_;
  std::condition_variable done_;
};

/// Splits a byte stream into protocol lines. Either '\r' or '\n' ends a line;
/// empty lines are dropped.
class LineSplitter {
public:
  template <typename F>
  void feed(std::string_view bytes, F&& on_line) {
    for (char c : bytes) {
      if (c == '\r' || c == '\n') {
        if (!pending_.empty()) on_line(std::string(pending_));
        pending_.clear();
      } else if (pending_.size() < kMaxLine) {
        pending_ += c;
      }
    }
  }

private:
  static constexpr std::size_t kMaxLine = 256;
  std::string pending_;
};

/// Commands from `in`, frames to `out`, diagnostics to `err`, until the
/// server stops. Returns when the server has stopped and queued frames are
/// written; end of input does not stop the server.
void run_stdio(DeviceServer& server, std::istream& in, std::ostream& out, std::ostream& err);

struct NetworkOptions {
  std::string address = "127.0.0.1";
  int tcp_port = 0;        ///< line protocol; 0 picks a free port, -1 disables
  int websocket_port = -1; ///< browser bridge; 0 picks a free port, -1 disables
};

/// The TCP line endpoint and the WebSocket bridge on one I/O thread. Both
/// share a single client slot: while one client is connected, further
/// connections are closed straight away. Frames that arrive with no client
/// connected are discarded.
class NetworkServer {
public:
  NetworkServer(DeviceServer& device, NetworkOptions options);
  ~NetworkServer();
  NetworkServer(const NetworkServer&) = delete;
  NetworkServer& operator=(const NetworkServer&) = delete;

  void start();
  void stop();
  int tcp_port() const noexcept;
  int websocket_port() const noexcept;
  bool client_connected() const noexcept;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace olia::transport

#endif // OLIA_TRANSPORT_HPP
