#include "olia/transport.hpp"

#include <array>
#include <istream>
#include <ostream>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "olia/error.hpp"
#include "olia/protocol.hpp"

namespace olia::transport {

DeviceServer::DeviceServer(emulator::EmulatorOptions options, emulator::InstrumentConfig config, ServerOptions server)
    : emulator_(std::move(options), std::move(config)), server_(server), frames_(server.queue_capacity) {
  if (!(server_.chunk > 0.0)) throw Error(ErrorCode::InvalidArgument, "loop chunk must be positive");
  if (server_.stop_after < 0.0) throw Error(ErrorCode::InvalidArgument, "stop_after must not be negative");
  emulator_.set_frame_sink([this](const TimedFrame& f) { frames_.push(f); });
}

DeviceServer::~DeviceServer() { stop(); }

void DeviceServer::start() {
  if (running_.exchange(true)) return;
  if (thread_.joinable()) thread_.join();
  stop_requested_ = false;
  thread_ = std::thread([this] { loop(); });
}

void DeviceServer::stop() {
  {
    std::lock_guard lock(inbox_mutex_);
    stop_requested_ = true;
  }
  wake_.notify_all();
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
}

void DeviceServer::wait() {
  std::unique_lock lock(done_mutex_);
  done_.wait(lock, [&] { return !running_.load(); });
}

void DeviceServer::submit(std::string line) {
  std::lock_guard lock(inbox_mutex_);
  inbox_.emplace_back(std::move(line));
}

void DeviceServer::set_signal(signal::SignalSpec spec) {
  std::lock_guard lock(inbox_mutex_);
  inbox_.emplace_back(std::move(spec));
}

void DeviceServer::set_ttl(std::optional<signal::TtlReference> ttl) {
  std::lock_guard lock(inbox_mutex_);
  inbox_.emplace_back(ttl);
}

void DeviceServer::set_diagnostic_sink(DiagnosticSink sink) {
  std::lock_guard lock(sink_mutex_);
  diagnostics_ = std::move(sink);
}

std::optional<TimedFrame> DeviceServer::pop_frame(std::chrono::milliseconds timeout) { return frames_.pop(timeout); }

void DeviceServer::drain_messages() {
  std::vector<Message> batch;
  {
    std::lock_guard lock(inbox_mutex_);
    batch.swap(inbox_);
  }
  for (auto& message : batch) {
    std::string diagnostic;
    try {
      if (auto* line = std::get_if<std::string>(&message)) {
        const auto result = emulator_.apply_line(*line);
        if (!result.accepted) diagnostic = "'" + *line + "': " + result.diagnostic;
      } else if (auto* spec = std::get_if<signal::SignalSpec>(&message)) {
        emulator_.set_signal(*spec);
      } else {
        emulator_.set_ttl(std::get<std::optional<signal::TtlReference>>(message));
      }
    } catch (const std::exception& e) {
      diagnostic = e.what();
    }
    if (!diagnostic.empty()) {
      std::lock_guard lock(sink_mutex_);
      if (diagnostics_) diagnostics_(diagnostic);
    }
  }
}

void DeviceServer::loop() {
  using clock = std::chrono::steady_clock;
  const auto wall_start = clock::now();
  const double sim_start = emulator_.time();
  const bool real_time = server_.clock == emulator::ClockMode::RealTime;
  for (std::uint64_t step = 1; !stop_requested_; ++step) {
    drain_messages();
    double target = sim_start + static_cast<double>(step) * server_.chunk;
    if (server_.stop_after > 0.0) target = std::min(target, server_.stop_after);
    emulator_.advance_to(target);
    time_ = emulator_.time();
    if (server_.stop_after > 0.0 && target >= server_.stop_after) break;
    if (real_time) {
      const auto deadline =
          wall_start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(target - sim_start));
      std::unique_lock lock(inbox_mutex_);
      wake_.wait_until(lock, deadline, [&] { return stop_requested_.load(); });
    }
  }
  {
    std::lock_guard lock(done_mutex_);
    running_ = false;
  }
  frames_.close();
  done_.notify_all();
}

// ---------------------------------------------------------------------------

namespace {

// The stdin reader cannot be interrupted, so it is detached and only holds
// a handle that run_stdio disconnects before returning.
struct ReaderLink {
  std::mutex mutex;
  DeviceServer* server = nullptr;
};

} // namespace

void run_stdio(DeviceServer& server, std::istream& in, std::ostream& out, std::ostream& err) {
  std::mutex err_mutex;
  server.set_diagnostic_sink([&](const std::string& d) {
    std::lock_guard lock(err_mutex);
    err << "rejected " << d << '\n';
    err.flush();
  });
  auto link = std::make_shared<ReaderLink>();
  link->server = &server;
  std::thread([link, &in] {
    LineSplitter splitter;
    std::string line;
    while (std::getline(in, line)) {
      line += '\n';
      std::lock_guard lock(link->mutex);
      if (link->server == nullptr) return;
      splitter.feed(line, [&](std::string l) { link->server->submit(std::move(l)); });
    }
  }).detach();

  server.start();
  std::uint64_t dropped_reported = 0;
  while (true) {
    auto frame = server.pop_frame(std::chrono::milliseconds{50});
    if (frame) {
      out << protocol::format_frame(frame->frame);
      out.flush();
    } else if (!server.running()) {
      break;
    }
    const auto dropped = server.dropped_frames();
    if (dropped != dropped_reported) {
      std::lock_guard lock(err_mutex);
      err << "dropped " << (dropped - dropped_reported) << " frames (output too slow)\n";
      dropped_reported = dropped;
    }
  }
  {
    std::lock_guard lock(link->mutex);
    link->server = nullptr;
  }
  server.set_diagnostic_sink(nullptr);
}

// ---------------------------------------------------------------------------

namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = boost::beast::websocket;
using tcp = asio::ip::tcp;

constexpr std::size_t kOutboxLimit = 256;

class Session : public std::enable_shared_from_this<Session> {
public:
  using Release = std::function<void(Session*)>;
  Session(DeviceServer& device, Release release) : device_(device), release_(std::move(release)) {}
  virtual ~Session() = default;
  virtual void start() = 0;
  virtual void close() = 0;

  void send(std::string line) {
    if (closed_) return;
    // never drop the message at the front: it may be in flight
    if (outbox_.size() >= kOutboxLimit) outbox_.erase(outbox_.begin() + 1);
    outbox_.push_back(std::move(line));
    if (outbox_.size() == 1 && ready_) write_front();
  }

protected:
  virtual void write_front() = 0;

  void on_bytes(std::string_view bytes) {
    splitter_.feed(bytes, [&](std::string line) { device_.submit(std::move(line)); });
  }

  void on_written() {
    outbox_.pop_front();
    if (!outbox_.empty()) write_front();
  }

  void become_ready() {
    ready_ = true;
    if (!outbox_.empty()) write_front();
  }

  void finish() {
    if (closed_) return;
    closed_ = true;
    outbox_.clear();
    close();
    if (release_) release_(this);
  }

  DeviceServer& device_;
  Release release_;
  std::deque<std::string> outbox_;
  LineSplitter splitter_;
  bool closed_ = false;
  bool ready_ = false;
};

class LineSession final : public Session {
public:
  LineSession(tcp::socket socket, DeviceServer& device, Release release)
      : Session(device, std::move(release)), socket_(std::move(socket)) {}

  void start() override {
    become_ready();
    read();
  }

  void close() override {
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
  }

private:
  void read() {
    socket_.async_read_some(asio::buffer(buffer_), [self = shared_from_this(), this](boost::system::error_code ec,
                                                                                      std::size_t n) {
      if (ec) return finish();
      on_bytes({buffer_.data(), n});
      read();
    });
  }

  void write_front() override {
    asio::async_write(socket_, asio::buffer(outbox_.front()),
                      [self = shared_from_this(), this](boost::system::error_code ec, std::size_t) {
                        if (ec) return finish();
                        on_written();
                      });
  }

  tcp::socket socket_;
  std::array<char, 1024> buffer_{};
};

class WebSocketSession final : public Session {
public:
  WebSocketSession(tcp::socket socket, DeviceServer& device, Release release)
      : Session(device, std::move(release)), ws_(std::move(socket)) {}

  void start() override {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this(), this](beast::error_code ec) {
      if (ec) return finish();
      ws_.text(true);
      become_ready();
      read();
    });
  }

  void close() override {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).close(ec);
  }

private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this(), this](beast::error_code ec, std::size_t) {
      if (ec) return finish();
      // a message is a complete line even without a terminator
      std::string text = beast::buffers_to_string(buffer_.data());
      buffer_.consume(buffer_.size());
      text += '\n';
      on_bytes(text);
      read();
    });
  }

  void write_front() override {
    ws_.async_write(asio::buffer(outbox_.front()), [self = shared_from_this(), this](beast::error_code ec, std::size_t) {
      if (ec) return finish();
      on_written();
    });
  }

  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
};

} // namespace

struct NetworkServer::Impl {
  Impl(DeviceServer& d, NetworkOptions o) : device(d), options(std::move(o)), pump_timer(io) {}

  enum class Kind { Line, WebSocket };

  void open(std::optional<tcp::acceptor>& acceptor, int port, std::atomic<int>& bound) {
    if (port < 0) return;
    if (port > 65535) throw Error(ErrorCode::InvalidArgument, "port out of range");
    boost::system::error_code ec;
    const auto address = asio::ip::make_address(options.address, ec);
    if (ec) throw Error(ErrorCode::InvalidArgument, "bad listen address '" + options.address + "'");
    acceptor.emplace(io);
    const tcp::endpoint endpoint(address, static_cast<unsigned short>(port));
    acceptor->open(endpoint.protocol(), ec);
    if (!ec) acceptor->set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor->bind(endpoint, ec);
    if (!ec) acceptor->listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot listen on " + options.address + ":" + std::to_string(port) + ": " + ec.message());
    bound = acceptor->local_endpoint().port();
  }

  void accept(tcp::acceptor& acceptor, Kind kind) {
    acceptor.async_accept([this, &acceptor, kind](boost::system::error_code ec, tcp::socket socket) {
      if (ec == asio::error::operation_aborted || !acceptor.is_open()) return;
      if (!ec) {
        if (active) {
          boost::system::error_code ignored;
          socket.close(ignored); // one client at a time
        } else {
          auto release = [this](Session* s) {
            if (active.get() == s) {
              active.reset();
              connected = false;
            }
          };
          if (kind == Kind::Line) {
            active = std::make_shared<LineSession>(std::move(socket), device, release);
          } else {
            active = std::make_shared<WebSocketSession>(std::move(socket), device, release);
          }
          connected = true;
          device.clear_frames();
          active->start();
        }
      }
      accept(acceptor, kind);
    });
  }

  void pump() {
    while (auto frame = device.pop_frame()) {
      if (active) active->send(protocol::format_frame(frame->frame));
    }
    pump_timer.expires_after(std::chrono::milliseconds{10});
    pump_timer.async_wait([this](boost::system::error_code ec) {
      if (!ec) pump();
    });
  }

  DeviceServer& device;
  NetworkOptions options;
  asio::io_context io; // declared before everything that uses it
  asio::steady_timer pump_timer;
  std::optional<tcp::acceptor> line_acceptor;
  std::optional<tcp::acceptor> ws_acceptor;
  std::shared_ptr<Session> active;
  std::atomic<int> line_port{-1};
  std::atomic<int> ws_port{-1};
  std::atomic<bool> connected{false};
  std::thread thread;
};

NetworkServer::NetworkServer(DeviceServer& device, NetworkOptions options)
    : impl_(std::make_unique<Impl>(device, std::move(options))) {}

NetworkServer::~NetworkServer() { stop(); }

void NetworkServer::start() {
  if (impl_->thread.joinable()) return;
  impl_->open(impl_->line_acceptor, impl_->options.tcp_port, impl_->line_port);
  impl_->open(impl_->ws_acceptor, impl_->options.websocket_port, impl_->ws_port);
  if (impl_->line_acceptor) impl_->accept(*impl_->line_acceptor, Impl::Kind::Line);
  if (impl_->ws_acceptor) impl_->accept(*impl_->ws_acceptor, Impl::Kind::WebSocket);
  impl_->pump();
  impl_->thread = std::thread([impl = impl_.get()] { impl->io.run(); });
}

void NetworkServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  asio::post(impl_->io, [impl = impl_.get()] {
    boost::system::error_code ec;
    if (impl->line_acceptor) impl->line_acceptor->close(ec);
    if (impl->ws_acceptor) impl->ws_acceptor->close(ec);
    impl->pump_timer.cancel();
    if (impl->active) impl->active->close();
    impl->io.stop();
  });
  impl_->thread.join();
  impl_->active.reset();
  impl_->connected = false;
}

int NetworkServer::tcp_port() const noexcept { return impl_->line_port.load(); }
int NetworkServer::websocket_port() const noexcept { return impl_->ws_port.load(); }
bool NetworkServer::client_connected() const noexcept { return impl_->connected.load(); }

} // namespace olia::transport
