#pragma once

// WebSocket front end for live play. One connection drives one session at a
// time; everything runs on a single io_context thread, so a connection's tick
// timer, reads and writes never overlap.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <filesystem>
#include <fstream>
#include <csignal>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "gazeattn/protocol.hpp"
#include "gazeattn/realtime.hpp"

namespace gazeattn::server {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct ServerOptions {
  realtime::SessionConfig base;
  /// When set, every finished session leaves an input log and a trial log here.
  std::string log_dir;
  std::string agent = "gazesim";
};

/// Called on the io thread whenever a session finishes.
using EndHook = std::function<void(const realtime::LiveSession&, const std::string& reason)>;

class Connection;

class Server {
 public:
  Server(net::io_context& ioc, const tcp::endpoint& at, ServerOptions opts)
      : ioc_(ioc), acceptor_(ioc), opts_(std::move(opts)) {
    realtime::validate(opts_.base);
    acceptor_.open(at.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(at);
    acceptor_.listen(net::socket_base::max_listen_connections);
    accept();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }
  realtime::SessionRegistry& registry() { return registry_; }
  const ServerOptions& options() const { return opts_; }
  void on_end(EndHook h) { end_hook_ = std::move(h); }
  const EndHook& end_hook() const { return end_hook_; }

  void stop() {
    beast::error_code ec;
    acceptor_.close(ec);
  }

 private:
  void accept();

  net::io_context& ioc_;
  tcp::acceptor acceptor_;
  ServerOptions opts_;
  realtime::SessionRegistry registry_;
  EndHook end_hook_;
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Server& server)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), server_(server),
        config_(server.options().base) {}

  void run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->send(protocol::encode_hello(self->server_.options().agent));
      self->read();
    });
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->handle(text);
      self->read();
    });
  }

  void handle(const std::string& text) {
    using protocol::Kind;
    try {
      const protocol::Message m = protocol::decode(text);
      switch (m.kind) {
        case Kind::Hello: send(protocol::encode_hello(server_.options().agent)); break;
        case Kind::Configure: configure(m); break;
        case Kind::Start: start(); break;
        case Kind::Input: input(m); break;
        case Kind::End:
          if (!session_) throw Error(ErrorKind::InvalidState, "no session to end");
          finish("client");
          break;
        case Kind::Snapshot:
        case Kind::Error:
          throw Error(ErrorKind::Protocol,
                      "clients may not send '" + std::string(protocol::to_string(m.kind)) + "'");
      }
    } catch (const Error& e) {
      send(protocol::encode_error(e));
    } catch (const std::exception& e) {
      send(protocol::encode_error("internal", e.what()));
    }
  }

  bool running() const { return session_ && session_->status() == realtime::SessionStatus::Running; }

  void configure(const protocol::Message& m) {
    if (running()) throw Error(ErrorKind::InvalidState, "cannot reconfigure a running session");
    config_ = protocol::decode_configure_request(m, config_);
    drop_session();
    open();
    send(protocol::encode_configured(session_->id(), config_));
  }

  void start() {
    if (running()) throw Error(ErrorKind::InvalidState, "session already running");
    if (!session_ || session_->status() == realtime::SessionStatus::Ended) {
      drop_session();
      open();
    }
    session_->start();
    pacer_.emplace(config_.params.game.tick_rate, realtime::FixedStepPacer::Clock::now());
    send(protocol::encode_started(session_->id(), config_));
    schedule();
  }

  void input(const protocol::Message& m) {
    if (!session_) throw Error(ErrorKind::UnknownSession, "no session");
    server_.registry().ingest_input(session_->id(), protocol::decode_input(m));
  }

  void open() {
    const auto id = server_.registry().open_session(config_);
    session_ = server_.registry().get(id);
  }

  void drop_session() {
    if (!session_) return;
    try {
      server_.registry().close(session_->id());
    } catch (const Error&) {
    }
    session_.reset();
  }

  void schedule() {
    timer_.expires_at(pacer_->next_deadline());
    timer_.async_wait([self = shared_from_this(), s = session_](beast::error_code ec) {
      if (ec || self->session_ != s) return;
      self->tick();
    });
  }

  // Catch-up bursts run every owed tick but send at most one snapshot.
  void tick() {
    if (!running()) return;
    const int n = pacer_->due(realtime::FixedStepPacer::Clock::now());
    bool due = false;
    realtime::Snapshot last;
    for (int i = 0; i < n; ++i) {
      last = session_->step();
      pacer_->consumed(1);
      due = due || session_->snapshot_due(last.tick);
      if (last.status == realtime::SessionStatus::Ended) break;
    }
    if (n > 0 && last.status == realtime::SessionStatus::Ended) {
      finish("complete");
      return;
    }
    if (due) send(protocol::encode_snapshot(last), true);
    schedule();
  }

  void finish(const std::string& reason) {
    timer_.cancel();
    session_->end();
    send(protocol::encode_snapshot(session_->snapshot()));
    send(protocol::encode_ended(session_->id(), *session_, reason));
    write_logs();
    if (server_.end_hook()) server_.end_hook()(*session_, reason);
  }

  void write_logs() const {
    const auto& dir = server_.options().log_dir;
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    const std::string stem = dir + "/session_" + std::to_string(session_->id());
    std::ofstream inputs(stem + "_inputs.jsonl");
    protocol::write_session_log(inputs, session_->id(), config_, session_->input_log());
    std::ofstream trial(stem + "_trial.jsonl");
    io::write_trial_log(trial, session_->trial_result(), config_.params.game);
  }

  void closed() {
    timer_.cancel();
    if (running()) {
      session_->end();
      write_logs();
      if (server_.end_hook()) server_.end_hook()(*session_, "disconnect");
    }
    drop_session();
  }

  // Snapshots are disposable: a queued one that has not hit the wire yet is
  // replaced by the newer one.
  void send(std::string text, bool snapshot = false) {
    if (snapshot && queue_.size() > 1 && queue_.back().second) {
      queue_.back().first = std::move(text);
      return;
    }
    queue_.emplace_back(std::move(text), snapshot);
    if (queue_.size() == 1) write();
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front().first),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return;
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->write();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  net::steady_timer timer_;
  Server& server_;
  realtime::SessionConfig config_;
  std::shared_ptr<realtime::LiveSession> session_;
  std::optional<realtime::FixedStepPacer> pacer_;
  std::deque<std::pair<std::string, bool>> queue_;
};

inline void Server::accept() {
  acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<Connection>(std::move(socket), *this)->run();
    accept();
  });
}

/// Blocks serving on `port` until the io_context stops.
inline void serve(unsigned short port, ServerOptions opts) {
  net::io_context ioc{1};
  Server server(ioc, tcp::endpoint(tcp::v4(), port), std::move(opts));
  net::signal_set signals(ioc, SIGINT, SIGTERM);
  signals.async_wait([&](beast::error_code, int) { ioc.stop(); });
  ioc.run();
}

}  // namespace gazeattn::server
