#include <atomic>
#include <csignal>
#include <deque>
#include <iostream>
#include <map>
#include <thread>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/executor_work_guard.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/asio/thread_pool.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "signstream/error.hpp"
#include "signstream/server.hpp"

namespace signstream::server {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

class Connection;

class WebSocketServer::Impl : public std::enable_shared_from_this<WebSocketServer::Impl> {
 public:
  Impl(Gateway& gateway, const std::string& address, std::uint16_t port, std::size_t io_threads);

  void begin();
  void run_loop();
  void stop();
  void forget(Connection* c);

  Gateway& gateway;
  net::io_context ioc;
  tcp::acceptor acceptor;
  net::thread_pool workers;
  std::size_t io_threads;
  std::uint16_t bound_port = 0;
  std::vector<std::thread> threads;
  std::optional<net::signal_set> signals;

 private:
  void do_accept();

  std::optional<net::executor_work_guard<net::io_context::executor_type>> guard_;
  std::mutex mu_;
  std::map<Connection*, std::weak_ptr<Connection>> live_;
  bool stopping_ = false;
  std::atomic<bool> begun_{false};

  friend class Connection;
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, std::shared_ptr<WebSocketServer::Impl> server)
      : ws_(std::move(socket)),
        server_(std::move(server)),
        guard_(server_->ioc.get_executor()),
        work_(net::make_strand(server_->workers.get_executor())),
        inbox_(server_->gateway.config().inbox_capacity) {}

  void run() {
    net::dispatch(ws_.get_executor(), [self = shared_from_this()] { self->on_run(); });
  }

  // Called from any thread on shutdown: flush the final transcript, then close.
  void shutdown() {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      if (!self->accepted_) {
        beast::error_code ec;
        beast::get_lowest_layer(self->ws_).socket().close(ec);
        return;
      }
      net::post(self->work_, [self] {
        auto out = self->finish_session();
        net::post(self->ws_.get_executor(), [self, out = std::move(out)]() mutable {
          for (auto& m : out) self->send(std::move(m));
          self->begin_close();
        });
      });
    });
  }

 private:
  void on_run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void on_accept(beast::error_code ec) {
    if (ec) return server_->forget(this);
    accepted_ = true;
    auto opened = server_->gateway.open_session();
    if (!opened.session) {
      for (auto& m : opened.reply.outbound) send(std::move(m));
      begin_close();
      do_read();
      return;
    }
    session_ = *opened.session;
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t n) { self->on_read(ec, n); });
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      // Peer went away (or we closed). Release the session without replying.
      if (!session_.empty()) {
        net::post(work_, [self = shared_from_this()] { self->finish_session(); });
      }
      server_->forget(this);
      return;
    }
    std::string msg = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    if (!session_.empty() && !closing_) enqueue(std::move(msg));
    do_read();
  }

  void enqueue(std::string msg) {
    std::lock_guard lock(inbox_mu_);
    inbox_.push(std::move(msg));
    if (!draining_) {
      draining_ = true;
      net::post(work_, [self = shared_from_this()] { self->drain(); });
    }
  }

  // Runs on the worker strand: messages of one session are handled in order.
  void drain() {
    for (;;) {
      std::optional<std::string> msg;
      {
        std::lock_guard lock(inbox_mu_);
        msg = inbox_.pop();
        if (!msg) {
          draining_ = false;
          return;
        }
      }
      if (finished_) continue;
      Reply reply = server_->gateway.handle(session_, *msg);
      if (reply.close) finish_session();
      if (reply.outbound.empty() && !reply.close) continue;
      net::post(ws_.get_executor(), [self = shared_from_this(), reply = std::move(reply)]() mutable {
        for (auto& m : reply.outbound) self->send(std::move(m));
        if (reply.close) self->begin_close();
      });
    }
  }

  // Worker strand only.
  std::vector<std::string> finish_session() {
    if (finished_ || session_.empty()) return {};
    finished_ = true;
    return server_->gateway.close_session(session_);
  }

  void send(std::string msg) {
    if (close_sent_) return;
    writes_.push_back(std::move(msg));
    if (writes_.size() == 1) do_write();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(writes_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_write(ec); });
  }

  void on_write(beast::error_code ec) {
    if (ec) {
      writes_.clear();
      return;
    }
    writes_.pop_front();
    if (!writes_.empty()) return do_write();
    if (closing_) do_close();
  }

  void begin_close() {
    closing_ = true;
    if (writes_.empty()) do_close();
  }

  void do_close() {
    if (close_sent_) return;
    close_sent_ = true;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<WebSocketServer::Impl> server_;
  net::executor_work_guard<net::io_context::executor_type> guard_;
  net::strand<net::thread_pool::executor_type> work_;
  beast::flat_buffer buffer_;
  std::string session_;

  // ws strand
  std::deque<std::string> writes_;
  bool accepted_ = false;
  bool closing_ = false;
  bool close_sent_ = false;

  // worker strand
  bool finished_ = false;

  std::mutex inbox_mu_;
  SessionInbox inbox_;
  bool draining_ = false;

  friend class WebSocketServer::Impl;
};

WebSocketServer::Impl::Impl(Gateway& gw, const std::string& address, std::uint16_t port, std::size_t threads)
    : gateway(gw),
      acceptor(ioc),
      workers(gw.config().worker_threads),
      io_threads(std::max<std::size_t>(1, threads)) {
  beast::error_code ec;
  const auto addr = net::ip::make_address(address, ec);
  if (ec) throw Error(ErrorCode::InvalidArgument, "bad bind address " + address);
  tcp::endpoint endpoint(addr, port);
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot listen on " + address + ":" + std::to_string(port) + ": " + ec.message());
  bound_port = acceptor.local_endpoint().port();
}

void WebSocketServer::Impl::begin() {
  if (begun_.exchange(true)) throw Error(ErrorCode::InvalidArgument, "server already started");
  guard_.emplace(ioc.get_executor());
  net::dispatch(acceptor.get_executor(), [self = shared_from_this()] { self->do_accept(); });
}

void WebSocketServer::Impl::do_accept() {
  acceptor.async_accept(net::make_strand(ioc), [self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    auto conn = std::make_shared<Connection>(std::move(socket), self);
    {
      std::lock_guard lock(self->mu_);
      if (self->stopping_) return;
      self->live_.emplace(conn.get(), conn);
    }
    conn->run();
    self->do_accept();
  });
}

void WebSocketServer::Impl::forget(Connection* c) {
  std::lock_guard lock(mu_);
  live_.erase(c);
}

void WebSocketServer::Impl::stop() {
  std::vector<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    stopping_ = true;
    for (auto& [_, weak] : live_) {
      if (auto c = weak.lock()) conns.push_back(std::move(c));
    }
  }
  net::post(acceptor.get_executor(), [self = shared_from_this()] {
    beast::error_code ec;
    self->acceptor.close(ec);
  });
  for (auto& c : conns) c->shutdown();
  // Connections hold their own work guards; the loop exits once they finish.
  net::post(ioc, [self = shared_from_this()] {
    self->guard_.reset();
    if (self->signals) {
      beast::error_code ec;
      self->signals->cancel(ec);
    }
  });
}

void WebSocketServer::Impl::run_loop() { ioc.run(); }

WebSocketServer::WebSocketServer(Gateway& gateway, const std::string& address, std::uint16_t port,
                                 std::size_t io_threads)
    : impl_(std::make_shared<Impl>(gateway, address, port, io_threads)) {}

WebSocketServer::~WebSocketServer() {
  stop();
  wait();
}

std::uint16_t WebSocketServer::port() const { return impl_->bound_port; }

void WebSocketServer::run(bool handle_signals) {
  impl_->begin();
  if (handle_signals) {
    impl_->signals.emplace(impl_->ioc, SIGINT, SIGTERM);
    impl_->signals->async_wait([impl = impl_](beast::error_code ec, int) {
      if (!ec) impl->stop();
    });
  }
  std::vector<std::thread> extra;
  for (std::size_t i = 1; i < impl_->io_threads; ++i) extra.emplace_back([impl = impl_] { impl->run_loop(); });
  impl_->run_loop();
  for (auto& t : extra) t.join();
  impl_->workers.join();
}

void WebSocketServer::start() {
  impl_->begin();
  for (std::size_t i = 0; i < impl_->io_threads; ++i) impl_->threads.emplace_back([impl = impl_] { impl->run_loop(); });
}

void WebSocketServer::stop() { impl_->stop(); }

void WebSocketServer::wait() {
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
  impl_->threads.clear();
  impl_->workers.join();
}

}  // namespace signstream::server
