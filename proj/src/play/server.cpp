#include "iad/play/server.hpp"

#include <atomic>
#include <chrono>
#include <deque>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "iad/common/error.hpp"
#include "iad/common/io.hpp"
#include "iad/env/layout.hpp"
#include "iad/play/session.hpp"

namespace iad::play {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
namespace fs = std::filesystem;

std::string mime_type(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
  if (ext == ".css") return "text/css; charset=utf-8";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  if (ext == ".txt" || ext == ".md") return "text/plain; charset=utf-8";
  return "application/octet-stream";
}

fs::path resolve_static_path(const fs::path& root, std::string_view target) {
  if (root.empty() || target.empty() || target.front() != '/') return {};
  target = target.substr(0, target.find_first_of("?#"));
  if (target.find_first_of("\\%") != std::string_view::npos || target.find('\0') != std::string_view::npos) {
    return {};
  }
  fs::path rel;
  for (const std::string& part : split(target.substr(1), '/')) {
    if (part.empty() || part == ".") continue;
    if (part == "..") return {};
    rel /= part;
  }
  if (rel.empty() || target.back() == '/') rel /= "index.html";
  return root / rel;
}

struct PlayServer::Impl {
  explicit Impl(ServerConfig c) : config(std::move(c)), acceptor(ioc), id_rng(config.seed) {}

  void bind();
  void do_accept();
  void record_export(const fs::path& p) {
    std::lock_guard lock(mutex);
    exported.push_back(p);
  }

  ServerConfig config;
  net::io_context ioc{1};
  tcp::acceptor acceptor;
  std::thread thread;
  std::atomic<unsigned short> port{0};
  mutable std::mutex mutex;
  std::vector<fs::path> exported;
  Rng id_rng;
  std::uint64_t sessions_started = 0;
};

namespace {

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket socket, PlayServer::Impl* server)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), server_(server) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->do_read();
    });
  }

 private:
  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      closed_ = true;
      timer_.cancel();
      export_once();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    handle(text);
    do_read();
  }

  void handle(const std::string& text) {
    ClientMessage msg;
    try {
      msg = parse_client_message(text);
    } catch (const ProtocolError& e) {
      send(error_message(e.what()));
      return;
    }
    if (const auto* join = std::get_if<JoinMessage>(&msg)) {
      on_join(*join);
    } else {
      const auto& action = std::get<ActionMessage>(msg);
      if (!session_) {
        send(error_message("join a session before sending actions"));
        return;
      }
      if (auto err = session_->submit(action.action, action.seq)) send(*err);
    }
  }

  void on_join(const JoinMessage& join) {
    if (session_) {
      send(error_message("already joined session " + session_->id()));
      return;
    }
    const ServerConfig& cfg = server_->config;
    if (join.layout.find_first_of("/\\") != std::string::npos || join.layout.find("..") != std::string::npos) {
      send(error_message("layout must be a shipped layout name"));
      return;
    }
    try {
      SessionConfig sc;
      sc.layout = env::resolve_layout(join.layout, cfg.layouts_dir);
      if (cfg.horizon > 0) sc.layout.horizon = cfg.horizon;
      sc.policy = cfg.policy;
      sc.human = join.side;
      sc.tick_ms = cfg.tick_ms;
      sc.seed = derive_seed(cfg.seed, server_->sessions_started++);
      sc.show_skill = cfg.show_skill && join.show_skill;
      session_ = std::make_unique<Session>(new_session_id(server_->id_rng), std::move(sc));
    } catch (const std::exception& e) {
      send(error_message(std::string("cannot start session: ") + e.what()));
      return;
    }
    send(session_->state_message());
    next_tick_ = std::chrono::steady_clock::now();
    schedule_tick();
  }

  void schedule_tick() {
    next_tick_ += std::chrono::milliseconds(server_->config.tick_ms);
    timer_.expires_at(next_tick_);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->on_tick();
    });
  }

  void on_tick() {
    if (closed_ || !session_ || session_->done()) return;
    send(session_->tick());
    if (session_->done()) {
      export_once();
    } else {
      schedule_tick();
    }
  }

  void export_once() {
    if (exported_ || !session_ || server_->config.record_dir.empty() || session_->records().empty()) {
      return;
    }
    exported_ = true;
    try {
      fs::create_directories(server_->config.record_dir);
      const fs::path path = server_->config.record_dir / ("session_" + session_->id() + ".jsonl");
      session_->export_trajectory(path);
      server_->record_export(path);
    } catch (const std::exception& e) {
      if (!closed_) send(error_message(std::string("trajectory export failed: ") + e.what()));
    }
  }

  void send(const nlohmann::json& message) {
    if (closed_) return;
    queue_.push_back(message.dump());
    if (queue_.size() == 1) do_write();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->closed_ = true;
                        self->timer_.cancel();
                        return;
                      }
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->do_write();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  PlayServer::Impl* server_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  std::unique_ptr<Session> session_;
  std::chrono::steady_clock::time_point next_tick_;
  bool closed_ = false;
  bool exported_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, PlayServer::Impl* server)
      : stream_(std::move(socket)), server_(server) {}

  void run() { do_read(); }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       self->on_read(ec);
                     });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    const std::string_view target(req_.target().data(), req_.target().size());
    if (websocket::is_upgrade(req_)) {
      if (target.substr(0, target.find('?')) == "/ws") {
        stream_.expires_never();
        std::make_shared<WsConnection>(stream_.release_socket(), server_)->run(std::move(req_));
        return;
      }
      respond(http::status::not_found, "text/plain; charset=utf-8", "no websocket endpoint here\n");
      return;
    }
    if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
      respond(http::status::method_not_allowed, "text/plain; charset=utf-8", "GET only\n");
      return;
    }
    if (target == "/health") {
      respond(http::status::ok, "application/json", R"({"status":"ok"})");
      return;
    }
    const fs::path file = resolve_static_path(server_->config.static_dir, target);
    std::error_code fec;
    if (file.empty() || !fs::is_regular_file(file, fec)) {
      respond(http::status::not_found, "text/plain; charset=utf-8", "not found\n");
      return;
    }
    try {
      respond(http::status::ok, mime_type(file), read_text_file(file));
    } catch (const std::exception&) {
      respond(http::status::internal_server_error, "text/plain; charset=utf-8", "read failed\n");
    }
  }

  void respond(http::status status, const std::string& type, std::string body) {
    res_ = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res_->set(http::field::server, "iad-play");
    res_->set(http::field::content_type, type);
    res_->keep_alive(req_.keep_alive());
    if (req_.method() != http::verb::head) res_->body() = std::move(body);
    res_->prepare_payload();
    http::async_write(stream_, *res_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!self->res_->keep_alive()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  PlayServer::Impl* server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::shared_ptr<http::response<http::string_body>> res_;
};

}  // namespace

void PlayServer::Impl::bind() {
  if (!config.policy) throw ConfigError("play server needs an agent policy");
  if (config.tick_ms < 1) throw ConfigError("tick_ms must be >= 1");
  beast::error_code ec;
  const auto address = net::ip::make_address(config.address, ec);
  if (ec) throw ConfigError("bad listen address '" + config.address + "'");
  const tcp::endpoint endpoint(address, config.port);
  acceptor.open(endpoint.protocol());
  acceptor.set_option(net::socket_base::reuse_address(true));
  acceptor.bind(endpoint, ec);
  if (ec) {
    throw ConfigError("cannot listen on " + config.address + ":" + std::to_string(config.port) +
                      ": " + ec.message());
  }
  acceptor.listen(net::socket_base::max_listen_connections);
  port = acceptor.local_endpoint().port();
  do_accept();
}

void PlayServer::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<HttpConnection>(std::move(socket), this)->run();
    do_accept();
  });
}

PlayServer::PlayServer(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

PlayServer::~PlayServer() { stop(); }

unsigned short PlayServer::start() {
  impl_->bind();
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
  return impl_->port;
}

void PlayServer::run() {
  impl_->bind();
  impl_->ioc.run();
}

void PlayServer::stop() {
  net::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
  });
  impl_->ioc.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

unsigned short PlayServer::port() const { return impl_->port; }

std::vector<fs::path> PlayServer::exported() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->exported;
}

}  // namespace iad::play
