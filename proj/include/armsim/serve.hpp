#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "armsim/bus.hpp"
#include "armsim/kinematics.hpp"
#include "armsim/serve_protocol.hpp"
#include "armsim/sim.hpp"

namespace armsim {

struct ServeOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 9090;  // 0 picks a free port
  std::size_t max_outbox = 64;  // queued State frames per client before the oldest are dropped
};

namespace serve_detail {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct Frame {
  std::string text;
  bool droppable = false;
};

class Session;

/// Hooks a Session calls back into; all invoked on the network thread.
struct SessionHost {
  virtual ~SessionHost() = default;
  virtual void on_open(const std::shared_ptr<Session>& s) = 0;
  virtual void on_text(const std::shared_ptr<Session>& s, std::string text) = 0;
  virtual void on_close(const Session* s) = 0;
};

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, SessionHost& host, std::size_t max_outbox)
      : ws_(std::move(socket)), host_(host), max_outbox_(max_outbox) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->host_.on_open(self);
      self->read();
    });
  }

  /// Queues a frame. Droppable frames beyond the outbox bound are discarded
  /// oldest first so a slow client never stalls the producer.
  void send(std::string text, bool droppable) {
    if (closed_) return;
    outbox_.push_back({std::move(text), droppable});
    const std::size_t first_idle = writing_ ? 1 : 0;
    while (outbox_.size() > max_outbox_) {
      auto victim = std::find_if(outbox_.begin() + static_cast<std::ptrdiff_t>(first_idle), outbox_.end(),
                                 [](const Frame& f) { return f.droppable; });
      if (victim == outbox_.end()) break;
      outbox_.erase(victim);
      ++dropped_;
    }
    if (!writing_) write();
  }

  std::size_t dropped() const { return dropped_; }

  void close() {
    if (closed_) return;
    closed_ = true;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->host_.on_close(self.get());
        return;
      }
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->host_.on_text(self, std::move(text));
      self->read();
    });
  }

  void write() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->outbox_.pop_front();
      if (ec) {
        self->writing_ = false;
        self->closed_ = true;
        return;
      }
      if (self->outbox_.empty()) {
        self->writing_ = false;
      } else {
        self->write();
      }
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  SessionHost& host_;
  std::size_t max_outbox_;
  std::deque<Frame> outbox_;
  bool writing_ = false;
  bool closed_ = false;
  std::size_t dropped_ = 0;
};

}  // namespace serve_detail

/// Runs a simulation paced to the wall clock and bridges it to websocket
/// clients: each client gets the ModelDescription once, then State frames at
/// the publish rate; Command frames become bus commands (IK targets are
/// solved here first). The simulation loop and the network loop run on their
/// own threads and only exchange queued messages.
class ServeBridge : public serve_detail::SessionHost {
 public:
  ServeBridge(RobotModel model, ControllerSet controllers, SimConfig cfg, ServeOptions opts = {})
      : opts_(std::move(opts)),
        sim_(spawn(model, controllers, cfg, bus_)),
        state_sub_(bus_.subscribe(sim_.state_topic(), MessageKind::JointStateMsg)),
        chain_(movable_chain(sim_.model(), default_tip(sim_.model()))),
        acceptor_(ioc_) {
    std::vector<std::string> controlled;
    for (const auto& j : sim_.joints()) {
      joint_names_.push_back(j.name);
      if (j.controller) {
        controlled.push_back(j.name);
        command_pubs_.emplace(j.name, bus_.advertise(sim_.command_topic(j.controller->name), MessageKind::ScalarCommand));
      }
    }
    model_frame_ = protocol::model_description(sim_.model(), sim_.controllers().ns, chain_.tip, controlled).dump();
  }

  ~ServeBridge() { stop(); }

  ServeBridge(const ServeBridge&) = delete;
  ServeBridge& operator=(const ServeBridge&) = delete;

  const std::vector<std::string>& warnings() const { return sim_.warnings(); }

  /// Binds and starts both loops; returns the bound port.
  unsigned short start() {
    namespace net = serve_detail::net;
    using serve_detail::tcp;
    const tcp::endpoint endpoint(net::ip::make_address(opts_.address), opts_.port);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen(net::socket_base::max_listen_connections);
    port_ = acceptor_.local_endpoint().port();
    accept();
    running_ = true;
    net_thread_ = std::thread([this] { ioc_.run(); });
    sim_thread_ = std::thread([this] { sim_loop(); });
    return port_;
  }

  unsigned short port() const { return port_; }

  void stop() {
    if (!running_.exchange(false)) return;
    serve_detail::net::post(ioc_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
      for (auto& w : sessions_)
        if (auto s = w.lock()) s->close();
    });
    if (sim_thread_.joinable()) sim_thread_.join();
    work_.reset();
    ioc_.stop();
    if (net_thread_.joinable()) net_thread_.join();
  }

 private:
  struct PendingCommand {
    std::weak_ptr<serve_detail::Session> from;
    protocol::Command command;
  };

  void accept() {
    acceptor_.async_accept([this](boost::system::error_code ec, serve_detail::tcp::socket socket) {
      if (ec) return;
      std::make_shared<serve_detail::Session>(std::move(socket), *this, opts_.max_outbox)->start();
      accept();
    });
  }

  // network thread
  void on_open(const std::shared_ptr<serve_detail::Session>& s) override {
    s->send(model_frame_, false);
    sessions_.push_back(s);
  }

  void on_text(const std::shared_ptr<serve_detail::Session>& s, std::string text) override {
    try {
      auto cmd = protocol::parse_command(text, joint_names_);
      std::lock_guard lock(commands_mutex_);
      commands_.push_back({s, std::move(cmd)});
    } catch (const Error& e) {
      s->send(protocol::error(e.what()).dump(), false);
    }
  }

  void on_close(const serve_detail::Session* s) override {
    std::erase_if(sessions_, [s](const std::weak_ptr<serve_detail::Session>& w) {
      auto p = w.lock();
      return !p || p.get() == s;
    });
  }

  void broadcast(std::string frame) {
    serve_detail::net::post(ioc_, [this, frame = std::move(frame)] {
      for (auto& w : sessions_)
        if (auto s = w.lock()) s->send(frame, true);
    });
  }

  void reply_error(const std::weak_ptr<serve_detail::Session>& to, std::string message) {
    serve_detail::net::post(ioc_, [to, frame = protocol::error(message).dump()] {
      if (auto s = to.lock()) s->send(frame, false);
    });
  }

  // simulation thread
  void apply(const PendingCommand& pending) {
    if (const auto* jc = std::get_if<protocol::JointCommand>(&pending.command)) {
      auto pub = command_pubs_.find(jc->joint);
      if (pub == command_pubs_.end()) {
        reply_error(pending.from, "joint '" + jc->joint + "' has no controller");
        return;
      }
      pub->second.publish(ScalarCommand{jc->target});
      return;
    }
    const auto& target = std::get<protocol::IkCommand>(pending.command).target;
    auto q = solve_ik(target);
    if (!q) {
      reply_error(pending.from, "unreachable");
      return;
    }
    for (std::size_t k = 0; k < chain_.movable.size(); ++k) {
      const auto& name = sim_.model().joints[chain_.movable[k]].name;
      auto pub = command_pubs_.find(name);
      if (pub != command_pubs_.end()) pub->second.publish(ScalarCommand{(*q)[static_cast<Eigen::Index>(k)]});
    }
  }

  /// DLS seeded from the current pose, then from zero; wrapped into limits and FK-checked.
  std::optional<VectorXd> solve_ik(const Vec3& target) const {
    const auto ranges = joint_ranges(sim_.model(), chain_);
    VectorXd current(static_cast<Eigen::Index>(chain_.dof()));
    for (std::size_t k = 0; k < chain_.dof(); ++k) {
      const auto slot = sim_.joint_slot(sim_.model().joints[chain_.movable[k]].name);
      current[static_cast<Eigen::Index>(k)] = slot ? sim_.joints()[*slot].state.q : 0.0;
    }
    for (const VectorXd& seed : {current, VectorXd(VectorXd::Zero(current.size()))}) {
      DlsOptions opts;
      opts.max_iter = 500;
      auto sol = ik_dls(sim_.model(), chain_, seed, target, opts);
      if (!sol.converged) continue;
      VectorXd q = sol.q.unaryExpr([](double a) { return wrap_angle(a); });
      bool inside = true;
      for (Eigen::Index k = 0; k < q.size(); ++k) {
        const auto& r = ranges[static_cast<std::size_t>(k)];
        inside = inside && q[k] >= r.lower && q[k] <= r.upper;
      }
      if (inside && verify_ik(sim_.model(), chain_, q, target, 1e-6)) return q;
    }
    return std::nullopt;
  }

  void sim_loop() {
    using clock = std::chrono::steady_clock;
    const double dt = sim_.config().dt;
    const auto start = clock::now();
    std::size_t done = 0;
    while (running_) {
      std::deque<PendingCommand> batch;
      {
        std::lock_guard lock(commands_mutex_);
        batch.swap(commands_);
      }
      for (const auto& c : batch) apply(c);

      const double elapsed = std::chrono::duration<double>(clock::now() - start).count();
      const auto due = static_cast<std::size_t>(elapsed / dt);
      // bounded catch-up after a stall
      for (std::size_t n = 0; done < due && n < 1000; ++n, ++done) {
        if (!sim_.step()) continue;
        for (auto& m : state_sub_.drain_as<JointStateMsg>()) broadcast(protocol::state(m, sim_.targets()).dump());
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  }

  ServeOptions opts_;
  Bus bus_;
  Simulation sim_;
  Subscription state_sub_;
  Chain chain_;
  std::vector<std::string> joint_names_;
  std::map<std::string, Publisher> command_pubs_;
  std::string model_frame_;

  serve_detail::net::io_context ioc_;
  std::optional<serve_detail::net::executor_work_guard<serve_detail::net::io_context::executor_type>> work_{
      serve_detail::net::make_work_guard(ioc_)};
  serve_detail::tcp::acceptor acceptor_;
  std::vector<std::weak_ptr<serve_detail::Session>> sessions_;  // network thread only

  std::mutex commands_mutex_;
  std::deque<PendingCommand> commands_;

  std::atomic<bool> running_{false};
  unsigned short port_ = 0;
  std::thread net_thread_;
  std::thread sim_thread_;
};

}  // namespace armsim
