#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "armsim/errors.hpp"

namespace armsim {

enum class MessageKind { ScalarCommand, JointStateMsg, ModelDescription };

inline std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::ScalarCommand: return "ScalarCommand";
    case MessageKind::JointStateMsg: return "JointStateMsg";
    case MessageKind::ModelDescription: return "ModelDescription";
  }
  return "?";
}

struct ScalarCommand {
  double value = 0.0;  // rad for position commands
  bool operator==(const ScalarCommand&) const = default;
};

struct JointStateMsg {
  double t = 0.0;
  std::vector<std::string> names;
  std::vector<double> q;
  std::vector<double> qd;
  std::vector<double> effort;
  bool operator==(const JointStateMsg&) const = default;
};

/// Robot description text, as carried on a "robot_description"-style topic.
struct ModelDescriptionMsg {
  std::string urdf;
  bool operator==(const ModelDescriptionMsg&) const = default;
};

using Message = std::variant<ScalarCommand, JointStateMsg, ModelDescriptionMsg>;

inline MessageKind kind_of(const Message& m) {
  return static_cast<MessageKind>(m.index());
}

/// Slash-separated, leading "/", no empty segments, no trailing "/",
/// segments made of [A-Za-z0-9_].
inline bool is_valid_topic_name(std::string_view name) {
  if (name.size() < 2 || name.front() != '/' || name.back() == '/') return false;
  char prev = '\0';
  for (char c : name) {
    const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '_';
    if (!word && c != '/') return false;
    if (c == '/' && prev == '/') return false;
    prev = c;
  }
  return true;
}

namespace detail {

struct SubscriberQueue {
  std::mutex mutex;
  std::deque<Message> pending;
};

struct TopicRecord {
  MessageKind kind;
  std::vector<std::weak_ptr<SubscriberQueue>> subscribers;
  bool has_state_time = false;
  double last_state_time = 0.0;
};

}  // namespace detail

class Bus;

/// Drainable FIFO of every message published on one topic after creation.
/// Destroying the subscription detaches it from the bus.
class Subscription {
 public:
  Subscription() = default;

  const std::string& topic() const { return topic_; }
  MessageKind kind() const { return kind_; }

  std::vector<Message> drain() {
    std::vector<Message> out;
    if (!queue_) return out;
    std::lock_guard lock(queue_->mutex);
    out.assign(std::make_move_iterator(queue_->pending.begin()),
               std::make_move_iterator(queue_->pending.end()));
    queue_->pending.clear();
    return out;
  }

  template <typename T>
  std::vector<T> drain_as() {
    std::vector<T> out;
    for (auto& m : drain()) out.push_back(std::get<T>(std::move(m)));
    return out;
  }

  std::size_t pending() const {
    if (!queue_) return 0;
    std::lock_guard lock(queue_->mutex);
    return queue_->pending.size();
  }

 private:
  friend class Bus;
  Subscription(std::string topic, MessageKind kind, std::shared_ptr<detail::SubscriberQueue> q)
      : topic_(std::move(topic)), kind_(kind), queue_(std::move(q)) {}

  std::string topic_;
  MessageKind kind_ = MessageKind::ScalarCommand;
  std::shared_ptr<detail::SubscriberQueue> queue_;
};

class Publisher {
 public:
  Publisher() = default;

  const std::string& topic() const { return topic_; }
  MessageKind kind() const { return kind_; }
  bool valid() const { return bus_ != nullptr; }

  /// Appends `message` to every live subscription; returns how many were reached.
  std::size_t publish(const Message& message) const;

 private:
  friend class Bus;
  Publisher(Bus* bus, std::string topic, MessageKind kind)
      : bus_(bus), topic_(std::move(topic)), kind_(kind) {}

  Bus* bus_ = nullptr;
  std::string topic_;
  MessageKind kind_ = MessageKind::ScalarCommand;
};

/// In-process topic graph. Pull model: subscribers drain their own queues,
/// nothing is latched and queues are unbounded. Thread-safe; ordering is
/// guaranteed per publisher per topic.
class Bus {
 public:
  Bus() = default;
  Bus(const Bus&) = delete;
  Bus& operator=(const Bus&) = delete;

  Publisher advertise(const std::string& name, MessageKind kind) {
    std::lock_guard lock(mutex_);
    ensure_topic(name, kind);
    return Publisher(this, name, kind);
  }

  Subscription subscribe(const std::string& name, MessageKind kind) {
    std::lock_guard lock(mutex_);
    auto& topic = ensure_topic(name, kind);
    auto queue = std::make_shared<detail::SubscriberQueue>();
    topic.subscribers.push_back(queue);
    return Subscription(name, kind, std::move(queue));
  }

  std::size_t publish(const std::string& name, const Message& message) {
    validate(name, message);
    std::lock_guard lock(mutex_);
    auto it = topics_.find(name);
    if (it == topics_.end()) throw Error(ErrorCode::BadName, name, "topic not advertised: " + name);
    auto& topic = it->second;
    if (topic.kind != kind_of(message)) {
      throw Error(ErrorCode::KindMismatch, name,
                  "topic " + name + " carries " + std::string(to_string(topic.kind)));
    }
    if (const auto* js = std::get_if<JointStateMsg>(&message)) {
      if (topic.has_state_time && js->t < topic.last_state_time) {
        throw Error(ErrorCode::InvalidMessage, name, "joint state time went backwards");
      }
      topic.has_state_time = true;
      topic.last_state_time = js->t;
    }
    std::size_t delivered = 0;
    auto& subs = topic.subscribers;
    for (auto sub = subs.begin(); sub != subs.end();) {
      if (auto queue = sub->lock()) {
        std::lock_guard qlock(queue->mutex);
        queue->pending.push_back(message);
        ++delivered;
        ++sub;
      } else {
        sub = subs.erase(sub);
      }
    }
    return delivered;
  }

  std::size_t topic_count() const {
    std::lock_guard lock(mutex_);
    return topics_.size();
  }

  bool has_topic(const std::string& name) const {
    std::lock_guard lock(mutex_);
    return topics_.count(name) != 0;
  }

  std::vector<std::string> topic_names() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [name, _] : topics_) out.push_back(name);
    return out;
  }

 private:
  detail::TopicRecord& ensure_topic(const std::string& name, MessageKind kind) {
    if (!is_valid_topic_name(name)) throw Error(ErrorCode::BadName, name, "malformed topic name '" + name + "'");
    auto [it, inserted] = topics_.try_emplace(name, detail::TopicRecord{kind, {}});
    if (!inserted && it->second.kind != kind) {
      throw Error(ErrorCode::KindMismatch, name,
                  "topic " + name + " already carries " + std::string(to_string(it->second.kind)));
    }
    return it->second;
  }

  static void validate(const std::string& name, const Message& message) {
    if (const auto* cmd = std::get_if<ScalarCommand>(&message)) {
      if (!std::isfinite(cmd->value)) throw Error(ErrorCode::InvalidMessage, name, "non-finite command");
    } else if (const auto* js = std::get_if<JointStateMsg>(&message)) {
      const auto n = js->names.size();
      if (js->q.size() != n || js->qd.size() != n || js->effort.size() != n) {
        throw Error(ErrorCode::InvalidMessage, name, "joint state lists differ in length");
      }
    }
  }

  mutable std::mutex mutex_;
  std::map<std::string, detail::TopicRecord> topics_;
};

inline std::size_t Publisher::publish(const Message& message) const {
  if (!bus_) throw Error(ErrorCode::InvalidArgument, topic_, "publish on an empty handle");
  return bus_->publish(topic_, message);
}

}  // namespace armsim
