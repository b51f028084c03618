#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace netpd {

// One entry of an experiment's ordered event stream. `seq` starts at 1.
// Repetitions are 0-based; round 0 means "not tied to a round".
struct Event {
  std::uint64_t seq = 0;
  std::string type;
  int repetition = -1;
  int round = 0;
  nlohmann::json data = nlohmann::json::object();
};

nlohmann::json to_json(const Event& event);

// Append-only, thread-safe event log with blocking reads for streaming.
class EventLog {
 public:
  using Listener = std::function<void(const Event&)>;

  std::uint64_t append(std::string type, int repetition, int round,
                       nlohmann::json data = nlohmann::json::object());
  // Events with seq > after, in order.
  std::vector<Event> since(std::uint64_t after) const;
  // Blocks until an event with seq > after exists, the log is closed, or the
  // timeout passes. Returns true if new events are available.
  bool wait(std::uint64_t after, std::chrono::milliseconds timeout) const;
  void close();
  bool closed() const;
  std::uint64_t size() const;
  std::size_t count(const std::string& type) const;
  void set_listener(Listener listener);

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<Event> events_;
  bool closed_ = false;
  Listener listener_;
};

}  // namespace netpd
