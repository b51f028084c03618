#include "netpd/events.hpp"

#include <algorithm>

namespace netpd {

nlohmann::json to_json(const Event& e) {
  nlohmann::json j{{"seq", e.seq}, {"type", e.type}, {"data", e.data}};
  if (e.repetition >= 0) j["repetition"] = e.repetition;
  if (e.round > 0) j["round"] = e.round;
  return j;
}

std::uint64_t EventLog::append(std::string type, int repetition, int round, nlohmann::json data) {
  Event copy;
  Listener listener;
  {
    std::lock_guard lock(mu_);
    Event e{events_.size() + 1, std::move(type), repetition, round, std::move(data)};
    events_.push_back(e);
    copy = std::move(e);
    listener = listener_;
  }
  cv_.notify_all();
  if (listener) listener(copy);
  return copy.seq;
}

std::vector<Event> EventLog::since(std::uint64_t after) const {
  std::lock_guard lock(mu_);
  if (after >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(after), events_.end()};
}

bool EventLog::wait(std::uint64_t after, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || events_.size() > after; });
  return events_.size() > after;
}

void EventLog::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool EventLog::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::uint64_t EventLog::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

std::size_t EventLog::count(const std::string& type) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(events_.begin(), events_.end(), [&](const Event& e) { return e.type == type; }));
}

void EventLog::set_listener(Listener listener) {
  std::lock_guard lock(mu_);
  listener_ = std::move(listener);
}

}  // namespace netpd
