#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace netpd::llm {

enum class Role { System, Experimenter, Agent };

const char* to_string(Role role);
// Wire names: experimenter -> "user", agent -> "assistant".
const char* wire_role(Role role);

struct ChatMessage {
  Role role = Role::Experimenter;
  std::string content;
  // "engine" for canned protocol text, "operator" for live injections,
  // "provider" for agent replies.
  std::string origin = "engine";

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ProviderConfig {
  std::string type = "mock";  // "mock" or "http"
  std::string endpoint;
  std::string model = "mock";
  double temperature = 1.0;
  std::optional<std::int64_t> seed;
  double timeout_s = 60.0;
  int max_retries = 3;
  double rate_limit_rpm = 60.0;
  // Name of the environment variable holding the bearer token, if any.
  std::string credential_env;

  void validate() const;
};

nlohmann::json make_request_body(const ProviderConfig& config,
                                 std::span<const ChatMessage> messages);

// Time source for rate limiting, backoff and transcript timestamps.
class Clock {
 public:
  using Duration = std::chrono::nanoseconds;
  virtual ~Clock() = default;
  virtual Duration now() = 0;
  virtual void sleep_until(Duration t) = 0;
  void sleep_for(Duration d) { sleep_until(now() + d); }
  virtual std::string timestamp() = 0;  // ISO 8601, UTC
};

class SystemClock final : public Clock {
 public:
  Duration now() override;
  void sleep_until(Duration t) override;
  std::string timestamp() override;
};

// Virtual time: sleeping advances the clock instead of blocking. Timestamps
// count from 2024-01-01T00:00:00Z.
class ManualClock final : public Clock {
 public:
  Duration now() override;
  void sleep_until(Duration t) override;
  void advance(Duration d);
  std::string timestamp() override;

 private:
  std::mutex mu_;
  Duration now_{0};
};

std::shared_ptr<Clock> system_clock();

// Token bucket in GCRA form. With burst = 1, request i (0-based) of a
// back-to-back batch is admitted no earlier than i / rate seconds.
class RateLimiter {
 public:
  RateLimiter(double requests_per_minute, int burst = 1);
  void acquire(Clock& clock);

 private:
  std::mutex mu_;
  Clock::Duration interval_;
  Clock::Duration tolerance_;
  std::optional<Clock::Duration> tat_;
};

struct TranscriptEvent {
  std::string t;
  std::string agent;
  std::string dir;   // "out" or "in"
  std::string role;  // system | experimenter | agent | error
  std::string content;
  int round = 0;
  std::string origin;
};

void to_json(nlohmann::json& j, const TranscriptEvent& e);
void from_json(const nlohmann::json& j, TranscriptEvent& e);

// Append-only, shared by all chat agents of a repetition.
class Transcript {
 public:
  using Listener = std::function<void(const TranscriptEvent&)>;

  void append(TranscriptEvent event);
  std::vector<TranscriptEvent> events() const;
  void set_listener(Listener listener);

 private:
  mutable std::mutex mu_;
  std::vector<TranscriptEvent> events_;
  Listener listener_;
};

// Sends one wire request body and returns the reply content. Throws
// TransportError on timeouts, HTTP errors and malformed responses.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string send(const nlohmann::json& body, std::chrono::milliseconds timeout) = 0;
};

struct ExchangeTag {
  std::string agent;
  int round = 0;
  Transcript* transcript = nullptr;
};

class ChatClient {
 public:
  ChatClient(ProviderConfig config, std::shared_ptr<ChatTransport> transport,
             std::shared_ptr<RateLimiter> limiter, std::shared_ptr<Clock> clock);

  // One agent reply to `messages`. Rate limited; transport failures are
  // retried with 1 s, 2 s, 4 s backoff up to max_retries times. The last
  // outgoing message, every failed attempt and the reply are appended to the
  // tagged transcript.
  ChatMessage chat(std::span<const ChatMessage> messages, const ExchangeTag& tag = {});

  const ProviderConfig& config() const noexcept { return config_; }
  Clock& clock() noexcept { return *clock_; }

 private:
  ProviderConfig config_;
  std::shared_ptr<ChatTransport> transport_;
  std::shared_ptr<RateLimiter> limiter_;
  std::shared_ptr<Clock> clock_;
};

}  // namespace netpd::llm
