#include "netpd/llm/chat.hpp"

#include <cmath>
#include <ctime>
#include <thread>

#include "netpd/errors.hpp"

namespace netpd::llm {

const char* to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::Experimenter: return "experimenter";
    case Role::Agent: return "agent";
  }
  return "?";
}

const char* wire_role(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::Experimenter: return "user";
    case Role::Agent: return "assistant";
  }
  return "?";
}

void ProviderConfig::validate() const {
  if (type != "mock" && type != "http") {
    throw ConfigError("unknown provider type '" + type + "'", "provider.type");
  }
  if (type == "http" && endpoint.empty()) {
    throw ConfigError("http provider needs an endpoint", "provider.endpoint");
  }
  if (!(timeout_s > 0)) throw ConfigError("must be positive", "provider.timeout_s");
  if (!(rate_limit_rpm > 0)) throw ConfigError("must be positive", "provider.rate_limit_rpm");
  if (max_retries < 0) throw ConfigError("must be non-negative", "provider.max_retries");
}

nlohmann::json make_request_body(const ProviderConfig& config,
                                 std::span<const ChatMessage> messages) {
  nlohmann::json body;
  body["model"] = config.model;
  auto list = nlohmann::json::array();
  for (const auto& m : messages) {
    list.push_back({{"role", wire_role(m.role)}, {"content", m.content}});
  }
  body["messages"] = std::move(list);
  body["temperature"] = config.temperature;
  if (config.seed) body["seed"] = *config.seed;
  return body;
}

namespace {

std::string format_iso8601(std::chrono::system_clock::time_point tp) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch());
  const std::time_t secs = static_cast<std::time_t>(ms.count() / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::size_t len = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  std::snprintf(buf + len, sizeof buf - len, ".%03dZ", static_cast<int>(ms.count() % 1000));
  return buf;
}

}  // namespace

Clock::Duration SystemClock::now() {
  return std::chrono::duration_cast<Duration>(
      std::chrono::steady_clock::now().time_since_epoch());
}

void SystemClock::sleep_until(Duration t) {
  const auto delta = t - now();
  if (delta > Duration::zero()) std::this_thread::sleep_for(delta);
}

std::string SystemClock::timestamp() {
  return format_iso8601(std::chrono::system_clock::now());
}

Clock::Duration ManualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void ManualClock::sleep_until(Duration t) {
  std::lock_guard lock(mu_);
  if (t > now_) now_ = t;
}

void ManualClock::advance(Duration d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

std::string ManualClock::timestamp() {
  constexpr std::chrono::seconds kEpoch2024{1704067200};
  return format_iso8601(std::chrono::system_clock::time_point(
      std::chrono::duration_cast<std::chrono::system_clock::duration>(kEpoch2024 + now())));
}

std::shared_ptr<Clock> system_clock() {
  static auto clock = std::make_shared<SystemClock>();
  return clock;
}

RateLimiter::RateLimiter(double requests_per_minute, int burst) {
  if (!(requests_per_minute > 0) || burst < 1) {
    throw ConfigError("rate limit must be positive", "provider.rate_limit_rpm");
  }
  interval_ = std::chrono::duration_cast<Clock::Duration>(
      std::chrono::duration<double>(60.0 / requests_per_minute));
  tolerance_ = interval_ * (burst - 1);
}

void RateLimiter::acquire(Clock& clock) {
  Clock::Duration slot;
  {
    std::lock_guard lock(mu_);
    const auto now = clock.now();
    const auto tat = tat_ && *tat_ > now ? *tat_ : now;
    slot = tat - tolerance_ > now ? tat - tolerance_ : now;
    tat_ = tat + interval_;
  }
  clock.sleep_until(slot);
}

void to_json(nlohmann::json& j, const TranscriptEvent& e) {
  j = {{"t", e.t},         {"agent", e.agent}, {"dir", e.dir},      {"role", e.role},
       {"content", e.content}, {"round", e.round}, {"origin", e.origin}};
}

void from_json(const nlohmann::json& j, TranscriptEvent& e) {
  j.at("t").get_to(e.t);
  j.at("agent").get_to(e.agent);
  j.at("dir").get_to(e.dir);
  j.at("role").get_to(e.role);
  j.at("content").get_to(e.content);
  j.at("round").get_to(e.round);
  e.origin = j.value("origin", "");
}

void Transcript::append(TranscriptEvent event) {
  Listener listener;
  {
    std::lock_guard lock(mu_);
    events_.push_back(event);
    listener = listener_;
  }
  if (listener) listener(event);
}

std::vector<TranscriptEvent> Transcript::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

void Transcript::set_listener(Listener listener) {
  std::lock_guard lock(mu_);
  listener_ = std::move(listener);
}

ChatClient::ChatClient(ProviderConfig config, std::shared_ptr<ChatTransport> transport,
                       std::shared_ptr<RateLimiter> limiter, std::shared_ptr<Clock> clock)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      limiter_(std::move(limiter)),
      clock_(std::move(clock)) {
  config_.validate();
  if (!limiter_) limiter_ = std::make_shared<RateLimiter>(config_.rate_limit_rpm);
  if (!clock_) clock_ = system_clock();
}

ChatMessage ChatClient::chat(std::span<const ChatMessage> messages, const ExchangeTag& tag) {
  if (messages.empty()) throw ProtocolError("chat() needs at least one message");
  for (const auto& m : messages) {
    if (m.content.empty()) throw ProtocolError("chat message content must not be empty");
  }
  auto log = [&](std::string dir, std::string role, std::string content, std::string origin) {
    if (!tag.transcript) return;
    tag.transcript->append({clock_->timestamp(), tag.agent, std::move(dir), std::move(role),
                            std::move(content), tag.round, std::move(origin)});
  };
  const ChatMessage& last = messages.back();
  log("out", to_string(last.role), last.content, last.origin);

  const auto body = make_request_body(config_, messages);
  const auto timeout = std::chrono::milliseconds(
      static_cast<std::int64_t>(std::llround(config_.timeout_s * 1000.0)));
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) clock_->sleep_for(std::chrono::seconds(1LL << (attempt - 1)));
    limiter_->acquire(*clock_);
    try {
      std::string content = transport_->send(body, timeout);
      if (content.empty()) throw TransportError("provider returned empty content");
      log("in", "agent", content, "provider");
      return {Role::Agent, std::move(content), "provider"};
    } catch (const TransportError& e) {
      last_error = e.what();
      log("in", "error", last_error, "provider");
    }
  }
  throw TransportError("chat request failed after " + std::to_string(config_.max_retries + 1) +
                       " attempts: " + last_error);
}

}  // namespace netpd::llm
