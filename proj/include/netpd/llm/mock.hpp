#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "netpd/llm/chat.hpp"

namespace httplib { class Server; }

namespace netpd::llm {

// Scripted provider behaviour. For each request:
//   1. the first rule whose `contains` text occurs in the last message wins;
//   2. otherwise the next entry of `replies` is consumed (wrapping around when
//      `cycle` is set); an entry with `error` simulates a transport failure;
//   3. otherwise `fallback`, if present;
//   4. otherwise the request fails as a transport error.
//
// JSON form:
//   {"replies": ["C.", {"error": "timeout"}, ...],
//    "rules": [{"contains": "ready", "reply": "Yes."}],
//    "cycle": false, "fallback": "D."}
struct MockScenario {
  struct Step {
    std::optional<std::string> reply;
    std::optional<std::string> error;
  };
  struct Rule {
    std::string contains;
    std::string reply;
  };
  std::vector<Step> replies;
  std::vector<Rule> rules;
  bool cycle = false;
  std::optional<std::string> fallback;
};

// Throws ConfigError (with `field` prefix) on unknown keys or bad types.
MockScenario parse_mock_scenario(const nlohmann::json& j, const std::string& field = "script");
nlohmann::json to_json(const MockScenario& scenario);

// Stateful scenario player speaking the wire protocol. Thread-safe.
class MockTransport final : public ChatTransport {
 public:
  explicit MockTransport(MockScenario scenario) : scenario_(std::move(scenario)) {}
  std::string send(const nlohmann::json& body, std::chrono::milliseconds timeout) override;
  std::size_t requests() const;
  std::vector<nlohmann::json> received() const;

 private:
  mutable std::mutex mu_;
  MockScenario scenario_;
  std::size_t cursor_ = 0;
  std::vector<nlohmann::json> received_;
};

// Serves a MockScenario over HTTP (POST any path, wire protocol body).
// Used to exercise the real HTTP transport end to end.
class MockProviderServer {
 public:
  explicit MockProviderServer(MockScenario scenario);
  ~MockProviderServer();
  MockProviderServer(const MockProviderServer&) = delete;
  MockProviderServer& operator=(const MockProviderServer&) = delete;

  // Binds 127.0.0.1 on an ephemeral port; returns "http://127.0.0.1:<port>/v1/chat".
  std::string start();
  void stop();
  // Requests received so far (request bodies plus the Authorization header).
  std::vector<nlohmann::json> received() const;

 private:
  std::shared_ptr<MockTransport> transport_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> received_;
};

}  // namespace netpd::llm
