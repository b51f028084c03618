#include "netpd/llm/mock.hpp"

#include <httplib.h>

#include "netpd/errors.hpp"
#include "netpd/json_util.hpp"

namespace netpd::llm {

using namespace netpd::json_util;

MockScenario parse_mock_scenario(const nlohmann::json& j, const std::string& field) {
  reject_unknown(j, {"replies", "rules", "cycle", "fallback"}, field);
  MockScenario s;
  if (j.contains("replies")) {
    const auto& list = j.at("replies");
    if (!list.is_array()) throw ConfigError("expected an array", join(field, "replies"));
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto path = index(join(field, "replies"), i);
      const auto& item = list[i];
      MockScenario::Step step;
      if (item.is_string()) {
        step.reply = item.get<std::string>();
      } else {
        reject_unknown(item, {"reply", "error"}, path);
        if (item.contains("reply")) step.reply = get<std::string>(item, "reply", path);
        if (item.contains("error")) step.error = get<std::string>(item, "error", path);
        if (step.reply.has_value() == step.error.has_value()) {
          throw ConfigError("exactly one of 'reply' or 'error' is required", path);
        }
      }
      s.replies.push_back(std::move(step));
    }
  }
  if (j.contains("rules")) {
    const auto& list = j.at("rules");
    if (!list.is_array()) throw ConfigError("expected an array", join(field, "rules"));
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto path = index(join(field, "rules"), i);
      reject_unknown(list[i], {"contains", "reply"}, path);
      s.rules.push_back({get<std::string>(list[i], "contains", path),
                         get<std::string>(list[i], "reply", path)});
    }
  }
  s.cycle = get_or<bool>(j, "cycle", false, field);
  if (j.contains("fallback") && !j.at("fallback").is_null()) {
    s.fallback = get<std::string>(j, "fallback", field);
  }
  return s;
}

nlohmann::json to_json(const MockScenario& s) {
  nlohmann::json j;
  auto replies = nlohmann::json::array();
  for (const auto& step : s.replies) {
    if (step.reply) {
      replies.push_back(*step.reply);
    } else {
      replies.push_back({{"error", *step.error}});
    }
  }
  j["replies"] = std::move(replies);
  auto rules = nlohmann::json::array();
  for (const auto& r : s.rules) rules.push_back({{"contains", r.contains}, {"reply", r.reply}});
  j["rules"] = std::move(rules);
  j["cycle"] = s.cycle;
  if (s.fallback) j["fallback"] = *s.fallback;
  return j;
}

std::string MockTransport::send(const nlohmann::json& body, std::chrono::milliseconds) {
  std::lock_guard lock(mu_);
  received_.push_back(body);
  const auto& messages = body.at("messages");
  const std::string last =
      messages.empty() ? std::string() : messages.back().at("content").get<std::string>();
  for (const auto& rule : scenario_.rules) {
    if (last.find(rule.contains) != std::string::npos) return rule.reply;
  }
  if (!scenario_.replies.empty() &&
      (scenario_.cycle || cursor_ < scenario_.replies.size())) {
    const auto& step = scenario_.replies[cursor_ % scenario_.replies.size()];
    ++cursor_;
    if (step.error) throw TransportError("mock provider: " + *step.error);
    return *step.reply;
  }
  if (scenario_.fallback) return *scenario_.fallback;
  throw TransportError("mock provider: script exhausted");
}

std::size_t MockTransport::requests() const {
  std::lock_guard lock(mu_);
  return received_.size();
}

std::vector<nlohmann::json> MockTransport::received() const {
  std::lock_guard lock(mu_);
  return received_;
}

MockProviderServer::MockProviderServer(MockScenario scenario)
    : transport_(std::make_shared<MockTransport>(std::move(scenario))),
      server_(std::make_unique<httplib::Server>()) {}

MockProviderServer::~MockProviderServer() { stop(); }

std::string MockProviderServer::start() {
  server_->Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      return;
    }
    {
      std::lock_guard lock(mu_);
      auto logged = body;
      logged["authorization"] = req.get_header_value("Authorization");
      received_.push_back(std::move(logged));
    }
    try {
      auto content = transport_->send(body, std::chrono::milliseconds(0));
      res.set_content(nlohmann::json{{"content", content}}.dump(), "application/json");
    } catch (const TransportError& e) {
      res.status = 503;
      res.set_content(e.what(), "text/plain");
    }
  });
  const int port = server_->bind_to_any_port("127.0.0.1");
  if (port <= 0) throw Error("mock provider server could not bind");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
}

void MockProviderServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::vector<nlohmann::json> MockProviderServer::received() const {
  std::lock_guard lock(mu_);
  return received_;
}

}  // namespace netpd::llm
