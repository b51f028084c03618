#include "netpd/llm/http_transport.hpp"

#include <cstdlib>

#include <httplib.h>

#include "netpd/errors.hpp"
#include "netpd/llm/mock.hpp"

namespace netpd::llm {

HttpTransport::HttpTransport(std::string endpoint, std::string bearer_token)
    : token_(std::move(bearer_token)) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must be an absolute http(s) URL", "provider.endpoint");
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  origin_ = endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
}

std::string HttpTransport::send(const nlohmann::json& body, std::chrono::milliseconds timeout) {
  httplib::Client client(origin_);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransportError("request to " + origin_ + path_ + " failed: " +
                                 httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("provider answered HTTP " + std::to_string(res->status));
  }
  try {
    auto reply = nlohmann::json::parse(res->body);
    return reply.at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw TransportError("provider response lacks a string 'content' field");
  }
}

std::shared_ptr<ChatTransport> make_transport(const ProviderConfig& config,
                                              const nlohmann::json* mock_script) {
  config.validate();
  if (config.type == "mock") {
    if (!mock_script) throw ConfigError("mock provider needs a script", "script");
    return std::make_shared<MockTransport>(parse_mock_scenario(*mock_script));
  }
  std::string token;
  if (!config.credential_env.empty()) {
    const char* value = std::getenv(config.credential_env.c_str());
    if (!value || !*value) {
      throw ConfigError("environment variable '" + config.credential_env + "' is not set",
                        "provider.credential_env");
    }
    token = value;
  }
  return std::make_shared<HttpTransport>(config.endpoint, std::move(token));
}

}  // namespace netpd::llm
