#pragma once

#include <string>

#include "netpd/llm/chat.hpp"

namespace netpd::llm {

// POSTs the wire body as JSON to `endpoint` and expects {"content": string}.
// Sends "Authorization: Bearer <token>" when a token is given.
class HttpTransport final : public ChatTransport {
 public:
  HttpTransport(std::string endpoint, std::string bearer_token = {});
  std::string send(const nlohmann::json& body, std::chrono::milliseconds timeout) override;

 private:
  std::string origin_;  // scheme://host[:port]
  std::string path_;
  std::string token_;
};

// Builds the transport for a provider config: MockTransport for "mock"
// (script required), HttpTransport for "http". The credential is read from
// the environment variable named by credential_env; a missing variable is a
// ConfigError.
std::shared_ptr<ChatTransport> make_transport(const ProviderConfig& config,
                                              const nlohmann::json* mock_script);

}  // namespace netpd::llm
