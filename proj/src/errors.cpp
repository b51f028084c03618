#include "netpd/errors.hpp"

namespace netpd {

namespace {
std::string with_field(const std::string& message, const std::string& field) {
  return field.empty() ? message : field + ": " + message;
}
}  // namespace

ConfigError::ConfigError(const std::string& message, std::string field)
    : Error(with_field(message, field)), field_(std::move(field)), detail_(message) {}

RectificationFailure::RectificationFailure(int round)
    : Error("agent reply still ambiguous after three attempts in round " +
            std::to_string(round)),
      round_(round) {}

HumanTimeout::HumanTimeout(std::string agent_id, int round)
    : Error("human agent '" + agent_id + "' timed out in round " +
            std::to_string(round)),
      agent_id_(std::move(agent_id)),
      round_(round) {}

Aborted::Aborted() : Error("experiment aborted by operator") {}

IntegrityError::IntegrityError(const std::string& message, int round)
    : Error("round " + std::to_string(round) + ": " + message), round_(round) {}

}  // namespace netpd
