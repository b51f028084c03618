#pragma once

#include <stdexcept>
#include <string>

namespace netpd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration. `field()` names the offending config path, e.g.
// "topology.k" or "agents[3].strategy", when one is known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string field = {});
  const std::string& field() const noexcept { return field_; }
  // The message without the field prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string field_;
  std::string detail_;
};

// Round protocol violated (missing action, out-of-order observation, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Empty or undersized input to a statistic.
class InputError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

// Chat provider unreachable or returned garbage after all transport retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

// The chat agent stayed ambiguous through the whole rectification budget.
class RectificationFailure : public Error {
 public:
  explicit RectificationFailure(int round);
  int round() const noexcept { return round_; }

 private:
  int round_;
};

// A human agent missed its input deadline.
class HumanTimeout : public Error {
 public:
  HumanTimeout(std::string agent_id, int round);
  const std::string& agent_id() const noexcept { return agent_id_; }
  int round() const noexcept { return round_; }

 private:
  std::string agent_id_;
  int round_;
};

class Aborted : public Error {
 public:
  Aborted();
};

// Stored results disagree with a re-execution.
class IntegrityError : public Error {
 public:
  IntegrityError(const std::string& message, int round);
  int round() const noexcept { return round_; }

 private:
  int round_;
};

}  // namespace netpd
