#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "netpd/errors.hpp"

namespace netpd::json_util {

inline std::string join(const std::string& parent, std::string_view key) {
  return parent.empty() ? std::string(key) : parent + "." + std::string(key);
}

inline std::string index(const std::string& parent, std::size_t i) {
  return parent + "[" + std::to_string(i) + "]";
}

inline void require_object(const nlohmann::json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError("expected a JSON object", field);
}

// Rejects any key not listed in `allowed`, naming it in the error.
inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                           const std::string& field) {
  require_object(j, field);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok |= key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "'", join(field, key));
  }
}

template <typename T>
T get(const nlohmann::json& j, std::string_view key, const std::string& field) {
  const std::string path = join(field, key);
  auto it = j.find(std::string(key));
  if (it == j.end()) throw ConfigError("missing required key", path);
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("wrong type", path);
  }
}

template <typename T>
T get_or(const nlohmann::json& j, std::string_view key, T fallback, const std::string& field) {
  if (!j.contains(std::string(key)) || j.at(std::string(key)).is_null()) return fallback;
  return get<T>(j, key, field);
}

// Integers must be JSON integers (2.5 is rejected rather than truncated).
inline std::int64_t get_int(const nlohmann::json& j, std::string_view key, const std::string& field) {
  const std::string path = join(field, key);
  auto it = j.find(std::string(key));
  if (it == j.end()) throw ConfigError("missing required key", path);
  if (!it->is_number_integer()) throw ConfigError("expected an integer", path);
  return it->get<std::int64_t>();
}

inline std::int64_t get_int_or(const nlohmann::json& j, std::string_view key, std::int64_t fallback,
                               const std::string& field) {
  if (!j.contains(std::string(key))) return fallback;
  return get_int(j, key, field);
}

}  // namespace netpd::json_util
