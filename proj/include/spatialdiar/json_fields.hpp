#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "spatialdiar/errors.hpp"

namespace spatialdiar::json_fields {

inline std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Reads `obj[key]` as T; a type mismatch throws ValidationError naming the
// full field path.
template <typename T>
std::optional<T> optional_field(const nlohmann::json& obj, const std::string& key,
                                const std::string& prefix) {
  if (!obj.is_object())
    throw ValidationError((prefix.empty() ? std::string("<root>") : prefix) +
                          ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(join(prefix, key) + ": " + e.what());
  }
}

template <typename T>
T field_or(const nlohmann::json& obj, const std::string& key,
           const std::string& prefix, T fallback) {
  auto v = optional_field<T>(obj, key, prefix);
  return v ? *v : fallback;
}

template <typename T>
T required_field(const nlohmann::json& obj, const std::string& key,
                 const std::string& prefix) {
  auto v = optional_field<T>(obj, key, prefix);
  if (!v) throw ValidationError(join(prefix, key) + ": required field missing");
  return *v;
}

}  // namespace spatialdiar::json_fields
