#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "spectrai/core/error.hpp"

// Field readers for config-style JSON. Values may arrive as strings when the
// document was converted from INI text.
namespace spectrai::io {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown key " + path + "." + it.key());
}

template <typename V>
V get_number(const json& j, const std::string& key, V fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  try {
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      std::size_t used = 0;
      V out;
      if constexpr (std::is_integral_v<V>)
        out = static_cast<V>(std::stoll(s, &used));
      else
        out = static_cast<V>(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
      return out;
    }
    if (!v.is_number()) throw std::invalid_argument("type");
    if constexpr (std::is_integral_v<V>) {
      if (!v.is_number_integer()) throw std::invalid_argument("type");
    }
    return v.get<V>();
  } catch (const std::exception&) {
    throw ConfigError(path + "." + key + ": expected a number");
  }
}

inline bool get_bool(const json& j, const std::string& key, bool fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  }
  throw ConfigError(path + "." + key + ": expected true or false");
}


inline std::string get_string(const json& j, const std::string& key, const std::string& fallback,
                              const std::string& path) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(path + "." + key + ": expected a string");
  return j.at(key).get<std::string>();
}

}  // namespace spectrai::io
