#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "stancelab/common.hpp"

namespace stancelab::detail {

/// Reads an object's keys one by one and rejects keys nobody asked for.
class JsonReader {
 public:
  JsonReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const nlohmann::json& at(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(where_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (used_.count(k) == 0) throw Error(where_ + ": unknown key '" + k + "'");
  }

  const std::string& where() const { return where_; }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> used_;
};

}  // namespace stancelab::detail
