#pragma once

#include <set>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "duet/error.hpp"

namespace duet {

using nlohmann::json;

// Reads fields out of a JSON object, leaving absent keys at their defaults,
// and rejects any key that was never asked for.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string context)
      : object_(object), context_(std::move(context)) {
    require(object_.is_object(), ErrorCode::kInvalidConfig,
            context_ + ": expected a JSON object");
  }

  template <class T>
  ObjectReader& get(const char* key, T& out) {
    known_.insert(key);
    if (auto it = object_.find(key); it != object_.end()) {
      try {
        out = it->template get<T>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kInvalidConfig,
                    "key '" + qualified(key) + "': " + e.what());
      }
    }
    return *this;
  }

  bool has(const char* key) const { return object_.contains(key); }
  const json& raw(const char* key) {
    known_.insert(key);
    return object_.at(key);
  }
  std::string qualified(const std::string& key) const {
    return context_.empty() ? key : context_ + "." + key;
  }

  // Throws naming the first key that no get() call claimed.
  void finish() const {
    for (const auto& item : object_.items()) {
      if (!known_.count(item.key())) {
        throw Error(ErrorCode::kInvalidConfig, "unknown key '" + qualified(item.key()) + "'");
      }
    }
  }

 private:
  const json& object_;
  std::string context_;
  std::set<std::string> known_;
};

}  // namespace duet
