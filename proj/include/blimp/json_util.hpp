#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "blimp/common.hpp"

namespace blimp {

using Json = nlohmann::json;

/// Reads fields out of a JSON object and rejects keys that were never consumed.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorKind::InvalidConfig, path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, field(key) + ": " + e.what());
    }
  }

  void read(const std::string& key, Vec3& out) { read_fixed(key, out); }
  void read(const std::string& key, Vec2& out) { read_fixed(key, out); }
  void read(const std::string& key, Vec6& out) { read_fixed(key, out); }

  const Json& child(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw Error(ErrorKind::InvalidConfig, "unknown key '" + field(it.key()) + "'");
    }
  }

 private:
  template <typename V>
  void read_fixed(const std::string& key, V& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const Json& a = j_.at(key);
    if (!a.is_array() || a.size() != static_cast<std::size_t>(out.size()))
      throw Error(ErrorKind::InvalidConfig, field(key) + ": expected array of " + std::to_string(out.size()) + " numbers");
    for (int i = 0; i < out.size(); ++i) {
      if (!a[i].is_number()) throw Error(ErrorKind::InvalidConfig, field(key) + ": non-numeric entry");
      out[i] = a[i].get<double>();
    }
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Derived>
Json to_json_array(const Eigen::MatrixBase<Derived>& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << text;
}

}  // namespace blimp
