#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iit/errors.hpp"

namespace iit::cli {

using nlohmann::json;

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file '" + path + "'");
  out << text;
}

inline json parse_config_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& err) {
    throw config_error(std::string("malformed JSON config: ") + err.what());
  }
}

// Unknown keys are rejected so that typos cannot silently change a run.
inline void check_keys(const json& object, const std::vector<std::string>& allowed,
                       const std::string& where) {
  if (!object.is_object()) throw config_error(where + ": expected a JSON object");
  for (const auto& item : object.items()) {
    bool ok = false;
    for (const auto& key : allowed)
      if (item.key() == key) {
        ok = true;
        break;
      }
    if (!ok) throw config_error(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
T require_field(const json& object, const std::string& key, const std::string& where) {
  if (!object.contains(key)) throw config_error(where + ": missing key '" + key + "'");
  try {
    return object.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(where + ": bad value for '" + key + "'");
  }
}

template <class T>
T optional_field(const json& object, const std::string& key, T fallback,
                 const std::string& where) {
  if (!object.contains(key) || object.at(key).is_null()) return fallback;
  try {
    return object.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(where + ": bad value for '" + key + "'");
  }
}

// Shortest round-trip decimal form; used for every number in CSV output so
// reruns are byte-identical.
inline std::string format_number(double value) {
  char buffer[40];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

}  // namespace iit::cli
