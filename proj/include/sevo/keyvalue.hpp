#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "sevo/error.hpp"

namespace sevo {

// "key value" / "key = value" lines; '#' starts a comment; later keys win.
inline std::map<std::string, std::string> read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path);
  }
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (auto& c : line) {
      if (c == '=') c = ' ';
    }
    std::istringstream ss(line);
    std::string key, value;
    if (!(ss >> key)) continue;  // blank
    if (!(ss >> value)) {
      throw Error(ErrorCode::MalformedRecord,
                  path + ":" + std::to_string(line_no) + ": key '" + key + "' has no value");
    }
    out[key] = value;
  }
  return out;
}

inline double kv_double(const std::map<std::string, std::string>& kv, const std::string& key,
                        double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig, "key '" + key + "' has non-numeric value '" +
                                              it->second + "'");
  }
}

inline double kv_required_double(const std::map<std::string, std::string>& kv,
                                 const std::string& key, const std::string& path) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw Error(ErrorCode::InvalidConfig, path + ": missing required key '" + key + "'");
  }
  return kv_double(kv, key, 0.0);
}

inline std::string kv_string(const std::map<std::string, std::string>& kv,
                             const std::string& key, const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

}  // namespace sevo
