#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ovemo/error.hpp"

namespace ovemo {

using Json = nlohmann::ordered_json;

namespace fs = std::filesystem;

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

// Calls `on_line(value, line_number)` for every non-blank line. Line numbers
// start at 1.
inline void for_each_jsonl(std::istream& in, const std::string& source,
                           const std::function<void(const Json&, std::size_t)>& on_line) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json value;
    try {
      value = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::kParse,
                  source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    on_line(value, line_no);
  }
}

inline void for_each_jsonl(const fs::path& path,
                           const std::function<void(const Json&, std::size_t)>& on_line) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  for_each_jsonl(in, path.string(), on_line);
}

inline std::string to_jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row.dump();
    out += '\n';
  }
  return out;
}

namespace detail {

inline const Json& require_field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::kParse, where + ": expected a JSON object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::kParse, where + ": missing field '" + key + "'");
  }
  return *it;
}

inline std::string require_string(const Json& obj, const char* key, const std::string& where) {
  const Json& v = require_field(obj, key, where);
  if (!v.is_string()) {
    throw Error(ErrorCode::kParse, where + ": field '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

inline std::vector<std::string> require_string_array(const Json& obj, const char* key,
                                                     const std::string& where) {
  const Json& v = require_field(obj, key, where);
  if (!v.is_array()) {
    throw Error(ErrorCode::kParse, where + ": field '" + key + "' must be an array");
  }
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) {
      throw Error(ErrorCode::kParse, where + ": field '" + key + "' must contain strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace detail
}  // namespace ovemo
