#include "calib96/toml_lite.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "calib96/errors.hpp"

namespace calib96 {

namespace {

std::string strip(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Removes a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

nlohmann::json parse_scalar(const std::string& raw, int line_no) {
  std::string v = strip(raw);
  if (v.empty()) throw ConfigError("toml: empty value at line " + std::to_string(line_no));
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw ConfigError("toml: unterminated string at line " + std::to_string(line_no));
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  try {
    std::size_t pos = 0;
    if (v.find_first_of(".eE") == std::string::npos) {
      const long long i = std::stoll(v, &pos);
      if (pos == v.size()) return i;
    }
    pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("toml: cannot parse value '" + v + "' at line " +
                    std::to_string(line_no));
}

nlohmann::json parse_value(const std::string& raw, int line_no) {
  std::string v = strip(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']')
      throw ConfigError("toml: unterminated array at line " + std::to_string(line_no));
    nlohmann::json arr = nlohmann::json::array();
    std::string inner = v.substr(1, v.size() - 2);
    std::string cell;
    bool in_str = false;
    for (char c : inner) {
      if (c == '"') in_str = !in_str;
      if (c == ',' && !in_str) {
        if (!strip(cell).empty()) arr.push_back(parse_scalar(cell, line_no));
        cell.clear();
      } else {
        cell += c;
      }
    }
    if (!strip(cell).empty()) arr.push_back(parse_scalar(cell, line_no));
    return arr;
  }
  return parse_scalar(v, line_no);
}

nlohmann::json* descend(nlohmann::json& root, const std::string& dotted) {
  nlohmann::json* at = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    part = strip(part);
    if (part.empty()) throw ConfigError("toml: empty table name component");
    at = &((*at)[part]);
    if (at->is_null()) *at = nlohmann::json::object();
  }
  return at;
}

}  // namespace

nlohmann::json toml_lite_parse(const std::string& text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    line = strip(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("toml: malformed table header at line " + std::to_string(line_no));
      table = descend(root, line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("toml: expected key = value at line " + std::to_string(line_no));
    const std::string key = strip(line.substr(0, eq));
    if (key.empty())
      throw ConfigError("toml: empty key at line " + std::to_string(line_no));
    (*table)[key] = parse_value(line.substr(eq + 1), line_no);
  }
  return root;
}

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
    return nlohmann::json::parse(buf.str());
  return toml_lite_parse(buf.str());
}

}  // namespace calib96
