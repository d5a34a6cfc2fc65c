#include "gen3d/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gen3d {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config::Config(std::map<std::string, std::string> defaults)
    : values_(std::move(defaults)) {}

void Config::set_checked(const std::string& key, const std::string& value,
                         const std::string& origin) {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::runtime_error("unknown config key '" + key + "' (" + origin + ")");
  it->second = value;
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected key = value");
    set_checked(trim(t.substr(0, eq)), trim(t.substr(eq + 1)),
                path.string() + ":" + std::to_string(lineno));
  }
}

void Config::apply_override(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("--set expects key=value, got '" + assignment + "'");
  set_checked(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)),
              "--set");
}

std::string Config::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::runtime_error("unknown config key '" + key + "'");
  return it->second;
}

int Config::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  size_t pos = 0;
  int out = std::stoi(v, &pos);
  if (pos != v.size())
    throw std::runtime_error("config key '" + key + "' is not an integer: " + v);
  return out;
}

double Config::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  size_t pos = 0;
  double out = std::stod(v, &pos);
  if (pos != v.size())
    throw std::runtime_error("config key '" + key + "' is not a number: " + v);
  return out;
}

uint64_t Config::get_uint64(const std::string& key) const {
  const std::string v = get_string(key);
  size_t pos = 0;
  unsigned long long out = std::stoull(v, &pos);
  if (pos != v.size())
    throw std::runtime_error("config key '" + key + "' is not an integer: " + v);
  return out;
}

bool Config::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::runtime_error("config key '" + key + "' is not a bool: " + v);
}

void Config::write_resolved(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
}

uint64_t fnv1a_bytes(const void* data, size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return fnv1a_bytes(bytes.data(), bytes.size());
}

}  // namespace gen3d
