#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gen3d {

// Flat `key = value` configuration with '#' comments. Keys must come from the
// default set passed at construction; unknown keys are rejected so typos fail
// loudly instead of silently using a default.
class Config {
 public:
  explicit Config(std::map<std::string, std::string> defaults);

  void load_file(const std::filesystem::path& path);
  // "key=value" as accepted on the command line via --set.
  void apply_override(const std::string& assignment);

  std::string get_string(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  uint64_t get_uint64(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // Every key/value after overrides, written as a parseable config file.
  void write_resolved(const std::filesystem::path& path) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void set_checked(const std::string& key, const std::string& value,
                   const std::string& origin);
  std::map<std::string, std::string> values_;
};

// FNV-1a over a file's bytes; stable fingerprint for output manifests.
uint64_t fnv1a_file(const std::filesystem::path& path);
uint64_t fnv1a_bytes(const void* data, size_t size);

}  // namespace gen3d
