#pragma once

#include <string>
#include <vector>

namespace ratchet::cli {

inline constexpr const char* kVersion = "1.0.0";

std::string sha256_hex(const std::string& data);

struct RunManifest {
  std::string command;
  std::string config_hash;      // SHA-256 of the resolved config JSON
  std::string resolved_config;  // that JSON
  std::vector<std::string> outputs;
  double wall_time = 0.0;
  int exit_code = 0;
  std::vector<std::string> notes;

  // Writes <dir>/manifest.json.
  void write(const std::string& dir) const;
};

}  // namespace ratchet::cli
