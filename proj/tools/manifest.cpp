#include "manifest.hpp"

#include <fstream>
#include <memory>
#include <stdexcept>

#include <openssl/evp.h>

#include "json.hpp"

namespace ratchet::cli {

std::string sha256_hex(const std::string& data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

void RunManifest::write(const std::string& dir) const {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["config"] = nlohmann::json::parse(resolved_config);
  j["outputs"] = outputs;
  j["wall_time"] = wall_time;
  j["versions"] = {{"ratchet", kVersion}};
  j["exit_code"] = exit_code;
  j["notes"] = notes;
  const std::string path = dir + "/manifest.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace ratchet::cli
