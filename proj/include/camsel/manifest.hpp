#pragma once

// Provenance record written next to every CLI output artifact.
// Needs libcrypto (OpenSSL) for the SHA-256 digests.

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "camsel/core_model.hpp"
#include "camsel/version.hpp"
#include "json.hpp"

namespace camsel {

inline std::string sha256_hex(std::istream& in) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest init failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0 &&
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount())) != 1) {
      throw Error("sha256: digest update failed");
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) throw Error("sha256: digest final failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

inline std::string sha256_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  return sha256_hex(in);
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  bool seed_was_random = false;
  unsigned threads = 1;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;
  std::string version = kVersion;
  std::string timestamp;

  void add_input(const std::filesystem::path& p) { inputs.emplace_back(p.string(), sha256_file(p)); }
  void add_output(const std::filesystem::path& p) { outputs.emplace_back(p.string(), sha256_file(p)); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["version"] = version;
    j["timestamp"] = timestamp;
    j["seed"] = seed;
    j["seed_was_random"] = seed_was_random;
    j["threads"] = threads;
    j["config"] = config;
    auto files = [](const auto& v) {
      auto a = nlohmann::ordered_json::array();
      for (const auto& [path, digest] : v) a.push_back({{"path", path}, {"sha256", digest}});
      return a;
    };
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);
    return j;
  }

  /// Writes `<artifact>.manifest.json`.
  void write_next_to(const std::filesystem::path& artifact) {
    if (timestamp.empty()) timestamp = utc_timestamp();
    std::filesystem::path p = artifact;
    p += ".manifest.json";
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    out << to_json().dump(2) << '\n';
  }
};

}  // namespace camsel
