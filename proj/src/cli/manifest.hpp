#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gnnqec::cli {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

struct FileDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;  // canonical, every parameter explicit
  std::vector<std::pair<std::string, std::vector<std::string>>> parameters;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::optional<std::uint64_t> seed;
  std::string tool_version;
  std::string calibration_path;
  std::string calibration_sha256;

  std::string to_json() const;
  static RunManifest from_json(std::string_view json);
};

// Digest of the calibration currently in effect ("builtin" when the shipped
// file is absent).
std::string calibration_digest();

}  // namespace gnnqec::cli
