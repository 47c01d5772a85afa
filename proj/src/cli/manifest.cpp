#include "manifest.hpp"

#include <filesystem>

#include <openssl/evp.h>

#include "json.hpp"

#include "gnnqec/errors.hpp"
#include "gnnqec/hwsim.hpp"
#include "gnnqec/text.hpp"

namespace gnnqec::cli {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw DomainError("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::string& path) { return sha256_hex(text::read_file(path)); }

std::string calibration_digest() {
  const auto path = hwsim::calibration_path();
  if (!std::filesystem::exists(path)) return "builtin";
  return sha256_file(path);
}

namespace {

nlohmann::ordered_json digests(const std::vector<FileDigest>& files) {
  auto a = nlohmann::ordered_json::array();
  for (const auto& f : files) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
  return a;
}

std::vector<FileDigest> digests_from(const nlohmann::json& j) {
  std::vector<FileDigest> out;
  for (const auto& e : j) out.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>()});
  return out;
}

}  // namespace

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "gnnqec-manifest";
  j["tool_version"] = tool_version;
  j["command"] = command;
  j["argv"] = argv;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [name, values] : parameters) {
    if (values.size() == 1) {
      params[name] = values.front();
    } else {
      params[name] = values;
    }
  }
  j["parameters"] = std::move(params);
  if (seed) {
    j["seed"] = *seed;
  } else {
    j["seed"] = nullptr;
  }
  j["inputs"] = digests(inputs);
  j["outputs"] = digests(outputs);
  j["calibration"] = {{"path", calibration_path}, {"sha256", calibration_sha256}};
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view json) {
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(json);
    if (j.value("format", std::string()) != "gnnqec-manifest") {
      throw MalformedFileError("not a run manifest");
    }
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
    m.inputs = digests_from(j.at("inputs"));
    m.outputs = digests_from(j.at("outputs"));
    m.calibration_path = j.at("calibration").at("path").get<std::string>();
    m.calibration_sha256 = j.at("calibration").at("sha256").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(std::string("run manifest: ") + e.what());
  }
  if (m.argv.empty()) throw MalformedFileError("run manifest has an empty argv");
  return m;
}

}  // namespace gnnqec::cli
