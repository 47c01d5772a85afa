#include <cstdlib>
#include <filesystem>

#include "json.hpp"

#include "gnnqec/errors.hpp"
#include "gnnqec/hwsim.hpp"
#include "gnnqec/text.hpp"

namespace gnnqec::hwsim {

Calibration builtin_calibration() { return Calibration{}; }

std::string calibration_to_json(const Calibration& c) {
  nlohmann::ordered_json j;
  j["format"] = "gnnqec-calibration";
  j["version"] = c.version;
  j["drain_cycles"] = c.drain_cycles;
  j["aggregation_lead"] = c.aggregation_lead;
  j["neighbour_buffer"] = c.neighbour_buffer;
  j["pack_divisor"] = c.pack_divisor;
  j["gmp_cycles"] = c.gmp_cycles;
  j["short_circuit_cycles"] = c.short_circuit_cycles;
  return j.dump(2) + "\n";
}

Calibration calibration_from_json(std::string_view json) {
  Calibration c;
  try {
    const auto j = nlohmann::json::parse(json);
    c.version = j.at("version").get<int>();
    c.drain_cycles = j.at("drain_cycles").get<int>();
    c.aggregation_lead = j.at("aggregation_lead").get<int>();
    c.neighbour_buffer = j.at("neighbour_buffer").get<int>();
    c.pack_divisor = j.at("pack_divisor").get<int>();
    c.gmp_cycles = j.at("gmp_cycles").get<int>();
    c.short_circuit_cycles = j.at("short_circuit_cycles").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(std::string("calibration file: ") + e.what());
  }
  if (c.drain_cycles < 0 || c.aggregation_lead < 0 || c.neighbour_buffer < 1 ||
      c.pack_divisor < 1 || c.gmp_cycles < 0 || c.short_circuit_cycles < 0) {
    throw MalformedFileError("calibration file holds out-of-range values");
  }
  return c;
}

std::string calibration_path() {
  if (const char* env = std::getenv("GNNQEC_CALIBRATION"); env && *env) return env;
  return GNNQEC_DEFAULT_CALIBRATION;
}

Calibration active_calibration() {
  const auto path = calibration_path();
  const char* env = std::getenv("GNNQEC_CALIBRATION");
  if ((!env || !*env) && !std::filesystem::exists(path)) return builtin_calibration();
  return calibration_from_json(text::read_file(path));
}

}  // namespace gnnqec::hwsim
