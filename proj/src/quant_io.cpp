#include <string>

#include "gnnqec/errors.hpp"
#include "gnnqec/quant.hpp"
#include "gnnqec/text.hpp"
#include "model_json.hpp"

namespace gnnqec::quant {

namespace {

using model::LayerKind;
using model::detail::ojson;

ojson codes_to_json(const std::vector<std::int32_t>& codes, int rows, int cols) {
  auto out = ojson::array();
  for (int r = 0; r < rows; ++r) {
    auto row = ojson::array();
    for (int c = 0; c < cols; ++c) row.push_back(codes[static_cast<std::size_t>(r) * cols + c]);
    out.push_back(std::move(row));
  }
  return out;
}

std::int32_t code_from_json(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number_integer()) throw MalformedFileError(where + " contains a non-integer code");
  const auto x = v.get<std::int64_t>();
  if (x < INT32_MIN || x > INT32_MAX) throw DomainError(where + " code does not fit 32 bits");
  return static_cast<std::int32_t>(x);
}

std::vector<std::int32_t> codes_from_json(const nlohmann::json& j, int rows, int cols,
                                          const std::string& where) {
  if (!j.is_array()) throw MalformedFileError(where + " must be an array of rows");
  if (static_cast<int>(j.size()) != rows) {
    throw ShapeMismatchError(where + " expected " + std::to_string(rows) + " rows, got " +
                             std::to_string(j.size()));
  }
  std::vector<std::int32_t> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (const auto& row : j) {
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ShapeMismatchError(where + " rows must hold " + std::to_string(cols) + " codes");
    }
    for (const auto& v : row) out.push_back(code_from_json(v, where));
  }
  return out;
}

std::vector<std::int32_t> code_vector(const nlohmann::json& j, std::size_t length,
                                      const std::string& where) {
  if (!j.is_array()) throw MalformedFileError(where + " must be an array");
  if (j.size() != length) {
    throw ShapeMismatchError(where + " expected length " + std::to_string(length) + ", got " +
                             std::to_string(j.size()));
  }
  std::vector<std::int32_t> out;
  for (const auto& v : j) out.push_back(code_from_json(v, where));
  return out;
}

}  // namespace

std::string quantized_to_json(const QuantizedModel& qm) {
  auto j = model::detail::model_to_ojson(qm.source());
  j["format"] = "gnnqec-quantized-model";
  const auto& s = qm.scheme();
  ojson scheme;
  scheme["name"] = s.name;
  scheme["weights"] = s.weights.to_string();
  scheme["activations"] = s.activations.to_string();
  scheme["biases"] = s.biases.to_string();
  scheme["accumulator_bits"] = s.accumulator_bits;
  j["scheme"] = std::move(scheme);

  ojson codes = ojson::object();
  const auto& cfg = qm.config();
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto& spec = cfg.layers[i];
    if (spec.kind == LayerKind::GlobalMeanPool) continue;
    const auto& q = qm.layers()[i];
    ojson l;
    if (spec.kind == LayerKind::GraphConv) {
      l["W1"] = codes_to_json(q.w1, spec.d_out, spec.d_in);
      l["W2"] = codes_to_json(q.w2, spec.d_out, spec.d_in);
    } else {
      l["W"] = codes_to_json(q.w1, spec.d_out, spec.d_in);
    }
    l["b"] = q.bias;
    codes[std::to_string(i)] = std::move(l);
  }
  j["codes"] = std::move(codes);
  j["gmp_factors"] = qm.gmp_factors();
  return j.dump() + "\n";
}

QuantizedModel quantized_from_json(std::string_view json) {
  const auto j = model::detail::parse_json(json, "quantized model file");
  if (!j.is_object() || !j.contains("scheme") || !j.contains("codes") || !j.contains("gmp_factors")) {
    throw MalformedFileError("quantized model file needs 'scheme', 'codes' and 'gmp_factors'");
  }
  auto source = model::detail::model_from_parsed(j);

  QuantizationScheme scheme;
  try {
    const auto& s = j.at("scheme");
    scheme.name = s.value("name", std::string("custom"));
    scheme.weights = FixedPointFormat::parse(s.at("weights").get<std::string>());
    scheme.activations = FixedPointFormat::parse(s.at("activations").get<std::string>());
    scheme.biases = FixedPointFormat::parse(s.at("biases").get<std::string>());
    scheme.accumulator_bits = s.value("accumulator_bits", 48);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(std::string("quantization scheme: ") + e.what());
  }

  const auto& codes = j.at("codes");
  if (!codes.is_object()) throw MalformedFileError("'codes' must be an object keyed by layer index");
  std::vector<QuantizedLayer> layers;
  const auto& cfg = source.config;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto& spec = cfg.layers[i];
    QuantizedLayer q;
    if (spec.kind != LayerKind::GlobalMeanPool) {
      const std::string key = std::to_string(i);
      const std::string where = "codes of layer " + key + " (" + spec.label + ")";
      if (!codes.contains(key) || !codes.at(key).is_object()) {
        throw ShapeMismatchError(where + " missing");
      }
      const auto& l = codes.at(key);
      auto field = [&](const char* name) -> const nlohmann::json& {
        if (!l.contains(name)) throw ShapeMismatchError(where + ": missing '" + name + "'");
        return l.at(name);
      };
      if (spec.kind == LayerKind::GraphConv) {
        q.w1 = codes_from_json(field("W1"), spec.d_out, spec.d_in, where + " W1");
        q.w2 = codes_from_json(field("W2"), spec.d_out, spec.d_in, where + " W2");
      } else {
        q.w1 = codes_from_json(field("W"), spec.d_out, spec.d_in, where + " W");
      }
      q.bias = code_vector(field("b"), static_cast<std::size_t>(spec.d_out), where + " b");
    }
    layers.push_back(std::move(q));
  }
  const auto& gf = j.at("gmp_factors");
  if (!gf.is_array()) throw MalformedFileError("'gmp_factors' must be an array");
  auto factors = code_vector(gf, gf.size(), "gmp_factors");
  return QuantizedModel(std::move(source), std::move(scheme), std::move(layers), std::move(factors));
}

void save_quantized(const std::string& path, const QuantizedModel& qm) {
  text::write_file(path, quantized_to_json(qm));
}

QuantizedModel load_quantized(const std::string& path) {
  return quantized_from_json(text::read_file(path));
}

}  // namespace gnnqec::quant
