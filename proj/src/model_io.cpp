#include <string>

#include "gnnqec/errors.hpp"
#include "gnnqec/model.hpp"
#include "gnnqec/text.hpp"
#include "model_json.hpp"

namespace gnnqec::model {

namespace detail {

namespace {

ojson matrix_to_json(const Matrix& m) {
  auto rows = ojson::array();
  for (int r = 0; r < m.rows; ++r) {
    auto row = ojson::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, int rows, int cols, const std::string& where) {
  if (!j.is_array()) throw MalformedFileError(where + " must be an array of rows");
  if (static_cast<int>(j.size()) != rows) {
    throw ShapeMismatchError(where + " expected " + std::to_string(rows) + " rows, got " +
                             std::to_string(j.size()));
  }
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array()) throw MalformedFileError(where + " row is not an array");
    if (static_cast<int>(row.size()) != cols) {
      throw ShapeMismatchError(where + " row " + std::to_string(r) + " expected " +
                               std::to_string(cols) + " values, got " + std::to_string(row.size()));
    }
    for (int c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw MalformedFileError(where + " contains a non-number");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

std::vector<double> vector_from_json(const nlohmann::json& j, int length, const std::string& where) {
  if (!j.is_array()) throw MalformedFileError(where + " must be an array");
  if (static_cast<int>(j.size()) != length) {
    throw ShapeMismatchError(where + " expected length " + std::to_string(length) + ", got " +
                             std::to_string(j.size()));
  }
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw MalformedFileError(where + " contains a non-number");
    v.push_back(x.get<double>());
  }
  return v;
}

}  // namespace

nlohmann::json parse_json(std::string_view text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(what + " is not valid JSON: " + e.what());
  }
}

ojson config_to_json(const ModelConfig& config) {
  ojson j;
  j["name"] = to_string(config.variant);
  j["distance"] = config.distance;
  auto layers = ojson::array();
  for (const auto& spec : config.layers) {
    ojson l;
    l["kind"] = to_string(spec.kind);
    l["label"] = spec.label;
    l["d_in"] = spec.d_in;
    l["d_out"] = spec.d_out;
    l["activation"] = to_string(spec.activation);
    if (spec.mask) {
      auto mask = ojson::array();
      for (bool b : *spec.mask) mask.push_back(b);
      l["mask"] = std::move(mask);
    }
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  return j;
}

ojson weights_to_json(const ModelConfig& config, const WeightSet& weights) {
  ojson j = ojson::object();
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& spec = config.layers[i];
    const auto& w = weights.layers[i];
    if (spec.kind == LayerKind::GlobalMeanPool) continue;
    ojson l;
    if (spec.kind == LayerKind::GraphConv) {
      l["W1"] = matrix_to_json(w.w1);
      l["W2"] = matrix_to_json(w.w2);
    } else {
      l["W"] = matrix_to_json(w.w1);
    }
    l["b"] = w.bias;
    j[std::to_string(i)] = std::move(l);
  }
  return j;
}

ojson model_to_ojson(const Model& model) {
  ojson j;
  j["format"] = "gnnqec-model";
  j["version"] = 1;
  const auto config = config_to_json(model.config);
  for (auto it = config.begin(); it != config.end(); ++it) j[it.key()] = *it;
  j["weights"] = weights_to_json(model.config, model.weights);
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig config;
  try {
    if (!j.is_object()) throw MalformedFileError("model manifest must be a JSON object");
    config.variant = parse_variant(j.at("name").get<std::string>());
    config.distance = j.value("distance", 7);
    const auto& layers = j.at("layers");
    if (!layers.is_array()) throw MalformedFileError("'layers' must be an array");
    int graph_convs = 0;
    int denses = 0;
    for (const auto& l : layers) {
      LayerSpec spec;
      spec.kind = parse_layer_kind(l.at("kind").get<std::string>());
      spec.d_in = l.at("d_in").get<int>();
      spec.d_out = l.at("d_out").get<int>();
      spec.activation = parse_activation(l.at("activation").get<std::string>());
      if (l.contains("mask")) spec.mask = l.at("mask").get<std::vector<bool>>();
      if (l.contains("label")) {
        spec.label = l.at("label").get<std::string>();
      } else if (spec.kind == LayerKind::GraphConv) {
        spec.label = "GraphConv" + std::to_string(graph_convs);
      } else if (spec.kind == LayerKind::Dense) {
        spec.label = "Dense" + std::to_string(denses);
      } else {
        spec.label = "GMP";
      }
      graph_convs += spec.kind == LayerKind::GraphConv;
      denses += spec.kind == LayerKind::Dense;
      config.layers.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(std::string("model manifest: ") + e.what());
  } catch (const DomainError& e) {
    throw MalformedFileError(std::string("model manifest: ") + e.what());
  }
  config.validate();
  return config;
}

WeightSet weights_from_json(const ModelConfig& config, const nlohmann::json& j) {
  if (!j.is_object()) throw MalformedFileError("'weights' must be an object keyed by layer index");
  WeightSet ws;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& spec = config.layers[i];
    const std::string key = std::to_string(i);
    const std::string where = "layer " + key + " (" + spec.label + ")";
    LayerWeights w;
    if (spec.kind == LayerKind::GlobalMeanPool) {
      ws.layers.push_back(std::move(w));
      continue;
    }
    if (!j.contains(key)) throw ShapeMismatchError(where + ": weights missing");
    const auto& lj = j.at(key);
    if (!lj.is_object()) throw MalformedFileError(where + ": weights must be an object");
    auto field = [&](const char* name) -> const nlohmann::json& {
      if (!lj.contains(name)) throw ShapeMismatchError(where + ": missing '" + name + "'");
      return lj.at(name);
    };
    if (spec.kind == LayerKind::GraphConv) {
      w.w1 = matrix_from_json(field("W1"), spec.d_out, spec.d_in, where + " W1");
      w.w2 = matrix_from_json(field("W2"), spec.d_out, spec.d_in, where + " W2");
    } else {
      w.w1 = matrix_from_json(field("W"), spec.d_out, spec.d_in, where + " W");
    }
    w.bias = vector_from_json(field("b"), spec.d_out, where + " b");
    ws.layers.push_back(std::move(w));
  }
  ws.validate(config);
  return ws;
}

Model model_from_parsed(const nlohmann::json& j) {
  Model m;
  m.config = config_from_json(j);
  if (!j.contains("weights")) throw MalformedFileError("model manifest has no 'weights'");
  m.weights = weights_from_json(m.config, j.at("weights"));
  return m;
}

}  // namespace detail

std::string model_to_json(const Model& model) { return detail::model_to_ojson(model).dump() + "\n"; }

Model model_from_json(std::string_view json) {
  return detail::model_from_parsed(detail::parse_json(json, "model file"));
}

void save_model(const std::string& path, const Model& model) {
  model.config.validate();
  model.weights.validate(model.config);
  text::write_file(path, model_to_json(model));
}

Model load_model(const std::string& path) { return model_from_json(text::read_file(path)); }

}  // namespace gnnqec::model
