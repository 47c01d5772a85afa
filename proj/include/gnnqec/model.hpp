#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gnnqec/syndrome.hpp"

namespace gnnqec::model {

enum class LayerKind { GraphConv, GlobalMeanPool, Dense };
enum class Activation { ReLU, None, Sigmoid };

const char* to_string(LayerKind kind);
const char* to_string(Activation activation);
LayerKind parse_layer_kind(std::string_view text);   // throws UnknownLayerKindError
Activation parse_activation(std::string_view text);  // throws MalformedFileError

struct LayerSpec {
  LayerKind kind = LayerKind::GraphConv;
  int d_in = 0;
  int d_out = 0;
  Activation activation = Activation::ReLU;
  // true = computed, false = structural zero. Absent means all computed.
  std::optional<std::vector<bool>> mask;
  // Display name; presets keep the unpruned numbering (GraphConv6 survives as
  // "GraphConv6" in the mean-time model).
  std::string label;

  int computed_outputs() const;
  bool is_computed(int feature) const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class Variant { Unpruned, MaxTime, MeanTime, Custom };

const char* to_string(Variant variant);
Variant parse_variant(std::string_view text);  // accepts the short forms "max-time" / "mean-time"

struct ModelConfig {
  Variant variant = Variant::Custom;
  int distance = 7;
  std::vector<LayerSpec> layers;

  // Throws InvalidConfigError when ordering, width or mask invariants break.
  void validate() const;
  std::size_t pool_index() const;
};

// Same layer stack, ignoring the variant name.
bool same_shape(const ModelConfig& a, const ModelConfig& b);

ModelConfig preset_config(Variant variant);
ModelConfig preset_config(std::string_view name);

// Row-major dense matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// W1 / W2 / b for GraphConv (W2 unused otherwise); W1 / b for Dense; empty for
// the pooling layer.
struct LayerWeights {
  Matrix w1;
  Matrix w2;
  std::vector<double> bias;

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct WeightSet {
  std::vector<LayerWeights> layers;  // parallel to ModelConfig::layers

  // Throws ShapeMismatchError naming the first offending layer.
  void validate(const ModelConfig& config) const;
  friend bool operator==(const WeightSet&, const WeightSet&) = default;
};

struct Model {
  ModelConfig config;
  WeightSet weights;
};

WeightSet zero_weights(const ModelConfig& config);

// Uniform weights in [-scale, scale] and biases in [-bias_scale, bias_scale];
// masked rows zeroed.
WeightSet random_weights(const ModelConfig& config, std::uint64_t seed, double scale = 1.0,
                         double bias_scale = 1.0);

struct LayerCount {
  std::string label;
  LayerKind kind = LayerKind::GraphConv;
  std::int64_t count = 0;
};

struct CountReport {
  std::vector<LayerCount> layers;
  std::int64_t total = 0;
};

// GraphConv: 2 * d_in * computed_outputs * n; pool: width; Dense: d_in * d_out.
CountReport multiplication_count(const ModelConfig& config, std::int64_t n);
// GraphConv: 2 * d_in * computed + computed; Dense: d_in * d_out + d_out; pool: 0.
CountReport parameter_count(const ModelConfig& config);

struct InferenceTrace {
  std::vector<Matrix> activations;  // per layer: n x d_out (GraphConv) or 1 x d_out
  double pre_activation = 0.0;
  double probability = 0.5;
};

// Neighbour list of node i: (j, e_ij) in ascending j.
struct Neighbor {
  int index = 0;
  double weight = 0.0;
};
std::vector<std::vector<Neighbor>> adjacency(const syndrome::SyndromeGraph& graph);

InferenceTrace infer_float(const ModelConfig& config, const WeightSet& weights,
                           const syndrome::SyndromeGraph& graph);

// Model file: JSON manifest with exact decimal binary64 weights.
void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);
std::string model_to_json(const Model& model);
Model model_from_json(std::string_view json);

}  // namespace gnnqec::model
