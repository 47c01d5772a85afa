#include "gnnqec/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gnnqec/errors.hpp"

namespace gnnqec::model {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::GraphConv: return "GraphConv";
    case LayerKind::GlobalMeanPool: return "GlobalMeanPool";
    case LayerKind::Dense: return "Dense";
  }
  return "?";
}

const char* to_string(Activation activation) {
  switch (activation) {
    case Activation::ReLU: return "relu";
    case Activation::None: return "none";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view text) {
  if (text == "GraphConv") return LayerKind::GraphConv;
  if (text == "GlobalMeanPool" || text == "GMP") return LayerKind::GlobalMeanPool;
  if (text == "Dense") return LayerKind::Dense;
  throw UnknownLayerKindError("unknown layer kind '" + std::string(text) + "'");
}

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::ReLU;
  if (text == "none") return Activation::None;
  if (text == "sigmoid") return Activation::Sigmoid;
  throw MalformedFileError("unknown activation '" + std::string(text) + "'");
}

const char* to_string(Variant variant) {
  switch (variant) {
    case Variant::Unpruned: return "unpruned";
    case Variant::MaxTime: return "max-time-optimized";
    case Variant::MeanTime: return "mean-time-optimized";
    case Variant::Custom: return "custom";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "unpruned") return Variant::Unpruned;
  if (text == "max-time-optimized" || text == "max-time") return Variant::MaxTime;
  if (text == "mean-time-optimized" || text == "mean-time") return Variant::MeanTime;
  if (text == "custom") return Variant::Custom;
  throw DomainError("unknown model variant '" + std::string(text) + "'");
}

int LayerSpec::computed_outputs() const {
  if (!mask) return d_out;
  return static_cast<int>(std::count(mask->begin(), mask->end(), true));
}

bool LayerSpec::is_computed(int feature) const {
  return !mask || (*mask)[static_cast<std::size_t>(feature)];
}

std::size_t ModelConfig::pool_index() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::GlobalMeanPool) return i;
  }
  throw InvalidConfigError("model has no GlobalMeanPool layer");
}

void ModelConfig::validate() const {
  if (layers.empty()) throw InvalidConfigError("model has no layers");
  std::size_t pools = 0;
  bool after_pool = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + l.label + ")";
    if (l.d_in < 1 || l.d_out < 1) throw InvalidConfigError(where + ": widths must be >= 1");
    if (l.mask && static_cast<int>(l.mask->size()) != l.d_out) {
      throw InvalidConfigError(where + ": mask length differs from d_out");
    }
    switch (l.kind) {
      case LayerKind::GraphConv:
        if (after_pool) throw InvalidConfigError(where + ": GraphConv after GlobalMeanPool");
        if (l.activation == Activation::Sigmoid) {
          throw InvalidConfigError(where + ": GraphConv cannot use sigmoid");
        }
        break;
      case LayerKind::GlobalMeanPool:
        ++pools;
        after_pool = true;
        if (l.d_in != l.d_out) throw InvalidConfigError(where + ": pooling must keep width");
        if (l.mask) throw InvalidConfigError(where + ": pooling cannot be masked");
        break;
      case LayerKind::Dense:
        if (!after_pool) throw InvalidConfigError(where + ": Dense before GlobalMeanPool");
        if (l.mask) throw InvalidConfigError(where + ": Dense layers cannot be masked");
        break;
    }
    if (i == 0 && l.d_in != syndrome::kFeatureWidth) {
      throw InvalidConfigError(where + ": first layer must take 5 input features");
    }
    if (i > 0 && layers[i - 1].d_out != l.d_in) {
      throw InvalidConfigError(where + ": d_in " + std::to_string(l.d_in) +
                               " does not match previous d_out " +
                               std::to_string(layers[i - 1].d_out));
    }
  }
  if (pools != 1) throw InvalidConfigError("model needs exactly one GlobalMeanPool layer");
  const auto& last = layers.back();
  if (last.kind != LayerKind::Dense || last.d_out != 1 || last.activation != Activation::Sigmoid) {
    throw InvalidConfigError("final layer must be Dense with one sigmoid output");
  }
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i].activation == Activation::Sigmoid) {
      throw InvalidConfigError("only the final layer may use sigmoid");
    }
  }
}

bool same_shape(const ModelConfig& a, const ModelConfig& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& x = a.layers[i];
    const auto& y = b.layers[i];
    if (x.kind != y.kind || x.d_in != y.d_in || x.d_out != y.d_out ||
        x.activation != y.activation || x.computed_outputs() != y.computed_outputs()) {
      return false;
    }
  }
  return true;
}

namespace {

LayerSpec graph_conv(int index, int d_in, int d_out) {
  return {LayerKind::GraphConv, d_in, d_out, Activation::ReLU, std::nullopt,
          "GraphConv" + std::to_string(index)};
}

void append_head(std::vector<LayerSpec>& layers) {
  layers.push_back({LayerKind::GlobalMeanPool, 256, 256, Activation::None, std::nullopt, "GMP"});
  layers.push_back({LayerKind::Dense, 256, 256, Activation::ReLU, std::nullopt, "Dense0"});
  layers.push_back({LayerKind::Dense, 256, 128, Activation::ReLU, std::nullopt, "Dense1"});
  layers.push_back({LayerKind::Dense, 128, 64, Activation::ReLU, std::nullopt, "Dense2"});
  layers.push_back({LayerKind::Dense, 64, 1, Activation::Sigmoid, std::nullopt, "DenseOut"});
}

}  // namespace

ModelConfig preset_config(Variant variant) {
  ModelConfig config;
  config.variant = variant;
  config.distance = 7;
  auto& layers = config.layers;
  switch (variant) {
    case Variant::Unpruned:
      layers = {graph_conv(0, 5, 32),    graph_conv(1, 32, 128),  graph_conv(2, 128, 256),
                graph_conv(3, 256, 512), graph_conv(4, 512, 512), graph_conv(5, 512, 256),
                graph_conv(6, 256, 256)};
      break;
    case Variant::MaxTime: {
      layers = {graph_conv(0, 5, 32), graph_conv(1, 32, 128), graph_conv(2, 128, 256)};
      std::vector<bool> keep(256, false);
      std::fill(keep.begin(), keep.begin() + 128, true);
      layers.back().mask = std::move(keep);
      break;
    }
    case Variant::MeanTime:
      layers = {graph_conv(0, 5, 32), graph_conv(1, 32, 128), graph_conv(2, 128, 256),
                graph_conv(6, 256, 256)};
      break;
    case Variant::Custom:
      throw DomainError("there is no preset for the custom variant");
  }
  append_head(layers);
  config.validate();
  return config;
}

ModelConfig preset_config(std::string_view name) { return preset_config(parse_variant(name)); }

void WeightSet::validate(const ModelConfig& config) const {
  if (layers.size() != config.layers.size()) {
    throw ShapeMismatchError("weight set has " + std::to_string(layers.size()) +
                             " layers, config has " + std::to_string(config.layers.size()));
  }
  auto expect = [](const Matrix& m, int rows, int cols, const std::string& what) {
    if (m.rows != rows || m.cols != cols ||
        m.data.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
      throw ShapeMismatchError(what + " expected " + std::to_string(rows) + "x" +
                               std::to_string(cols) + ", got " + std::to_string(m.rows) + "x" +
                               std::to_string(m.cols));
    }
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& spec = config.layers[i];
    const auto& w = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + spec.label + ")";
    switch (spec.kind) {
      case LayerKind::GraphConv:
        expect(w.w1, spec.d_out, spec.d_in, where + " W1");
        expect(w.w2, spec.d_out, spec.d_in, where + " W2");
        break;
      case LayerKind::Dense:
        expect(w.w1, spec.d_out, spec.d_in, where + " W");
        expect(w.w2, 0, 0, where + " W2");
        break;
      case LayerKind::GlobalMeanPool:
        expect(w.w1, 0, 0, where + " W");
        expect(w.w2, 0, 0, where + " W2");
        if (!w.bias.empty()) throw ShapeMismatchError(where + ": pooling has no bias");
        continue;
    }
    if (static_cast<int>(w.bias.size()) != spec.d_out) {
      throw ShapeMismatchError(where + " b expected length " + std::to_string(spec.d_out) +
                               ", got " + std::to_string(w.bias.size()));
    }
    for (int o = 0; o < spec.d_out; ++o) {
      if (spec.is_computed(o)) continue;
      bool zero = w.bias[static_cast<std::size_t>(o)] == 0.0;
      for (int k = 0; k < spec.d_in && zero; ++k) zero = w.w1(o, k) == 0.0 && w.w2(o, k) == 0.0;
      if (!zero) throw InvalidConfigError(where + ": masked output " + std::to_string(o) +
                                          " has non-zero weights");
    }
  }
}

WeightSet zero_weights(const ModelConfig& config) {
  WeightSet ws;
  for (const auto& spec : config.layers) {
    LayerWeights w;
    if (spec.kind != LayerKind::GlobalMeanPool) {
      w.w1 = Matrix(spec.d_out, spec.d_in);
      if (spec.kind == LayerKind::GraphConv) w.w2 = Matrix(spec.d_out, spec.d_in);
      w.bias.assign(static_cast<std::size_t>(spec.d_out), 0.0);
    }
    ws.layers.push_back(std::move(w));
  }
  return ws;
}

WeightSet random_weights(const ModelConfig& config, std::uint64_t seed, double scale,
                         double bias_scale) {
  std::mt19937_64 gen(seed);
  auto draw = [&gen](double s) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * s;
  };
  WeightSet ws = zero_weights(config);
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& spec = config.layers[i];
    auto& w = ws.layers[i];
    if (spec.kind == LayerKind::GlobalMeanPool) continue;
    for (int o = 0; o < spec.d_out; ++o) {
      const bool on = spec.is_computed(o);
      for (int k = 0; k < spec.d_in; ++k) {
        const double a = draw(scale);
        const double b = spec.kind == LayerKind::GraphConv ? draw(scale) : 0.0;
        w.w1(o, k) = on ? a : 0.0;
        if (spec.kind == LayerKind::GraphConv) w.w2(o, k) = on ? b : 0.0;
      }
      const double b = draw(bias_scale);
      w.bias[static_cast<std::size_t>(o)] = on ? b : 0.0;
    }
  }
  return ws;
}

CountReport multiplication_count(const ModelConfig& config, std::int64_t n) {
  if (n < 0) throw DomainError("node count must be >= 0");
  CountReport report;
  for (const auto& spec : config.layers) {
    std::int64_t count = 0;
    switch (spec.kind) {
      case LayerKind::GraphConv:
        count = 2LL * spec.d_in * spec.computed_outputs() * n;
        break;
      case LayerKind::GlobalMeanPool:
        count = spec.d_out;
        break;
      case LayerKind::Dense:
        count = static_cast<std::int64_t>(spec.d_in) * spec.d_out;
        break;
    }
    report.layers.push_back({spec.label, spec.kind, count});
    report.total += count;
  }
  return report;
}

CountReport parameter_count(const ModelConfig& config) {
  CountReport report;
  for (const auto& spec : config.layers) {
    std::int64_t count = 0;
    switch (spec.kind) {
      case LayerKind::GraphConv: {
        const std::int64_t u = spec.computed_outputs();
        count = 2 * spec.d_in * u + u;
        break;
      }
      case LayerKind::GlobalMeanPool:
        break;
      case LayerKind::Dense:
        count = static_cast<std::int64_t>(spec.d_in) * spec.d_out + spec.d_out;
        break;
    }
    report.layers.push_back({spec.label, spec.kind, count});
    report.total += count;
  }
  return report;
}

std::vector<std::vector<Neighbor>> adjacency(const syndrome::SyndromeGraph& graph) {
  std::vector<std::vector<Neighbor>> adj(graph.node_count());
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    adj[static_cast<std::size_t>(edge.i)].push_back({edge.j, graph.weights[e]});
    adj[static_cast<std::size_t>(edge.j)].push_back({edge.i, graph.weights[e]});
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
  }
  return adj;
}

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::None: return x;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

}  // namespace

InferenceTrace infer_float(const ModelConfig& config, const WeightSet& weights,
                           const syndrome::SyndromeGraph& graph) {
  const int n = static_cast<int>(graph.node_count());
  if (n == 0) throw DomainError("float inference needs at least one node");
  weights.validate(config);

  Matrix x(n, syndrome::kFeatureWidth);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < syndrome::kFeatureWidth; ++c) {
      x(i, c) = graph.features[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    }
  }
  const auto adj = adjacency(graph);

  InferenceTrace trace;
  for (std::size_t li = 0; li < config.layers.size(); ++li) {
    const auto& spec = config.layers[li];
    const auto& w = weights.layers[li];
    if (x.cols != spec.d_in) {
      throw ShapeMismatchError("layer " + std::to_string(li) + " (" + spec.label +
                               ") receives width " + std::to_string(x.cols));
    }
    switch (spec.kind) {
      case LayerKind::GraphConv: {
        Matrix agg(x.rows, spec.d_in);
        for (int i = 0; i < x.rows; ++i) {
          for (const auto& nb : adj[static_cast<std::size_t>(i)]) {
            for (int k = 0; k < spec.d_in; ++k) agg(i, k) += nb.weight * x(nb.index, k);
          }
        }
        Matrix out(x.rows, spec.d_out);
        for (int i = 0; i < x.rows; ++i) {
          for (int o = 0; o < spec.d_out; ++o) {
            if (!spec.is_computed(o)) continue;
            double self = 0.0;
            double neigh = 0.0;
            for (int k = 0; k < spec.d_in; ++k) {
              self += w.w1(o, k) * x(i, k);
              neigh += w.w2(o, k) * agg(i, k);
            }
            out(i, o) = activate(spec.activation, self + neigh + w.bias[static_cast<std::size_t>(o)]);
          }
        }
        x = std::move(out);
        break;
      }
      case LayerKind::GlobalMeanPool: {
        Matrix out(1, spec.d_out);
        for (int k = 0; k < spec.d_out; ++k) {
          double sum = 0.0;
          for (int i = 0; i < x.rows; ++i) sum += x(i, k);
          out(0, k) = sum / static_cast<double>(x.rows);
        }
        x = std::move(out);
        break;
      }
      case LayerKind::Dense: {
        Matrix out(1, spec.d_out);
        for (int o = 0; o < spec.d_out; ++o) {
          double acc = 0.0;
          for (int k = 0; k < spec.d_in; ++k) acc += w.w1(o, k) * x(0, k);
          acc += w.bias[static_cast<std::size_t>(o)];
          if (spec.activation == Activation::Sigmoid) trace.pre_activation = acc;
          out(0, o) = activate(spec.activation, acc);
        }
        x = std::move(out);
        break;
      }
    }
    trace.activations.push_back(x);
  }
  trace.probability = x(0, 0);
  return trace;
}

}  // namespace gnnqec::model
