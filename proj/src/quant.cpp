#include "gnnqec/quant.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "gnnqec/errors.hpp"

namespace gnnqec::quant {

using model::Activation;
using model::LayerKind;

double FixedPointFormat::ulp() const noexcept { return std::ldexp(1.0, -fractional_bits); }

void FixedPointFormat::validate() const {
  if (integer_bits < 1 || fractional_bits < 0 || total_bits() < 2 || total_bits() > 32) {
    throw DomainError("invalid fixed-point format Q" + std::to_string(integer_bits) + "." +
                      std::to_string(fractional_bits) + " (need 2..32 total bits)");
  }
}

std::string FixedPointFormat::to_string() const {
  return "Q" + std::to_string(integer_bits) + "." + std::to_string(fractional_bits);
}

FixedPointFormat FixedPointFormat::parse(std::string_view text) {
  const auto dot = text.find('.');
  if (text.size() < 4 || (text[0] != 'Q' && text[0] != 'q') || dot == std::string_view::npos) {
    throw DomainError("fixed-point format must look like Q4.10, got '" + std::string(text) + "'");
  }
  FixedPointFormat f;
  try {
    std::size_t used = 0;
    const std::string ip(text.substr(1, dot - 1));
    const std::string fp(text.substr(dot + 1));
    f.integer_bits = std::stoi(ip, &used);
    if (used != ip.size()) throw std::invalid_argument("trailing");
    f.fractional_bits = std::stoi(fp, &used);
    if (used != fp.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw DomainError("fixed-point format must look like Q4.10, got '" + std::string(text) + "'");
  }
  f.validate();
  return f;
}

std::int64_t quantize_value(double x, const FixedPointFormat& fmt) {
  if (std::isnan(x)) throw DomainError("cannot quantize NaN");
  const double scaled = std::round(std::ldexp(x, fmt.fractional_bits));
  if (scaled >= static_cast<double>(fmt.max_code())) return fmt.max_code();
  if (scaled <= static_cast<double>(fmt.min_code())) return fmt.min_code();
  return static_cast<std::int64_t>(scaled);
}

double dequantize(std::int64_t code, const FixedPointFormat& fmt) {
  return std::ldexp(static_cast<double>(code), -fmt.fractional_bits);
}

namespace {

template <typename T>
T shift_round_t(T value, int shift) {
  if (shift <= 0) return value * (T{1} << -shift);
  const T half = T{1} << (shift - 1);
  return value >= 0 ? (value + half) >> shift : -((-value + half) >> shift);
}

template <typename T>
std::int32_t saturate_t(T code, const FixedPointFormat& fmt) {
  if (code > static_cast<T>(fmt.max_code())) return static_cast<std::int32_t>(fmt.max_code());
  if (code < static_cast<T>(fmt.min_code())) return static_cast<std::int32_t>(fmt.min_code());
  return static_cast<std::int32_t>(code);
}

}  // namespace

std::int64_t shift_round(std::int64_t value, int shift) { return shift_round_t(value, shift); }

std::int64_t saturate(std::int64_t code, const FixedPointFormat& fmt) {
  return saturate_t(code, fmt);
}

QuantizationScheme QuantizationScheme::max_time() {
  return {"max-time", {4, 10}, {12, 5}, {1, 4}, 48};
}

QuantizationScheme QuantizationScheme::mean_time() {
  return {"mean-time", {4, 10}, {18, 5}, {1, 4}, 48};
}

QuantizationScheme QuantizationScheme::preset(std::string_view name) {
  if (name == "max-time" || name == "max-time-optimized") return max_time();
  if (name == "mean-time" || name == "mean-time-optimized") return mean_time();
  throw DomainError("unknown quantization scheme '" + std::string(name) + "'");
}

void QuantizationScheme::validate() const {
  weights.validate();
  activations.validate();
  biases.validate();
  if (accumulator_bits < 2 || accumulator_bits > 127) {
    throw DomainError("accumulator width must lie in [2, 127]");
  }
}

namespace {

using u128 = unsigned __int128;

int bit_length(u128 v) {
  int bits = 0;
  while (v != 0) {
    ++bits;
    v >>= 1;
  }
  return bits;
}

u128 pow2(int e) { return u128{1} << e; }

}  // namespace

QuantizedModel::QuantizedModel(model::Model source, QuantizationScheme scheme,
                               std::vector<QuantizedLayer> layers,
                               std::vector<std::int32_t> gmp_factors)
    : source_(std::move(source)),
      scheme_(std::move(scheme)),
      layers_(std::move(layers)),
      gmp_factors_(std::move(gmp_factors)) {
  source_.config.validate();
  source_.weights.validate(source_.config);
  scheme_.validate();
  const auto& cfg = source_.config;
  if (layers_.size() != cfg.layers.size()) {
    throw ShapeMismatchError("quantized codes cover " + std::to_string(layers_.size()) +
                             " layers, model has " + std::to_string(cfg.layers.size()));
  }
  if (gmp_factors_.empty()) throw DomainError("normalization factor table needs n_max >= 1");

  const auto& wf = scheme_.weights;
  const auto& af = scheme_.activations;
  const auto& bf = scheme_.biases;
  auto in_range = [](std::int32_t c, const FixedPointFormat& f) {
    return c >= f.min_code() && c <= f.max_code();
  };
  for (auto c : gmp_factors_) {
    if (!in_range(c, wf)) throw DomainError("normalization factor outside the weight format");
  }

  const int acc_frac = wf.fractional_bits + af.fractional_bits;
  const int bias_shift = acc_frac - bf.fractional_bits;
  const u128 max_w = pow2(wf.total_bits() - 1);
  const u128 max_a = pow2(af.total_bits() - 1);
  const u128 max_b = bias_shift >= 0 ? pow2(bf.total_bits() - 1) << bias_shift
                                     : pow2(bf.total_bits() - 1);
  const u128 n_max = static_cast<u128>(gmp_factors_.size());
  u128 worst = 0;

  kernels_.resize(cfg.layers.size());
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    const auto& spec = cfg.layers[li];
    const auto& q = layers_[li];
    const std::string where = "layer " + std::to_string(li) + " (" + spec.label + ")";
    const std::size_t cells = static_cast<std::size_t>(spec.d_out) * spec.d_in;
    const std::size_t w2_cells = spec.kind == LayerKind::GraphConv ? cells : 0;
    const std::size_t w1_cells = spec.kind == LayerKind::GlobalMeanPool ? 0 : cells;
    const std::size_t b_cells = spec.kind == LayerKind::GlobalMeanPool ? 0 : spec.d_out;
    if (q.w1.size() != w1_cells || q.w2.size() != w2_cells || q.bias.size() != b_cells) {
      throw ShapeMismatchError(where + ": quantized code arrays do not match the layer shape");
    }
    for (auto c : q.w1) if (!in_range(c, wf)) throw DomainError(where + ": weight code out of range");
    for (auto c : q.w2) if (!in_range(c, wf)) throw DomainError(where + ": weight code out of range");
    for (auto c : q.bias) if (!in_range(c, bf)) throw DomainError(where + ": bias code out of range");

    const u128 d_in = static_cast<u128>(spec.d_in);
    switch (spec.kind) {
      case LayerKind::GraphConv:
        worst = std::max(worst, 2 * d_in * max_w * max_a + max_b);
        worst = std::max(worst, n_max * max_w * max_a);
        break;
      case LayerKind::GlobalMeanPool:
        worst = std::max(worst, n_max * max_a * max_w);
        continue;
      case LayerKind::Dense:
        worst = std::max(worst, d_in * max_w * max_a + max_b);
        break;
    }

    auto& k = kernels_[li];
    for (int o = 0; o < spec.d_out; ++o) {
      if (spec.is_computed(o)) k.outputs.push_back(o);
    }
    const std::size_t u_count = k.outputs.size();
    k.w1t.resize(static_cast<std::size_t>(spec.d_in) * u_count);
    if (spec.kind == LayerKind::GraphConv) k.w2t.resize(k.w1t.size());
    for (std::size_t u = 0; u < u_count; ++u) {
      const std::size_t row = static_cast<std::size_t>(k.outputs[u]) * spec.d_in;
      for (int kk = 0; kk < spec.d_in; ++kk) {
        const std::size_t dst = static_cast<std::size_t>(kk) * u_count + u;
        k.w1t[dst] = q.w1[row + kk];
        if (spec.kind == LayerKind::GraphConv) k.w2t[dst] = q.w2[row + kk];
      }
      k.bias_acc.push_back(shift_round(q.bias[static_cast<std::size_t>(k.outputs[u])], -bias_shift));
    }
    for (int o = 0; o < spec.d_out; ++o) {
      if (spec.is_computed(o)) continue;
      bool zero = q.bias[static_cast<std::size_t>(o)] == 0;
      for (int kk = 0; kk < spec.d_in && zero; ++kk) {
        const std::size_t at = static_cast<std::size_t>(o) * spec.d_in + kk;
        zero = q.w1[at] == 0 && (q.w2.empty() || q.w2[at] == 0);
      }
      if (!zero) throw InvalidConfigError(where + ": masked output has non-zero codes");
    }
  }
  required_bits_ = bit_length(worst) + 1;
  if (required_bits_ > scheme_.accumulator_bits) {
    throw DomainError("worst-case accumulation needs " + std::to_string(required_bits_) +
                      " bits, scheme provides " + std::to_string(scheme_.accumulator_bits));
  }
}

QuantizedModel quantize_model(const model::Model& model, const QuantizationScheme& scheme,
                              int n_max) {
  if (n_max < 1) throw DomainError("n_max must be >= 1");
  scheme.validate();
  model.config.validate();
  model.weights.validate(model.config);
  std::vector<QuantizedLayer> layers;
  for (std::size_t li = 0; li < model.config.layers.size(); ++li) {
    const auto& w = model.weights.layers[li];
    QuantizedLayer q;
    for (double v : w.w1.data) q.w1.push_back(static_cast<std::int32_t>(quantize_value(v, scheme.weights)));
    for (double v : w.w2.data) q.w2.push_back(static_cast<std::int32_t>(quantize_value(v, scheme.weights)));
    for (double v : w.bias) q.bias.push_back(static_cast<std::int32_t>(quantize_value(v, scheme.biases)));
    layers.push_back(std::move(q));
  }
  std::vector<std::int32_t> factors;
  for (int n = 1; n <= n_max; ++n) {
    factors.push_back(static_cast<std::int32_t>(quantize_value(1.0 / n, scheme.weights)));
  }
  return QuantizedModel(model, scheme, std::move(layers), std::move(factors));
}

template <typename Acc>
FixedTrace QuantizedModel::run(const syndrome::SyndromeGraph& graph, bool record_trace) const {
  const int n = static_cast<int>(graph.node_count());
  const auto& cfg = source_.config;
  const auto& wf = scheme_.weights;
  const auto& af = scheme_.activations;
  const int fw = wf.fractional_bits;

  auto requant = [&](Acc v, Activation act) {
    if (act == Activation::ReLU && v < 0) v = 0;
    return saturate_t(shift_round_t<Acc>(v, fw), af);
  };

  int width = syndrome::kFeatureWidth;
  int rows = n;
  std::vector<std::int32_t> x(static_cast<std::size_t>(n) * width);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < width; ++c) {
      x[static_cast<std::size_t>(i) * width + c] = static_cast<std::int32_t>(
          quantize_value(graph.features[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)], af));
    }
  }

  struct QNeighbor {
    int index;
    std::int32_t weight;
  };
  std::vector<std::vector<QNeighbor>> adj(static_cast<std::size_t>(n));
  {
    const auto fadj = model::adjacency(graph);
    for (int i = 0; i < n; ++i) {
      for (const auto& nb : fadj[static_cast<std::size_t>(i)]) {
        adj[static_cast<std::size_t>(i)].push_back(
            {nb.index, static_cast<std::int32_t>(quantize_value(nb.weight, wf))});
      }
    }
  }

  FixedTrace trace;
  trace.pre_fraction_bits = wf.fractional_bits + af.fractional_bits;
  std::vector<Acc> acc;
  std::vector<std::int32_t> agg;

  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    const auto& spec = cfg.layers[li];
    const auto& k = kernels_[li];
    const std::size_t u_count = k.outputs.size();
    std::vector<std::int32_t> out;

    switch (spec.kind) {
      case LayerKind::GraphConv: {
        agg.assign(x.size(), 0);
        acc.assign(static_cast<std::size_t>(width), 0);
        for (int i = 0; i < rows; ++i) {
          std::fill(acc.begin(), acc.end(), Acc{0});
          for (const auto& nb : adj[static_cast<std::size_t>(i)]) {
            const std::int32_t* xj = &x[static_cast<std::size_t>(nb.index) * width];
            for (int c = 0; c < width; ++c) acc[static_cast<std::size_t>(c)] += static_cast<Acc>(nb.weight) * xj[c];
          }
          for (int c = 0; c < width; ++c) {
            agg[static_cast<std::size_t>(i) * width + c] = requant(acc[static_cast<std::size_t>(c)], Activation::None);
          }
        }
        out.assign(static_cast<std::size_t>(rows) * spec.d_out, 0);
        acc.resize(u_count);
        for (int i = 0; i < rows; ++i) {
          for (std::size_t u = 0; u < u_count; ++u) acc[u] = k.bias_acc[u];
          const std::int32_t* xi = &x[static_cast<std::size_t>(i) * width];
          const std::int32_t* ai = &agg[static_cast<std::size_t>(i) * width];
          for (int c = 0; c < width; ++c) {
            if (const Acc xv = xi[c]; xv != 0) {
              const std::int32_t* col = &k.w1t[static_cast<std::size_t>(c) * u_count];
              for (std::size_t u = 0; u < u_count; ++u) acc[u] += col[u] * xv;
            }
            if (const Acc av = ai[c]; av != 0) {
              const std::int32_t* col = &k.w2t[static_cast<std::size_t>(c) * u_count];
              for (std::size_t u = 0; u < u_count; ++u) acc[u] += col[u] * av;
            }
          }
          std::int32_t* oi = &out[static_cast<std::size_t>(i) * spec.d_out];
          for (std::size_t u = 0; u < u_count; ++u) {
            oi[k.outputs[u]] = requant(acc[u], spec.activation);
          }
        }
        break;
      }
      case LayerKind::GlobalMeanPool: {
        const Acc factor = gmp_factors_[static_cast<std::size_t>(rows - 1)];
        out.assign(static_cast<std::size_t>(width), 0);
        for (int c = 0; c < width; ++c) {
          Acc sum = 0;
          for (int i = 0; i < rows; ++i) sum += x[static_cast<std::size_t>(i) * width + c];
          out[static_cast<std::size_t>(c)] = requant(sum * factor, Activation::None);
        }
        rows = 1;
        break;
      }
      case LayerKind::Dense: {
        acc.resize(u_count);
        for (std::size_t u = 0; u < u_count; ++u) acc[u] = k.bias_acc[u];
        for (int c = 0; c < width; ++c) {
          if (const Acc xv = x[static_cast<std::size_t>(c)]; xv != 0) {
            const std::int32_t* col = &k.w1t[static_cast<std::size_t>(c) * u_count];
            for (std::size_t u = 0; u < u_count; ++u) acc[u] += col[u] * xv;
          }
        }
        out.assign(static_cast<std::size_t>(spec.d_out), 0);
        if (spec.activation == Activation::Sigmoid) {
          const Acc pre = acc[0];
          constexpr auto lo = std::numeric_limits<std::int64_t>::min();
          constexpr auto hi = std::numeric_limits<std::int64_t>::max();
          trace.pre_activation = pre < static_cast<Acc>(lo)   ? lo
                                 : pre > static_cast<Acc>(hi) ? hi
                                                              : static_cast<std::int64_t>(pre);
          trace.decision = pre >= 0;
          out[0] = requant(pre, Activation::None);
        } else {
          for (std::size_t u = 0; u < u_count; ++u) out[static_cast<std::size_t>(k.outputs[u])] = requant(acc[u], spec.activation);
        }
        break;
      }
    }
    x = std::move(out);
    width = spec.d_out;
    if (record_trace) {
      trace.activations.push_back(x);
      trace.rows.push_back(rows);
    }
  }
  return trace;
}

FixedTrace QuantizedModel::infer(const syndrome::SyndromeGraph& graph, bool record_trace) const {
  const auto n = graph.node_count();
  if (n == 0 || n > gmp_factors_.size()) {
    throw DomainError("graph with " + std::to_string(n) + " nodes is outside the factor table [1, " +
                      std::to_string(gmp_factors_.size()) + "]");
  }
  if (required_bits_ <= 63) return run<std::int64_t>(graph, record_trace);
  return run<__int128>(graph, record_trace);
}

FixedTrace infer_fixed(const QuantizedModel& qmodel, const syndrome::SyndromeGraph& graph) {
  return qmodel.infer(graph, true);
}

const char* to_string(QuantMode mode) {
  switch (mode) {
    case QuantMode::Full: return "full";
    case QuantMode::WeightsOnly: return "weights-only";
    case QuantMode::ActivationsOnly: return "activations-only";
    case QuantMode::BiasesOnly: return "biases-only";
  }
  return "?";
}

QuantMode parse_quant_mode(std::string_view text) {
  if (text == "full") return QuantMode::Full;
  if (text == "weights-only") return QuantMode::WeightsOnly;
  if (text == "activations-only") return QuantMode::ActivationsOnly;
  if (text == "biases-only") return QuantMode::BiasesOnly;
  throw DomainError("unknown quantization mode '" + std::string(text) + "'");
}

namespace {

struct ModeFlags {
  bool weights;
  bool activations;
  bool biases;
};

ModeFlags flags_of(QuantMode mode) {
  return {mode == QuantMode::Full || mode == QuantMode::WeightsOnly,
          mode == QuantMode::Full || mode == QuantMode::ActivationsOnly,
          mode == QuantMode::Full || mode == QuantMode::BiasesOnly};
}

// Effective (possibly dequantized) parameters of one layer.
struct EffectiveLayer {
  model::Matrix w1;
  model::Matrix w2;
  std::vector<double> bias;
};

std::vector<EffectiveLayer> effective_layers(const QuantizedModel& qm, ModeFlags f) {
  const auto& cfg = qm.config();
  const auto& src = qm.source().weights;
  const auto& s = qm.scheme();
  std::vector<EffectiveLayer> out;
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    EffectiveLayer e;
    const auto& w = src.layers[li];
    const auto& q = qm.layers()[li];
    e.w1 = w.w1;
    e.w2 = w.w2;
    e.bias = w.bias;
    if (f.weights) {
      for (std::size_t i = 0; i < q.w1.size(); ++i) e.w1.data[i] = dequantize(q.w1[i], s.weights);
      for (std::size_t i = 0; i < q.w2.size(); ++i) e.w2.data[i] = dequantize(q.w2[i], s.weights);
    }
    if (f.biases) {
      for (std::size_t i = 0; i < q.bias.size(); ++i) e.bias[i] = dequantize(q.bias[i], s.biases);
    }
    out.push_back(std::move(e));
  }
  return out;
}

double apply_activation(Activation a, double v) {
  if (a == Activation::ReLU) return v > 0.0 ? v : 0.0;
  return v;
}

}  // namespace

Emulated infer_emulated(const QuantizedModel& qm, const syndrome::SyndromeGraph& graph,
                        QuantMode mode) {
  const int n = static_cast<int>(graph.node_count());
  if (n == 0) throw DomainError("emulated inference needs at least one node");
  const auto f = flags_of(mode);
  const auto& cfg = qm.config();
  const auto& s = qm.scheme();
  const auto eff = effective_layers(qm, f);
  auto rq = [&](double v) { return f.activations ? dequantize(quantize_value(v, s.activations), s.activations) : v; };
  auto rw = [&](double v) { return f.weights ? dequantize(quantize_value(v, s.weights), s.weights) : v; };

  model::Matrix x(n, syndrome::kFeatureWidth);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < syndrome::kFeatureWidth; ++c) {
      x(i, c) = rq(graph.features[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]);
    }
  }
  auto adj = model::adjacency(graph);
  for (auto& list : adj) {
    for (auto& nb : list) nb.weight = rw(nb.weight);
  }

  Emulated result;
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    const auto& spec = cfg.layers[li];
    const auto& w = eff[li];
    model::Matrix out;
    switch (spec.kind) {
      case LayerKind::GraphConv: {
        model::Matrix agg(x.rows, spec.d_in);
        for (int i = 0; i < x.rows; ++i) {
          for (int c = 0; c < spec.d_in; ++c) {
            double sum = 0.0;
            for (const auto& nb : adj[static_cast<std::size_t>(i)]) sum += nb.weight * x(nb.index, c);
            agg(i, c) = rq(sum);
          }
        }
        out = model::Matrix(x.rows, spec.d_out);
        for (int i = 0; i < x.rows; ++i) {
          for (int o = 0; o < spec.d_out; ++o) {
            if (!spec.is_computed(o)) continue;
            double acc = 0.0;
            for (int c = 0; c < spec.d_in; ++c) acc += w.w1(o, c) * x(i, c);
            for (int c = 0; c < spec.d_in; ++c) acc += w.w2(o, c) * agg(i, c);
            acc += w.bias[static_cast<std::size_t>(o)];
            out(i, o) = rq(apply_activation(spec.activation, acc));
          }
        }
        break;
      }
      case LayerKind::GlobalMeanPool: {
        out = model::Matrix(1, spec.d_out);
        const double factor = f.weights ? dequantize(qm.gmp_factors().at(static_cast<std::size_t>(x.rows - 1)), s.weights)
                                        : 0.0;
        for (int c = 0; c < spec.d_out; ++c) {
          double sum = 0.0;
          for (int i = 0; i < x.rows; ++i) sum += x(i, c);
          out(0, c) = rq(f.weights ? sum * factor : sum / static_cast<double>(x.rows));
        }
        break;
      }
      case LayerKind::Dense: {
        out = model::Matrix(1, spec.d_out);
        for (int o = 0; o < spec.d_out; ++o) {
          double acc = 0.0;
          for (int c = 0; c < spec.d_in; ++c) acc += w.w1(o, c) * x(0, c);
          acc += w.bias[static_cast<std::size_t>(o)];
          if (spec.activation == Activation::Sigmoid) {
            result.pre_activation = acc;
            out(0, o) = acc;
          } else {
            out(0, o) = rq(apply_activation(spec.activation, acc));
          }
        }
        break;
      }
    }
    x = out;
    result.activations.push_back(std::move(out));
  }
  return result;
}

ErrorBound analytic_error_bound(const QuantizedModel& qm, const syndrome::SyndromeGraph& graph,
                                const model::InferenceTrace& reference, QuantMode mode) {
  const int n = static_cast<int>(graph.node_count());
  if (n == 0) throw DomainError("error bound needs at least one node");
  const auto& cfg = qm.config();
  if (reference.activations.size() != cfg.layers.size()) {
    throw ShapeMismatchError("reference trace does not match the model");
  }
  const auto f = flags_of(mode);
  const auto& s = qm.scheme();
  const auto eff = effective_layers(qm, f);
  const auto& src = qm.source().weights;
  const double half_ulp = f.activations ? 0.5 * s.activations.ulp() : 0.0;
  const double max_a = s.activations.max_value();
  // Requantization error of a value whose exact counterpart is y and which
  // already carries error e; covers saturation at the format edge.
  auto requant_err = [&](double y, double e) {
    if (!f.activations) return 0.0;
    return std::max(half_ulp, std::abs(y) + e - max_a);
  };
  // Allowance for rounding inside the double-precision reference itself.
  auto slack = [](double magnitude) { return 1e-10 * (1.0 + magnitude); };
  // Output bound of a layer whose exact pre-activation is v, quantized
  // pre-activation within v +- e.
  auto finish = [&](double v, double e, Activation act) {
    if (act != Activation::ReLU) return e + requant_err(v, e);
    if (v + e <= 0.0) return 0.0;  // both sides clamp to an exact zero
    auto relu = [](double t) { return t > 0.0 ? t : 0.0; };
    const double r = std::max(relu(v + e) - relu(v), relu(v) - relu(v - e));
    return r + requant_err(relu(v), r);
  };

  model::Matrix x(n, syndrome::kFeatureWidth);
  model::Matrix bx(n, syndrome::kFeatureWidth);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < syndrome::kFeatureWidth; ++c) {
      const double v = graph.features[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
      x(i, c) = v;
      bx(i, c) = f.activations ? std::abs(dequantize(quantize_value(v, s.activations), s.activations) - v) : 0.0;
    }
  }
  const auto adj = model::adjacency(graph);

  ErrorBound bound;
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    const auto& spec = cfg.layers[li];
    const auto& we = eff[li];
    const auto& wr = src.layers[li];
    const auto& y = reference.activations[li];
    model::Matrix by(y.rows, y.cols);
    switch (spec.kind) {
      case LayerKind::GraphConv: {
        model::Matrix agg(x.rows, spec.d_in);
        model::Matrix bagg(x.rows, spec.d_in);
        for (int i = 0; i < x.rows; ++i) {
          for (int c = 0; c < spec.d_in; ++c) {
            double v = 0.0;
            double e = 0.0;
            double mag = 0.0;
            for (const auto& nb : adj[static_cast<std::size_t>(i)]) {
              const double eq = f.weights ? dequantize(quantize_value(nb.weight, s.weights), s.weights) : nb.weight;
              v += nb.weight * x(nb.index, c);
              e += std::abs(eq) * bx(nb.index, c) + std::abs(eq - nb.weight) * std::abs(x(nb.index, c));
              mag += std::abs(nb.weight * x(nb.index, c));
            }
            e += slack(mag);
            agg(i, c) = v;
            bagg(i, c) = e + requant_err(v, e);
          }
        }
        for (int i = 0; i < x.rows; ++i) {
          for (int o = 0; o < spec.d_out; ++o) {
            if (!spec.is_computed(o)) continue;
            const auto ob = static_cast<std::size_t>(o);
            double e = std::abs(we.bias[ob] - wr.bias[ob]);
            double mag = std::abs(wr.bias[ob]);
            double v = wr.bias[ob];
            for (int c = 0; c < spec.d_in; ++c) {
              e += std::abs(we.w1(o, c)) * bx(i, c) + std::abs(we.w1(o, c) - wr.w1(o, c)) * std::abs(x(i, c));
              e += std::abs(we.w2(o, c)) * bagg(i, c) + std::abs(we.w2(o, c) - wr.w2(o, c)) * std::abs(agg(i, c));
              mag += std::abs(wr.w1(o, c) * x(i, c)) + std::abs(wr.w2(o, c) * agg(i, c));
              v += wr.w1(o, c) * x(i, c) + wr.w2(o, c) * agg(i, c);
            }
            e += slack(mag);
            by(i, o) = finish(v, e, spec.activation);
          }
        }
        break;
      }
      case LayerKind::GlobalMeanPool: {
        const double inv_n = 1.0 / static_cast<double>(x.rows);
        const double factor = f.weights ? dequantize(qm.gmp_factors().at(static_cast<std::size_t>(x.rows - 1)), s.weights)
                                        : inv_n;
        for (int c = 0; c < spec.d_out; ++c) {
          double sum_b = 0.0;
          double sum_x = 0.0;
          for (int i = 0; i < x.rows; ++i) {
            sum_b += bx(i, c);
            sum_x += std::abs(x(i, c));
          }
          const double e = std::abs(factor) * sum_b + std::abs(factor - inv_n) * sum_x + slack(sum_x);
          by(0, c) = e + requant_err(y(0, c), e);
        }
        break;
      }
      case LayerKind::Dense: {
        for (int o = 0; o < spec.d_out; ++o) {
          const auto ob = static_cast<std::size_t>(o);
          double e = std::abs(we.bias[ob] - wr.bias[ob]);
          double mag = std::abs(wr.bias[ob]);
          double v = wr.bias[ob];
          for (int c = 0; c < spec.d_in; ++c) {
            e += std::abs(we.w1(o, c)) * bx(0, c) + std::abs(we.w1(o, c) - wr.w1(o, c)) * std::abs(x(0, c));
            mag += std::abs(wr.w1(o, c) * x(0, c));
            v += wr.w1(o, c) * x(0, c);
          }
          e += slack(mag);
          if (spec.activation == Activation::Sigmoid) {
            bound.pre_activation = e;
            by(0, o) = e;
          } else {
            by(0, o) = finish(v, e, spec.activation);
          }
        }
        break;
      }
    }
    x = y;
    bx = by;
    bound.activations.push_back(std::move(by));
  }
  return bound;
}

QuantizationErrorReport quantization_error_report(const QuantizedModel& qm,
                                                  std::span<const syndrome::SyndromeGraph> graphs,
                                                  QuantMode mode) {
  if (graphs.empty()) throw DomainError("quantization error report needs a non-empty batch");
  const auto f = flags_of(mode);
  const auto& cfg = qm.config();
  const auto& s = qm.scheme();
  QuantizationErrorReport report;
  report.mode = mode;
  report.weight_format = f.weights ? s.weights.to_string() : "float";
  report.activation_format = f.activations ? s.activations.to_string() : "float";
  report.bias_format = f.biases ? s.biases.to_string() : "float";

  const std::size_t layer_count = cfg.layers.size();
  report.layers.resize(layer_count);
  std::vector<double> sum_err(layer_count, 0.0);
  std::vector<std::uint64_t> entries(layer_count, 0);
  for (std::size_t li = 0; li < layer_count; ++li) report.layers[li].label = cfg.layers[li].label;
  report.layers.back().label += " (pre-activation)";

  const double act_ulp = s.activations.ulp();
  const double pre_ulp = std::ldexp(1.0, -(s.weights.fractional_bits + s.activations.fractional_bits));

  for (const auto& g : graphs) {
    if (g.node_count() == 0) continue;
    if (mode == QuantMode::Full && g.node_count() > static_cast<std::size_t>(qm.n_max())) continue;
    ++report.graphs;
    const auto ref = model::infer_float(cfg, qm.source().weights, g);
    const auto bound = analytic_error_bound(qm, g, ref, mode);

    std::vector<model::Matrix> quantized;
    double pre_q = 0.0;
    if (mode == QuantMode::Full) {
      const auto fx = qm.infer(g, true);
      for (std::size_t li = 0; li + 1 < layer_count; ++li) {
        const auto& ref_l = ref.activations[li];
        model::Matrix m(ref_l.rows, ref_l.cols);
        for (std::size_t e = 0; e < m.data.size(); ++e) m.data[e] = fx.activations[li][e] * act_ulp;
        quantized.push_back(std::move(m));
      }
      pre_q = static_cast<double>(fx.pre_activation) * pre_ulp;
    } else {
      auto em = infer_emulated(qm, g, mode);
      quantized = std::move(em.activations);
      pre_q = em.pre_activation;
    }

    for (std::size_t li = 0; li + 1 < layer_count; ++li) {
      auto& st = report.layers[li];
      const auto& r = ref.activations[li];
      const auto& q = quantized[li];
      const auto& b = bound.activations[li];
      for (std::size_t e = 0; e < r.data.size(); ++e) {
        const double err = std::abs(q.data[e] - r.data[e]);
        st.max_abs_error = std::max(st.max_abs_error, err);
        st.max_bound = std::max(st.max_bound, b.data[e]);
        sum_err[li] += err;
        if (err > b.data[e]) ++st.bound_violations;
      }
      entries[li] += r.data.size();
    }
    auto& last = report.layers.back();
    const double pre_err = std::abs(pre_q - ref.pre_activation);
    last.max_abs_error = std::max(last.max_abs_error, pre_err);
    last.max_bound = std::max(last.max_bound, bound.pre_activation);
    sum_err.back() += pre_err;
    entries.back() += 1;
    if (pre_err > bound.pre_activation) ++last.bound_violations;
    report.max_pre_activation_error = std::max(report.max_pre_activation_error, pre_err);

    const bool float_decision = ref.pre_activation >= 0.0;
    const bool quant_decision = pre_q >= 0.0;
    if (float_decision != quant_decision) {
      ++report.decision_flips;
      if (std::abs(ref.pre_activation) > bound.pre_activation) ++report.unexplained_flips;
    }
  }
  for (std::size_t li = 0; li < layer_count; ++li) {
    if (entries[li] > 0) report.layers[li].mean_abs_error = sum_err[li] / static_cast<double>(entries[li]);
  }
  return report;
}

}  // namespace gnnqec::quant
