#include "gnnqec/prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"

#include "gnnqec/errors.hpp"

namespace gnnqec::prune {

using model::LayerKind;
using ojson = nlohmann::ordered_json;

int LayerSparsity::sparse_count(double theta) const {
  return static_cast<int>(std::count_if(zero_probability.begin(), zero_probability.end(),
                                        [theta](double p) { return p >= theta; }));
}

void SparsityProfile::validate() const {
  if (!(theta > 0.0 && theta <= 1.0)) throw DomainError("theta must lie in (0, 1]");
  for (const auto& l : layers) {
    for (double p : l.zero_probability) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw DomainError(l.label + ": zero-probability outside [0, 1]");
      }
    }
  }
}

namespace {

std::vector<std::size_t> graph_conv_layers(const model::ModelConfig& config) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    if (config.layers[i].kind == LayerKind::GraphConv) out.push_back(i);
  }
  return out;
}

}  // namespace

SparsityProfile profile_sparsity(const model::Model& model,
                                 std::span<const syndrome::SyndromeGraph> graphs, double theta) {
  if (graphs.empty()) throw DomainError("sparsity profiling needs a non-empty graph batch");
  if (!(theta > 0.0 && theta <= 1.0)) throw DomainError("theta must lie in (0, 1]");
  const auto& cfg = model.config;
  const auto convs = graph_conv_layers(cfg);
  std::vector<std::vector<std::uint64_t>> zeros(convs.size());
  for (std::size_t c = 0; c < convs.size(); ++c) {
    zeros[c].assign(static_cast<std::size_t>(cfg.layers[convs[c]].d_out), 0);
  }
  std::uint64_t nodes = 0;
  for (const auto& g : graphs) {
    if (g.node_count() == 0) continue;
    const auto trace = model::infer_float(cfg, model.weights, g);
    nodes += g.node_count();
    for (std::size_t c = 0; c < convs.size(); ++c) {
      const auto& a = trace.activations[convs[c]];
      for (int i = 0; i < a.rows; ++i) {
        for (int f = 0; f < a.cols; ++f) {
          if (a(i, f) == 0.0) ++zeros[c][static_cast<std::size_t>(f)];
        }
      }
    }
  }
  if (nodes == 0) throw DomainError("sparsity profiling needs at least one node in the batch");

  SparsityProfile profile;
  profile.theta = theta;
  profile.samples = nodes;
  for (std::size_t c = 0; c < convs.size(); ++c) {
    const auto& spec = cfg.layers[convs[c]];
    LayerSparsity l{convs[c], spec.label, spec.d_in, {}};
    for (auto z : zeros[c]) l.zero_probability.push_back(static_cast<double>(z) / static_cast<double>(nodes));
    profile.layers.push_back(std::move(l));
  }
  return profile;
}

SparsityProfile profile_from_counts(const model::ModelConfig& config, std::span<const int> counts,
                                    double theta) {
  const auto convs = graph_conv_layers(config);
  if (counts.size() != convs.size()) {
    throw ShapeMismatchError("got " + std::to_string(counts.size()) + " sparse counts for " +
                             std::to_string(convs.size()) + " GraphConv layers");
  }
  SparsityProfile profile;
  profile.theta = theta;
  for (std::size_t c = 0; c < convs.size(); ++c) {
    const auto& spec = config.layers[convs[c]];
    if (counts[c] < 0 || counts[c] > spec.d_out) {
      throw DomainError(spec.label + ": sparse count must lie in [0, d_out]");
    }
    LayerSparsity l{convs[c], spec.label, spec.d_in, std::vector<double>(static_cast<std::size_t>(spec.d_out), 0.0)};
    std::fill(l.zero_probability.begin(), l.zero_probability.begin() + counts[c], 1.0);
    profile.layers.push_back(std::move(l));
  }
  profile.validate();
  return profile;
}

std::vector<AvoidableCount> avoidable_multiplications(const SparsityProfile& profile,
                                                      const model::ModelConfig& config,
                                                      std::int64_t n) {
  if (n < 0) throw DomainError("node count must be >= 0");
  const auto convs = graph_conv_layers(config);
  if (convs.size() != profile.layers.size()) {
    throw ShapeMismatchError("profile covers " + std::to_string(profile.layers.size()) +
                             " layers, model has " + std::to_string(convs.size()) + " GraphConv layers");
  }
  std::vector<AvoidableCount> out;
  for (std::size_t c = 0; c < convs.size(); ++c) {
    const auto& l = profile.layers[c];
    const auto& spec = config.layers[convs[c]];
    if (l.layer != convs[c] || l.d_in != spec.d_in ||
        static_cast<int>(l.zero_probability.size()) != spec.d_out) {
      throw ShapeMismatchError("profile entry " + l.label + " does not match layer " + spec.label);
    }
    AvoidableCount a;
    a.layer = convs[c];
    a.label = spec.label;
    a.sparse_features = l.sparse_count(profile.theta);
    a.per_node = 2LL * a.sparse_features * spec.d_in;
    a.total = a.per_node * n;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<std::size_t> rank_layers(std::span<const AvoidableCount> counts) {
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return counts[a].total > counts[b].total;
  });
  return order;
}

PruningPlan auto_plan(const SparsityProfile& profile, const model::ModelConfig& config,
                      int remove_top, double mask_fraction) {
  if (remove_top < 0) throw DomainError("number of layers to remove must be >= 0");
  if (!(mask_fraction >= 0.0 && mask_fraction < 1.0)) {
    throw DomainError("mask fraction must lie in [0, 1)");
  }
  const auto counts = avoidable_multiplications(profile, config, 1);
  const auto order = rank_layers(counts);
  if (static_cast<std::size_t>(remove_top) > order.size()) {
    throw PruningError("cannot remove " + std::to_string(remove_top) + " of " +
                       std::to_string(order.size()) + " GraphConv layers");
  }
  PruningPlan plan;
  for (int r = 0; r < remove_top; ++r) {
    plan.actions.push_back({ActionKind::RemoveLayer, counts[order[static_cast<std::size_t>(r)]].layer, {}});
  }
  if (mask_fraction > 0.0 && static_cast<std::size_t>(remove_top) < order.size()) {
    const auto& l = profile.layers[order[static_cast<std::size_t>(remove_top)]];
    const int d_out = static_cast<int>(l.zero_probability.size());
    const int count = static_cast<int>(std::lround(mask_fraction * d_out));
    std::vector<int> idx(static_cast<std::size_t>(d_out));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return l.zero_probability[static_cast<std::size_t>(a)] > l.zero_probability[static_cast<std::size_t>(b)];
    });
    idx.resize(static_cast<std::size_t>(count));
    std::sort(idx.begin(), idx.end());
    if (!idx.empty()) plan.actions.push_back({ActionKind::MaskFeatures, l.layer, std::move(idx)});
  }
  compute_savings(plan, config);
  return plan;
}

namespace {

struct Surgery {
  std::vector<bool> removed;
  std::vector<std::vector<int>> masks;
};

Surgery resolve(const model::ModelConfig& config, const PruningPlan& plan) {
  Surgery s{std::vector<bool>(config.layers.size(), false),
            std::vector<std::vector<int>>(config.layers.size())};
  for (const auto& a : plan.actions) {
    if (a.layer >= config.layers.size()) {
      throw PruningError("plan refers to layer " + std::to_string(a.layer) + " but the model has " +
                         std::to_string(config.layers.size()));
    }
    const auto& spec = config.layers[a.layer];
    if (spec.kind != LayerKind::GraphConv) {
      throw PruningError("only GraphConv layers can be pruned, layer " + std::to_string(a.layer) +
                         " is " + model::to_string(spec.kind));
    }
    if (s.removed[a.layer]) throw PruningError(spec.label + " is already removed by the plan");
    if (a.kind == ActionKind::RemoveLayer) {
      if (!s.masks[a.layer].empty()) throw PruningError(spec.label + " is masked and removed");
      s.removed[a.layer] = true;
      continue;
    }
    std::set<int> features(s.masks[a.layer].begin(), s.masks[a.layer].end());
    for (int f : a.features) {
      if (f < 0 || f >= spec.d_out) {
        throw PruningError(spec.label + ": feature " + std::to_string(f) + " outside [0, " +
                           std::to_string(spec.d_out) + ")");
      }
      if (!spec.is_computed(f)) continue;
      features.insert(f);
    }
    if (static_cast<int>(features.size()) >= spec.computed_outputs()) {
      throw PruningError(spec.label + ": masking would leave no computed features");
    }
    s.masks[a.layer].assign(features.begin(), features.end());
  }
  return s;
}

// Rewires surviving layers; returns the index map new -> old.
std::vector<std::size_t> rewire(const model::ModelConfig& config, const Surgery& s,
                                model::ModelConfig& out) {
  out = model::ModelConfig{};
  out.variant = model::Variant::Custom;
  out.distance = config.distance;
  std::vector<std::size_t> origin;
  int width = syndrome::kFeatureWidth;
  std::string producer = "the input features";
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    if (s.removed[i]) continue;
    auto spec = config.layers[i];
    if (spec.kind == LayerKind::GlobalMeanPool) {
      spec.d_in = spec.d_out = width;
    } else if (spec.d_in != width) {
      throw PruningError(spec.label + " expects " + std::to_string(spec.d_in) + " inputs but " +
                         producer + " supplies " + std::to_string(width));
    }
    if (!s.masks[i].empty()) {
      std::vector<bool> keep(static_cast<std::size_t>(spec.d_out), true);
      if (spec.mask) keep = *spec.mask;
      for (int f : s.masks[i]) keep[static_cast<std::size_t>(f)] = false;
      spec.mask = std::move(keep);
    }
    width = spec.d_out;
    producer = spec.label;
    out.layers.push_back(std::move(spec));
    origin.push_back(i);
  }
  try {
    out.validate();
  } catch (const InvalidConfigError& e) {
    throw PruningError(std::string("pruned model is invalid: ") + e.what());
  }
  return origin;
}

}  // namespace

model::ModelConfig apply_pruning(const model::ModelConfig& config, const PruningPlan& plan) {
  config.validate();
  if (plan.actions.empty()) return config;
  model::ModelConfig out;
  rewire(config, resolve(config, plan), out);
  return out;
}

model::Model apply_pruning(const model::Model& m, const PruningPlan& plan) {
  m.config.validate();
  m.weights.validate(m.config);
  if (plan.actions.empty()) return m;
  const auto s = resolve(m.config, plan);
  model::Model out;
  const auto origin = rewire(m.config, s, out.config);
  for (std::size_t k = 0; k < origin.size(); ++k) {
    auto w = m.weights.layers[origin[k]];
    for (int f : s.masks[origin[k]]) {
      for (int c = 0; c < w.w1.cols; ++c) {
        w.w1(f, c) = 0.0;
        w.w2(f, c) = 0.0;
      }
      w.bias[static_cast<std::size_t>(f)] = 0.0;
    }
    out.weights.layers.push_back(std::move(w));
  }
  out.weights.validate(out.config);
  return out;
}

void compute_savings(PruningPlan& plan, const model::ModelConfig& config) {
  const auto after = apply_pruning(config, plan);
  plan.parameters_saved = model::parameter_count(config).total - model::parameter_count(after).total;
  auto conv_mults = [](const model::ModelConfig& c) {
    std::int64_t total = 0;
    for (const auto& l : model::multiplication_count(c, 1).layers) {
      if (l.kind == LayerKind::GraphConv) total += l.count;
    }
    return total;
  };
  plan.multiplications_saved_per_node = conv_mults(config) - conv_mults(after);
}

std::string profile_to_json(const SparsityProfile& profile) {
  ojson j;
  j["format"] = "gnnqec-sparsity-profile";
  j["theta"] = profile.theta;
  j["samples"] = profile.samples;
  auto layers = ojson::array();
  for (const auto& l : profile.layers) {
    ojson e;
    e["layer"] = l.layer;
    e["label"] = l.label;
    e["d_in"] = l.d_in;
    e["d_out"] = l.zero_probability.size();
    e["sparse_features"] = l.sparse_count(profile.theta);
    e["zero_probability"] = l.zero_probability;
    layers.push_back(std::move(e));
  }
  j["layers"] = std::move(layers);
  return j.dump() + "\n";
}

SparsityProfile profile_from_json(std::string_view text) {
  SparsityProfile p;
  try {
    const auto j = nlohmann::json::parse(text);
    p.theta = j.at("theta").get<double>();
    p.samples = j.value("samples", std::uint64_t{0});
    for (const auto& e : j.at("layers")) {
      LayerSparsity l;
      l.layer = e.at("layer").get<std::size_t>();
      l.label = e.value("label", std::string("GraphConv"));
      l.d_in = e.at("d_in").get<int>();
      l.zero_probability = e.at("zero_probability").get<std::vector<double>>();
      p.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(std::string("sparsity profile: ") + e.what());
  }
  p.validate();
  return p;
}

std::string plan_to_json(const PruningPlan& plan, const model::ModelConfig& config) {
  ojson j;
  j["format"] = "gnnqec-pruning-plan";
  auto actions = ojson::array();
  for (const auto& a : plan.actions) {
    ojson e;
    e["action"] = a.kind == ActionKind::RemoveLayer ? "remove-layer" : "mask-features";
    e["layer"] = a.layer;
    if (a.layer < config.layers.size()) e["label"] = config.layers[a.layer].label;
    if (a.kind == ActionKind::MaskFeatures) e["features"] = a.features;
    actions.push_back(std::move(e));
  }
  j["actions"] = std::move(actions);
  j["parameters_saved"] = plan.parameters_saved;
  j["multiplications_saved_per_node"] = plan.multiplications_saved_per_node;
  return j.dump() + "\n";
}

PruningPlan plan_from_json(std::string_view text) {
  PruningPlan plan;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& e : j.at("actions")) {
      PruneAction a;
      const auto kind = e.at("action").get<std::string>();
      if (kind == "remove-layer") {
        a.kind = ActionKind::RemoveLayer;
      } else if (kind == "mask-features") {
        a.kind = ActionKind::MaskFeatures;
        a.features = e.at("features").get<std::vector<int>>();
        std::sort(a.features.begin(), a.features.end());
      } else {
        throw MalformedFileError("unknown pruning action '" + kind + "'");
      }
      a.layer = e.at("layer").get<std::size_t>();
      plan.actions.push_back(std::move(a));
    }
    plan.parameters_saved = j.value("parameters_saved", std::int64_t{0});
    plan.multiplications_saved_per_node = j.value("multiplications_saved_per_node", std::int64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(std::string("pruning plan: ") + e.what());
  }
  return plan;
}

}  // namespace gnnqec::prune
