#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gnnqec/model.hpp"
#include "gnnqec/syndrome.hpp"

namespace gnnqec::prune {

struct LayerSparsity {
  std::size_t layer = 0;  // index into ModelConfig::layers
  std::string label;
  int d_in = 0;
  std::vector<double> zero_probability;  // one per output feature

  int sparse_count(double theta) const;
};

struct SparsityProfile {
  double theta = 0.8;
  std::uint64_t samples = 0;  // nodes observed
  std::vector<LayerSparsity> layers;  // GraphConv layers in model order

  int sparse_count(std::size_t i) const { return layers.at(i).sparse_count(theta); }
  void validate() const;
};

// Zero-probability of every post-ReLU GraphConv feature over all nodes of the
// batch. Graphs without nodes carry no activations and are skipped.
SparsityProfile profile_sparsity(const model::Model& model,
                                 std::span<const syndrome::SyndromeGraph> graphs,
                                 double theta = 0.8);

// Synthetic profile with exactly `counts[l]` features at probability 1 (the
// lowest indices) and the rest at 0.
SparsityProfile profile_from_counts(const model::ModelConfig& config,
                                    std::span<const int> counts, double theta = 0.8);

struct AvoidableCount {
  std::size_t layer = 0;
  std::string label;
  int sparse_features = 0;
  std::int64_t per_node = 0;  // sparse * 2 * d_in
  std::int64_t total = 0;     // per_node * n
};

std::vector<AvoidableCount> avoidable_multiplications(const SparsityProfile& profile,
                                                      const model::ModelConfig& config,
                                                      std::int64_t n);

// Positions into `counts`, by descending total; ties keep their order.
std::vector<std::size_t> rank_layers(std::span<const AvoidableCount> counts);

enum class ActionKind { RemoveLayer, MaskFeatures };

struct PruneAction {
  ActionKind kind = ActionKind::RemoveLayer;
  std::size_t layer = 0;      // index in the unpruned config
  std::vector<int> features;  // MaskFeatures only, ascending

  friend bool operator==(const PruneAction&, const PruneAction&) = default;
};

struct PruningPlan {
  std::vector<PruneAction> actions;
  std::int64_t parameters_saved = 0;
  std::int64_t multiplications_saved_per_node = 0;  // GraphConv multiplies per graph node
};

// Removes the `remove_top` highest-ranked layers, then masks
// round(mask_fraction * d_out) of the next layer's sparsest features.
PruningPlan auto_plan(const SparsityProfile& profile, const model::ModelConfig& config,
                      int remove_top, double mask_fraction = 0.0);

// Fills in the savings fields of `plan` for `config`.
void compute_savings(PruningPlan& plan, const model::ModelConfig& config);

model::ModelConfig apply_pruning(const model::ModelConfig& config, const PruningPlan& plan);
model::Model apply_pruning(const model::Model& model, const PruningPlan& plan);

std::string profile_to_json(const SparsityProfile& profile);
SparsityProfile profile_from_json(std::string_view json);
std::string plan_to_json(const PruningPlan& plan, const model::ModelConfig& config);
PruningPlan plan_from_json(std::string_view json);

}  // namespace gnnqec::prune
