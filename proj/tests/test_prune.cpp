#include <array>
#include <cmath>
#include <set>

#include "doctest.h"

#include "gnnqec/errors.hpp"
#include "gnnqec/prune.hpp"
#include "sparsity_recount.hpp"
#include "support/generators.hpp"

using namespace gnnqec;
using namespace gnnqec::prune;
using gnnqec::model::Variant;

namespace {

const std::array<int, 7> table_counts{10, 36, 125, 276, 343, 186, 225};

model::ModelConfig unpruned() { return model::preset_config(Variant::Unpruned); }

SparsityProfile table_profile() { return profile_from_counts(unpruned(), table_counts); }

std::vector<std::string> labels_in_order(const std::vector<AvoidableCount>& counts,
                                         const std::vector<std::size_t>& order) {
  std::vector<std::string> out;
  for (auto i : order) out.push_back(counts[i].label);
  return out;
}

}  // namespace

TEST_CASE("constant rows give certain sparsity") {
  gen::Rng rng(1);
  const auto c = gen::small_config(rng, false);
  auto w = model::random_weights(c, 1);
  auto& l0 = w.layers[0];
  for (int k = 0; k < l0.w1.cols; ++k) {
    l0.w1(0, k) = l0.w2(0, k) = 0.0;
    l0.w1(1, k) = l0.w2(1, k) = 0.0;
  }
  l0.bias[0] = -1.0;
  l0.bias[1] = 50.0;
  const auto graphs = gen::graphs(rng, 5, 30, 0, 20);
  const auto p = profile_sparsity({c, w}, graphs);
  CHECK(p.layers[0].zero_probability[0] == 1.0);
  CHECK(p.layers[0].zero_probability[1] == 0.0);
}

TEST_CASE("profile equals a naive recount") {
  gen::Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = gen::small_config(rng);
    const model::Model m{c, model::random_weights(c, rng())};
    const auto graphs = gen::graphs(rng, 5, 40, 0, 25);
    const double theta = gen::uniform_real(rng, 0.05, 1.0);
    const auto p = profile_sparsity(m, graphs, theta);
    const auto r = oracle::recount_zeros(m, graphs);
    CHECK(p.samples == r.nodes);
    CHECK(p.theta == theta);
    REQUIRE(p.layers.size() == r.zeros.size());
    for (std::size_t l = 0; l < r.zeros.size(); ++l) {
      int sparse = 0;
      for (std::size_t f = 0; f < r.zeros[l].size(); ++f) {
        const double prob = static_cast<double>(r.zeros[l][f]) / static_cast<double>(r.nodes);
        CHECK(p.layers[l].zero_probability[f] == prob);
        sparse += prob >= theta;
      }
      CHECK(p.sparse_count(l) == sparse);
      CHECK(p.sparse_count(l) <= c.layers[l].d_out);
    }
  }
}

TEST_CASE("profiling preconditions") {
  const auto c = model::preset_config(Variant::MaxTime);
  const model::Model m{c, model::zero_weights(c)};
  CHECK_THROWS_AS(profile_sparsity(m, std::span<const syndrome::SyndromeGraph>()), DomainError);
  const std::vector<syndrome::SyndromeGraph> empty(3);
  CHECK_THROWS_AS(profile_sparsity(m, empty), DomainError);
  gen::Rng rng(3);
  const auto graphs = gen::graphs(rng, 7, 3, 1, 5);
  CHECK_THROWS_AS(profile_sparsity(m, graphs, 0.0), DomainError);
  CHECK_THROWS_AS(profile_sparsity(m, graphs, 1.5), DomainError);
  CHECK_THROWS_AS(profile_from_counts(unpruned(), std::vector<int>{1, 2}), ShapeMismatchError);
  CHECK_THROWS_AS(profile_from_counts(unpruned(), std::vector<int>{33, 0, 0, 0, 0, 0, 0}), DomainError);
}

TEST_CASE("avoidable multiplications reproduce the sparsity table") {
  const auto counts = avoidable_multiplications(table_profile(), unpruned(), 1);
  const std::array<std::int64_t, 7> expect{100, 2304, 32000, 141312, 351232, 190464, 115200};
  REQUIRE(counts.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(counts[i].sparse_features == table_counts[i]);
    CHECK(counts[i].per_node == expect[i]);
    CHECK(counts[i].total == expect[i]);
  }
  const auto at30 = avoidable_multiplications(table_profile(), unpruned(), 30);
  for (std::size_t i = 0; i < 7; ++i) CHECK(at30[i].total == 30 * expect[i]);
  CHECK(counts[4].per_node == 351232);
  CHECK(counts[0].per_node == 100);
}

TEST_CASE("sparse counts round to the table percentages") {
  const auto c = unpruned();
  const std::array<int, 7> pct{31, 28, 49, 54, 67, 73, 88};
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(std::lround(100.0 * table_counts[i] / c.layers[i].d_out) == pct[i]);
  }
}

TEST_CASE("zero sparsity avoids nothing") {
  const auto p = profile_from_counts(unpruned(), std::vector<int>(7, 0));
  for (const auto& a : avoidable_multiplications(p, unpruned(), 168)) CHECK(a.total == 0);
}

TEST_CASE("ranking follows descending avoidable multiplications") {
  const auto counts = avoidable_multiplications(table_profile(), unpruned(), 1);
  const auto order = rank_layers(counts);
  CHECK(labels_in_order(counts, order) ==
        std::vector<std::string>{"GraphConv4", "GraphConv5", "GraphConv3", "GraphConv6", "GraphConv2",
                                 "GraphConv1", "GraphConv0"});
  const std::set<std::string> top3{counts[order[0]].label, counts[order[1]].label, counts[order[2]].label};
  CHECK(top3 == std::set<std::string>{"GraphConv3", "GraphConv4", "GraphConv5"});

  std::vector<AvoidableCount> equal(5);
  for (std::size_t i = 0; i < 5; ++i) equal[i].total = 7;
  CHECK(rank_layers(equal) == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("ranking is a stable descending sort on random counts") {
  gen::Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<AvoidableCount> c(static_cast<std::size_t>(gen::uniform_int(rng, 0, 12)));
    for (auto& a : c) a.total = gen::uniform_int(rng, 0, 5);
    const auto order = rank_layers(c);
    REQUIRE(order.size() == c.size());
    for (std::size_t k = 1; k < order.size(); ++k) {
      CHECK(c[order[k - 1]].total >= c[order[k]].total);
      if (c[order[k - 1]].total == c[order[k]].total) CHECK(order[k - 1] < order[k]);
    }
  }
}

TEST_CASE("removing the top three gives the mean-time shape") {
  const auto plan = auto_plan(table_profile(), unpruned(), 3);
  const auto pruned = apply_pruning(unpruned(), plan);
  CHECK(model::same_shape(pruned, model::preset_config(Variant::MeanTime)));
  CHECK(model::parameter_count(pruned).total == 312'801);
  CHECK(pruned.layers[3].label == "GraphConv6");
  CHECK(pruned.layers[3].d_in == 256);

  PruningPlan manual;
  for (std::size_t l : {3u, 4u, 5u}) manual.actions.push_back({ActionKind::RemoveLayer, l, {}});
  CHECK(model::same_shape(apply_pruning(unpruned(), manual), model::preset_config(Variant::MeanTime)));
}

TEST_CASE("removing the top four and masking half of the next gives the max-time shape") {
  const auto plan = auto_plan(table_profile(), unpruned(), 4, 0.5);
  REQUIRE(plan.actions.size() == 5);
  CHECK(plan.actions[4].kind == ActionKind::MaskFeatures);
  CHECK(plan.actions[4].layer == 2);
  CHECK(plan.actions[4].features.size() == 128);
  const auto pruned = apply_pruning(unpruned(), plan);
  CHECK(model::same_shape(pruned, model::preset_config(Variant::MaxTime)));
  CHECK(model::parameter_count(pruned).total == 148'577);
  CHECK(plan.parameters_saved == model::parameter_count(unpruned()).total - 148'577);
  CHECK(plan.multiplications_saved_per_node == (320 + 8192 + 65536 + 262144 + 524288 + 262144 + 131072) - 41280);

  // The sparsest 125 features of GraphConv2 come first, then ties by index.
  for (int f = 0; f < 125; ++f) CHECK(plan.actions[4].features[static_cast<std::size_t>(f)] == f);
}

TEST_CASE("mask selection prefers the highest zero-probability") {
  auto p = table_profile();
  // Keep GraphConv2 fifth in the ranking: 125 features stay above theta.
  auto& z = p.layers[2].zero_probability;
  for (int f = 0; f < 256; ++f) z[static_cast<std::size_t>(f)] = f % 2 ? 0.8 + (f % 7) / 50.0 : (f % 7) / 10.0;
  const auto plan = auto_plan(p, unpruned(), 4, 0.25);
  REQUIRE(plan.actions.back().layer == 2);
  const auto& feats = plan.actions.back().features;
  REQUIRE(feats.size() == 64);
  double lowest_kept = 1.0;
  for (int f : feats) lowest_kept = std::min(lowest_kept, z[static_cast<std::size_t>(f)]);
  const std::set<int> chosen(feats.begin(), feats.end());
  for (int f = 0; f < 256; ++f) {
    if (!chosen.count(f)) CHECK(z[static_cast<std::size_t>(f)] <= lowest_kept);
  }
}

TEST_CASE("empty plan is the identity") {
  gen::Rng rng(5);
  const auto c = model::preset_config(Variant::MeanTime);
  const model::Model m{c, model::random_weights(c, 5)};
  const auto out = apply_pruning(m, PruningPlan{});
  CHECK(out.config.layers == m.config.layers);
  CHECK(out.weights == m.weights);
}

TEST_CASE("surgery keeps surviving weights verbatim") {
  const auto c = unpruned();
  const model::Model m{c, model::random_weights(c, 6)};
  const auto plan = auto_plan(table_profile(), c, 4, 0.5);
  const auto out = apply_pruning(m, plan);
  CHECK(out.config.variant == model::Variant::Custom);
  // Survivors: GraphConv0..2 and the head.
  const std::vector<std::size_t> origin{0, 1, 2, 7, 8, 9, 10, 11};
  REQUIRE(out.weights.layers.size() == origin.size());
  for (std::size_t k = 0; k < origin.size(); ++k) {
    if (k == 2) continue;
    CHECK(out.weights.layers[k] == m.weights.layers[origin[k]]);
  }
  const std::set<int> masked(plan.actions.back().features.begin(), plan.actions.back().features.end());
  for (int f = 0; f < 256; ++f) {
    const auto& a = out.weights.layers[2];
    const auto& b = m.weights.layers[2];
    for (int kk = 0; kk < 128; ++kk) {
      CHECK(a.w1(f, kk) == (masked.count(f) ? 0.0 : b.w1(f, kk)));
      CHECK(a.w2(f, kk) == (masked.count(f) ? 0.0 : b.w2(f, kk)));
    }
    CHECK(out.config.layers[2].is_computed(f) == !masked.count(f));
  }
}

TEST_CASE("masking already-zero rows leaves inference unchanged") {
  gen::Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = gen::small_config(rng, false);
    auto w = model::random_weights(c, rng());
    const std::size_t l = static_cast<std::size_t>(gen::uniform_int(rng, 0, static_cast<int>(c.pool_index()) - 1));
    const int f = gen::uniform_int(rng, 0, c.layers[l].d_out - 2);
    for (int k = 0; k < c.layers[l].d_in; ++k) w.layers[l].w1(f, k) = w.layers[l].w2(f, k) = 0.0;
    w.layers[l].bias[static_cast<std::size_t>(f)] = 0.0;
    PruningPlan plan;
    plan.actions.push_back({ActionKind::MaskFeatures, l, {f}});
    const model::Model m{c, w};
    const auto out = apply_pruning(m, plan);
    const auto g = gen::graph(rng, syndrome::CodeLayout(5), 1, 20);
    const auto a = model::infer_float(c, w, g);
    const auto b = model::infer_float(out.config, out.weights, g);
    CHECK(a.pre_activation == b.pre_activation);
    for (std::size_t k = 0; k < a.activations.size(); ++k) CHECK(a.activations[k] == b.activations[k]);
  }
}

TEST_CASE("invalid plans are rejected") {
  const auto c = unpruned();
  auto reject = [&](PruningPlan p) { CHECK_THROWS_AS(apply_pruning(c, p), PruningError); };
  reject({{{ActionKind::RemoveLayer, 0, {}}}, 0, 0});     // GraphConv1 would see 5 inputs
  reject({{{ActionKind::RemoveLayer, 7, {}}}, 0, 0});     // pooling layer
  reject({{{ActionKind::RemoveLayer, 9, {}}}, 0, 0});     // dense layer
  reject({{{ActionKind::RemoveLayer, 40, {}}}, 0, 0});
  reject({{{ActionKind::RemoveLayer, 3, {}}, {ActionKind::RemoveLayer, 3, {}}}, 0, 0});
  reject({{{ActionKind::MaskFeatures, 2, {1}}, {ActionKind::RemoveLayer, 2, {}}}, 0, 0});
  reject({{{ActionKind::MaskFeatures, 0, {32}}}, 0, 0});
  std::vector<int> all(32);
  for (int i = 0; i < 32; ++i) all[static_cast<std::size_t>(i)] = i;
  reject({{{ActionKind::MaskFeatures, 0, all}}, 0, 0});
  // GraphConv4 alone leaves 512 features feeding a 512-input layer: accepted.
  CHECK_NOTHROW(apply_pruning(c, PruningPlan{{{ActionKind::RemoveLayer, 4, {}}}, 0, 0}));
  // The head expects 256 features after pooling.
  reject({{{ActionKind::RemoveLayer, 5, {}}, {ActionKind::RemoveLayer, 6, {}}}, 0, 0});
  CHECK_THROWS_AS(auto_plan(table_profile(), c, 8), PruningError);
  CHECK_THROWS_AS(auto_plan(table_profile(), c, -1), DomainError);
  CHECK_THROWS_AS(auto_plan(table_profile(), c, 2, 1.0), DomainError);
  CHECK_THROWS_AS(avoidable_multiplications(table_profile(), model::preset_config(Variant::MaxTime), 1),
                  ShapeMismatchError);
}

TEST_CASE("every accepted random plan yields a valid model with the predicted savings") {
  gen::Rng rng(8);
  int accepted = 0;
  int rejected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = trial % 4 == 0 ? unpruned() : gen::small_config(rng);
    const auto plan = gen::plan(rng, c);
    model::ModelConfig out;
    try {
      out = apply_pruning(c, plan);
    } catch (const PruningError&) {
      ++rejected;
      continue;
    }
    ++accepted;
    CHECK_NOTHROW(out.validate());
    std::int64_t saved = 0;
    std::set<std::size_t> removed;
    for (const auto& a : plan.actions) {
      const auto& spec = c.layers[a.layer];
      if (a.kind == ActionKind::RemoveLayer) {
        removed.insert(a.layer);
        saved += (2LL * spec.d_in + 1) * spec.computed_outputs();
      } else {
        for (int f : a.features) saved += spec.is_computed(f) ? 2LL * spec.d_in + 1 : 0;
      }
    }
    CHECK(out.layers.size() == c.layers.size() - removed.size());
    // Pooling may change width but holds no parameters, and the head is untouched.
    CHECK(model::parameter_count(c).total - model::parameter_count(out).total == saved);
    auto copy = plan;
    compute_savings(copy, c);
    CHECK(copy.parameters_saved == saved);
  }
  CHECK(accepted > 100);
  CHECK(rejected > 10);
}

TEST_CASE("profile and plan files round-trip") {
  gen::Rng rng(9);
  const auto c = gen::small_config(rng);
  const model::Model m{c, model::random_weights(c, 9)};
  const auto graphs = gen::graphs(rng, 5, 20, 1, 20);
  const auto p = profile_sparsity(m, graphs, 0.7);
  const auto back = profile_from_json(profile_to_json(p));
  CHECK(back.theta == p.theta);
  CHECK(back.samples == p.samples);
  REQUIRE(back.layers.size() == p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    CHECK(back.layers[l].layer == p.layers[l].layer);
    CHECK(back.layers[l].d_in == p.layers[l].d_in);
    CHECK(back.layers[l].zero_probability == p.layers[l].zero_probability);
  }
  const auto plan = auto_plan(table_profile(), unpruned(), 4, 0.5);
  const auto pb = plan_from_json(plan_to_json(plan, unpruned()));
  CHECK(pb.actions == plan.actions);
  CHECK_THROWS_AS(plan_from_json("{}"), Error);
  CHECK_THROWS_AS(profile_from_json("[1"), Error);
}
