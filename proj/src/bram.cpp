#include <algorithm>
#include <set>
#include <tuple>

#include "json.hpp"

#include "gnnqec/errors.hpp"
#include "gnnqec/hwsim.hpp"

namespace gnnqec::hwsim {

using model::LayerKind;

namespace {

struct Packer {
  BramPlan& plan;
  std::size_t layer;
  int budget;
  int wpa;
  int position = 0;  // within the open group

  void open() {
    plan.groups.push_back({layer, plan.addresses_used++, 0, 0});
    position = 0;
  }
  WeightSlot place() {
    if (plan.groups.empty() || plan.groups.back().layer != layer || position == budget) open();
    auto& g = plan.groups.back();
    const WeightSlot s{position / wpa, g.address, position % wpa};
    ++position;
    ++g.weights;
    g.brams = std::max(g.brams, s.bram + 1);
    plan.brams_used = std::max(plan.brams_used, g.brams);
    return s;
  }
  // Start a fresh group even if the open one has room.
  void cut() { position = budget; }
};

}  // namespace

BramPlan bram_plan(const model::ModelConfig& config, int weight_bits, int n_factors,
                   const HardwareConfig& hw) {
  hw.validate();
  config.validate();
  if (weight_bits < 1) throw DomainError("weight width must be >= 1");
  if (static_cast<long>(weight_bits) * hw.weights_per_address > hw.word_bits) {
    throw DomainError(std::to_string(hw.weights_per_address) + " weights of " + std::to_string(weight_bits) +
                      " bits do not fit a " + std::to_string(hw.word_bits) + "-bit word");
  }
  if (n_factors < 0) throw DomainError("factor count must be >= 0");
  BramPlan plan;
  plan.weights_per_address = hw.weights_per_address;
  const std::int64_t budget = hw.dsp_budget;

  for (std::size_t li = 0; li < config.layers.size(); ++li) {
    const auto& spec = config.layers[li];
    LayerPacking lp;
    lp.label = spec.label;
    if (spec.kind == LayerKind::GlobalMeanPool) {
      plan.layers.push_back(std::move(lp));
      continue;
    }
    const std::size_t cells = static_cast<std::size_t>(spec.d_out) * spec.d_in;
    lp.w1.assign(cells, WeightSlot{});
    if (spec.kind == LayerKind::GraphConv) lp.w2.assign(cells, WeightSlot{});
    Packer p{plan, li, hw.dsp_budget, hw.weights_per_address};
    auto stream = [&](std::vector<WeightSlot>& slots) {
      for (int o = 0; o < spec.d_out; ++o) {
        if (!spec.is_computed(o)) continue;
        for (int k = 0; k < spec.d_in; ++k) slots[static_cast<std::size_t>(o) * spec.d_in + k] = p.place();
      }
    };
    stream(lp.w1);
    if (spec.kind == LayerKind::GraphConv) {
      const std::int64_t per_node = 2LL * spec.d_in * spec.computed_outputs();
      if (per_node > budget) p.cut();  // split mode reads W1 and W2 in separate cycles
      stream(lp.w2);
    }
    plan.layers.push_back(std::move(lp));
  }
  plan.gmp_base_address = plan.addresses_used;
  plan.gmp_factor_count = n_factors;
  plan.addresses_used += n_factors;
  if (n_factors > 0) plan.brams_used = std::max(plan.brams_used, 1);

  if (plan.brams_used > hw.bram_count) {
    throw ResourceError("plan needs " + std::to_string(plan.brams_used) + " BRAMs, device has " +
                        std::to_string(hw.bram_count));
  }
  if (plan.addresses_used > (1L << hw.bram_address_bits)) {
    throw ResourceError("plan needs " + std::to_string(plan.addresses_used) + " addresses, BRAM depth is " +
                        std::to_string(1L << hw.bram_address_bits));
  }
  return plan;
}

BramPlan bram_plan(const quant::QuantizedModel& qmodel, const HardwareConfig& hw) {
  return bram_plan(qmodel.config(), qmodel.scheme().weights.total_bits(), qmodel.n_max(), hw);
}

std::vector<std::string> BramPlan::verify(const model::ModelConfig& config, int dsp_budget) const {
  std::vector<std::string> problems;
  if (layers.size() != config.layers.size()) {
    problems.push_back("plan covers a different number of layers");
    return problems;
  }
  std::set<std::tuple<int, int, int>> used;
  std::vector<int> at_address(static_cast<std::size_t>(addresses_used), 0);
  for (int f = 0; f < gmp_factor_count; ++f) used.insert({0, gmp_base_address + f, 0});

  auto check = [&](const WeightSlot& s, bool computed, const std::string& where) {
    if (!computed) {
      if (s.bram != -1) problems.push_back(where + ": masked weight was placed");
      return;
    }
    if (s.bram < 0 || s.bram >= brams_used || s.slot < 0 || s.slot >= weights_per_address ||
        s.address < 0 || s.address >= gmp_base_address) {
      problems.push_back(where + ": weight not placed inside the plan");
      return;
    }
    if (!used.insert({s.bram, s.address, s.slot}).second) problems.push_back(where + ": slot reused");
    ++at_address[static_cast<std::size_t>(s.address)];
  };
  for (std::size_t li = 0; li < config.layers.size(); ++li) {
    const auto& spec = config.layers[li];
    const auto& lp = layers[li];
    if (spec.kind == LayerKind::GlobalMeanPool) continue;
    const std::size_t cells = static_cast<std::size_t>(spec.d_out) * spec.d_in;
    const bool conv = spec.kind == LayerKind::GraphConv;
    if (lp.w1.size() != cells || lp.w2.size() != (conv ? cells : 0)) {
      problems.push_back(spec.label + ": packing map has the wrong size");
      continue;
    }
    for (std::size_t e = 0; e < cells; ++e) {
      const bool on = spec.is_computed(static_cast<int>(e / static_cast<std::size_t>(spec.d_in)));
      check(lp.w1[e], on, spec.label + " W1");
      if (conv) check(lp.w2[e], on, spec.label + " W2");
    }
  }
  std::set<int> group_addresses;
  for (const auto& g : groups) {
    const std::string where = "group at address " + std::to_string(g.address);
    if (!group_addresses.insert(g.address).second) problems.push_back(where + ": address shared by two groups");
    if (g.weights > dsp_budget) problems.push_back(where + ": more weights than multipliers");
    if (g.address < 0 || g.address >= gmp_base_address) {
      problems.push_back(where + ": outside the weight region");
      continue;
    }
    if (at_address[static_cast<std::size_t>(g.address)] != g.weights) {
      problems.push_back(where + ": stored weights differ from the group size");
    }
    const int brams = (g.weights + weights_per_address - 1) / weights_per_address;
    if (g.brams != brams) problems.push_back(where + ": touches more BRAMs than needed");
  }
  if (static_cast<int>(group_addresses.size()) != gmp_base_address) {
    problems.push_back("weight addresses without a read group");
  }
  return problems;
}

std::string BramPlan::summary_json() const {
  nlohmann::ordered_json j;
  j["format"] = "gnnqec-bram-plan";
  j["brams_used"] = brams_used;
  j["weights_per_address"] = weights_per_address;
  j["addresses_used"] = addresses_used;
  j["gmp_base_address"] = gmp_base_address;
  j["gmp_factor_count"] = gmp_factor_count;
  auto gs = nlohmann::ordered_json::array();
  for (const auto& g : groups) {
    nlohmann::ordered_json e;
    e["layer"] = layers.at(g.layer).label;
    e["address"] = g.address;
    e["weights"] = g.weights;
    e["brams"] = g.brams;
    gs.push_back(std::move(e));
  }
  j["read_groups"] = std::move(gs);
  return j.dump(2) + "\n";
}

}  // namespace gnnqec::hwsim
