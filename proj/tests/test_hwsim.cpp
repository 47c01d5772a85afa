#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "doctest.h"

#include "gnnqec/errors.hpp"
#include "gnnqec/hwsim.hpp"
#include "support/generators.hpp"
#include "support/temp_dir.hpp"

using namespace gnnqec;
using namespace gnnqec::hwsim;
using model::Variant;

namespace {

model::ModelConfig max_time() { return model::preset_config(Variant::MaxTime); }
model::ModelConfig mean_time() { return model::preset_config(Variant::MeanTime); }

quant::QuantizedModel random_qmodel(const model::ModelConfig& c, std::uint64_t seed, int n_max,
                                    double scale = 0.05) {
  const model::Model m{c, model::random_weights(c, seed, scale, scale)};
  return quant::quantize_model(m, quant::QuantizationScheme::max_time(), n_max);
}

syndrome::SyndromeGraph graph_with(gen::Rng& rng, int n) {
  static const syndrome::CodeLayout layout(7);
  return gen::graph(rng, layout, n, n);
}

}  // namespace

TEST_CASE("max-time schedule at the worst case") {
  const auto hw = HardwareConfig::preset("max-time");
  const auto r = schedule(max_time(), 30, hw);
  const std::array<std::pair<const char*, std::int64_t>, 8> rows{{{"GraphConv0", 7},
                                                                  {"GraphConv1", 38},
                                                                  {"GraphConv2", 137},
                                                                  {"GMP", 2},
                                                                  {"Dense0", 10},
                                                                  {"Dense1", 6},
                                                                  {"Dense2", 3},
                                                                  {"DenseOut", 3}}};
  REQUIRE(r.layers.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CAPTURE(i);
    CHECK(r.layers[i].label == rows[i].first);
    CHECK(r.layers[i].cycles == rows[i].second);
  }
  CHECK(r.total_cycles == 206);
  CHECK(std::abs(r.latency_ns - 988.8) < 1e-9);
  CHECK(r.layers[5].compute_cycles == 4);
  CHECK(r.parameters == 148'577);
  CHECK(r.latency_ns < 1000.0);

  std::int64_t sum = 0;
  for (const auto& l : r.layers) {
    sum += l.cycles;
    CHECK(l.cycles == l.compute_cycles + l.aggregation_cycles + l.stall_cycles + l.drain_cycles);
    CHECK(l.utilization >= 0.0);
    CHECK(l.utilization <= 1.0);
  }
  CHECK(sum == r.total_cycles);
}

TEST_CASE("mean-time schedule at its largest accepted graph") {
  const auto hw = HardwareConfig::preset("mean-time");
  CHECK(hw.clock_ns == 5.0);
  CHECK(hw.n_max == 32);
  const auto r = schedule(mean_time(), 32, hw);
  CHECK(r.total_cycles == 891);
  CHECK(std::abs(r.latency_ns - 4455.0) < 1e-9);
}

TEST_CASE("schedule report serialisations agree") {
  const auto r = schedule(max_time(), 12, HardwareConfig::preset("max-time"));
  const auto j = r.to_json();
  CHECK(j.find("\"total_cycles\"") != std::string::npos);
  const auto csv = r.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') >= static_cast<long>(r.layers.size()) + 1);
}

TEST_CASE("dsp cost") {
  CHECK(dsp_cost(14, 17) == 1);
  CHECK(dsp_cost(1, 1) == 1);
  CHECK(dsp_cost(24, 24) == 1);
  CHECK(dsp_cost(25, 24) == 4);
  CHECK(dsp_cost(32, 32) == 4);
  CHECK(dsp_cost(33, 32) == 8);
  CHECK(dsp_cost(64, 64) == 16);
  CHECK_THROWS_AS(dsp_cost(0, 4), DomainError);
  gen::Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const int a = gen::uniform_int(rng, 1, 80);
    const int b = gen::uniform_int(rng, 1, 80);
    CHECK(dsp_cost(a, b) == dsp_cost(b, a));
    CHECK(dsp_cost(a, b) <= dsp_cost(a + 1, b));
  }
}

TEST_CASE("no layer issues more multiplies per cycle than the budget") {
  gen::Rng rng(2);
  const std::array<model::ModelConfig, 3> models{max_time(), mean_time(),
                                                 model::preset_config(Variant::Unpruned)};
  for (const auto& c : models) {
    for (int trial = 0; trial < 40; ++trial) {
      auto hw = HardwareConfig::preset("max-time");
      hw.dsp_budget = trial == 0 ? 8192 : gen::uniform_int(rng, 16, 12288);
      hw.n_max = 168;
      const int n = gen::uniform_int(rng, 1, 168);
      const auto r = schedule(c, n, hw);
      std::int64_t mults = 0;
      for (const auto& l : r.layers) {
        CHECK(l.peak_multiplies_per_cycle <= hw.dsp_budget);
        CHECK(l.cycles >= 1);
        mults += l.multiplies;
      }
      CHECK(mults == model::multiplication_count(c, n).total);
    }
  }
}

TEST_CASE("latency grows with node count") {
  for (const char* name : {"max-time", "mean-time"}) {
    const auto hw = HardwareConfig::preset(name);
    const auto c = model::preset_config(name);
    const auto curve = latency_curve(c, hw, 0, hw.n_max);
    REQUIRE(curve.size() == static_cast<std::size_t>(hw.n_max) + 1);
    CHECK(curve[0].cycles == 3);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      CHECK(curve[i].n == static_cast<int>(i));
      CHECK(curve[i].cycles >= curve[i - 1].cycles);
      CHECK(curve[i].latency_ns == static_cast<double>(curve[i].cycles) * hw.clock_ns);
    }
    CHECK(latency_cycles(c, 1, hw) < latency_cycles(c, hw.n_max, hw));
    const auto csv = latency_curve_csv(curve);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(curve.size()) + 1);
  }
  const auto hw = HardwareConfig::preset("max-time");
  CHECK_THROWS_AS(schedule(max_time(), 0, hw), DomainError);
  CHECK_THROWS_AS(schedule(max_time(), 31, hw), DomainError);
  CHECK_THROWS_AS(latency_curve(max_time(), hw, 0, 31), DomainError);
}

TEST_CASE("mean latency over node distributions") {
  const auto hw = HardwareConfig::preset("max-time");
  std::vector<double> at30(31, 0.0);
  at30[30] = 1.0;
  CHECK(std::abs(mean_latency(max_time(), hw, at30) - 988.8) < 1e-9);
  const std::vector<double> at0{1.0};
  CHECK(std::abs(mean_latency(max_time(), hw, at0) - 3 * 4.8) < 1e-12);

  // Weighted sum, recomputed from the curve.
  gen::Rng rng(3);
  std::vector<double> p(31);
  for (auto& x : p) x = gen::uniform_real(rng, 0.0, 1.0);
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= s * 1.25;
  double expect = 0.0;
  for (int n = 0; n <= 30; ++n) expect += p[static_cast<std::size_t>(n)] * latency_cycles(max_time(), n, hw) * 4.8;
  CHECK(std::abs(mean_latency(max_time(), hw, p) - expect) < 1e-9);

  CHECK_THROWS_AS(mean_latency(max_time(), hw, std::vector<double>{}), DomainError);
  CHECK_THROWS_AS(mean_latency(max_time(), hw, std::vector<double>(32, 0.0)), DomainError);
  CHECK_THROWS_AS(mean_latency(max_time(), hw, std::vector<double>{0.7, 0.7}), DomainError);
  CHECK_THROWS_AS(mean_latency(max_time(), hw, std::vector<double>{-0.1}), DomainError);
  CHECK_THROWS_AS(mean_latency(max_time(), hw, std::vector<double>{std::nan("")}), DomainError);
}

TEST_CASE("mean-time design is fast on typical noise") {
  const auto hw = HardwareConfig::preset("mean-time");
  const syndrome::CodeLayout layout(7);
  const auto batch = syndrome::sample_batch(layout, 1e-3, 20000, 42);
  const auto dist = node_distribution(batch.graphs, hw.n_max);
  REQUIRE(dist.size() == 33);
  double mass = 0.0;
  for (double x : dist) mass += x;
  CHECK(mass <= 1.0 + 1e-12);
  CHECK(mass > 0.999);
  const double mean = mean_latency(mean_time(), hw, dist);
  const double worst = latency_cycles(mean_time(), 32, hw) * hw.clock_ns;
  CHECK(mean < worst / 3.0);
  CHECK_THROWS_AS(node_distribution(std::vector<syndrome::SyndromeGraph>{}, 30), DomainError);
}

TEST_CASE("node distribution counts graphs by size") {
  gen::Rng rng(4);
  std::vector<syndrome::SyndromeGraph> gs;
  for (int n : {0, 0, 1, 3, 3, 3, 9, 40}) gs.push_back(graph_with(rng, n));
  const auto d = node_distribution(gs, 5);
  REQUIRE(d.size() == 6);
  CHECK(d[0] == 2.0 / 8);
  CHECK(d[1] == 1.0 / 8);
  CHECK(d[2] == 0.0);
  CHECK(d[3] == 3.0 / 8);
  CHECK(d[5] == 0.0);
}

TEST_CASE("bram packing of the max-time weights") {
  const auto hw = HardwareConfig::preset("max-time");
  const auto plan = bram_plan(max_time(), 14, 30, hw);
  CHECK(plan.brams_used == 1639);
  CHECK(plan.brams_used <= hw.bram_count);
  CHECK(plan.weights_per_address == 5);
  CHECK(plan.gmp_factor_count == 30);
  CHECK(plan.verify(max_time(), hw.dsp_budget).empty());
  for (const auto& g : plan.groups) CHECK(g.weights <= hw.dsp_budget);
  CHECK(plan.summary_json().find("1639") != std::string::npos);

  auto tiny = hw;
  tiny.dsp_budget = 5;
  tiny.bram_address_bits = 24;
  const auto t = bram_plan(max_time(), 14, 30, tiny);
  CHECK(t.brams_used == 1);
  CHECK(t.verify(max_time(), 5).empty());
}

TEST_CASE("bram packing stores exactly the computed weights") {
  gen::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = gen::small_config(rng);
    auto hw = HardwareConfig::preset("max-time");
    hw.dsp_budget = gen::uniform_int(rng, 1, 600);
    hw.bram_address_bits = 20;
    const auto plan = bram_plan(c, 14, gen::uniform_int(rng, 0, 40), hw);
    CHECK(plan.verify(c, hw.dsp_budget).empty());
    std::int64_t placed = 0;
    for (const auto& lp : plan.layers) {
      for (const auto& s : lp.w1) placed += s.bram >= 0;
      for (const auto& s : lp.w2) placed += s.bram >= 0;
    }
    std::int64_t weights = 0;
    for (const auto& g : plan.groups) {
      weights += g.weights;
      CHECK(g.weights <= hw.dsp_budget);
      CHECK(g.brams == (g.weights + 4) / 5);
    }
    CHECK(placed == weights);
    const auto counts = model::parameter_count(c);
    std::int64_t biases = 0;
    for (const auto& l : c.layers) {
      if (l.kind != model::LayerKind::GlobalMeanPool) biases += l.kind == model::LayerKind::Dense ? l.d_out : l.computed_outputs();
    }
    CHECK(placed == counts.total - biases);
  }
}

TEST_CASE("bram plan resource limits") {
  auto hw = HardwareConfig::preset("max-time");
  hw.bram_count = 100;
  CHECK_THROWS_AS(bram_plan(max_time(), 14, 30, hw), ResourceError);
  hw = HardwareConfig::preset("max-time");
  hw.bram_address_bits = 3;
  CHECK_THROWS_AS(bram_plan(max_time(), 14, 30, hw), ResourceError);
  hw = HardwareConfig::preset("max-time");
  CHECK_THROWS_AS(bram_plan(max_time(), 15, 30, hw), DomainError);
}

TEST_CASE("hardware validation") {
  auto hw = HardwareConfig::preset("max-time");
  CHECK_NOTHROW(hw.validate());
  hw.dsp_budget = 20000;
  CHECK_THROWS_AS(hw.validate(), ResourceError);
  hw.dsp_budget = 0;
  CHECK_THROWS_AS(hw.validate(), DomainError);
  hw = HardwareConfig::preset("max-time");
  hw.clock_ns = 0.0;
  CHECK_THROWS_AS(hw.validate(), DomainError);
  CHECK_THROWS_AS(HardwareConfig::preset("fastest"), DomainError);
}

TEST_CASE("hardware file round-trip") {
  auto hw = HardwareConfig::preset("mean-time");
  hw.dsp_budget = 4000;
  hw.calibration.drain_cycles = 5;
  const auto back = hardware_from_json(hardware_to_json(hw));
  CHECK(back.name == hw.name);
  CHECK(back.dsp_budget == 4000);
  CHECK(back.clock_ns == 5.0);
  CHECK(back.n_max == 32);
  CHECK(back.calibration == hw.calibration);
  const auto partial = hardware_from_json(R"({"dsp_budget": 1024})");
  CHECK(partial.dsp_budget == 1024);
  CHECK(partial.clock_ns == 4.8);
  CHECK(partial.n_max == 30);
  CHECK_THROWS_AS(hardware_from_json("[]"), MalformedFileError);
  CHECK_THROWS_AS(hardware_from_json(R"({"dsp_budget": "many"})"), MalformedFileError);
}

TEST_CASE("calibration file and override") {
  CHECK(builtin_calibration() == calibration_from_json(calibration_to_json(builtin_calibration())));
  CHECK(active_calibration() == builtin_calibration());

  TempDir dir("calib");
  auto c = builtin_calibration();
  c.drain_cycles = 4;
  {
    std::ofstream(dir.file("cal.json")) << calibration_to_json(c);
  }
  ::setenv("GNNQEC_CALIBRATION", dir.file("cal.json").c_str(), 1);
  CHECK(calibration_path() == dir.file("cal.json"));
  CHECK(active_calibration() == c);
  const auto hw = HardwareConfig::preset("max-time");
  CHECK(schedule(max_time(), 30, hw).total_cycles > 206);
  ::setenv("GNNQEC_CALIBRATION", dir.file("missing.json").c_str(), 1);
  CHECK_THROWS_AS(active_calibration(), Error);
  ::unsetenv("GNNQEC_CALIBRATION");
  CHECK(schedule(max_time(), 30, HardwareConfig::preset("max-time")).total_cycles == 206);
}

TEST_CASE("decode filters and short-circuits") {
  gen::Rng rng(6);
  const auto hw = HardwareConfig::preset("max-time");
  const auto qm = random_qmodel(max_time(), 6, 30);

  std::vector<syndrome::SyndromeGraph> big;
  for (int i = 0; i < 5; ++i) big.push_back(graph_with(rng, 31 + i));
  const std::vector<std::uint8_t> zeros(5, 0);
  const auto all_rejected = decode_pipeline(qm, hw, big, zeros);
  CHECK(all_rejected.rejected == 5);
  CHECK(all_rejected.error_rate() == 1.0);
  CHECK(all_rejected.rejected_fraction() == 1.0);
  CHECK(all_rejected.latency_histogram.empty());

  std::vector<syndrome::SyndromeGraph> gs;
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 200; ++i) {
    gs.push_back(graph_with(rng, gen::uniform_int(rng, 0, 30)));
    labels.push_back(gs.back().node_count() == 0 ? 0 : qm.infer(gs.back(), false).decision);
  }
  const auto r = decode_pipeline(qm, hw, gs, labels);
  CHECK(r.error_rate() == 0.0);
  CHECK(r.graphs == 200);
  CHECK(r.accepted + r.short_circuited + r.rejected == r.graphs);
  std::uint64_t timed = 0;
  for (const auto& [cyc, k] : r.latency_histogram) {
    timed += k;
    CHECK(cyc <= 206);
  }
  CHECK(timed == r.accepted + r.short_circuited);

  // empty (right), oversized (wrong), two accepted graphs with one label flipped
  std::vector<syndrome::SyndromeGraph> mixed{graph_with(rng, 0), graph_with(rng, 40), graph_with(rng, 5),
                                             graph_with(rng, 17)};
  const std::uint8_t d2 = qm.infer(mixed[2], false).decision;
  const std::uint8_t d3 = qm.infer(mixed[3], false).decision;
  const std::vector<std::uint8_t> mixed_labels{0, 0, d2, d3};
  const auto m = decode_pipeline(qm, hw, mixed, mixed_labels);
  CHECK(m.error_rate() == doctest::Approx(0.25));
  CHECK(m.short_circuited == 1);
  CHECK(m.rejected == 1);
  const std::vector<std::uint8_t> flipped{1, 0, static_cast<std::uint8_t>(1 - d2), d3};
  CHECK(decode_pipeline(qm, hw, mixed, flipped).error_rate() == doctest::Approx(0.75));

  const auto unlabeled = decode_pipeline(qm, hw, mixed);
  CHECK_THROWS_AS(unlabeled.error_rate(), DomainError);
  CHECK_THROWS_AS(decode_pipeline(qm, hw, mixed, std::vector<std::uint8_t>(3, 0)), DomainError);
  CHECK_THROWS_AS(decode_pipeline(random_qmodel(max_time(), 6, 20), hw, mixed), DomainError);
}

TEST_CASE("decode reports merge independently of order") {
  gen::Rng rng(7);
  const auto hw = HardwareConfig::preset("max-time");
  const auto qm = random_qmodel(max_time(), 7, 30);
  std::vector<syndrome::SyndromeGraph> gs;
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 120; ++i) {
    gs.push_back(graph_with(rng, gen::uniform_int(rng, 0, 36)));
    labels.push_back(static_cast<std::uint8_t>(rng() & 1));
  }
  const auto whole = decode_pipeline(qm, hw, gs, labels);
  CHECK(decode_pipeline(qm, hw, gs, labels).to_json() == whole.to_json());

  const std::span<const syndrome::SyndromeGraph> all(gs);
  const std::span<const std::uint8_t> lab(labels);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> cuts{0, 120};
    for (int k = 0; k < 3; ++k) cuts.push_back(static_cast<std::size_t>(gen::uniform_int(rng, 0, 120)));
    std::sort(cuts.begin(), cuts.end());
    std::vector<DecodeReport> parts;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      parts.push_back(decode_pipeline(qm, hw, all.subspan(cuts[k], cuts[k + 1] - cuts[k]),
                                      lab.subspan(cuts[k], cuts[k + 1] - cuts[k])));
    }
    std::shuffle(parts.begin(), parts.end(), rng);
    DecodeReport merged;
    for (const auto& p : parts) merged.merge(p);
    CHECK(merged.to_json() == whole.to_json());
  }
  DecodeReport unlabeled = decode_pipeline(qm, hw, all.subspan(0, 10));
  CHECK_THROWS_AS(unlabeled.merge(whole), DomainError);
}
