#include "gnnqec/hwsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "gnnqec/errors.hpp"
#include "gnnqec/text.hpp"

namespace gnnqec::hwsim {

using model::LayerKind;
using ojson = nlohmann::ordered_json;

HardwareConfig HardwareConfig::preset(std::string_view name) {
  HardwareConfig hw;
  hw.calibration = active_calibration();
  if (name == "max-time" || name == "max-time-optimized") {
    hw.name = "max-time";
    hw.clock_ns = 4.8;
    hw.n_max = 30;
  } else if (name == "mean-time" || name == "mean-time-optimized") {
    hw.name = "mean-time";
    hw.clock_ns = 5.0;
    hw.n_max = 32;
  } else {
    throw DomainError("unknown hardware preset '" + std::string(name) + "'");
  }
  return hw;
}

void HardwareConfig::validate() const {
  if (dsp_budget < 1) throw DomainError("dsp_budget must be >= 1");
  if (physical_dsps < dsp_budget) {
    throw ResourceError("dsp_budget " + std::to_string(dsp_budget) + " exceeds the " +
                        std::to_string(physical_dsps) + " physical DSPs");
  }
  if (!(clock_ns > 0.0) || !std::isfinite(clock_ns)) throw DomainError("clock period must be > 0");
  if (bram_count < 1) throw DomainError("bram_count must be >= 1");
  if (bram_address_bits < 1 || bram_address_bits > 24) throw DomainError("bram_address_bits must lie in [1, 24]");
  if (word_bits < 1) throw DomainError("word_bits must be >= 1");
  if (weights_per_address < 1) throw DomainError("weights_per_address must be >= 1");
  if (n_max < 1) throw DomainError("n_max must be >= 1");
}

std::string hardware_to_json(const HardwareConfig& hw) {
  ojson j;
  j["format"] = "gnnqec-hardware";
  j["name"] = hw.name;
  j["dsp_budget"] = hw.dsp_budget;
  j["physical_dsps"] = hw.physical_dsps;
  j["clock_ns"] = hw.clock_ns;
  j["bram_count"] = hw.bram_count;
  j["bram_address_bits"] = hw.bram_address_bits;
  j["word_bits"] = hw.word_bits;
  j["weights_per_address"] = hw.weights_per_address;
  j["n_max"] = hw.n_max;
  j["drain_cycles"] = hw.calibration.drain_cycles;
  j["aggregation_lead"] = hw.calibration.aggregation_lead;
  j["neighbour_buffer"] = hw.calibration.neighbour_buffer;
  j["pack_divisor"] = hw.calibration.pack_divisor;
  j["gmp_cycles"] = hw.calibration.gmp_cycles;
  j["short_circuit_cycles"] = hw.calibration.short_circuit_cycles;
  return j.dump(2) + "\n";
}

HardwareConfig hardware_from_json(std::string_view json) {
  HardwareConfig hw;
  try {
    const auto j = nlohmann::json::parse(json);
    if (!j.is_object()) throw MalformedFileError("hardware config must be a JSON object");
    hw = HardwareConfig::preset(j.value("name", std::string("max-time")) == "mean-time" ? "mean-time" : "max-time");
    hw.name = j.value("name", hw.name);
    hw.dsp_budget = j.value("dsp_budget", hw.dsp_budget);
    hw.physical_dsps = j.value("physical_dsps", hw.physical_dsps);
    hw.clock_ns = j.value("clock_ns", hw.clock_ns);
    hw.bram_count = j.value("bram_count", hw.bram_count);
    hw.bram_address_bits = j.value("bram_address_bits", hw.bram_address_bits);
    hw.word_bits = j.value("word_bits", hw.word_bits);
    hw.weights_per_address = j.value("weights_per_address", hw.weights_per_address);
    hw.n_max = j.value("n_max", hw.n_max);
    auto& c = hw.calibration;
    c.drain_cycles = j.value("drain_cycles", c.drain_cycles);
    c.aggregation_lead = j.value("aggregation_lead", c.aggregation_lead);
    c.neighbour_buffer = j.value("neighbour_buffer", c.neighbour_buffer);
    c.pack_divisor = j.value("pack_divisor", c.pack_divisor);
    c.gmp_cycles = j.value("gmp_cycles", c.gmp_cycles);
    c.short_circuit_cycles = j.value("short_circuit_cycles", c.short_circuit_cycles);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(std::string("hardware config: ") + e.what());
  }
  if (hw.calibration.neighbour_buffer < 1 || hw.calibration.pack_divisor < 1) {
    throw MalformedFileError("hardware config: neighbour_buffer and pack_divisor must be >= 1");
  }
  hw.validate();
  return hw;
}

int dsp_cost(int bits_a, int bits_b) {
  if (bits_a < 1 || bits_b < 1) throw DomainError("operand widths must be >= 1");
  if (bits_a + bits_b <= 48) return 1;
  if (bits_a <= 32 && bits_b <= 32) return 4;
  // wider operands tile into 32x32 blocks of four DSPs each
  return 4 * ((bits_a + 31) / 32) * ((bits_b + 31) / 32);
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

LayerSchedule schedule_graph_conv(const model::LayerSpec& spec, std::int64_t n,
                                  const HardwareConfig& hw) {
  const auto& cal = hw.calibration;
  const std::int64_t budget = hw.dsp_budget;
  const std::int64_t u = spec.computed_outputs();
  const std::int64_t per_node = 2 * spec.d_in * u;
  LayerSchedule s;
  s.label = spec.label;
  s.kind = spec.kind;
  s.multiplies = per_node * n;

  std::int64_t self_phase = 0;
  bool split = false;
  if (u == 0) {
    s.mode = "empty";
  } else if (per_node * cal.pack_divisor <= budget) {
    // several nodes share one cycle
    s.mode = "packed";
    const std::int64_t per_cycle = budget / per_node;
    s.compute_cycles = ceil_div(n, per_cycle);
    s.peak_multiplies_per_cycle = std::min(n, per_cycle) * per_node;
  } else if (per_node <= budget) {
    s.mode = "combined";
    s.compute_cycles = n;
    s.peak_multiplies_per_cycle = per_node;
  } else {
    // W1 x_i first, then W2 over the aggregate, each folded over the budget
    s.mode = "split";
    split = true;
    self_phase = ceil_div(spec.d_in * u, budget);
    s.compute_cycles = n * 2 * self_phase;
    s.peak_multiplies_per_cycle = std::min<std::int64_t>(spec.d_in * u, budget);
  }

  const std::int64_t fetch = static_cast<std::int64_t>(cal.neighbour_buffer) * spec.d_in;
  if (fetch <= budget) {
    const std::int64_t per_cycle = budget / fetch;
    s.aggregation_cycles = ceil_div(n, per_cycle);
    s.peak_multiplies_per_cycle = std::max(s.peak_multiplies_per_cycle, std::min(n, per_cycle) * fetch);
  } else {
    s.aggregation_cycles = n * ceil_div(fetch, budget);
    s.peak_multiplies_per_cycle = std::max(s.peak_multiplies_per_cycle, budget);
  }
  // The next batch's aggregation is issued `lead` cycles early; only the self
  // phase of a split layer can hide it.
  s.stall_cycles = split ? std::max<std::int64_t>(0, cal.aggregation_lead - self_phase)
                         : cal.aggregation_lead;
  s.drain_cycles = cal.drain_cycles;
  s.cycles = s.compute_cycles + s.aggregation_cycles + s.stall_cycles + s.drain_cycles;
  return s;
}

ScheduleReport schedule_unchecked(const model::ModelConfig& config, int n, const HardwareConfig& hw) {
  ScheduleReport r;
  r.model = model::to_string(config.variant);
  r.parameters = model::parameter_count(config).total;
  r.n = n;
  r.dsp_budget = hw.dsp_budget;
  r.clock_ns = hw.clock_ns;
  const std::int64_t budget = hw.dsp_budget;
  for (const auto& spec : config.layers) {
    LayerSchedule s;
    switch (spec.kind) {
      case LayerKind::GraphConv:
        s = schedule_graph_conv(spec, n, hw);
        break;
      case LayerKind::GlobalMeanPool:
        s.label = spec.label;
        s.kind = spec.kind;
        s.mode = "fixed";
        s.compute_cycles = hw.calibration.gmp_cycles;
        s.cycles = s.compute_cycles;
        s.multiplies = spec.d_out;
        s.peak_multiplies_per_cycle = std::min<std::int64_t>(spec.d_out, budget);
        break;
      case LayerKind::Dense: {
        s.label = spec.label;
        s.kind = spec.kind;
        s.mode = "fold";
        const std::int64_t total = static_cast<std::int64_t>(spec.d_in) * spec.d_out;
        s.compute_cycles = ceil_div(total, budget);
        s.drain_cycles = hw.calibration.drain_cycles;
        s.cycles = s.compute_cycles + s.drain_cycles;
        s.multiplies = total;
        s.peak_multiplies_per_cycle = std::min(total, budget);
        break;
      }
    }
    if (s.cycles > 0) {
      s.utilization = static_cast<double>(s.multiplies) / (static_cast<double>(s.cycles) * static_cast<double>(budget));
    }
    r.total_cycles += s.cycles;
    r.layers.push_back(std::move(s));
  }
  r.latency_ns = static_cast<double>(r.total_cycles) * hw.clock_ns;
  return r;
}

}  // namespace

ScheduleReport schedule(const model::ModelConfig& config, int n, const HardwareConfig& hw) {
  hw.validate();
  config.validate();
  if (n < 1 || n > hw.n_max) {
    throw DomainError("node count " + std::to_string(n) + " outside [1, " + std::to_string(hw.n_max) + "]");
  }
  return schedule_unchecked(config, n, hw);
}

std::int64_t latency_cycles(const model::ModelConfig& config, int n, const HardwareConfig& hw) {
  if (n == 0) return hw.calibration.short_circuit_cycles;
  return schedule(config, n, hw).total_cycles;
}

std::string ScheduleReport::to_json() const {
  ojson j;
  j["format"] = "gnnqec-schedule";
  j["model"] = model;
  j["parameters"] = parameters;
  j["n"] = n;
  j["dsp_budget"] = dsp_budget;
  j["clock_ns"] = clock_ns;
  auto rows = ojson::array();
  for (const auto& l : layers) {
    ojson e;
    e["label"] = l.label;
    e["kind"] = model::to_string(l.kind);
    e["mode"] = l.mode;
    e["compute_cycles"] = l.compute_cycles;
    e["aggregation_cycles"] = l.aggregation_cycles;
    e["stall_cycles"] = l.stall_cycles;
    e["drain_cycles"] = l.drain_cycles;
    e["cycles"] = l.cycles;
    e["multiplies"] = l.multiplies;
    e["peak_multiplies_per_cycle"] = l.peak_multiplies_per_cycle;
    e["utilization"] = l.utilization;
    rows.push_back(std::move(e));
  }
  j["layers"] = std::move(rows);
  j["total_cycles"] = total_cycles;
  j["latency_ns"] = latency_ns;
  return j.dump(2) + "\n";
}

std::string ScheduleReport::to_csv() const {
  std::ostringstream out;
  out << "layer,kind,mode,compute_cycles,aggregation_cycles,stall_cycles,drain_cycles,cycles,"
         "multiplies,utilization,latency_ns\n";
  std::int64_t mults = 0;
  for (const auto& l : layers) {
    out << l.label << ',' << model::to_string(l.kind) << ',' << l.mode << ',' << l.compute_cycles
        << ',' << l.aggregation_cycles << ',' << l.stall_cycles << ',' << l.drain_cycles << ','
        << l.cycles << ',' << l.multiplies << ',' << text::format_double(l.utilization) << ','
        << text::format_double(static_cast<double>(l.cycles) * clock_ns) << '\n';
    mults += l.multiplies;
  }
  out << "total,,,,,,," << total_cycles << ',' << mults << ",," << text::format_double(latency_ns) << '\n';
  return out.str();
}

std::vector<LatencyPoint> latency_curve(const model::ModelConfig& config, const HardwareConfig& hw,
                                        int n_first, int n_last) {
  if (n_first < 0 || n_last > hw.n_max || n_first > n_last) {
    throw DomainError("latency range must lie within [0, " + std::to_string(hw.n_max) + "]");
  }
  std::vector<LatencyPoint> curve;
  for (int n = n_first; n <= n_last; ++n) {
    const auto cycles = latency_cycles(config, n, hw);
    curve.push_back({n, cycles, static_cast<double>(cycles) * hw.clock_ns});
  }
  return curve;
}

std::string latency_curve_csv(std::span<const LatencyPoint> curve) {
  std::string out = "n,cycles,latency_ns\n";
  for (const auto& p : curve) {
    out += std::to_string(p.n) + ',' + std::to_string(p.cycles) + ',' + text::format_double(p.latency_ns) + '\n';
  }
  return out;
}

std::vector<double> node_distribution(std::span<const syndrome::SyndromeGraph> graphs, int n_max) {
  if (graphs.empty()) throw DomainError("node distribution needs a non-empty batch");
  if (n_max < 0) throw DomainError("n_max must be >= 0");
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(n_max) + 1, 0);
  for (const auto& g : graphs) {
    if (g.node_count() <= static_cast<std::size_t>(n_max)) ++counts[g.node_count()];
  }
  std::vector<double> p;
  for (auto c : counts) p.push_back(static_cast<double>(c) / static_cast<double>(graphs.size()));
  return p;
}

double mean_latency(const model::ModelConfig& config, const HardwareConfig& hw,
                    std::span<const double> distribution) {
  if (distribution.empty()) throw DomainError("node distribution is empty");
  if (distribution.size() > static_cast<std::size_t>(hw.n_max) + 1) {
    throw DomainError("node distribution extends beyond n_max = " + std::to_string(hw.n_max));
  }
  double mass = 0.0;
  for (double p : distribution) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("node distribution entries must lie in [0, 1]");
    mass += p;
  }
  if (mass > 1.0 + 1e-9) throw DomainError("node distribution sums to more than 1");
  double total = 0.0;
  for (std::size_t n = 0; n < distribution.size(); ++n) {
    if (distribution[n] == 0.0) continue;
    total += distribution[n] * static_cast<double>(latency_cycles(config, static_cast<int>(n), hw));
  }
  return total * hw.clock_ns;
}

}  // namespace gnnqec::hwsim
