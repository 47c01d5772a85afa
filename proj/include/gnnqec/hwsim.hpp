#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gnnqec/model.hpp"
#include "gnnqec/quant.hpp"
#include "gnnqec/syndrome.hpp"

namespace gnnqec::hwsim {

// Frozen scheduler micro-parameters. The values are fixed by the cycle counts
// of the reference max-time design (n = 30, 8,192 multipliers).
struct Calibration {
  int version = 1;
  int drain_cycles = 2;          // D, after every GraphConv and Dense layer
  int aggregation_lead = 2;      // aggregation issued this many cycles early
  int neighbour_buffer = 32;     // K, worst-case neighbours fetched per node
  int pack_divisor = 2;          // pack nodes when per-node multiplies <= budget / divisor
  int gmp_cycles = 2;
  int short_circuit_cycles = 3;  // n = 0 passthrough

  friend bool operator==(const Calibration&, const Calibration&) = default;
};

Calibration builtin_calibration();
std::string calibration_to_json(const Calibration& c);
Calibration calibration_from_json(std::string_view json);

// GNNQEC_CALIBRATION when set, else the file shipped with the build.
std::string calibration_path();
// Loads calibration_path(). Falls back to the built-in values only when the
// default file is missing; an explicit override must exist.
Calibration active_calibration();

struct HardwareConfig {
  std::string name = "max-time";
  int dsp_budget = 8192;
  int physical_dsps = 12288;
  double clock_ns = 4.8;
  int bram_count = 2688;
  int bram_address_bits = 9;
  int word_bits = 72;
  int weights_per_address = 5;
  int n_max = 30;
  Calibration calibration;

  // max-time: 4.8 ns, n_max 30; mean-time: 5.0 ns, n_max 32.
  static HardwareConfig preset(std::string_view name);
  void validate() const;
};

std::string hardware_to_json(const HardwareConfig& hw);
// Missing fields take the max-time preset values.
HardwareConfig hardware_from_json(std::string_view json);

// DSP blocks per multiply of a bits_a x bits_b product.
int dsp_cost(int bits_a, int bits_b);

struct LayerSchedule {
  std::string label;
  model::LayerKind kind = model::LayerKind::GraphConv;
  std::string mode;  // packed / combined / split / fold / fixed
  std::int64_t compute_cycles = 0;
  std::int64_t aggregation_cycles = 0;
  std::int64_t stall_cycles = 0;
  std::int64_t drain_cycles = 0;
  std::int64_t cycles = 0;
  std::int64_t multiplies = 0;
  std::int64_t peak_multiplies_per_cycle = 0;
  double utilization = 0.0;  // multiplies / (cycles * budget)
};

struct ScheduleReport {
  std::string model;
  std::int64_t parameters = 0;
  int n = 0;
  int dsp_budget = 0;
  double clock_ns = 0.0;
  std::vector<LayerSchedule> layers;
  std::int64_t total_cycles = 0;
  double latency_ns = 0.0;

  std::string to_json() const;
  std::string to_csv() const;
};

// Precondition 1 <= n <= hw.n_max.
ScheduleReport schedule(const model::ModelConfig& config, int n, const HardwareConfig& hw);

// Latency in cycles of a graph with n nodes, the short-circuit constant at n = 0.
std::int64_t latency_cycles(const model::ModelConfig& config, int n, const HardwareConfig& hw);

struct LatencyPoint {
  int n = 0;
  std::int64_t cycles = 0;
  double latency_ns = 0.0;
};
std::vector<LatencyPoint> latency_curve(const model::ModelConfig& config, const HardwareConfig& hw,
                                        int n_first, int n_last);
std::string latency_curve_csv(std::span<const LatencyPoint> curve);

// Empirical P(n) for n in [0, n_max]; mass above n_max is left out.
std::vector<double> node_distribution(std::span<const syndrome::SyndromeGraph> graphs, int n_max);

// sum over n of P(n) * latency(n); P has at most n_max + 1 entries summing to <= 1.
double mean_latency(const model::ModelConfig& config, const HardwareConfig& hw,
                    std::span<const double> distribution);

struct WeightSlot {
  int bram = -1;  // -1: not stored (masked output)
  int address = -1;
  int slot = -1;
};

// One scheduled read: a group of at most dsp_budget weights fetched together.
struct ReadGroup {
  std::size_t layer = 0;
  int address = 0;
  int weights = 0;
  int brams = 0;
};

struct LayerPacking {
  std::string label;
  std::vector<WeightSlot> w1;  // row-major d_out x d_in
  std::vector<WeightSlot> w2;
};

struct BramPlan {
  int brams_used = 0;
  int weights_per_address = 0;
  int addresses_used = 0;
  int gmp_base_address = 0;
  int gmp_factor_count = 0;
  std::vector<LayerPacking> layers;  // parallel to the model layers
  std::vector<ReadGroup> groups;

  // Empty when every group reads one address per BRAM, no slot is reused and
  // every computed weight is placed.
  std::vector<std::string> verify(const model::ModelConfig& config, int dsp_budget) const;
  std::string summary_json() const;
};

BramPlan bram_plan(const quant::QuantizedModel& qmodel, const HardwareConfig& hw);
BramPlan bram_plan(const model::ModelConfig& config, int weight_bits, int n_factors,
                   const HardwareConfig& hw);

struct DecodeReport {
  std::uint64_t graphs = 0;
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t short_circuited = 0;
  std::uint64_t positive_decisions = 0;
  bool labeled = false;
  std::uint64_t correct = 0;
  std::map<std::int64_t, std::uint64_t> latency_histogram;  // cycles -> graphs
  double clock_ns = 0.0;
  int n_max = 0;

  // 1 - correct / graphs (rejected graphs count as wrong); requires labels.
  double error_rate() const;
  double rejected_fraction() const;
  double mean_latency_ns() const;
  void merge(const DecodeReport& other);
  std::string to_json() const;
};

// Per graph: n = 0 short-circuits to "no logical error", n > n_max is
// rejected, every other graph runs the integer engine.
DecodeReport decode_pipeline(const quant::QuantizedModel& qmodel, const HardwareConfig& hw,
                             std::span<const syndrome::SyndromeGraph> graphs,
                             std::optional<std::span<const std::uint8_t>> labels = std::nullopt);

}  // namespace gnnqec::hwsim
