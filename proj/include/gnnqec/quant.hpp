#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gnnqec/model.hpp"
#include "gnnqec/syndrome.hpp"

namespace gnnqec::quant {

// Signed Qi.f fixed point: i integer bits (sign included), f fractional bits.
struct FixedPointFormat {
  int integer_bits = 1;
  int fractional_bits = 0;

  constexpr int total_bits() const noexcept { return integer_bits + fractional_bits; }
  std::int64_t max_code() const noexcept { return (std::int64_t{1} << (total_bits() - 1)) - 1; }
  std::int64_t min_code() const noexcept { return -(std::int64_t{1} << (total_bits() - 1)); }
  double ulp() const noexcept;
  double max_value() const noexcept { return static_cast<double>(max_code()) * ulp(); }

  // Throws DomainError unless 2 <= total <= 32, integer_bits >= 1, fractional_bits >= 0.
  void validate() const;
  std::string to_string() const;             // "Q4.10"
  static FixedPointFormat parse(std::string_view text);

  friend bool operator==(const FixedPointFormat&, const FixedPointFormat&) = default;
};

// Round half away from zero to a multiple of 2^-f, then saturate.
std::int64_t quantize_value(double x, const FixedPointFormat& fmt);
double dequantize(std::int64_t code, const FixedPointFormat& fmt);

// Arithmetic right shift by `shift` bits rounding half away from zero.
std::int64_t shift_round(std::int64_t value, int shift);
std::int64_t saturate(std::int64_t code, const FixedPointFormat& fmt);

struct QuantizationScheme {
  std::string name = "custom";
  FixedPointFormat weights{4, 10};
  FixedPointFormat activations{12, 5};
  FixedPointFormat biases{1, 4};
  int accumulator_bits = 48;

  static QuantizationScheme max_time();   // W Q4.10, A Q12.5, B Q1.4
  static QuantizationScheme mean_time();  // W Q4.10, A Q18.5, B Q1.4
  static QuantizationScheme preset(std::string_view name);
  void validate() const;

  friend bool operator==(const QuantizationScheme&, const QuantizationScheme&) = default;
};

// Integer codes of one layer. Matrices are row-major d_out x d_in.
struct QuantizedLayer {
  std::vector<std::int32_t> w1;
  std::vector<std::int32_t> w2;
  std::vector<std::int32_t> bias;

  friend bool operator==(const QuantizedLayer&, const QuantizedLayer&) = default;
};

struct FixedTrace {
  // Per layer: row-major codes, `rows[l]` rows of d_out entries, in the
  // activation format.
  std::vector<std::vector<std::int32_t>> activations;
  std::vector<int> rows;
  // Final accumulator in Q(.weights.f + activations.f).
  std::int64_t pre_activation = 0;
  int pre_fraction_bits = 0;
  // pre_activation >= 0 means logical error; equivalent to sigmoid >= 0.5.
  bool decision = false;
};

class QuantizedModel {
 public:
  QuantizedModel() = default;
  // Takes already-quantized codes; validates ranges, shapes and the
  // accumulator width.
  QuantizedModel(model::Model source, QuantizationScheme scheme,
                 std::vector<QuantizedLayer> layers, std::vector<std::int32_t> gmp_factors);

  const model::ModelConfig& config() const noexcept { return source_.config; }
  const model::Model& source() const noexcept { return source_; }
  const QuantizationScheme& scheme() const noexcept { return scheme_; }
  const std::vector<QuantizedLayer>& layers() const noexcept { return layers_; }
  // Entry n-1 holds 1/n in the weight format.
  const std::vector<std::int32_t>& gmp_factors() const noexcept { return gmp_factors_; }
  int n_max() const noexcept { return static_cast<int>(gmp_factors_.size()); }
  // Worst-case accumulator width over all layers at this n_max.
  int required_accumulator_bits() const noexcept { return required_bits_; }

  FixedTrace infer(const syndrome::SyndromeGraph& graph, bool record_trace = true) const;

  friend bool operator==(const QuantizedModel& a, const QuantizedModel& b) {
    return a.source_.config.layers == b.source_.config.layers &&
           a.source_.weights == b.source_.weights && a.scheme_ == b.scheme_ &&
           a.layers_ == b.layers_ && a.gmp_factors_ == b.gmp_factors_;
  }

 private:
  struct Kernel {
    std::vector<int> outputs;            // computed output features
    std::vector<std::int32_t> w1t;       // d_in x outputs.size(), column-major per output
    std::vector<std::int32_t> w2t;
    std::vector<std::int64_t> bias_acc;  // bias aligned to the accumulator scale
  };

  template <typename Acc>
  FixedTrace run(const syndrome::SyndromeGraph& graph, bool record_trace) const;

  model::Model source_;
  QuantizationScheme scheme_;
  std::vector<QuantizedLayer> layers_;
  std::vector<std::int32_t> gmp_factors_;
  std::vector<Kernel> kernels_;
  int required_bits_ = 0;
};

QuantizedModel quantize_model(const model::Model& model, const QuantizationScheme& scheme,
                              int n_max);

// Precondition: 1 <= n <= qmodel.n_max(); otherwise DomainError.
FixedTrace infer_fixed(const QuantizedModel& qmodel, const syndrome::SyndromeGraph& graph);

// Which parts of the network are quantized. Full uses the integer engine; the
// single-component modes emulate the chosen rounding in double precision and
// keep everything else in floating point.
enum class QuantMode { Full, WeightsOnly, ActivationsOnly, BiasesOnly };
const char* to_string(QuantMode mode);
QuantMode parse_quant_mode(std::string_view text);

struct Emulated {
  std::vector<model::Matrix> activations;
  double pre_activation = 0.0;
};
// Double-precision evaluation with the rounding selected by `mode`. For Full
// with the preset schemes every intermediate is exactly representable, so the
// result equals the integer engine bit for bit.
Emulated infer_emulated(const QuantizedModel& qmodel, const syndrome::SyndromeGraph& graph,
                        QuantMode mode);

// Worst-case |quantized - float| per activation entry and for the final
// pre-activation, propagated layer by layer from the rounding error of every
// weight, bias, edge weight and requantization (saturation included).
struct ErrorBound {
  std::vector<model::Matrix> activations;
  double pre_activation = 0.0;
};
ErrorBound analytic_error_bound(const QuantizedModel& qmodel, const syndrome::SyndromeGraph& graph,
                                const model::InferenceTrace& reference,
                                QuantMode mode = QuantMode::Full);

struct LayerErrorStats {
  std::string label;
  double max_abs_error = 0.0;
  double mean_abs_error = 0.0;
  double max_bound = 0.0;
  std::uint64_t bound_violations = 0;
};

struct QuantizationErrorReport {
  QuantMode mode = QuantMode::Full;
  std::string weight_format;      // "float" when the mode leaves weights alone
  std::string activation_format;
  std::string bias_format;
  std::uint64_t graphs = 0;
  std::vector<LayerErrorStats> layers;
  double max_pre_activation_error = 0.0;
  std::uint64_t decision_flips = 0;
  // Flips where |float pre-activation| exceeded the analytic bound; zero for a
  // sound bound.
  std::uint64_t unexplained_flips = 0;
};

QuantizationErrorReport quantization_error_report(const QuantizedModel& qmodel,
                                                  std::span<const syndrome::SyndromeGraph> graphs,
                                                  QuantMode mode = QuantMode::Full);

// Quantized model file: the model file plus "scheme", "codes" and "gmp_factors".
void save_quantized(const std::string& path, const QuantizedModel& qmodel);
QuantizedModel load_quantized(const std::string& path);
std::string quantized_to_json(const QuantizedModel& qmodel);
QuantizedModel quantized_from_json(std::string_view json);

}  // namespace gnnqec::quant
