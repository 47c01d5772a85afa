#include "json.hpp"

#include "gnnqec/errors.hpp"
#include "gnnqec/hwsim.hpp"

namespace gnnqec::hwsim {

double DecodeReport::error_rate() const {
  if (!labeled) throw DomainError("error rate needs labels");
  if (graphs == 0) return 0.0;
  return 1.0 - static_cast<double>(correct) / static_cast<double>(graphs);
}

double DecodeReport::rejected_fraction() const {
  return graphs == 0 ? 0.0 : static_cast<double>(rejected) / static_cast<double>(graphs);
}

double DecodeReport::mean_latency_ns() const {
  std::uint64_t count = 0;
  double cycles = 0.0;
  for (const auto& [c, k] : latency_histogram) {
    cycles += static_cast<double>(c) * static_cast<double>(k);
    count += k;
  }
  return count == 0 ? 0.0 : cycles / static_cast<double>(count) * clock_ns;
}

void DecodeReport::merge(const DecodeReport& other) {
  if (other.graphs == 0) return;
  if (graphs == 0) {
    labeled = other.labeled;
    clock_ns = other.clock_ns;
    n_max = other.n_max;
  } else if (labeled != other.labeled) {
    throw DomainError("cannot merge labeled and unlabeled decode reports");
  }
  graphs += other.graphs;
  accepted += other.accepted;
  rejected += other.rejected;
  short_circuited += other.short_circuited;
  positive_decisions += other.positive_decisions;
  correct += other.correct;
  for (const auto& [c, k] : other.latency_histogram) latency_histogram[c] += k;
}

std::string DecodeReport::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "gnnqec-decode-report";
  j["n_max"] = n_max;
  j["clock_ns"] = clock_ns;
  j["graphs"] = graphs;
  j["accepted"] = accepted;
  j["rejected"] = rejected;
  j["short_circuited"] = short_circuited;
  j["positive_decisions"] = positive_decisions;
  j["rejected_fraction"] = rejected_fraction();
  j["labeled"] = labeled;
  if (labeled) {
    j["correct"] = correct;
    j["logical_error_rate"] = error_rate();
  }
  j["mean_latency_ns"] = mean_latency_ns();
  auto hist = nlohmann::ordered_json::array();
  for (const auto& [c, k] : latency_histogram) {
    nlohmann::ordered_json e;
    e["cycles"] = c;
    e["latency_ns"] = static_cast<double>(c) * clock_ns;
    e["count"] = k;
    hist.push_back(std::move(e));
  }
  j["latency_histogram"] = std::move(hist);
  return j.dump(2) + "\n";
}

DecodeReport decode_pipeline(const quant::QuantizedModel& qmodel, const HardwareConfig& hw,
                             std::span<const syndrome::SyndromeGraph> graphs,
                             std::optional<std::span<const std::uint8_t>> labels) {
  hw.validate();
  if (qmodel.n_max() < hw.n_max) {
    throw DomainError("quantized model covers n <= " + std::to_string(qmodel.n_max()) +
                      ", hardware filter admits n <= " + std::to_string(hw.n_max));
  }
  if (labels && labels->size() != graphs.size()) {
    throw DomainError("got " + std::to_string(labels->size()) + " labels for " +
                      std::to_string(graphs.size()) + " graphs");
  }
  std::vector<std::int64_t> cycles(static_cast<std::size_t>(hw.n_max) + 1, 0);
  for (int n = 0; n <= hw.n_max; ++n) cycles[static_cast<std::size_t>(n)] = latency_cycles(qmodel.config(), n, hw);

  DecodeReport r;
  r.labeled = labels.has_value();
  r.clock_ns = hw.clock_ns;
  r.n_max = hw.n_max;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto& g = graphs[i];
    const std::size_t n = g.node_count();
    ++r.graphs;
    bool decision = false;
    if (n > static_cast<std::size_t>(hw.n_max)) {
      ++r.rejected;
      continue;
    }
    if (n == 0) {
      ++r.short_circuited;
    } else {
      ++r.accepted;
      decision = qmodel.infer(g, false).decision;
    }
    ++r.latency_histogram[cycles[n]];
    r.positive_decisions += decision;
    if (labels && (*labels)[i] == static_cast<std::uint8_t>(decision)) ++r.correct;
  }
  return r;
}

}  // namespace gnnqec::hwsim
