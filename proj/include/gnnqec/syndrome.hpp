#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gnnqec::syndrome {

enum class Basis : std::uint8_t { X, Z };

const char* to_string(Basis basis);

// A measure qubit of the rotated surface code. Coordinates are the plaquette
// corner on the (d+1) x (d+1) vertex lattice; the plaquette touches data qubits
// (row-1, col-1), (row-1, col), (row, col-1), (row, col) that lie inside the d x d
// data grid.
struct StabilizerSite {
  int row = 0;
  int col = 0;
  Basis basis = Basis::X;
  std::vector<int> support;  // data-qubit indices (row * d + col), ascending
};

class CodeLayout {
 public:
  // Rotated surface-code checkerboard for odd distance >= 3. `rounds` defaults
  // to the distance when zero.
  explicit CodeLayout(int distance, int rounds = 0);

  int distance() const noexcept { return distance_; }
  int rounds() const noexcept { return rounds_; }
  int data_qubit_count() const noexcept { return distance_ * distance_; }
  int measure_qubit_count() const noexcept { return static_cast<int>(sites_.size()); }
  const std::vector<StabilizerSite>& sites() const noexcept { return sites_; }

  // Stabilizer sites of the given basis that touch data qubit `q`.
  std::span<const int> checks_of(int q, Basis basis) const;

  // Index of the site at (row, col), or -1.
  int site_at(int row, int col) const;

  // Data-qubit indices whose X-error parity flips the logical Z observable
  // (data row 0).
  const std::vector<int>& logical_support() const noexcept { return logical_support_; }

 private:
  int distance_;
  int rounds_;
  std::vector<StabilizerSite> sites_;
  std::vector<std::vector<int>> x_checks_;  // per data qubit, X-basis sites
  std::vector<std::vector<int>> z_checks_;  // per data qubit, Z-basis sites
  std::vector<int> site_index_;             // (row * (d+1) + col) -> site or -1
  std::vector<int> logical_support_;
};

CodeLayout build_layout(int distance);

// ((d^2 - 1) / 2) * d: every Z- (or X-) check firing in every round.
long max_node_count(int distance);

struct DetectionEvent {
  int row = 0;
  int col = 0;
  int round = 0;
  Basis basis = Basis::X;

  friend bool operator==(const DetectionEvent&, const DetectionEvent&) = default;
};

struct DetectionEventSet {
  int distance = 0;
  int rounds = 0;
  std::vector<DetectionEvent> events;
  std::uint64_t seed = 0;
  // Parity of the accumulated X errors on the logical Z support after the
  // final round; the noise model's ground-truth label.
  bool logical_flip = false;

  // Throws DomainError if events duplicate a (row, col, round) triple or name a
  // site that is not in `layout`.
  void validate(const CodeLayout& layout) const;
};

// Phenomenological noise: per round every data qubit suffers an X flip and,
// independently, a Z flip with probability p; every stabilizer readout is
// flipped with probability p. Detection events are the XOR of consecutive
// readouts, round 0 compared against all-zero. p = 0 is accepted and yields
// no events.
DetectionEventSet sample_detection_events(const CodeLayout& layout, double p,
                                          std::uint64_t seed);

struct Edge {
  int i = 0;  // i < j
  int j = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline constexpr int kFeatureWidth = 5;
using FeatureRow = std::array<double, kFeatureWidth>;

struct SyndromeGraph {
  std::vector<FeatureRow> features;
  std::vector<Edge> edges;       // sorted, deduplicated, i < j
  std::vector<double> weights;   // parallel to edges; 1 / squared distance
  std::uint64_t seed = 0;
  int distance = 0;

  std::size_t node_count() const noexcept { return features.size(); }
};

inline constexpr int kDefaultNeighbors = 6;

// One node per event, ordered by (round, row, col). Feature row:
// [row / d, col / d, round / (rounds - 1), is_X, is_Z] with denominators
// clamped to >= 1. Each node proposes edges to its k nearest nodes (squared
// Euclidean distance in (row, col, round), ties to the lower index); the
// proposals are unioned into an undirected edge set.
SyndromeGraph build_graph(const DetectionEventSet& events, int k = kDefaultNeighbors);

// Fraction of graphs with strictly more than n nodes.
double tail_probability(std::span<const SyndromeGraph> samples, long n);
double tail_probability(std::span<const std::size_t> node_counts, long n);

// Per-sample seed derived from a batch seed (splitmix64 of base + index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

struct SampleBatch {
  std::vector<SyndromeGraph> graphs;
  std::vector<std::uint8_t> labels;  // logical_flip per graph
};

SampleBatch sample_batch(const CodeLayout& layout, double p, std::size_t count,
                         std::uint64_t seed, int k = kDefaultNeighbors);

// Graph batch file: one JSON object per line,
// {"n","features","edges","weights","seed","d"}.
std::string graph_to_json_line(const SyndromeGraph& graph);
SyndromeGraph graph_from_json_line(std::string_view line);
void write_graph_batch(const std::string& path, std::span<const SyndromeGraph> graphs);
std::vector<SyndromeGraph> read_graph_batch(const std::string& path);

// Labels file: one 0/1 per line.
void write_labels(const std::string& path, std::span<const std::uint8_t> labels);
std::vector<std::uint8_t> read_labels(const std::string& path);

}  // namespace gnnqec::syndrome
