#include "gnnqec/syndrome.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "gnnqec/errors.hpp"
#include "gnnqec/text.hpp"

namespace gnnqec::syndrome {

namespace {

void check_distance(int d) {
  if (d < 3 || d % 2 == 0) {
    throw DomainError("code distance must be an odd integer >= 3, got " + std::to_string(d));
  }
}

// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Number of failures before the next success of a Bernoulli(p) sequence.
class GeometricSkipper {
 public:
  GeometricSkipper(double p, std::uint64_t seed) : gen_(seed) {
    if (p >= 1.0) {
      always_ = true;
    } else {
      log_q_ = std::log1p(-p);
    }
  }

  std::uint64_t next() {
    if (always_) return 0;
    const double u = uniform01(gen_);
    const double skip = std::floor(std::log1p(-u) / log_q_);
    if (!(skip < 1e18)) return std::uint64_t{1} << 60;
    return static_cast<std::uint64_t>(skip);
  }

 private:
  std::mt19937_64 gen_;
  double log_q_ = 0.0;
  bool always_ = false;
};

}  // namespace

const char* to_string(Basis basis) { return basis == Basis::X ? "X" : "Z"; }

CodeLayout::CodeLayout(int distance, int rounds)
    : distance_(distance), rounds_(rounds == 0 ? distance : rounds) {
  check_distance(distance);
  if (rounds_ < 1) {
    throw DomainError("rounds must be >= 1, got " + std::to_string(rounds));
  }
  const int d = distance;
  const int dq = d * d;
  x_checks_.resize(dq);
  z_checks_.resize(dq);
  site_index_.assign(static_cast<std::size_t>((d + 1) * (d + 1)), -1);

  for (int r = 0; r <= d; ++r) {
    for (int c = 0; c <= d; ++c) {
      const Basis basis = (r + c) % 2 == 0 ? Basis::X : Basis::Z;
      const bool row_edge = r == 0 || r == d;
      const bool col_edge = c == 0 || c == d;
      if (row_edge && col_edge) continue;
      if (row_edge && basis != Basis::X) continue;
      if (col_edge && basis != Basis::Z) continue;

      StabilizerSite site{r, c, basis, {}};
      for (int dr : {-1, 0}) {
        for (int dc : {-1, 0}) {
          const int qr = r + dr;
          const int qc = c + dc;
          if (qr >= 0 && qr < d && qc >= 0 && qc < d) site.support.push_back(qr * d + qc);
        }
      }
      std::sort(site.support.begin(), site.support.end());
      const int index = static_cast<int>(sites_.size());
      for (int q : site.support) {
        (basis == Basis::X ? x_checks_ : z_checks_)[q].push_back(index);
      }
      site_index_[static_cast<std::size_t>(r * (d + 1) + c)] = index;
      sites_.push_back(std::move(site));
    }
  }
  for (int c = 0; c < d; ++c) logical_support_.push_back(c);
}

std::span<const int> CodeLayout::checks_of(int q, Basis basis) const {
  const auto& table = basis == Basis::X ? x_checks_ : z_checks_;
  return table.at(static_cast<std::size_t>(q));
}

int CodeLayout::site_at(int row, int col) const {
  if (row < 0 || col < 0 || row > distance_ || col > distance_) return -1;
  return site_index_[static_cast<std::size_t>(row * (distance_ + 1) + col)];
}

CodeLayout build_layout(int distance) { return CodeLayout(distance); }

long max_node_count(int distance) {
  check_distance(distance);
  const long d = distance;
  return (d * d - 1) / 2 * d;
}

void DetectionEventSet::validate(const CodeLayout& layout) const {
  std::vector<std::tuple<int, int, int>> seen;
  seen.reserve(events.size());
  for (const auto& e : events) {
    if (e.round < 0 || e.round >= layout.rounds()) {
      throw DomainError("detection event round " + std::to_string(e.round) + " out of range");
    }
    const int s = layout.site_at(e.row, e.col);
    if (s < 0 || layout.sites()[static_cast<std::size_t>(s)].basis != e.basis) {
      throw DomainError("detection event at (" + std::to_string(e.row) + ", " +
                        std::to_string(e.col) + ") does not match a stabilizer site");
    }
    seen.emplace_back(e.row, e.col, e.round);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw DomainError("duplicate detection event");
  }
}

DetectionEventSet sample_detection_events(const CodeLayout& layout, double p,
                                          std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 0.5)) {
    throw DomainError("physical error rate must lie in [0, 0.5]");
  }
  DetectionEventSet out;
  out.distance = layout.distance();
  out.rounds = layout.rounds();
  out.seed = seed;
  if (p == 0.0) return out;

  const auto& sites = layout.sites();
  const std::uint64_t dq = static_cast<std::uint64_t>(layout.data_qubit_count());
  const std::uint64_t m = sites.size();
  const std::uint64_t per_round = 2 * dq + m;

  std::vector<std::uint8_t> parity(m, 0);
  std::vector<std::uint8_t> previous(m, 0);
  std::vector<std::uint8_t> misread(m, 0);
  bool logical = false;

  GeometricSkipper skipper(p, seed);
  std::uint64_t pos = skipper.next();
  for (int t = 0; t < layout.rounds(); ++t) {
    const std::uint64_t base = static_cast<std::uint64_t>(t) * per_round;
    std::fill(misread.begin(), misread.end(), 0);
    while (pos < base + per_round) {
      const std::uint64_t off = pos - base;
      if (off < dq) {
        const int q = static_cast<int>(off);
        if (q < layout.distance()) logical = !logical;
        for (int s : layout.checks_of(q, Basis::Z)) parity[static_cast<std::size_t>(s)] ^= 1;
      } else if (off < 2 * dq) {
        const int q = static_cast<int>(off - dq);
        for (int s : layout.checks_of(q, Basis::X)) parity[static_cast<std::size_t>(s)] ^= 1;
      } else {
        misread[off - 2 * dq] = 1;
      }
      pos += 1 + skipper.next();
    }
    for (std::size_t s = 0; s < m; ++s) {
      const std::uint8_t outcome = parity[s] ^ misread[s];
      if (outcome != previous[s]) {
        out.events.push_back({sites[s].row, sites[s].col, t, sites[s].basis});
      }
      previous[s] = outcome;
    }
  }
  out.logical_flip = logical;
  return out;
}

SyndromeGraph build_graph(const DetectionEventSet& events, int k) {
  if (k < 1) throw DomainError("k must be >= 1");
  std::vector<DetectionEvent> nodes = events.events;
  std::sort(nodes.begin(), nodes.end(), [](const DetectionEvent& a, const DetectionEvent& b) {
    return std::tie(a.round, a.row, a.col) < std::tie(b.round, b.row, b.col);
  });

  SyndromeGraph g;
  g.seed = events.seed;
  g.distance = events.distance;
  const double space = std::max(1, events.distance);
  const double time = std::max(1, events.rounds - 1);
  g.features.reserve(nodes.size());
  for (const auto& e : nodes) {
    g.features.push_back({e.row / space, e.col / space, e.round / time,
                          e.basis == Basis::X ? 1.0 : 0.0, e.basis == Basis::Z ? 1.0 : 0.0});
  }

  const int n = static_cast<int>(nodes.size());
  if (n <= 1) return g;

  auto dist2 = [&](int a, int b) {
    const long dr = nodes[a].row - nodes[b].row;
    const long dc = nodes[a].col - nodes[b].col;
    const long dt = nodes[a].round - nodes[b].round;
    return dr * dr + dc * dc + dt * dt;
  };

  std::vector<Edge> proposed;
  std::vector<std::pair<long, int>> candidates;
  for (int i = 0; i < n; ++i) {
    candidates.clear();
    for (int j = 0; j < n; ++j) {
      if (j != i) candidates.emplace_back(dist2(i, j), j);
    }
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end());
    for (std::size_t c = 0; c < take; ++c) {
      const int j = candidates[c].second;
      proposed.push_back({std::min(i, j), std::max(i, j)});
    }
  }
  std::sort(proposed.begin(), proposed.end());
  proposed.erase(std::unique(proposed.begin(), proposed.end()), proposed.end());

  g.edges = std::move(proposed);
  g.weights.reserve(g.edges.size());
  for (const auto& e : g.edges) g.weights.push_back(1.0 / static_cast<double>(dist2(e.i, e.j)));
  return g;
}

double tail_probability(std::span<const std::size_t> node_counts, long n) {
  if (node_counts.empty()) throw DomainError("tail probability of an empty sample set");
  std::size_t exceed = 0;
  for (std::size_t count : node_counts) {
    if (static_cast<long>(count) > n) ++exceed;
  }
  return static_cast<double>(exceed) / static_cast<double>(node_counts.size());
}

double tail_probability(std::span<const SyndromeGraph> samples, long n) {
  std::vector<std::size_t> counts;
  counts.reserve(samples.size());
  for (const auto& g : samples) counts.push_back(g.node_count());
  return tail_probability(std::span<const std::size_t>(counts), n);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SampleBatch sample_batch(const CodeLayout& layout, double p, std::size_t count,
                         std::uint64_t seed, int k) {
  SampleBatch batch;
  batch.graphs.reserve(count);
  batch.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto events = sample_detection_events(layout, p, derive_seed(seed, i));
    batch.graphs.push_back(build_graph(events, k));
    batch.labels.push_back(events.logical_flip ? 1 : 0);
  }
  return batch;
}

std::string graph_to_json_line(const SyndromeGraph& graph) {
  nlohmann::ordered_json j;
  j["n"] = graph.node_count();
  auto features = nlohmann::ordered_json::array();
  for (const auto& row : graph.features) features.push_back(row);
  j["features"] = std::move(features);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : graph.edges) edges.push_back({e.i, e.j});
  j["edges"] = std::move(edges);
  j["weights"] = graph.weights;
  j["seed"] = graph.seed;
  j["d"] = graph.distance;
  return j.dump();
}

SyndromeGraph graph_from_json_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(std::string("graph line is not valid JSON: ") + e.what());
  }
  try {
    SyndromeGraph g;
    const auto n = j.at("n").get<std::size_t>();
    for (const auto& row : j.at("features")) {
      if (row.size() != kFeatureWidth) throw MalformedFileError("feature row width must be 5");
      FeatureRow f{};
      for (int c = 0; c < kFeatureWidth; ++c) f[static_cast<std::size_t>(c)] = row.at(c).get<double>();
      g.features.push_back(f);
    }
    if (g.features.size() != n) throw MalformedFileError("graph 'n' disagrees with feature rows");
    for (const auto& e : j.at("edges")) {
      if (e.size() != 2) throw MalformedFileError("edge must be a pair");
      int a = e.at(0).get<int>();
      int b = e.at(1).get<int>();
      if (a == b || a < 0 || b < 0 || static_cast<std::size_t>(std::max(a, b)) >= n) {
        throw MalformedFileError("edge endpoint out of range or self-loop");
      }
      g.edges.push_back({std::min(a, b), std::max(a, b)});
    }
    g.weights = j.at("weights").get<std::vector<double>>();
    if (g.weights.size() != g.edges.size()) {
      throw MalformedFileError("graph has " + std::to_string(g.edges.size()) + " edges but " +
                               std::to_string(g.weights.size()) + " weights");
    }
    for (double w : g.weights) {
      if (!(w > 0.0)) throw MalformedFileError("edge weights must be positive");
    }
    g.seed = j.value("seed", std::uint64_t{0});
    g.distance = j.value("d", 0);
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFileError(std::string("graph line: ") + e.what());
  }
}

void write_graph_batch(const std::string& path, std::span<const SyndromeGraph> graphs) {
  std::string out;
  for (const auto& g : graphs) {
    out += graph_to_json_line(g);
    out += '\n';
  }
  text::write_file(path, out);
}

std::vector<SyndromeGraph> read_graph_batch(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedFileError("cannot open graph batch '" + path + "'");
  std::vector<SyndromeGraph> graphs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    graphs.push_back(graph_from_json_line(line));
  }
  return graphs;
}

void write_labels(const std::string& path, std::span<const std::uint8_t> labels) {
  std::string out;
  out.reserve(labels.size() * 2);
  for (auto l : labels) {
    out += l ? '1' : '0';
    out += '\n';
  }
  text::write_file(path, out);
}

std::vector<std::uint8_t> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedFileError("cannot open labels file '" + path + "'");
  std::vector<std::uint8_t> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "0") {
      labels.push_back(0);
    } else if (line == "1") {
      labels.push_back(1);
    } else {
      throw MalformedFileError("labels file lines must be 0 or 1");
    }
  }
  return labels;
}

}  // namespace gnnqec::syndrome
