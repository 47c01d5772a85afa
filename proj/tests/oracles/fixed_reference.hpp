#pragma once

// Straight-line integer datapath over the stored codes, every sum in
// __int128. Shares nothing with the engine except the codes themselves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gnnqec/quant.hpp"

namespace oracle {

using i128 = __int128;

inline i128 round_shift(i128 v, int s) {
  if (s == 0) return v;
  const i128 half = i128{1} << (s - 1);
  const i128 mag = v < 0 ? -v : v;
  const i128 r = (mag + half) >> s;
  return v < 0 ? -r : r;
}

inline i128 clamp_fmt(i128 v, const gnnqec::quant::FixedPointFormat& f) {
  const i128 hi = (i128{1} << (f.total_bits() - 1)) - 1;
  return std::clamp(v, -hi - 1, hi);
}

inline i128 code_of(double x, const gnnqec::quant::FixedPointFormat& f) {
  return clamp_fmt(static_cast<i128>(std::round(std::ldexp(x, f.fractional_bits))), f);
}

struct FixedResult {
  std::vector<std::vector<i128>> activations;  // flattened per layer
  i128 pre = 0;
  bool decision = false;
};

inline FixedResult fixed_forward(const gnnqec::quant::QuantizedModel& qm,
                                 const gnnqec::syndrome::SyndromeGraph& g) {
  using gnnqec::model::Activation;
  using gnnqec::model::LayerKind;
  const auto& s = qm.scheme();
  const int fw = s.weights.fractional_bits;
  const int fa = s.activations.fractional_bits;
  const int fb = s.biases.fractional_bits;
  const int n = static_cast<int>(g.node_count());

  auto requant = [&](i128 v, Activation act) {
    if (act == Activation::ReLU) v = std::max<i128>(v, 0);
    return clamp_fmt(round_shift(v, fw), s.activations);
  };

  std::vector<std::vector<i128>> x(static_cast<std::size_t>(n), std::vector<i128>(5));
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 5; ++c) x[i][c] = code_of(g.features[i][c], s.activations);
  }
  std::vector<std::vector<std::pair<int, i128>>> nb(static_cast<std::size_t>(n));
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const i128 w = code_of(g.weights[e], s.weights);
    nb[g.edges[e].i].push_back({g.edges[e].j, w});
    nb[g.edges[e].j].push_back({g.edges[e].i, w});
  }

  FixedResult r;
  for (std::size_t l = 0; l < qm.config().layers.size(); ++l) {
    const auto& spec = qm.config().layers[l];
    const auto& q = qm.layers()[l];
    std::vector<std::vector<i128>> y;
    if (spec.kind == LayerKind::GraphConv) {
      y.assign(x.size(), std::vector<i128>(static_cast<std::size_t>(spec.d_out), 0));
      for (std::size_t i = 0; i < x.size(); ++i) {
        std::vector<i128> agg(static_cast<std::size_t>(spec.d_in), 0);
        for (int c = 0; c < spec.d_in; ++c) {
          i128 a = 0;
          for (const auto& [j, w] : nb[i]) a += w * x[static_cast<std::size_t>(j)][c];
          agg[c] = requant(a, Activation::None);
        }
        for (int o = 0; o < spec.d_out; ++o) {
          if (!spec.is_computed(o)) continue;
          i128 acc = i128{q.bias[o]} << (fa + fw - fb);
          for (int c = 0; c < spec.d_in; ++c) {
            acc += i128{q.w1[static_cast<std::size_t>(o) * spec.d_in + c]} * x[i][c];
            acc += i128{q.w2[static_cast<std::size_t>(o) * spec.d_in + c]} * agg[c];
          }
          y[i][o] = requant(acc, spec.activation);
        }
      }
    } else if (spec.kind == LayerKind::GlobalMeanPool) {
      y.assign(1, std::vector<i128>(static_cast<std::size_t>(spec.d_out), 0));
      const i128 factor = qm.gmp_factors()[x.size() - 1];
      for (int c = 0; c < spec.d_out; ++c) {
        i128 sum = 0;
        for (const auto& row : x) sum += row[c];
        y[0][c] = requant(sum * factor, Activation::None);
      }
    } else {
      y.assign(1, std::vector<i128>(static_cast<std::size_t>(spec.d_out), 0));
      for (int o = 0; o < spec.d_out; ++o) {
        if (!spec.is_computed(o)) continue;
        i128 acc = i128{q.bias[o]} << (fa + fw - fb);
        for (int c = 0; c < spec.d_in; ++c) acc += i128{q.w1[static_cast<std::size_t>(o) * spec.d_in + c]} * x[0][c];
        if (spec.activation == Activation::Sigmoid) {
          r.pre = acc;
          r.decision = acc >= 0;
          y[0][o] = requant(acc, Activation::None);
        } else {
          y[0][o] = requant(acc, spec.activation);
        }
      }
    }
    x = y;
    std::vector<i128> flat;
    for (const auto& row : x) flat.insert(flat.end(), row.begin(), row.end());
    r.activations.push_back(std::move(flat));
  }
  return r;
}

}  // namespace oracle
