#pragma once

// Independent reference implementations used to cross-check the library
// kernels. Everything here is a plain loop with its own sorting and rank
// logic, so a defect in the library cannot hide inside the oracle too.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "scenegen/attention.hpp"
#include "scenegen/rng.hpp"

namespace oracle {

inline int k_count(double k_fraction, int region_size) {
  if (region_size <= 0) return 0;
  const int k = static_cast<int>(std::llround(k_fraction * region_size));
  return std::max(1, std::min(k, region_size));
}

inline double mean_of_largest(std::vector<double> vals, int k) {
  std::sort(vals.begin(), vals.end());
  double acc = 0.0;
  for (int i = 0; i < k; ++i) acc += vals[vals.size() - 1 - static_cast<std::size_t>(i)];
  return acc / k;
}

// Object constraint: per span token, one minus the mean of the k_in largest
// in-mask entries, plus the mean of the k_out largest out-of-mask entries
// (skipped when the complement is empty).
inline double object_loss(const scenegen::attn::AttentionMap& map,
                          const scenegen::attn::BoxMask& mask,
                          const scenegen::attn::TokenSpan& span, double k_fraction) {
  double loss = 0.0;
  for (int v : span.indices) {
    std::vector<double> in_vals;
    std::vector<double> out_vals;
    for (int u = 0; u < map.cells(); ++u) {
      (mask.cells[static_cast<std::size_t>(u)] ? in_vals : out_vals).push_back(map.at(u, v));
    }
    loss += 1.0 - mean_of_largest(in_vals, k_count(k_fraction, static_cast<int>(in_vals.size())));
    if (!out_vals.empty()) {
      loss += mean_of_largest(out_vals, k_count(k_fraction, static_cast<int>(out_vals.size())));
    }
  }
  return loss;
}

// Background constraint: per span token, beta times the L1 distance to the
// recorded map inside the mask, plus gamma times the mean of the k_out
// largest out-of-mask entries.
inline double background_loss(const scenegen::attn::AttentionMap& a_prime,
                              const scenegen::attn::AttentionMap& a_object,
                              const scenegen::attn::BoxMask& mask,
                              const scenegen::attn::TokenSpan& span, double beta, double gamma,
                              double k_fraction) {
  double loss = 0.0;
  for (int v : span.indices) {
    double l1 = 0.0;
    std::vector<double> out_vals;
    for (int u = 0; u < a_prime.cells(); ++u) {
      if (mask.cells[static_cast<std::size_t>(u)]) {
        l1 += std::abs(a_prime.at(u, v) - a_object.at(u, v));
      } else {
        out_vals.push_back(a_prime.at(u, v));
      }
    }
    loss += beta * l1;
    if (!out_vals.empty()) {
      loss +=
          gamma * mean_of_largest(out_vals, k_count(k_fraction, static_cast<int>(out_vals.size())));
    }
  }
  return loss;
}

// Brute-force tau-b: pairs tied in both lists are excluded from every term.
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  long long concordant = 0;
  long long discordant = 0;
  long long tied_x_only = 0;
  long long tied_y_only = 0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool tx = x[i] == x[j];
      const bool ty = y[i] == y[j];
      if (tx && ty) continue;
      if (tx) {
        ++tied_x_only;
      } else if (ty) {
        ++tied_y_only;
      } else if ((x[i] < x[j]) == (y[i] < y[j])) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double den_x = static_cast<double>(concordant + discordant + tied_x_only);
  const double den_y = static_cast<double>(concordant + discordant + tied_y_only);
  return static_cast<double>(concordant - discordant) / std::sqrt(den_x * den_y);
}

// Count-based average ranks: 1 + (#smaller) + (#equal - 1) / 2.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<double> ranks(values.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    int smaller = 0;
    int equal = 0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (values[j] < values[i]) ++smaller;
      if (values[j] == values[i]) ++equal;
    }
    ranks[i] = 1.0 + smaller + (equal - 1) / 2.0;
  }
  return ranks;
}

inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Randomized-instance helpers for the oracle comparisons.

inline scenegen::attn::AttentionMap random_map(scenegen::Rng& rng, int h, int w, int tokens) {
  scenegen::attn::AttentionMap map(h, w, tokens);
  for (auto& x : map.values) x = rng.uniform();
  return map;
}

// Bernoulli mask with at least one active cell.
inline scenegen::attn::BoxMask random_mask(scenegen::Rng& rng, int h, int w) {
  scenegen::attn::BoxMask mask(h, w);
  const double p = 0.1 + 0.8 * rng.uniform();
  for (auto& c : mask.cells) c = rng.uniform() < p ? 1 : 0;
  if (mask.active_count() == 0) {
    mask.cells[rng.next_u64() % mask.cells.size()] = 1;
  }
  return mask;
}

// Nonempty strictly increasing subset of the token indices.
inline scenegen::attn::TokenSpan random_span(scenegen::Rng& rng, int tokens) {
  scenegen::attn::TokenSpan span;
  for (int v = 0; v < tokens; ++v) {
    if (rng.uniform() < 0.4) span.indices.push_back(v);
  }
  if (span.indices.empty()) {
    span.indices.push_back(static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(tokens)));
  }
  return span;
}

}  // namespace oracle
