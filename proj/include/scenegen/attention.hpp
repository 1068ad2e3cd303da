#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scenegen/common.hpp"
#include "scenegen/plan.hpp"

namespace scenegen::attn {

// Binary spatial mask over the latent grid.
struct BoxMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> cells;  // row-major, entries in {0,1}

  BoxMask() = default;
  BoxMask(int h, int w) : height(h), width(w), cells(static_cast<std::size_t>(h) * w, 0) {}

  int size() const { return height * width; }
  bool at(int r, int c) const { return cells[static_cast<std::size_t>(r) * width + c] != 0; }
  void set(int r, int c, bool on) { cells[static_cast<std::size_t>(r) * width + c] = on ? 1 : 0; }

  int active_count() const {
    int n = 0;
    for (auto c : cells) n += c;
    return n;
  }
};

enum class Provenance { per_layer, aggregated };

// Spatial x token attention. values[u * tokens + v] is the weight of token
// v at flattened cell u. Per-layer maps are row-stochastic over tokens;
// aggregated maps are normalized so the global max entry is 1.
struct AttentionMap {
  int height = 0;
  int width = 0;
  int tokens = 0;
  Provenance provenance = Provenance::per_layer;
  std::vector<double> values;

  AttentionMap() = default;
  AttentionMap(int h, int w, int v)
      : height(h), width(w), tokens(v), values(static_cast<std::size_t>(h) * w * v, 0.0) {}

  int cells() const { return height * width; }
  double& at(int u, int v) { return values[static_cast<std::size_t>(u) * tokens + v]; }
  double at(int u, int v) const { return values[static_cast<std::size_t>(u) * tokens + v]; }
};

// Ordered token positions of one object within a tokenized prompt.
struct TokenSpan {
  std::vector<int> indices;
};

struct ConstraintWeights {
  double alpha = 20.0;      // latent update step size
  double beta = 15.0;       // guidance constraint intensity
  double gamma = 1.0;       // suppression constraint intensity
  double k_fraction = 0.25; // top-k size as a fraction of the masked region
};

// k for a region of `region_size` cells: max(1, round(k_fraction * size)).
int topk_count(double k_fraction, int region_size);

// Rasterize a box onto an (h x w) grid: a cell is active iff its center
// lies inside the half-open box. If rounding produces an empty mask, the
// cell containing the box center is forced on.
BoxMask box_to_mask(const BoundingBox& box, int h, int w);

// Bilinear resample to (th x tw), token count unchanged.
AttentionMap resample_bilinear(const AttentionMap& map, int th, int tw);

// Resample every layer to the target grid, sum, then divide by the global
// max entry so the max is 1 (all-zero sums are returned unchanged).
AttentionMap aggregate_attention(std::span<const AttentionMap> layers, int th, int tw);

// Mean of the k largest entries. Ties are broken toward the lower index so
// the selected set (and therefore the subgradient) is deterministic.
double topk_mean(std::span<const double> values, int k);

// Eq-style object constraint summed over the span: per token, one minus the
// top-k mean of in-mask attention plus the top-k mean of out-of-mask
// attention. If `grad` is non-null it receives dLoss/dA (same layout as
// map.values). k_in is taken over the mask area, k_out over its complement;
// an empty complement contributes 0.
double object_constraint_loss(const AttentionMap& map, const BoxMask& mask, const TokenSpan& span,
                              double k_fraction, std::vector<double>* grad = nullptr);

// Background-integration constraint summed over the span: beta-weighted L1
// distance to the recorded object attention inside the mask plus a
// gamma-weighted top-k suppression term outside it. `grad` receives
// dLoss/dA_prime when non-null.
double background_constraint_loss(const AttentionMap& a_prime, const AttentionMap& a_object,
                                  const BoxMask& mask, const TokenSpan& span, double beta,
                                  double gamma, double k_fraction,
                                  std::vector<double>* grad = nullptr);

// Average the span columns, then keep the in-box cells at or above the
// q-quantile of in-box values (threshold = ascending in-box value at index
// ceil(q * (n - 1))). Cells outside the box are always off; the in-box
// argmax is always on.
BoxMask attention_to_saliency_mask(const AttentionMap& map, const TokenSpan& span,
                                   const BoxMask& box_mask, double q);

// Share of span attention mass that falls inside the mask. Zero total mass
// gives 0.
double in_box_fraction(const AttentionMap& map, const BoxMask& mask, const TokenSpan& span);

// Plain single-threaded reference implementations of the kernels above.
// Kept for equivalence tests and the kernel benchmark; results match the
// parallel versions to floating-point reassociation error.
namespace serial {

AttentionMap aggregate_attention(std::span<const AttentionMap> layers, int th, int tw);
double topk_mean(std::span<const double> values, int k);
double object_constraint_loss(const AttentionMap& map, const BoxMask& mask, const TokenSpan& span,
                              double k_fraction, std::vector<double>* grad = nullptr);
double background_constraint_loss(const AttentionMap& a_prime, const AttentionMap& a_object,
                                  const BoxMask& mask, const TokenSpan& span, double beta,
                                  double gamma, double k_fraction,
                                  std::vector<double>* grad = nullptr);

}  // namespace serial

}  // namespace scenegen::attn
