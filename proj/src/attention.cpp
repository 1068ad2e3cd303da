#include "scenegen/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scenegen::attn {

namespace {

// Indices of the k largest entries, ordered by (value desc, index asc).
// The explicit tie rule keeps the selected set, and therefore the
// subgradient, stable.
void topk_indices(std::span<const double> p, int k, std::vector<int>& out) {
  out.resize(p.size());
  std::iota(out.begin(), out.end(), 0);
  std::partial_sort(out.begin(), out.begin() + k, out.end(), [&](int a, int b) {
    if (p[a] != p[b]) return p[a] > p[b];
    return a < b;
  });
  out.resize(static_cast<std::size_t>(k));
}

void check_loss_args(const AttentionMap& map, const BoxMask& mask, const TokenSpan& span) {
  if (mask.height != map.height || mask.width != map.width) {
    throw ShapeError("attention map and mask grids disagree");
  }
  if (span.indices.empty()) throw ArgumentError("token span is empty");
  for (int v : span.indices) {
    if (v < 0 || v >= map.tokens) throw ArgumentError("token span index out of range");
  }
}

}  // namespace

int topk_count(double k_fraction, int region_size) {
  if (region_size <= 0) return 0;
  const int k = static_cast<int>(std::llround(k_fraction * region_size));
  return std::clamp(k, 1, region_size);
}

BoxMask box_to_mask(const BoundingBox& box, int h, int w) {
  if (h < 1 || w < 1) throw ArgumentError("mask grid must be at least 1x1");
  BoxMask mask(h, w);
  int active = 0;
  for (int r = 0; r < h; ++r) {
    const double cy = (r + 0.5) / h;
    for (int c = 0; c < w; ++c) {
      const double cx = (c + 0.5) / w;
      const bool inside = cx >= box.x && cx < box.x + box.w && cy >= box.y && cy < box.y + box.h;
      if (inside) {
        mask.set(r, c, true);
        ++active;
      }
    }
  }
  if (active == 0) {
    // Tiny box fell between cell centers; force the cell containing the
    // box center.
    const int r = std::clamp(static_cast<int>(std::floor((box.y + box.h / 2) * h)), 0, h - 1);
    const int c = std::clamp(static_cast<int>(std::floor((box.x + box.w / 2) * w)), 0, w - 1);
    mask.set(r, c, true);
  }
  return mask;
}

AttentionMap resample_bilinear(const AttentionMap& map, int th, int tw) {
  if (th == map.height && tw == map.width) return map;
  AttentionMap out(th, tw, map.tokens);
  out.provenance = map.provenance;
  const int sh = map.height;
  const int sw = map.width;
#pragma omp parallel for schedule(static)
  for (int ty = 0; ty < th; ++ty) {
    const double sy = (ty + 0.5) * sh / th - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, sh - 1);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double fy = std::clamp(sy - std::floor(sy), 0.0, 1.0);
    for (int tx = 0; tx < tw; ++tx) {
      const double sx = (tx + 0.5) * sw / tw - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, sw - 1);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double fx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
      const int u = ty * tw + tx;
      for (int v = 0; v < map.tokens; ++v) {
        const double v00 = map.at(y0 * sw + x0, v);
        const double v01 = map.at(y0 * sw + x1, v);
        const double v10 = map.at(y1 * sw + x0, v);
        const double v11 = map.at(y1 * sw + x1, v);
        out.at(u, v) = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
      }
    }
  }
  return out;
}

AttentionMap aggregate_attention(std::span<const AttentionMap> layers, int th, int tw) {
  if (layers.empty()) throw ArgumentError("no attention layers to aggregate");
  const int tokens = layers.front().tokens;
  for (const auto& layer : layers) {
    if (layer.tokens != tokens) throw ShapeError("token count differs across attention layers");
  }
  AttentionMap sum(th, tw, tokens);
  sum.provenance = Provenance::aggregated;
  for (const auto& layer : layers) {
    const AttentionMap resampled = resample_bilinear(layer, th, tw);
    const std::size_t n = sum.values.size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      sum.values[static_cast<std::size_t>(i)] += resampled.values[static_cast<std::size_t>(i)];
    }
  }
  double max_entry = 0.0;
#pragma omp parallel for reduction(max : max_entry) schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(sum.values.size()); ++i) {
    max_entry = std::max(max_entry, sum.values[static_cast<std::size_t>(i)]);
  }
  if (max_entry > 0.0) {
    const double inv = 1.0 / max_entry;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(sum.values.size()); ++i) {
      sum.values[static_cast<std::size_t>(i)] *= inv;
    }
  }
  return sum;
}

double topk_mean(std::span<const double> values, int k) {
  if (k < 1 || k > static_cast<int>(values.size())) {
    throw ArgumentError("top-k size out of range");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double acc = 0.0;
  for (int i = 0; i < k; ++i) acc += sorted[static_cast<std::size_t>(i)];
  return acc / k;
}

double object_constraint_loss(const AttentionMap& map, const BoxMask& mask, const TokenSpan& span,
                              double k_fraction, std::vector<double>* grad) {
  check_loss_args(map, mask, span);
  if (k_fraction <= 0.0 || k_fraction > 1.0) throw ArgumentError("k_fraction must be in (0,1]");
  const int cells = map.cells();
  const int inside = mask.active_count();
  const int outside = cells - inside;
  const int k_in = topk_count(k_fraction, inside);
  const int k_out = topk_count(k_fraction, outside);
  if (grad) grad->assign(map.values.size(), 0.0);

  const int span_size = static_cast<int>(span.indices.size());
  double loss = 0.0;
#pragma omp parallel for reduction(+ : loss) schedule(static) if (span_size > 1)
  for (int si = 0; si < span_size; ++si) {
    const int v = span.indices[static_cast<std::size_t>(si)];
    std::vector<double> products(static_cast<std::size_t>(cells));
    std::vector<int> selected;

    for (int u = 0; u < cells; ++u) products[static_cast<std::size_t>(u)] = map.at(u, v) * mask.cells[static_cast<std::size_t>(u)];
    topk_indices(products, k_in, selected);
    double in_sum = 0.0;
    for (int u : selected) in_sum += products[static_cast<std::size_t>(u)];
    loss += 1.0 - in_sum / k_in;
    if (grad) {
      for (int u : selected) {
        if (mask.cells[static_cast<std::size_t>(u)]) (*grad)[static_cast<std::size_t>(u) * map.tokens + v] -= 1.0 / k_in;
      }
    }

    if (outside > 0) {
      for (int u = 0; u < cells; ++u) {
        products[static_cast<std::size_t>(u)] = map.at(u, v) * (1 - mask.cells[static_cast<std::size_t>(u)]);
      }
      topk_indices(products, k_out, selected);
      double out_sum = 0.0;
      for (int u : selected) out_sum += products[static_cast<std::size_t>(u)];
      loss += out_sum / k_out;
      if (grad) {
        for (int u : selected) {
          if (!mask.cells[static_cast<std::size_t>(u)]) (*grad)[static_cast<std::size_t>(u) * map.tokens + v] += 1.0 / k_out;
        }
      }
    }
  }
  return loss;
}

double background_constraint_loss(const AttentionMap& a_prime, const AttentionMap& a_object,
                                  const BoxMask& mask, const TokenSpan& span, double beta,
                                  double gamma, double k_fraction, std::vector<double>* grad) {
  if (a_prime.height != a_object.height || a_prime.width != a_object.width ||
      a_prime.tokens != a_object.tokens) {
    throw ShapeError("attention maps disagree in shape");
  }
  check_loss_args(a_prime, mask, span);
  if (beta < 0.0 || gamma < 0.0) throw ArgumentError("constraint weights must be nonnegative");
  if (k_fraction <= 0.0 || k_fraction > 1.0) throw ArgumentError("k_fraction must be in (0,1]");
  const int cells = a_prime.cells();
  const int outside = cells - mask.active_count();
  const int k_out = topk_count(k_fraction, outside);
  if (grad) grad->assign(a_prime.values.size(), 0.0);

  const int span_size = static_cast<int>(span.indices.size());
  double loss = 0.0;
#pragma omp parallel for reduction(+ : loss) schedule(static) if (span_size > 1)
  for (int si = 0; si < span_size; ++si) {
    const int v = span.indices[static_cast<std::size_t>(si)];

    double guided = 0.0;
    for (int u = 0; u < cells; ++u) {
      if (!mask.cells[static_cast<std::size_t>(u)]) continue;
      const double diff = a_prime.at(u, v) - a_object.at(u, v);
      guided += std::abs(diff);
      if (grad && diff != 0.0) {
        (*grad)[static_cast<std::size_t>(u) * a_prime.tokens + v] += beta * (diff > 0.0 ? 1.0 : -1.0);
      }
    }
    loss += beta * guided;

    if (outside > 0) {
      std::vector<double> products(static_cast<std::size_t>(cells));
      for (int u = 0; u < cells; ++u) {
        products[static_cast<std::size_t>(u)] = a_prime.at(u, v) * (1 - mask.cells[static_cast<std::size_t>(u)]);
      }
      std::vector<int> selected;
      topk_indices(products, k_out, selected);
      double out_sum = 0.0;
      for (int u : selected) out_sum += products[static_cast<std::size_t>(u)];
      loss += gamma * out_sum / k_out;
      if (grad && gamma != 0.0) {
        for (int u : selected) {
          if (!mask.cells[static_cast<std::size_t>(u)]) {
            (*grad)[static_cast<std::size_t>(u) * a_prime.tokens + v] += gamma / k_out;
          }
        }
      }
    }
  }
  return loss;
}

BoxMask attention_to_saliency_mask(const AttentionMap& map, const TokenSpan& span,
                                   const BoxMask& box_mask, double q) {
  check_loss_args(map, box_mask, span);
  if (q <= 0.0 || q >= 1.0) throw ArgumentError("saliency quantile must be in (0,1)");
  const int cells = map.cells();
  std::vector<double> field(static_cast<std::size_t>(cells), 0.0);
  for (int u = 0; u < cells; ++u) {
    double acc = 0.0;
    for (int v : span.indices) acc += map.at(u, v);
    field[static_cast<std::size_t>(u)] = acc / static_cast<double>(span.indices.size());
  }

  std::vector<double> in_box;
  int argmax = -1;
  for (int u = 0; u < cells; ++u) {
    if (!box_mask.cells[static_cast<std::size_t>(u)]) continue;
    in_box.push_back(field[static_cast<std::size_t>(u)]);
    if (argmax < 0 || field[static_cast<std::size_t>(u)] > field[static_cast<std::size_t>(argmax)]) argmax = u;
  }
  BoxMask saliency(box_mask.height, box_mask.width);
  if (in_box.empty()) return saliency;

  std::sort(in_box.begin(), in_box.end());
  const std::size_t n = in_box.size();
  const std::size_t idx = std::min(n - 1, static_cast<std::size_t>(std::ceil(q * static_cast<double>(n - 1))));
  const double threshold = in_box[idx];
  for (int u = 0; u < cells; ++u) {
    if (box_mask.cells[static_cast<std::size_t>(u)] && field[static_cast<std::size_t>(u)] >= threshold) {
      saliency.cells[static_cast<std::size_t>(u)] = 1;
    }
  }
  saliency.cells[static_cast<std::size_t>(argmax)] = 1;
  return saliency;
}

double in_box_fraction(const AttentionMap& map, const BoxMask& mask, const TokenSpan& span) {
  check_loss_args(map, mask, span);
  double inside = 0.0;
  double total = 0.0;
  for (int u = 0; u < map.cells(); ++u) {
    for (int v : span.indices) {
      const double a = map.at(u, v);
      total += a;
      if (mask.cells[static_cast<std::size_t>(u)]) inside += a;
    }
  }
  return total > 0.0 ? inside / total : 0.0;
}

namespace serial {

AttentionMap aggregate_attention(std::span<const AttentionMap> layers, int th, int tw) {
  if (layers.empty()) throw ArgumentError("no attention layers to aggregate");
  const int tokens = layers.front().tokens;
  AttentionMap sum(th, tw, tokens);
  sum.provenance = Provenance::aggregated;
  for (const auto& layer : layers) {
    if (layer.tokens != tokens) throw ShapeError("token count differs across attention layers");
    const int sh = layer.height;
    const int sw = layer.width;
    for (int ty = 0; ty < th; ++ty) {
      const double sy = (ty + 0.5) * sh / th - 0.5;
      const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, sh - 1);
      const int y1 = std::min(y0 + 1, sh - 1);
      const double fy = std::clamp(sy - std::floor(sy), 0.0, 1.0);
      for (int tx = 0; tx < tw; ++tx) {
        const double sx = (tx + 0.5) * sw / tw - 0.5;
        const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, sw - 1);
        const int x1 = std::min(x0 + 1, sw - 1);
        const double fx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
        for (int v = 0; v < tokens; ++v) {
          const double v00 = layer.at(y0 * sw + x0, v);
          const double v01 = layer.at(y0 * sw + x1, v);
          const double v10 = layer.at(y1 * sw + x0, v);
          const double v11 = layer.at(y1 * sw + x1, v);
          sum.at(ty * tw + tx, v) +=
              (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
        }
      }
    }
  }
  double max_entry = 0.0;
  for (double x : sum.values) max_entry = std::max(max_entry, x);
  if (max_entry > 0.0) {
    for (double& x : sum.values) x /= max_entry;
  }
  return sum;
}

double topk_mean(std::span<const double> values, int k) {
  if (k < 1 || k > static_cast<int>(values.size())) {
    throw ArgumentError("top-k size out of range");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double acc = 0.0;
  for (int i = 0; i < k; ++i) acc += sorted[static_cast<std::size_t>(i)];
  return acc / k;
}

double object_constraint_loss(const AttentionMap& map, const BoxMask& mask, const TokenSpan& span,
                              double k_fraction, std::vector<double>* grad) {
  check_loss_args(map, mask, span);
  if (k_fraction <= 0.0 || k_fraction > 1.0) throw ArgumentError("k_fraction must be in (0,1]");
  const int cells = map.cells();
  const int inside = mask.active_count();
  const int outside = cells - inside;
  const int k_in = topk_count(k_fraction, inside);
  const int k_out = topk_count(k_fraction, outside);
  if (grad) grad->assign(map.values.size(), 0.0);

  double loss = 0.0;
  std::vector<double> products(static_cast<std::size_t>(cells));
  std::vector<int> selected;
  for (int v : span.indices) {
    for (int u = 0; u < cells; ++u) products[static_cast<std::size_t>(u)] = map.at(u, v) * mask.cells[static_cast<std::size_t>(u)];
    topk_indices(products, k_in, selected);
    double in_sum = 0.0;
    for (int u : selected) in_sum += products[static_cast<std::size_t>(u)];
    loss += 1.0 - in_sum / k_in;
    if (grad) {
      for (int u : selected) {
        if (mask.cells[static_cast<std::size_t>(u)]) (*grad)[static_cast<std::size_t>(u) * map.tokens + v] -= 1.0 / k_in;
      }
    }
    if (outside > 0) {
      for (int u = 0; u < cells; ++u) {
        products[static_cast<std::size_t>(u)] = map.at(u, v) * (1 - mask.cells[static_cast<std::size_t>(u)]);
      }
      topk_indices(products, k_out, selected);
      double out_sum = 0.0;
      for (int u : selected) out_sum += products[static_cast<std::size_t>(u)];
      loss += out_sum / k_out;
      if (grad) {
        for (int u : selected) {
          if (!mask.cells[static_cast<std::size_t>(u)]) (*grad)[static_cast<std::size_t>(u) * map.tokens + v] += 1.0 / k_out;
        }
      }
    }
  }
  return loss;
}

double background_constraint_loss(const AttentionMap& a_prime, const AttentionMap& a_object,
                                  const BoxMask& mask, const TokenSpan& span, double beta,
                                  double gamma, double k_fraction, std::vector<double>* grad) {
  if (a_prime.height != a_object.height || a_prime.width != a_object.width ||
      a_prime.tokens != a_object.tokens) {
    throw ShapeError("attention maps disagree in shape");
  }
  check_loss_args(a_prime, mask, span);
  if (beta < 0.0 || gamma < 0.0) throw ArgumentError("constraint weights must be nonnegative");
  if (k_fraction <= 0.0 || k_fraction > 1.0) throw ArgumentError("k_fraction must be in (0,1]");
  const int cells = a_prime.cells();
  const int outside = cells - mask.active_count();
  const int k_out = topk_count(k_fraction, outside);
  if (grad) grad->assign(a_prime.values.size(), 0.0);

  double loss = 0.0;
  std::vector<double> products(static_cast<std::size_t>(cells));
  std::vector<int> selected;
  for (int v : span.indices) {
    double guided = 0.0;
    for (int u = 0; u < cells; ++u) {
      if (!mask.cells[static_cast<std::size_t>(u)]) continue;
      const double diff = a_prime.at(u, v) - a_object.at(u, v);
      guided += std::abs(diff);
      if (grad && diff != 0.0) {
        (*grad)[static_cast<std::size_t>(u) * a_prime.tokens + v] += beta * (diff > 0.0 ? 1.0 : -1.0);
      }
    }
    loss += beta * guided;
    if (outside > 0) {
      for (int u = 0; u < cells; ++u) {
        products[static_cast<std::size_t>(u)] = a_prime.at(u, v) * (1 - mask.cells[static_cast<std::size_t>(u)]);
      }
      topk_indices(products, k_out, selected);
      double out_sum = 0.0;
      for (int u : selected) out_sum += products[static_cast<std::size_t>(u)];
      loss += gamma * out_sum / k_out;
      if (grad && gamma != 0.0) {
        for (int u : selected) {
          if (!mask.cells[static_cast<std::size_t>(u)]) {
            (*grad)[static_cast<std::size_t>(u) * a_prime.tokens + v] += gamma / k_out;
          }
        }
      }
    }
  }
  return loss;
}

}  // namespace serial

}  // namespace scenegen::attn
