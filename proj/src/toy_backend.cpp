#include "scenegen/toy_backend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scenegen::backend {

namespace {

std::vector<double> gaussian_matrix(std::uint64_t seed, int rows, int cols, double scale) {
  Rng rng(seed);
  std::vector<double> m(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (auto& x : m) x = rng.gaussian() * scale;
  return m;
}

struct Tap {
  int y0, y1, x0, x1;
  double fy, fx;
};

// Must mirror attn::resample_bilinear exactly; the gradient scatter below is
// its transpose.
Tap bilinear_tap(int ty, int tx, int th, int tw, int sh, int sw) {
  Tap t;
  const double sy = (ty + 0.5) * sh / th - 0.5;
  t.y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, sh - 1);
  t.y1 = std::min(t.y0 + 1, sh - 1);
  t.fy = std::clamp(sy - std::floor(sy), 0.0, 1.0);
  const double sx = (tx + 0.5) * sw / tw - 0.5;
  t.x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, sw - 1);
  t.x1 = std::min(t.x0 + 1, sw - 1);
  t.fx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
  return t;
}

}  // namespace

ToyBackend::ToyBackend(ToyBackendConfig config) : config_(config) {
  if (config_.channels < 1 || config_.embed_dim < 1 || config_.layers < 1 || config_.steps < 1)
    throw ConfigError("toy backend dimensions must be positive");
  if (config_.query_gain <= 0.0 || config_.logit_sharpness <= 0.0 || config_.step_gain < 0.0)
    throw ConfigError("toy backend gains must be positive");
  for (int l = 0; l < config_.layers; ++l) {
    const int p = 1 << l;
    if (config_.latent_height % p != 0 || config_.latent_width % p != 0)
      throw ConfigError("latent grid must be divisible by 2^layer");
    // Cells are RMS-normalized before the projection, so the raw query-key
    // scores sit near `query_gain` std on every layer.
    wq_.push_back(gaussian_matrix(config_.param_seed ^ fnv1a64("wq" + std::to_string(l)),
                                  config_.embed_dim, config_.channels,
                                  config_.query_gain / std::sqrt(config_.channels)));
    // W_o = -W_q^T (scaled): subtracting the noise estimate then moves every
    // query toward its attention-weighted mean key, so a layout the early
    // steps (or the guidance) establish reinforces itself instead of washing
    // out.  W_q W_q^T ~ query_gain^2 I and the norm Jacobian contributes ~p
    // at unit latent std, so this scale makes the per-step query drift
    // roughly the attended key itself times the step size.
    const auto& wq = wq_.back();
    const double wo_scale = 1.0 / (config_.query_gain * config_.query_gain * p);
    std::vector<double> wo(static_cast<std::size_t>(config_.channels) *
                           static_cast<std::size_t>(config_.embed_dim));
    for (int c = 0; c < config_.channels; ++c) {
      for (int r = 0; r < config_.embed_dim; ++r) {
        wo[static_cast<std::size_t>(c) * config_.embed_dim + static_cast<std::size_t>(r)] =
            -wq[static_cast<std::size_t>(r) * config_.channels + static_cast<std::size_t>(c)] *
            wo_scale;
      }
    }
    wo_.push_back(std::move(wo));
  }
}

void ToyBackend::check_shape(const Latent& z) const {
  if (z.channels != config_.channels || z.height != config_.latent_height ||
      z.width != config_.latent_width)
    throw ShapeError("latent shape does not match backend configuration");
}

std::vector<double> ToyBackend::token_matrix(const std::vector<std::string>& tokens,
                                             const char* kind) const {
  if (tokens.empty()) throw ArgumentError("token sequence is empty");
  const int d = config_.embed_dim;
  std::vector<double> m(tokens.size() * static_cast<std::size_t>(d));
  for (std::size_t v = 0; v < tokens.size(); ++v) {
    Rng rng(config_.param_seed ^ fnv1a64(std::string(kind) + ":" + tokens[v]));
    for (int r = 0; r < d; ++r)
      m[v * static_cast<std::size_t>(d) + static_cast<std::size_t>(r)] = rng.gaussian();
  }
  return m;
}

ToyBackend::LayerForward ToyBackend::forward_layer(const Latent& z, int layer,
                                                   const std::vector<double>& keys,
                                                   int vocab) const {
  const int p = 1 << layer;
  const int C = config_.channels;
  const int d = config_.embed_dim;
  LayerForward f;
  f.h = config_.latent_height / p;
  f.w = config_.latent_width / p;
  const int cells = f.h * f.w;

  f.pooled.assign(static_cast<std::size_t>(C) * static_cast<std::size_t>(cells), 0.0);
  for (int c = 0; c < C; ++c) {
    for (int gy = 0; gy < f.h; ++gy) {
      for (int gx = 0; gx < f.w; ++gx) {
        double acc = 0.0;
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx) acc += z.at(c, gy * p + dy, gx * p + dx);
        f.pooled[static_cast<std::size_t>(c) * cells + static_cast<std::size_t>(gy * f.w + gx)] =
            acc / (p * p);
      }
    }
  }

  f.normed.assign(f.pooled.size(), 0.0);
  f.sigma.assign(static_cast<std::size_t>(cells), 0.0);
#pragma omp parallel for schedule(static)
  for (int u = 0; u < cells; ++u) {
    double ms = 0.0;
    for (int c = 0; c < C; ++c) {
      const double x = f.pooled[static_cast<std::size_t>(c) * cells + static_cast<std::size_t>(u)];
      ms += x * x;
    }
    const double sigma = std::sqrt(ms / C + 1e-6);
    f.sigma[static_cast<std::size_t>(u)] = sigma;
    for (int c = 0; c < C; ++c)
      f.normed[static_cast<std::size_t>(c) * cells + static_cast<std::size_t>(u)] =
          f.pooled[static_cast<std::size_t>(c) * cells + static_cast<std::size_t>(u)] / sigma;
  }

  f.queries.assign(static_cast<std::size_t>(cells) * static_cast<std::size_t>(d), 0.0);
  const auto& wq = wq_[static_cast<std::size_t>(layer)];
#pragma omp parallel for schedule(static)
  for (int u = 0; u < cells; ++u) {
    for (int r = 0; r < d; ++r) {
      double acc = 0.0;
      for (int c = 0; c < C; ++c) {
        acc += wq[static_cast<std::size_t>(r) * C + static_cast<std::size_t>(c)] *
               f.normed[static_cast<std::size_t>(c) * cells + static_cast<std::size_t>(u)];
      }
      f.queries[static_cast<std::size_t>(u) * d + static_cast<std::size_t>(r)] = acc;
    }
  }

  f.map = attn::AttentionMap(f.h, f.w, vocab);
  f.raw.assign(static_cast<std::size_t>(cells) * static_cast<std::size_t>(vocab), 0.0);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
#pragma omp parallel for schedule(static)
  for (int u = 0; u < cells; ++u) {
    double row_max = -std::numeric_limits<double>::infinity();
    std::vector<double> logits(static_cast<std::size_t>(vocab));
    for (int v = 0; v < vocab; ++v) {
      double acc = 0.0;
      for (int r = 0; r < d; ++r) {
        acc += f.queries[static_cast<std::size_t>(u) * d + static_cast<std::size_t>(r)] *
               keys[static_cast<std::size_t>(v) * d + static_cast<std::size_t>(r)];
      }
      const double raw = acc * inv_sqrt_d;
      f.raw[static_cast<std::size_t>(u) * vocab + static_cast<std::size_t>(v)] = raw;
      // asinh compresses the score to a log scale, so attention is a power
      // law of exponent `logit_sharpness` in the raw scores: rows stay sharp
      // at any score magnitude while the backward slope 1/sqrt(raw^2+1)
      // shrinks as guidance inflates the latent.
      logits[static_cast<std::size_t>(v)] = config_.logit_sharpness * std::asinh(raw);
      row_max = std::max(row_max, logits[static_cast<std::size_t>(v)]);
    }
    double denom = 0.0;
    for (int v = 0; v < vocab; ++v) {
      const double e = std::exp(logits[static_cast<std::size_t>(v)] - row_max);
      f.map.at(u, v) = e;
      denom += e;
    }
    for (int v = 0; v < vocab; ++v) f.map.at(u, v) /= denom;
  }
  return f;
}

std::vector<attn::AttentionMap> ToyBackend::layer_attention(
    const Latent& z, const std::vector<std::string>& tokens) const {
  check_shape(z);
  const auto keys = token_matrix(tokens, "key");
  const int vocab = static_cast<int>(tokens.size());
  std::vector<attn::AttentionMap> maps;
  for (int l = 0; l < config_.layers; ++l) maps.push_back(forward_layer(z, l, keys, vocab).map);
  return maps;
}

attn::AttentionMap ToyBackend::attention(const LatentState& state, const PromptBinding& binding) {
  const auto maps = layer_attention(state.z, binding.tokens);
  return attn::aggregate_attention(maps, config_.latent_height, config_.latent_width);
}

Latent ToyBackend::noise_estimate(const Latent& z, const std::vector<std::string>& tokens,
                                  std::vector<attn::AttentionMap>* maps_out) const {
  // Values are the keys themselves; combined with W_o = -W_q^T this gives the
  // attention lock-in described in the constructor.
  const auto keys = token_matrix(tokens, "key");
  const auto& vals = keys;
  const int vocab = static_cast<int>(tokens.size());
  const int C = config_.channels;
  const int d = config_.embed_dim;

  Latent eps(C, config_.latent_height, config_.latent_width);
  for (int l = 0; l < config_.layers; ++l) {
    const LayerForward f = forward_layer(z, l, keys, vocab);
    const int cells = f.h * f.w;
    const auto& wo = wo_[static_cast<std::size_t>(l)];
    const int p = 1 << l;
#pragma omp parallel for schedule(static)
    for (int u = 0; u < cells; ++u) {
      std::vector<double> o(static_cast<std::size_t>(d), 0.0);
      for (int v = 0; v < vocab; ++v) {
        const double a = f.map.at(u, v);
        for (int r = 0; r < d; ++r)
          o[static_cast<std::size_t>(r)] +=
              a * vals[static_cast<std::size_t>(v) * d + static_cast<std::size_t>(r)];
      }
      const int gy = u / f.w;
      const int gx = u % f.w;
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int r = 0; r < d; ++r)
          acc += wo[static_cast<std::size_t>(c) * d + static_cast<std::size_t>(r)] *
                 o[static_cast<std::size_t>(r)];
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx) eps.at(c, gy * p + dy, gx * p + dx) += acc;
      }
    }
    if (maps_out) maps_out->push_back(f.map);
  }
  for (auto& x : eps.v) x /= config_.layers;
  return eps;
}

BackendStepResult ToyBackend::step(const LatentState& state, const PromptBinding& binding,
                                   double guidance_scale) {
  if (state.t <= 0) throw ScheduleExhaustedError("denoising schedule exhausted at t=0");
  check_shape(state.z);

  BackendStepResult result;
  const Latent eps_cond = noise_estimate(state.z, binding.tokens, &result.attention_layers);
  result.noise_prediction = eps_cond;
  if (guidance_scale != 1.0) {
    const Latent eps_neg = noise_estimate(state.z, binding.negative_tokens);
    for (std::size_t i = 0; i < result.noise_prediction.v.size(); ++i)
      result.noise_prediction.v[i] =
          eps_neg.v[i] + guidance_scale * (eps_cond.v[i] - eps_neg.v[i]);
  }

  result.next.t = state.t - 1;
  result.next.z = state.z;
  const double eta = config_.step_gain * 0.02;
  for (std::size_t i = 0; i < result.next.z.v.size(); ++i)
    result.next.z.v[i] -= eta * result.noise_prediction.v[i];
  return result;
}

Latent ToyBackend::attention_gradient(const LatentState& state, const PromptBinding& binding,
                                      const AttentionLossFn& loss_fn) {
  check_shape(state.z);
  const int H = config_.latent_height;
  const int W = config_.latent_width;
  const auto& tokens = binding.tokens;
  const int vocab = static_cast<int>(tokens.size());
  const auto keys = token_matrix(tokens, "key");
  const int C = config_.channels;
  const int d = config_.embed_dim;

  std::vector<LayerForward> fwd;
  for (int l = 0; l < config_.layers; ++l) fwd.push_back(forward_layer(state.z, l, keys, vocab));

  // Raw aggregate (pre-normalization) so the division by the max can be
  // differentiated, including the argmax term.
  const std::size_t agg_n = static_cast<std::size_t>(H) * W * static_cast<std::size_t>(vocab);
  std::vector<double> raw(agg_n, 0.0);
  for (const auto& f : fwd) {
    const attn::AttentionMap r = attn::resample_bilinear(f.map, H, W);
    for (std::size_t i = 0; i < agg_n; ++i) raw[i] += r.values[i];
  }
  double m = 0.0;
  std::size_t pmax = 0;
  for (std::size_t i = 0; i < agg_n; ++i) {
    if (raw[i] > m) {
      m = raw[i];
      pmax = i;
    }
  }
  if (m <= 0.0) throw NumericalError("aggregated attention collapsed to zero");

  attn::AttentionMap aggregated(H, W, vocab);
  aggregated.provenance = attn::Provenance::aggregated;
  for (std::size_t i = 0; i < agg_n; ++i) aggregated.values[i] = raw[i] / m;

  std::vector<double> g_agg;
  loss_fn(aggregated, &g_agg);
  if (g_agg.size() != agg_n)
    throw ShapeError("loss gradient size does not match the aggregated map");

  std::vector<double> g_raw(agg_n);
  double inner = 0.0;
  for (std::size_t i = 0; i < agg_n; ++i) inner += g_agg[i] * aggregated.values[i];
  for (std::size_t i = 0; i < agg_n; ++i) g_raw[i] = g_agg[i] / m;
  g_raw[pmax] -= inner / m;

  Latent dz(C, H, W);
  for (int l = 0; l < config_.layers; ++l) {
    const LayerForward& f = fwd[static_cast<std::size_t>(l)];
    const int cells = f.h * f.w;

    // Transpose of the bilinear resample, column by column.
    std::vector<double> g_map(static_cast<std::size_t>(cells) * static_cast<std::size_t>(vocab),
                              0.0);
#pragma omp parallel for schedule(static)
    for (int v = 0; v < vocab; ++v) {
      for (int ty = 0; ty < H; ++ty) {
        for (int tx = 0; tx < W; ++tx) {
          const Tap t = bilinear_tap(ty, tx, H, W, f.h, f.w);
          const double g =
              g_raw[static_cast<std::size_t>(ty * W + tx) * vocab + static_cast<std::size_t>(v)];
          if (g == 0.0) continue;
          g_map[static_cast<std::size_t>(t.y0 * f.w + t.x0) * vocab + static_cast<std::size_t>(v)] +=
              (1 - t.fy) * (1 - t.fx) * g;
          g_map[static_cast<std::size_t>(t.y0 * f.w + t.x1) * vocab + static_cast<std::size_t>(v)] +=
              (1 - t.fy) * t.fx * g;
          g_map[static_cast<std::size_t>(t.y1 * f.w + t.x0) * vocab + static_cast<std::size_t>(v)] +=
              t.fy * (1 - t.fx) * g;
          g_map[static_cast<std::size_t>(t.y1 * f.w + t.x1) * vocab + static_cast<std::size_t>(v)] +=
              t.fy * t.fx * g;
        }
      }
    }

    const auto& wq = wq_[static_cast<std::size_t>(l)];
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    const int p = 1 << l;
#pragma omp parallel for schedule(static)
    for (int u = 0; u < cells; ++u) {
      // Softmax backprop on the row, then chain through the asinh logit to
      // the queries and the latent.
      double dot = 0.0;
      for (int v = 0; v < vocab; ++v)
        dot += g_map[static_cast<std::size_t>(u) * vocab + static_cast<std::size_t>(v)] *
               f.map.at(u, v);
      std::vector<double> dh(static_cast<std::size_t>(d), 0.0);
      for (int v = 0; v < vocab; ++v) {
        const double ds =
            f.map.at(u, v) *
            (g_map[static_cast<std::size_t>(u) * vocab + static_cast<std::size_t>(v)] - dot);
        const double raw = f.raw[static_cast<std::size_t>(u) * vocab + static_cast<std::size_t>(v)];
        const double draw = ds * config_.logit_sharpness / std::sqrt(raw * raw + 1.0);
        for (int r = 0; r < d; ++r)
          dh[static_cast<std::size_t>(r)] +=
              draw * keys[static_cast<std::size_t>(v) * d + static_cast<std::size_t>(r)] *
              inv_sqrt_d;
      }
      std::vector<double> dn(static_cast<std::size_t>(C), 0.0);
      for (int c = 0; c < C; ++c) {
        for (int r = 0; r < d; ++r)
          dn[static_cast<std::size_t>(c)] +=
              wq[static_cast<std::size_t>(r) * C + static_cast<std::size_t>(c)] *
              dh[static_cast<std::size_t>(r)];
      }
      // Backward through the per-cell RMS norm: dx = (dn - n (dn.n)/C) / sigma.
      double dn_dot_n = 0.0;
      for (int c = 0; c < C; ++c)
        dn_dot_n += dn[static_cast<std::size_t>(c)] *
                    f.normed[static_cast<std::size_t>(c) * cells + static_cast<std::size_t>(u)];
      const double sigma = f.sigma[static_cast<std::size_t>(u)];
      const int gy = u / f.w;
      const int gx = u % f.w;
      for (int c = 0; c < C; ++c) {
        const double dp =
            (dn[static_cast<std::size_t>(c)] -
             f.normed[static_cast<std::size_t>(c) * cells + static_cast<std::size_t>(u)] *
                 dn_dot_n / C) /
            sigma;
        const double share = dp / (p * p);
        // Blocks are disjoint across u, so the parallel writes cannot race.
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx) dz.at(c, gy * p + dy, gx * p + dx) += share;
      }
    }
  }
  return dz;
}

ImageU8 ToyBackend::decode(const LatentState& state) {
  if (state.t != 0)
    throw PrematureDecodeError("decode requires a fully denoised latent (t=" +
                               std::to_string(state.t) + ")");
  check_shape(state.z);
  ImageU8 img(config_.image_height, config_.image_width);
  const int H = config_.latent_height;
  const int W = config_.latent_width;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < img.height; ++y) {
    const int ly = std::min(y * H / img.height, H - 1);
    for (int x = 0; x < img.width; ++x) {
      const int lx = std::min(x * W / img.width, W - 1);
      for (int c = 0; c < 3; ++c) {
        const int ch = std::min(c, config_.channels - 1);
        const double v = 127.5 + 64.0 * state.z.at(ch, ly, lx);
        img.rgb[(static_cast<std::size_t>(y) * img.width + static_cast<std::size_t>(x)) * 3 +
                static_cast<std::size_t>(c)] =
            static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
      }
    }
  }
  return img;
}

}  // namespace scenegen::backend
