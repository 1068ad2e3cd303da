#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenegen/backend.hpp"

namespace scenegen::backend {

struct ToyBackendConfig {
  int channels = 16;  // matches embed_dim so queries can reach the whole key space
  int latent_height = 8;
  int latent_width = 8;
  int embed_dim = 16;  // keeps random token keys near-orthogonal so objects do not alias
  int layers = 2;  // layer l pools the latent by 2^l; dims must divide evenly
  int steps = 50;
  std::uint64_t param_seed = 1234;
  double query_gain = 6.0;      // std of the raw query-key scores
  double logit_sharpness = 2.0; // power-law exponent of attention in the raw scores
  double step_gain = 0.25;      // small drift so attention patterns persist once guidance places them
  int image_height = 512;
  int image_width = 512;
};

// Small closed-form diffusion stand-in. Each layer average-pools the latent,
// RMS-normalizes each pooled cell, projects cells to queries, attends over
// hashed token embeddings, and the attention-weighted keys (projected back to
// channels and upsampled) form the noise estimate. Everything is
// deterministic in (param_seed, tokens, z), and the attention map is
// analytically differentiable w.r.t. the latent. Three properties make it a
// usable guidance testbed. Per-cell normalization makes attention locally
// scale-invariant, so a hard guided update inflates a cell's features and
// thereby anneals its own step size (sensitivity falls as 1/rms) instead of
// diverging, while untouched cells stay fully responsive. Log-compressed
// logits (logit = sharpness * asinh(q*k/sqrt(d))) make attention a power law
// in the raw scores, sharp at any score scale. And the output projection
// feeds attended keys back into the queries, so a layout established in the
// early steps reinforces itself across the remaining steps instead of
// washing out.
class ToyBackend : public DenoisingBackend {
 public:
  explicit ToyBackend(ToyBackendConfig config = {});

  int channels() const override { return config_.channels; }
  int latent_height() const override { return config_.latent_height; }
  int latent_width() const override { return config_.latent_width; }
  int total_steps() const override { return config_.steps; }
  const ToyBackendConfig& config() const { return config_; }

  BackendStepResult step(const LatentState& state, const PromptBinding& binding,
                         double guidance_scale) override;

  attn::AttentionMap attention(const LatentState& state, const PromptBinding& binding) override;

  bool supports_gradients() const override { return true; }

  Latent attention_gradient(const LatentState& state, const PromptBinding& binding,
                            const AttentionLossFn& loss_fn) override;

  // Per-layer maps before aggregation; row count varies with the layer grid.
  std::vector<attn::AttentionMap> layer_attention(const Latent& z,
                                                  const std::vector<std::string>& tokens) const;

  ImageU8 decode(const LatentState& state) override;

 private:
  struct LayerForward {
    int h = 0, w = 0;            // pooled grid
    std::vector<double> pooled;  // C x (h*w)
    std::vector<double> normed;  // C x (h*w), pooled after per-cell RMS norm
    std::vector<double> sigma;   // h*w per-cell RMS values
    std::vector<double> queries; // (h*w) x d
    std::vector<double> raw;     // (h*w) x V raw scores, kept for the backward pass
    attn::AttentionMap map;      // (h*w) x V, per_layer
  };

  void check_shape(const Latent& z) const;
  std::vector<double> token_matrix(const std::vector<std::string>& tokens,
                                   const char* kind) const;  // V x d
  LayerForward forward_layer(const Latent& z, int layer, const std::vector<double>& keys,
                             int vocab) const;
  Latent noise_estimate(const Latent& z, const std::vector<std::string>& tokens,
                        std::vector<attn::AttentionMap>* maps_out = nullptr) const;

  ToyBackendConfig config_;
  std::vector<std::vector<double>> wq_;  // per layer, d x C
  std::vector<std::vector<double>> wo_;  // per layer, C x d
};

}  // namespace scenegen::backend
