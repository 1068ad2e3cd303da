#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "scenegen/array.hpp"
#include "scenegen/attention.hpp"
#include "scenegen/common.hpp"
#include "scenegen/rng.hpp"

namespace scenegen::backend {

struct BindingError : Error {
  using Error::Error;
};

// Thrown by optional capabilities a backend does not implement.
struct CapabilityError : Error {
  using Error::Error;
};

struct ScheduleExhaustedError : Error {
  using Error::Error;
};

struct PrematureDecodeError : Error {
  using Error::Error;
};

// Lowercased alphanumeric runs with a leading "<bos>" marker, so every
// prompt (including the empty one) has at least one token.
std::vector<std::string> tokenize(const std::string& prompt);

struct PromptBinding {
  std::string text;
  std::string negative_text;
  std::vector<std::string> tokens;
  std::vector<std::string> negative_tokens;
  std::vector<std::string> names;      // bound object names, request order
  std::vector<attn::TokenSpan> spans;  // pairwise disjoint, parallel to names
};

// Binds each name to the first occurrence of its token run in the prompt,
// skipping positions already claimed by an earlier name (so duplicate names
// land on successive occurrences). A name whose tokens never appear raises
// BindingError.
PromptBinding tokenize_and_bind(const std::string& text, const std::vector<std::string>& names,
                                const std::string& negative_text = "");

struct LatentState {
  int t = 0;  // remaining steps; step() moves t -> t-1, decode() requires t == 0
  Latent z;
};

struct BackendStepResult {
  LatentState next;                                  // t decremented by one
  std::vector<attn::AttentionMap> attention_layers;  // conditional branch, per layer
  Latent noise_prediction;                           // guidance-combined estimate
};

// Scalar loss over an aggregated attention map; when `grad` is non-null the
// implementation must also write d(loss)/d(map value) into it, one entry per
// map value.
using AttentionLossFn = std::function<double(const attn::AttentionMap&, std::vector<double>* grad)>;

class DenoisingBackend {
 public:
  virtual ~DenoisingBackend() = default;

  virtual int channels() const = 0;
  virtual int latent_height() const = 0;
  virtual int latent_width() const = 0;
  virtual int total_steps() const = 0;

  virtual BackendStepResult step(const LatentState& state, const PromptBinding& binding,
                                 double guidance_scale) = 0;

  // Aggregated conditional cross-attention at the current latent.
  virtual attn::AttentionMap attention(const LatentState& state, const PromptBinding& binding) = 0;

  virtual bool supports_gradients() const { return false; }

  // Gradient of loss_fn(aggregated attention) with respect to the latent.
  virtual Latent attention_gradient(const LatentState& state, const PromptBinding& binding,
                                    const AttentionLossFn& loss_fn) {
    (void)state;
    (void)binding;
    (void)loss_fn;
    throw CapabilityError("backend does not support attention gradients");
  }

  virtual ImageU8 decode(const LatentState& state) = 0;
};

// Seeded standard-normal draw. Step 1 and Step 2 pass the same seed, so every
// branch of a run denoises from identical noise.
Latent make_shared_initial_latent(std::uint64_t seed, int channels, int height, int width);

}  // namespace scenegen::backend
