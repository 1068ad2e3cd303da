#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scenegen/attention.hpp"
#include "scenegen/backend.hpp"
#include "scenegen/plan.hpp"

namespace scenegen::sampler {

// A stored per-object trajectory is missing the step being requested.
struct TraceGapError : Error {
  using Error::Error;
};

// Object traces and the scene pass disagree (length, shape, or token span).
struct ConsistencyError : Error {
  using Error::Error;
};

struct GuidanceConfig {
  attn::ConstraintWeights weights;  // alpha, beta, gamma, k_fraction
  int steps = 50;
  double replace_fraction = 0.3;  // leading fraction of steps with latent replacement
  double guidance_scale = 7.5;
  int grad_updates_per_step = 1;
  std::uint64_t seed = 0;
  double saliency_quantile = 0.5;
};

// "<background> with a <name>, <description>"; a missing background falls
// back to "A scene" and an empty description drops its clause.
std::string compose_object_prompt(const std::string& background, const std::string& name,
                                  const std::string& description);

// Background plus every object clause, joined "... with a X, dx and a Y, dy".
std::string compose_scene_prompt(const ResolvedPlan& resolved);

// Guidance strength decays linearly to zero across the first half of the
// schedule and stays zero after.
double alpha_at(double alpha0, int step_index, int total_steps);

// z - alpha * grad. alpha == 0 returns z bit-identically; a non-finite
// gradient raises NumericalError.
Latent update_latent(const Latent& z, const Latent& grad, double alpha);

struct ObjectTrace {
  std::string name;
  std::string prompt;
  BoundingBox box;
  attn::TokenSpan span;                        // span inside the object prompt
  std::vector<Latent> latents;                 // latents[s]: z after step s (timestep steps-1-s)
  std::vector<attn::AttentionMap> attentions;  // attentions[s]: aggregated map entering step s
  std::vector<double> losses;                  // object constraint loss per step
  std::vector<double> in_box;                  // in-box attention fraction per step
};

ObjectTrace generate_object(backend::DenoisingBackend& backend, const std::string& background,
                            const std::string& negative, const std::string& name,
                            const std::string& description, const BoundingBox& box,
                            const Latent& initial, const GuidanceConfig& config);

// Copies trace latent cells under mask into the scene latent at one step.
void replace_latent(Latent& scene, const ObjectTrace& trace, const attn::BoxMask& mask,
                    int step_index);

struct SceneStepSnapshot {
  int step_index = 0;
  int t_before = 0;
  bool replaced = false;                      // replacement window active at this step
  const Latent* z = nullptr;                  // after step (and replacement, when active)
  const std::vector<attn::BoxMask>* masks = nullptr;  // per-object replacement masks
};
using StepObserver = std::function<void(const SceneStepSnapshot&)>;

struct SceneResult {
  Latent final_z;
  std::string prompt;
  int replace_steps = 0;
  std::vector<std::vector<double>> bg_losses;  // [object][step]
  std::vector<std::vector<double>> bg_in_box;  // [object][step]
};

SceneResult integrate_background(backend::DenoisingBackend& backend, const ResolvedPlan& resolved,
                                 const std::vector<ObjectTrace>& traces,
                                 const GuidanceConfig& config,
                                 const StepObserver& observer = nullptr);

struct PipelineResult {
  ResolvedPlan resolved;
  std::vector<ObjectTrace> traces;
  SceneResult scene;
};

// Shared-noise object passes followed by the integrated scene pass.
PipelineResult run_pipeline(backend::DenoisingBackend& backend, const ResolvedPlan& resolved,
                            const GuidanceConfig& config, const StepObserver& observer = nullptr);

}  // namespace scenegen::sampler
