#include "scenegen/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace scenegen::sampler {

namespace {

attn::TokenSpan iota_span(int n) {
  attn::TokenSpan span;
  for (int i = 0; i < n; ++i) span.indices.push_back(i);
  return span;
}

// Columns `src_span` of `map`, as a narrow map reindexed 0..span-1.
attn::AttentionMap extract_columns(const attn::AttentionMap& map, const attn::TokenSpan& src_span) {
  attn::AttentionMap out(map.height, map.width, static_cast<int>(src_span.indices.size()));
  out.provenance = map.provenance;
  for (int u = 0; u < map.cells(); ++u) {
    for (std::size_t j = 0; j < src_span.indices.size(); ++j) {
      out.at(u, static_cast<int>(j)) = map.at(u, src_span.indices[j]);
    }
  }
  return out;
}

int replacement_steps(double fraction, int steps) {
  if (fraction <= 0.0) return 0;
  return std::min(steps, static_cast<int>(std::ceil(fraction * steps)));
}

attn::AttentionMap aggregate_step_attention(const backend::BackendStepResult& step,
                                            const backend::DenoisingBackend& backend) {
  return attn::aggregate_attention(step.attention_layers, backend.latent_height(),
                                   backend.latent_width());
}

}  // namespace

std::string compose_object_prompt(const std::string& background, const std::string& name,
                                  const std::string& description) {
  std::string prompt = background.empty() ? std::string("A scene") : background;
  prompt += " with a " + name;
  if (!description.empty()) prompt += ", " + description;
  return prompt;
}

std::string compose_scene_prompt(const ResolvedPlan& resolved) {
  std::string prompt = resolved.plan.background_prompt.empty() ? std::string("A scene")
                                                               : resolved.plan.background_prompt;
  for (std::size_t i = 0; i < resolved.plan.objects.size(); ++i) {
    prompt += (i == 0 ? " with a " : " and a ") + resolved.plan.objects[i].name;
    const std::string& desc = resolved.description(static_cast<int>(i));
    if (!desc.empty()) prompt += ", " + desc;
  }
  return prompt;
}

double alpha_at(double alpha0, int step_index, int total_steps) {
  if (total_steps < 1) throw ArgumentError("total_steps must be positive");
  const double half = std::ceil(total_steps / 2.0);
  if (step_index >= half) return 0.0;
  return alpha0 * (1.0 - step_index / half);
}

Latent update_latent(const Latent& z, const Latent& grad, double alpha) {
  if (alpha == 0.0) return z;
  if (!z.same_shape(grad)) throw ShapeError("latent and gradient shapes differ");
  if (!grad.all_finite()) throw NumericalError("non-finite constraint gradient");
  Latent out = z;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= alpha * grad.v[i];
  if (!out.all_finite()) throw NumericalError("latent left the finite range during guidance");
  return out;
}

ObjectTrace generate_object(backend::DenoisingBackend& backend, const std::string& background,
                            const std::string& negative, const std::string& name,
                            const std::string& description, const BoundingBox& box,
                            const Latent& initial, const GuidanceConfig& config) {
  if (config.steps < 1) throw ArgumentError("steps must be positive");
  validate_box(box, name);

  ObjectTrace trace;
  trace.name = name;
  trace.box = box;
  trace.prompt = compose_object_prompt(background, name, description);
  const auto binding = backend::tokenize_and_bind(trace.prompt, {name}, negative);
  trace.span = binding.spans.front();
  const attn::BoxMask mask = attn::box_to_mask(box, backend.latent_height(), backend.latent_width());

  backend::LatentState state;
  state.t = config.steps;
  state.z = initial;

  for (int s = 0; s < config.steps; ++s) {
    const double alpha = alpha_at(config.weights.alpha, s, config.steps);
    if (alpha > 0.0) {
      const backend::AttentionLossFn loss_fn = [&](const attn::AttentionMap& a,
                                                   std::vector<double>* grad) {
        return attn::object_constraint_loss(a, mask, trace.span, config.weights.k_fraction, grad);
      };
      for (int g = 0; g < config.grad_updates_per_step; ++g) {
        const Latent grad_z = backend.attention_gradient(state, binding, loss_fn);
        state.z = update_latent(state.z, grad_z, alpha);
      }
    }

    const auto step = backend.step(state, binding, config.guidance_scale);
    attn::AttentionMap aggregated = aggregate_step_attention(step, backend);
    trace.losses.push_back(attn::object_constraint_loss(aggregated, mask, trace.span,
                                                        config.weights.k_fraction, nullptr));
    trace.in_box.push_back(attn::in_box_fraction(aggregated, mask, trace.span));
    trace.attentions.push_back(std::move(aggregated));
    state = step.next;
    trace.latents.push_back(state.z);
  }
  return trace;
}

void replace_latent(Latent& scene, const ObjectTrace& trace, const attn::BoxMask& mask,
                    int step_index) {
  if (step_index < 0 || step_index >= static_cast<int>(trace.latents.size()))
    throw TraceGapError("object '" + trace.name + "' has no stored latent for step " +
                        std::to_string(step_index));
  const Latent& source = trace.latents[static_cast<std::size_t>(step_index)];
  if (!scene.same_shape(source)) throw ConsistencyError("trace latent shape differs from scene");
  if (mask.height != scene.height || mask.width != scene.width)
    throw ShapeError("replacement mask does not match the latent grid");
  for (int c = 0; c < scene.channels; ++c) {
    for (int u = 0; u < scene.height * scene.width; ++u) {
      if (mask.cells[static_cast<std::size_t>(u)]) scene.atc(c, u) = source.atc(c, u);
    }
  }
}

SceneResult integrate_background(backend::DenoisingBackend& backend, const ResolvedPlan& resolved,
                                 const std::vector<ObjectTrace>& traces,
                                 const GuidanceConfig& config, const StepObserver& observer) {
  validate_resolved(resolved);
  const int n = static_cast<int>(resolved.plan.objects.size());
  if (static_cast<int>(traces.size()) != n)
    throw ConsistencyError("trace count does not match plan objects");
  for (const auto& trace : traces) {
    if (static_cast<int>(trace.latents.size()) != config.steps ||
        static_cast<int>(trace.attentions.size()) != config.steps)
      throw ConsistencyError("object '" + trace.name + "' trace does not cover " +
                             std::to_string(config.steps) + " steps");
  }

  SceneResult result;
  result.prompt = compose_scene_prompt(resolved);
  result.replace_steps = replacement_steps(config.replace_fraction, config.steps);
  result.bg_losses.assign(static_cast<std::size_t>(n), {});
  result.bg_in_box.assign(static_cast<std::size_t>(n), {});

  std::vector<std::string> names;
  for (const auto& obj : resolved.plan.objects) names.push_back(obj.name);
  const auto binding =
      backend::tokenize_and_bind(result.prompt, names, resolved.plan.negative_prompt);

  const int H = backend.latent_height();
  const int W = backend.latent_width();
  std::vector<attn::BoxMask> box_masks;
  for (const auto& obj : resolved.plan.objects)
    box_masks.push_back(attn::box_to_mask(obj.box, H, W));
  for (int i = 0; i < n; ++i) {
    if (traces[static_cast<std::size_t>(i)].span.indices.size() !=
        binding.spans[static_cast<std::size_t>(i)].indices.size())
      throw ConsistencyError("object '" + names[static_cast<std::size_t>(i)] +
                             "' has mismatched token spans between passes");
  }

  // Same seed, same draw order: the scene starts from the identical noise the
  // object passes started from, which is what makes early replacement coherent.
  backend::LatentState state;
  state.t = config.steps;
  state.z = backend::make_shared_initial_latent(config.seed, backend.channels(), H, W);

  for (int s = 0; s < config.steps; ++s) {
    const double alpha = alpha_at(config.weights.alpha, s, config.steps);
    if (alpha > 0.0 && n > 0) {
      // One summed loss over all objects; its gradient lands on the scene
      // map columns each object's span occupies.
      const backend::AttentionLossFn loss_fn = [&](const attn::AttentionMap& a,
                                                   std::vector<double>* grad) {
        if (grad) grad->assign(a.values.size(), 0.0);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
          const auto& scene_span = binding.spans[static_cast<std::size_t>(i)];
          const auto& trace = traces[static_cast<std::size_t>(i)];
          const attn::AttentionMap a_sub = extract_columns(a, scene_span);
          const attn::AttentionMap o_sub =
              extract_columns(trace.attentions[static_cast<std::size_t>(s)], trace.span);
          std::vector<double> grad_sub;
          total += attn::background_constraint_loss(
              a_sub, o_sub, box_masks[static_cast<std::size_t>(i)], iota_span(a_sub.tokens),
              config.weights.beta, config.weights.gamma, config.weights.k_fraction,
              grad ? &grad_sub : nullptr);
          if (grad) {
            for (int u = 0; u < a.cells(); ++u) {
              for (std::size_t j = 0; j < scene_span.indices.size(); ++j) {
                (*grad)[static_cast<std::size_t>(u) * static_cast<std::size_t>(a.tokens) +
                        static_cast<std::size_t>(scene_span.indices[j])] +=
                    grad_sub[static_cast<std::size_t>(u) * static_cast<std::size_t>(a_sub.tokens) +
                             j];
              }
            }
          }
        }
        return total;
      };
      for (int g = 0; g < config.grad_updates_per_step; ++g) {
        const Latent grad_z = backend.attention_gradient(state, binding, loss_fn);
        state.z = update_latent(state.z, grad_z, alpha);
      }
    }

    const auto step = backend.step(state, binding, config.guidance_scale);
    const attn::AttentionMap aggregated = aggregate_step_attention(step, backend);
    for (int i = 0; i < n; ++i) {
      const auto& scene_span = binding.spans[static_cast<std::size_t>(i)];
      const auto& trace = traces[static_cast<std::size_t>(i)];
      const attn::AttentionMap a_sub = extract_columns(aggregated, scene_span);
      const attn::AttentionMap o_sub =
          extract_columns(trace.attentions[static_cast<std::size_t>(s)], trace.span);
      result.bg_losses[static_cast<std::size_t>(i)].push_back(attn::background_constraint_loss(
          a_sub, o_sub, box_masks[static_cast<std::size_t>(i)], iota_span(a_sub.tokens),
          config.weights.beta, config.weights.gamma, config.weights.k_fraction, nullptr));
      result.bg_in_box[static_cast<std::size_t>(i)].push_back(
          attn::in_box_fraction(aggregated, box_masks[static_cast<std::size_t>(i)], scene_span));
    }
    state = step.next;

    const bool replacing = s < result.replace_steps;
    std::vector<attn::BoxMask> masks;
    if (replacing) {
      // Plan order; a later object overwrites earlier ones where masks overlap.
      for (int i = 0; i < n; ++i) {
        const auto& trace = traces[static_cast<std::size_t>(i)];
        attn::BoxMask mask = attn::attention_to_saliency_mask(
            trace.attentions[static_cast<std::size_t>(s)], trace.span,
            box_masks[static_cast<std::size_t>(i)], config.saliency_quantile);
        replace_latent(state.z, trace, mask, s);
        masks.push_back(std::move(mask));
      }
    }

    if (observer) {
      SceneStepSnapshot snap;
      snap.step_index = s;
      snap.t_before = config.steps - s;
      snap.replaced = replacing;
      snap.z = &state.z;
      snap.masks = &masks;
      observer(snap);
    }
  }

  result.final_z = state.z;
  return result;
}

PipelineResult run_pipeline(backend::DenoisingBackend& backend, const ResolvedPlan& resolved,
                            const GuidanceConfig& config, const StepObserver& observer) {
  validate_resolved(resolved);
  PipelineResult out;
  out.resolved = resolved;

  const Latent initial = backend::make_shared_initial_latent(
      config.seed, backend.channels(), backend.latent_height(), backend.latent_width());

  for (std::size_t i = 0; i < resolved.plan.objects.size(); ++i) {
    const auto& obj = resolved.plan.objects[i];
    out.traces.push_back(generate_object(backend, resolved.plan.background_prompt,
                                         resolved.plan.negative_prompt, obj.name,
                                         resolved.description(static_cast<int>(i)), obj.box,
                                         initial, config));
  }
  out.scene = integrate_background(backend, resolved, out.traces, config, observer);
  return out;
}

}  // namespace scenegen::sampler
