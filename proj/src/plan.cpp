#include "scenegen/plan.hpp"

#include <unordered_set>

namespace scenegen {

void validate_box(const BoundingBox& box, const std::string& object_name) {
  const bool ok = box.x >= 0.0 && box.y >= 0.0 && box.w > 0.0 && box.h > 0.0 &&
                  box.x + box.w <= 1.0 && box.y + box.h <= 1.0;
  if (!ok) {
    throw ValidationError("object '" + object_name + "': bounding box outside the unit canvas");
  }
}

void validate_plan(const LayoutPlan& plan) {
  if (plan.objects.empty()) throw ValidationError("plan has no objects");
  std::unordered_set<std::string> names;
  for (const auto& obj : plan.objects) {
    if (trim(obj.name).empty()) throw ValidationError("object with empty name");
    if (!names.insert(obj.name).second) {
      throw ValidationError("object '" + obj.name + "': duplicate name");
    }
    validate_box(obj.box, obj.name);
    if (obj.candidates.empty()) {
      throw ValidationError("object '" + obj.name + "': no description candidates");
    }
    std::unordered_set<std::string> seen;
    for (const auto& cand : obj.candidates) {
      if (!seen.insert(cand).second) {
        throw ValidationError("object '" + obj.name + "': duplicate description candidate");
      }
    }
  }
  if (plan.source_prompt && trim(plan.source_prompt->text).empty()) {
    throw ValidationError("source prompt is empty");
  }
}

void validate_resolved(const ResolvedPlan& resolved) {
  validate_plan(resolved.plan);
  if (resolved.chosen.size() != resolved.plan.objects.size()) {
    throw ValidationError("chosen indices do not cover every object");
  }
  for (std::size_t i = 0; i < resolved.chosen.size(); ++i) {
    const int c = resolved.chosen[i];
    if (c < 0 || c >= static_cast<int>(resolved.plan.objects[i].candidates.size())) {
      throw ValidationError("object '" + resolved.plan.objects[i].name + "': chosen index out of range");
    }
  }
}

}  // namespace scenegen
