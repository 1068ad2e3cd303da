#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scenegen/common.hpp"

namespace scenegen {

struct ValidationError : Error {
  using Error::Error;
};

// The raw user request. `category_id` is the benchmark subcategory key when
// the prompt came from a benchmark file, empty otherwise.
struct UserPrompt {
  std::string text;
  std::string category_id;
};

// Canvas-relative box, all fields fractions of the canvas in [0, 1].
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

struct ObjectSpec {
  std::string name;
  BoundingBox box;
  std::vector<std::string> candidates;  // ordered description candidates, >= 1
};

struct LayoutPlan {
  std::string background_prompt;
  std::string negative_prompt;
  std::vector<ObjectSpec> objects;
  std::optional<UserPrompt> source_prompt;
};

// LayoutPlan plus one chosen description index per object.
struct ResolvedPlan {
  LayoutPlan plan;
  std::vector<int> chosen;  // chosen[i] < plan.objects[i].candidates.size()

  const std::string& description(std::size_t i) const {
    return plan.objects[i].candidates[static_cast<std::size_t>(chosen[i])];
  }
};

// Throws ValidationError naming the offending object (or field) on any
// violated invariant: nonempty unique names, nonempty unique candidate
// lists, boxes inside the canvas with positive extent.
void validate_plan(const LayoutPlan& plan);

void validate_box(const BoundingBox& box, const std::string& object_name);

void validate_resolved(const ResolvedPlan& resolved);

}  // namespace scenegen
