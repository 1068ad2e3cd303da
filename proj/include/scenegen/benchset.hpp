#pragma once

#include <string>
#include <vector>

#include "scenegen/plan.hpp"

namespace scenegen::harness {

struct BenchmarkPrompt {
  std::string text;
  std::string category;
  std::string subcategory;
};

struct BenchmarkSet {
  std::vector<BenchmarkPrompt> prompts;  // file order
  std::string source;                    // optional provenance note from the file
  std::string path;
  int count() const { return static_cast<int>(prompts.size()); }
};

// The canonical category tree. Strict loading enforces exactly these two
// categories, subcategories drawn from these names under the right parent,
// and prompt uniqueness across the whole set.
const std::vector<std::string>& realistic_subcategories();
const std::vector<std::string>& creative_subcategories();

// JSON format: {"categories": {category: {subcategory: [prompt, ...]}},
// "source": optional string}.
BenchmarkSet load_benchmark(const std::string& path, bool strict);
BenchmarkSet parse_benchmark(const std::string& text, bool strict);

}  // namespace scenegen::harness
