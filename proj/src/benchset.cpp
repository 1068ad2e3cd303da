#include "scenegen/benchset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "scenegen/evaluation.hpp"

namespace scenegen::harness {

const std::vector<std::string>& realistic_subcategories() {
  static const std::vector<std::string> kNames = {
      "scientific_and_empirical_reasoning",
      "cultural_and_temporal_awareness",
      "factual_or_literal_descriptions",
      "conceptual_and_metaphorical_thinking",
  };
  return kNames;
}

const std::vector<std::string>& creative_subcategories() {
  static const std::vector<std::string> kNames = {
      "common_objects_in_unusual_contexts", "imaginative_scenarios", "counterfactual_scenarios",
      "role_reversal",                      "anthropomorphic_scenarios",
  };
  return kNames;
}

BenchmarkSet parse_benchmark(const std::string& text, bool strict) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("benchmark file: ") + e.what(), e.byte);
  }
  if (!doc.is_object() || !doc.contains("categories") || !doc["categories"].is_object())
    throw ParseError("benchmark file: missing \"categories\" object");

  BenchmarkSet set;
  if (doc.contains("source")) {
    if (!doc["source"].is_string()) throw ParseError("benchmark file: \"source\" must be a string");
    set.source = doc["source"].get<std::string>();
  }

  const auto& categories = doc["categories"];
  if (strict) {
    if (categories.size() != 2 || !categories.contains(eval::kCategoryRealistic) ||
        !categories.contains(eval::kCategoryCreative))
      throw ValidationError(std::string("strict benchmark requires exactly the categories {") +
                            eval::kCategoryRealistic + ", " + eval::kCategoryCreative + "}");
  }

  std::set<std::string> seen;
  for (const auto& [category, subtree] : categories.items()) {
    if (!subtree.is_object())
      throw ParseError("benchmark file: category '" + category + "' must map to an object");
    const std::vector<std::string>* allowed = nullptr;
    if (strict) {
      allowed = category == eval::kCategoryRealistic ? &realistic_subcategories()
                                                     : &creative_subcategories();
    }
    for (const auto& [subcategory, prompts] : subtree.items()) {
      if (strict && std::find(allowed->begin(), allowed->end(), subcategory) == allowed->end())
        throw ValidationError("unknown subcategory '" + subcategory + "' under '" + category + "'");
      if (!prompts.is_array())
        throw ParseError("benchmark file: subcategory '" + subcategory + "' must hold an array");
      for (const auto& p : prompts) {
        if (!p.is_string())
          throw ParseError("benchmark file: prompts under '" + subcategory + "' must be strings");
        BenchmarkPrompt bp{p.get<std::string>(), category, subcategory};
        if (trim(bp.text).empty())
          throw ValidationError("empty prompt under '" + subcategory + "'");
        if (strict && !seen.insert(bp.text).second)
          throw ValidationError("duplicate prompt: \"" + bp.text + "\"");
        set.prompts.push_back(std::move(bp));
      }
    }
  }
  return set;
}

BenchmarkSet load_benchmark(const std::string& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open benchmark file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  BenchmarkSet set = parse_benchmark(buf.str(), strict);
  set.path = path;
  return set;
}

}  // namespace scenegen::harness
