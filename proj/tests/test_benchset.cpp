#include <doctest/doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "scenegen/benchset.hpp"
#include "scenegen/harness.hpp"
#include "support/fixtures.hpp"

using namespace scenegen;
using harness::BenchmarkSet;

namespace {

const char* kSmallValid = R"({
  "source": "unit fixture",
  "categories": {
    "realistic_analytical": {
      "factual_or_literal_descriptions": ["A red barn beside a silo.", "A bridge at low tide."]
    },
    "creativity_imagination": {
      "role_reversal": ["A sheep herding a dog."]
    }
  }
})";

const harness::BenchmarkPrompt* find_prompt(const BenchmarkSet& set, const std::string& text) {
  for (const auto& p : set.prompts) {
    if (p.text == text) return &p;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("parse_benchmark reads the category tree") {
  const BenchmarkSet set = harness::parse_benchmark(kSmallValid, true);
  CHECK(set.count() == 3);
  CHECK(set.source == "unit fixture");

  const auto* barn = find_prompt(set, "A red barn beside a silo.");
  REQUIRE(barn != nullptr);
  CHECK(barn->category == "realistic_analytical");
  CHECK(barn->subcategory == "factual_or_literal_descriptions");

  // Array order is preserved within a subcategory.
  const auto barn_at = std::find_if(set.prompts.begin(), set.prompts.end(), [](const auto& p) {
    return p.text == "A red barn beside a silo.";
  });
  const auto tide_at = std::find_if(set.prompts.begin(), set.prompts.end(), [](const auto& p) {
    return p.text == "A bridge at low tide.";
  });
  CHECK(barn_at < tide_at);
}

TEST_CASE("the bundled sample resolves one prompt per subcategory") {
  const std::string path = std::string(SCENEGEN_DATA_DIR) + "/benchmark_sample.json";
  const BenchmarkSet set = harness::load_benchmark(path, true);
  CHECK(set.count() == 9);
  CHECK(set.path == path);

  const std::vector<std::pair<std::string, std::string>> expected = {
      {"A drop of water on the International Space Station.",
       "scientific_and_empirical_reasoning"},
      {"Children in costumes going door-to-door on October 31st.",
       "cultural_and_temporal_awareness"},
      {"A tank that's been sitting on the beach for 50 years.",
       "factual_or_literal_descriptions"},
      {"A man is as brave as a lion.", "conceptual_and_metaphorical_thinking"},
      {"A rubber duck sailing across a field of hot lava.",
       "common_objects_in_unusual_contexts"},
      {"An octopus playing chess with a seahorse.", "imaginative_scenarios"},
      {"Fish swimming in the clouds.", "counterfactual_scenarios"},
      {"A cat is chased by a mouse.", "role_reversal"},
      {"A snowman building a friend in the blizzard.", "anthropomorphic_scenarios"},
  };
  for (const auto& [text, subcategory] : expected) {
    const auto* p = find_prompt(set, text);
    REQUIRE_MESSAGE(p != nullptr, text);
    CHECK(p->subcategory == subcategory);
    const auto& realistic = harness::realistic_subcategories();
    const bool is_realistic =
        std::find(realistic.begin(), realistic.end(), subcategory) != realistic.end();
    CHECK(p->category == (is_realistic ? "realistic_analytical" : "creativity_imagination"));
  }

  std::map<std::string, int> per_subcategory;
  for (const auto& p : set.prompts) ++per_subcategory[p.subcategory];
  CHECK(per_subcategory.size() == 9);
  for (const auto& [name, count] : per_subcategory) {
    CAPTURE(name);
    CHECK(count == 1);
  }
}

TEST_CASE("the canonical subcategory lists cover the two-category tree") {
  CHECK(harness::realistic_subcategories().size() == 4);
  CHECK(harness::creative_subcategories().size() == 5);
}

TEST_CASE("strict parsing rejects a malformed category tree") {
  CHECK_THROWS_AS(harness::parse_benchmark(R"({"categories": {"realistic_analytical": {}}})", true),
                  ValidationError);
  CHECK_THROWS_AS(
      harness::parse_benchmark(
          R"({"categories": {"realistic_analytical": {}, "creativity_imagination": {}, "extra": {}}})",
          true),
      ValidationError);
  CHECK_THROWS_WITH_AS(
      harness::parse_benchmark(
          R"({"categories": {"realistic_analytical": {"made_up": ["x"]}, "creativity_imagination": {}}})",
          true),
      doctest::Contains("made_up"), ValidationError);
  // A real subcategory under the wrong parent is still unknown there.
  CHECK_THROWS_AS(
      harness::parse_benchmark(
          R"({"categories": {"realistic_analytical": {"imaginative_scenarios": ["x"]}, "creativity_imagination": {}}})",
          true),
      ValidationError);
  CHECK_THROWS_WITH_AS(
      harness::parse_benchmark(
          R"({"categories": {"realistic_analytical": {"role_reversal": ["x"]}, "creativity_imagination": {}}})",
          true),
      doctest::Contains("role_reversal"), ValidationError);
  CHECK_THROWS_WITH_AS(
      harness::parse_benchmark(
          R"({"categories": {
                "realistic_analytical": {"factual_or_literal_descriptions": ["Twin.", "Twin."]},
                "creativity_imagination": {}}})",
          true),
      doctest::Contains("duplicate"), ValidationError);
  CHECK_THROWS_AS(
      harness::parse_benchmark(
          R"({"categories": {"realistic_analytical": {"factual_or_literal_descriptions": ["  "]},
                             "creativity_imagination": {}}})",
          true),
      ValidationError);
}

TEST_CASE("parse_benchmark reports structural errors as ParseError") {
  try {
    harness::parse_benchmark("{\"categories\": {", true);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.byte_offset > 0);
  }
  CHECK_THROWS_AS(harness::parse_benchmark(R"({"nope": 1})", false), ParseError);
  CHECK_THROWS_AS(harness::parse_benchmark(R"({"categories": []})", false), ParseError);
  CHECK_THROWS_AS(harness::parse_benchmark(R"({"categories": {"a": ["flat"]}})", false),
                  ParseError);
  CHECK_THROWS_AS(harness::parse_benchmark(R"({"categories": {"a": {"b": "prompt"}}})", false),
                  ParseError);
  CHECK_THROWS_AS(harness::parse_benchmark(R"({"categories": {"a": {"b": [42]}}})", false),
                  ParseError);
  CHECK_THROWS_AS(
      harness::parse_benchmark(R"({"categories": {"a": {"b": ["x"]}}, "source": 7})", false),
      ParseError);
}

TEST_CASE("lenient parsing accepts ad-hoc trees") {
  const BenchmarkSet set = harness::parse_benchmark(
      R"({"categories": {"anything": {"goes": ["One prompt.", "One prompt."]}}})", false);
  CHECK(set.count() == 2);
  CHECK(set.prompts[0].category == "anything");
  CHECK(set.prompts[0].subcategory == "goes");
  // Even lenient mode refuses empty prompt text.
  CHECK_THROWS_AS(harness::parse_benchmark(R"({"categories": {"a": {"b": [""]}}})", false),
                  ValidationError);
}

TEST_CASE("load_benchmark surfaces a missing file as IoError") {
  testkit::TempDir tmp;
  CHECK_THROWS_AS(harness::load_benchmark(tmp.str("absent.json"), true), IoError);
}

TEST_CASE("jobs_from_benchmark expands prompts into seeded repeats") {
  const BenchmarkSet set = harness::parse_benchmark(kSmallValid, true);
  harness::RunConfig config;
  config.repeats = 2;
  config.guidance.seed = 7;

  const std::vector<harness::GenerateJob> jobs = harness::jobs_from_benchmark(set, config);
  REQUIRE(jobs.size() == 6);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    CHECK(jobs[i].index == static_cast<int>(i));
  }
  for (std::size_t i = 0; i < jobs.size(); i += 2) {
    CHECK(jobs[i].prompt == jobs[i + 1].prompt);
    CHECK(jobs[i].seed == 7);
    CHECK(jobs[i + 1].seed == 8);
    CHECK_FALSE(jobs[i].category.empty());
    CHECK_FALSE(jobs[i].subcategory.empty());
  }
}

TEST_CASE("jobs_from_prompt repeats a single ad-hoc prompt") {
  harness::RunConfig config;
  config.repeats = 3;
  config.guidance.seed = 5;
  const std::vector<harness::GenerateJob> jobs =
      harness::jobs_from_prompt("A fox on a fence.", config);
  REQUIRE(jobs.size() == 3);
  for (int rep = 0; rep < 3; ++rep) {
    CHECK(jobs[static_cast<std::size_t>(rep)].prompt == "A fox on a fence.");
    CHECK(jobs[static_cast<std::size_t>(rep)].seed == 5u + static_cast<std::uint64_t>(rep));
    CHECK(jobs[static_cast<std::size_t>(rep)].index == rep);
    CHECK(jobs[static_cast<std::size_t>(rep)].category.empty());
  }
}
