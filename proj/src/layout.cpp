#include "scenegen/layout.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <unordered_set>

namespace scenegen::layout {

namespace {

constexpr const char* kPromptMarker = "\nPrompt: ";

struct PromptTemplate {
  std::string system_instructions;
  std::vector<std::pair<std::string, std::string>> examples;
};

const std::map<std::string, PromptTemplate>& template_registry() {
  static const std::map<std::string, PromptTemplate> registry = [] {
    std::map<std::string, PromptTemplate> r;
    PromptTemplate def;
    def.system_instructions =
        "You turn a short image prompt into a generation plan. Reply with exactly one JSON "
        "document and nothing else, using this schema:\n"
        "{\"background_prompt\": string, \"negative_prompt\": string, \"objects\": "
        "[{\"name\": string, \"box\": [x, y, w, h], \"descriptions\": [string, ...]}]}\n"
        "Boxes are fractions of the canvas in [0,1] with x+w <= 1 and y+h <= 1. List every "
        "main subject as an object with 2-4 alternative descriptions that elaborate on how it "
        "should look in this scene. The background_prompt describes the scene without the "
        "subjects; the negative_prompt lists things to avoid and may be empty.";
    def.examples.push_back({
        "a rat is hunting a lion",
        R"({"background_prompt": "A grassland scene", "negative_prompt": "blurry, deformed", "objects": [)"
        R"({"name": "rat", "box": [0.05, 0.35, 0.4, 0.45], "descriptions": ["crouched low, stalking forward with bared teeth", "leaping mid-air with claws out"]}, )"
        R"({"name": "lion", "box": [0.55, 0.3, 0.4, 0.5], "descriptions": ["backing away with wide eyes", "cowering behind tall grass"]}]})",
    });
    def.examples.push_back({
        "An octopus playing chess with a seahorse",
        R"({"background_prompt": "An underwater reef with soft light", "negative_prompt": "", "objects": [)"
        R"({"name": "octopus", "box": [0.05, 0.2, 0.42, 0.6], "descriptions": ["curling one arm over a chess piece", "studying the board intently"]}, )"
        R"({"name": "seahorse", "box": [0.58, 0.25, 0.35, 0.55], "descriptions": ["upright beside the board", "reaching toward a knight piece"]}]})",
    });
    r.emplace("default", std::move(def));
    return r;
  }();
  return registry;
}

double number_field(const nlohmann::json& j) {
  if (!j.is_number()) throw ParseError("box entries must be numbers", 0);
  return j.get<double>();
}

const nlohmann::json& require(const nlohmann::json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) {
    throw ParseError(std::string("missing required field \"") + key + "\"", 0);
  }
  return *it;
}

std::string require_string(const nlohmann::json& doc, const char* key) {
  const auto& v = require(doc, key);
  if (!v.is_string()) throw ParseError(std::string("field \"") + key + "\" must be a string", 0);
  return v.get<std::string>();
}

}  // namespace

bool has_template(const TemplateId& template_id) {
  return template_registry().count(template_id) > 0;
}

LLMRequest compose_llm_request(const UserPrompt& prompt, const TemplateId& template_id) {
  if (trim(prompt.text).empty()) throw ArgumentError("prompt text is empty");
  auto it = template_registry().find(template_id);
  if (it == template_registry().end()) {
    throw ConfigError("unknown prompt template '" + template_id + "'");
  }
  LLMRequest request;
  request.system_instructions = it->second.system_instructions;
  request.examples = it->second.examples;
  request.user_payload = std::string("Interpret the following prompt into the layout JSON.") +
                         kPromptMarker + prompt.text;
  return request;
}

std::string extract_prompt_from_payload(const std::string& user_payload) {
  const auto pos = user_payload.rfind(kPromptMarker);
  if (pos == std::string::npos) return user_payload;
  return user_payload.substr(pos + std::string(kPromptMarker).size());
}

LayoutPlan parse_layout_response(const std::string& raw) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  if (!doc.is_object()) throw ParseError("top-level value must be an object", 0);

  LayoutPlan plan;
  plan.background_prompt = require_string(doc, "background_prompt");
  if (doc.contains("negative_prompt")) {
    if (!doc["negative_prompt"].is_string()) {
      throw ParseError("field \"negative_prompt\" must be a string", 0);
    }
    plan.negative_prompt = doc["negative_prompt"].get<std::string>();
  }
  const auto& objects = require(doc, "objects");
  if (!objects.is_array()) throw ParseError("field \"objects\" must be an array", 0);
  for (const auto& jo : objects) {
    if (!jo.is_object()) throw ParseError("objects entries must be objects", 0);
    ObjectSpec spec;
    spec.name = require_string(jo, "name");
    const auto& box = require(jo, "box");
    if (!box.is_array() || box.size() != 4) {
      throw ParseError("field \"box\" must be an array of 4 numbers", 0);
    }
    spec.box.x = number_field(box[0]);
    spec.box.y = number_field(box[1]);
    spec.box.w = number_field(box[2]);
    spec.box.h = number_field(box[3]);
    const auto& descs = require(jo, "descriptions");
    if (!descs.is_array()) throw ParseError("field \"descriptions\" must be an array", 0);
    for (const auto& d : descs) {
      if (!d.is_string()) throw ParseError("descriptions entries must be strings", 0);
      spec.candidates.push_back(d.get<std::string>());
    }
    plan.objects.push_back(std::move(spec));
  }
  if (doc.contains("source_prompt")) {
    const auto& sp = doc["source_prompt"];
    if (!sp.is_object()) throw ParseError("field \"source_prompt\" must be an object", 0);
    UserPrompt up;
    up.text = require_string(sp, "text");
    if (sp.contains("category_id")) up.category_id = sp["category_id"].get<std::string>();
    plan.source_prompt = up;
  }
  validate_plan(plan);
  return plan;
}

nlohmann::json plan_to_json(const LayoutPlan& plan) {
  nlohmann::json doc;
  doc["background_prompt"] = plan.background_prompt;
  doc["negative_prompt"] = plan.negative_prompt;
  doc["objects"] = nlohmann::json::array();
  for (const auto& obj : plan.objects) {
    nlohmann::json jo;
    jo["name"] = obj.name;
    jo["box"] = {obj.box.x, obj.box.y, obj.box.w, obj.box.h};
    jo["descriptions"] = obj.candidates;
    doc["objects"].push_back(std::move(jo));
  }
  if (plan.source_prompt) {
    doc["source_prompt"] = {{"text", plan.source_prompt->text},
                            {"category_id", plan.source_prompt->category_id}};
  }
  return doc;
}

std::string serialize_plan(const LayoutPlan& plan) { return plan_to_json(plan).dump(2); }

nlohmann::json resolved_to_json(const ResolvedPlan& resolved) {
  nlohmann::json doc = plan_to_json(resolved.plan);
  for (std::size_t i = 0; i < resolved.chosen.size(); ++i) {
    doc["objects"][i]["chosen"] = resolved.chosen[i];
  }
  return doc;
}

ResolvedPlan resolved_from_json(const nlohmann::json& doc) {
  ResolvedPlan resolved;
  resolved.plan = parse_layout_response(doc.dump());
  for (const auto& jo : doc["objects"]) {
    if (!jo.contains("chosen")) throw ParseError("object entry missing \"chosen\" index", 0);
    resolved.chosen.push_back(jo["chosen"].get<int>());
  }
  validate_resolved(resolved);
  return resolved;
}

LayoutPlan synthesize_details(const UserPrompt& prompt, LLMClient& client, int retries) {
  if (retries < 0) throw ArgumentError("retries must be nonnegative");
  const LLMRequest original = compose_llm_request(prompt, "default");
  LLMRequest request = original;
  std::string last_response;
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    last_response = client.send(request);
    try {
      LayoutPlan plan = parse_layout_response(last_response);
      plan.source_prompt = prompt;
      return plan;
    } catch (const Error& e) {
      last_error = e.what();
      request = original;
      request.user_payload += std::string("\n\nThe previous reply could not be used (") +
                              last_error + "). Reply with exactly one valid JSON document "
                              "matching the schema.";
    }
  }
  throw SynthesisError("layout synthesis failed after " + std::to_string(retries + 1) +
                           " attempts: " + last_error,
                       last_response);
}

void FixtureLLMClient::add_response(const std::string& prompt_text, std::string response) {
  std::lock_guard<std::mutex> lock(mu_);
  responses_[fnv1a64(prompt_text)].push_back(std::move(response));
}

std::string FixtureLLMClient::send(const LLMRequest& request) {
  std::lock_guard<std::mutex> lock(mu_);
  ++calls_;
  const std::string prompt = extract_prompt_from_payload(request.user_payload);
  // Repair requests append an error note after the prompt line; hash only
  // the first line so they map to the same fixture.
  const std::string key_text = prompt.substr(0, prompt.find('\n'));
  auto it = responses_.find(fnv1a64(key_text));
  if (it == responses_.end()) {
    throw ConfigError("no fixture response for prompt '" + key_text + "'");
  }
  std::size_t& cur = cursor_[it->first];
  const std::string& out = it->second[std::min(cur, it->second.size() - 1)];
  ++cur;
  return out;
}

std::string OfflinePlannerClient::send(const LLMRequest& request) {
  const std::string full = extract_prompt_from_payload(request.user_payload);
  const std::string prompt = full.substr(0, full.find('\n'));

  static const std::unordered_set<std::string> stopwords = {
      "a",    "an",  "the",  "is",   "are",  "was",  "were", "on",   "in",   "of",
      "with", "and", "by",   "at",   "to",   "for",  "its",  "it",   "that", "this",
      "has",  "had", "been", "being", "from", "into", "over", "under"};

  // Content words: alphabetic runs, longest first, first-seen order on ties.
  std::vector<std::string> words;
  std::string cur;
  for (char ch : to_lower(prompt) + " ") {
    if (std::isalpha(static_cast<unsigned char>(ch))) {
      cur += ch;
    } else if (!cur.empty()) {
      if (cur.size() >= 3 && !stopwords.count(cur) &&
          std::find(words.begin(), words.end(), cur) == words.end()) {
        words.push_back(cur);
      }
      cur.clear();
    }
  }
  std::stable_sort(words.begin(), words.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  if (words.empty()) words.push_back("subject");
  if (words.size() > 2) words.resize(2);

  nlohmann::json doc;
  doc["background_prompt"] = "a detailed scene";
  doc["negative_prompt"] = "blurry, distorted";
  doc["objects"] = nlohmann::json::array();
  static const std::array<std::array<double, 4>, 2> boxes = {
      {{0.08, 0.3, 0.36, 0.45}, {0.56, 0.3, 0.36, 0.45}}};
  const std::array<double, 4> centered = {0.25, 0.25, 0.5, 0.5};
  for (std::size_t i = 0; i < words.size(); ++i) {
    nlohmann::json jo;
    jo["name"] = words[i];
    const auto& b = words.size() == 1 ? centered : boxes[i];
    jo["box"] = {b[0], b[1], b[2], b[3]};
    jo["descriptions"] = {std::string("rendered in sharp detail"),
                          std::string("shown prominently in the scene")};
    doc["objects"].push_back(std::move(jo));
  }
  return doc.dump();
}

}  // namespace scenegen::layout
