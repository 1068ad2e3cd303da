#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "scenegen/plan.hpp"

namespace scenegen::layout {

struct SynthesisError : Error {
  SynthesisError(const std::string& msg, std::string last)
      : Error(msg), last_response(std::move(last)) {}
  std::string last_response;
};

struct LLMRequest {
  std::string system_instructions;
  std::vector<std::pair<std::string, std::string>> examples;  // (input, expected output)
  std::string user_payload;
};

class LLMClient {
 public:
  virtual ~LLMClient() = default;
  // Implementations must be safe for concurrent calls.
  virtual std::string send(const LLMRequest& request) = 0;
};

using TemplateId = std::string;

// Builds the request for the given template: task instructions, in-context
// examples, and a payload embedding the prompt text verbatim.
LLMRequest compose_llm_request(const UserPrompt& prompt, const TemplateId& template_id);

bool has_template(const TemplateId& template_id);

// The payload embeds the prompt after a fixed marker; clients that need the
// bare prompt back (mocks, the offline planner) recover it with this.
std::string extract_prompt_from_payload(const std::string& user_payload);

// Strict-schema parse of an LLM reply into a validated LayoutPlan.
// Malformed JSON or a missing/ill-typed field throws ParseError with the
// byte offset; a schema-valid document violating plan invariants throws
// ValidationError naming the object.
LayoutPlan parse_layout_response(const std::string& raw);

nlohmann::json plan_to_json(const LayoutPlan& plan);
std::string serialize_plan(const LayoutPlan& plan);

nlohmann::json resolved_to_json(const ResolvedPlan& resolved);
ResolvedPlan resolved_from_json(const nlohmann::json& doc);

// Queries the client and parses the reply. On a parse or validation
// failure the original request is re-sent with the error message appended,
// up to `retries` extra attempts; exhaustion throws SynthesisError carrying
// the last raw reply.
LayoutPlan synthesize_details(const UserPrompt& prompt, LLMClient& client, int retries);

// Fixture-backed mock: canned responses keyed by the hash of the prompt
// text, consumed in order (the last one repeats). Unknown prompts throw.
class FixtureLLMClient : public LLMClient {
 public:
  void add_response(const std::string& prompt_text, std::string response);
  std::string send(const LLMRequest& request) override;
  int calls() const { return calls_; }

 private:
  std::mutex mu_;
  std::map<std::uint64_t, std::vector<std::string>> responses_;
  std::map<std::uint64_t, std::size_t> cursor_;
  int calls_ = 0;
};

// Deterministic layout synthesizer used when no real LLM is configured:
// picks up to two content words from the prompt as objects, assigns fixed
// side-by-side boxes, and emits the reply in the layout JSON schema.
class OfflinePlannerClient : public LLMClient {
 public:
  std::string send(const LLMRequest& request) override;
};

}  // namespace scenegen::layout
