#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "scenegen/array.hpp"
#include "scenegen/common.hpp"
#include "scenegen/saa.hpp"

namespace scenegen::eval {

struct EvaluationError : Error {
  using Error::Error;
};

// Correlation undefined: one of the lists has no rank variance.
struct DegenerateSampleError : Error {
  using Error::Error;
};

class MLLMClient {
 public:
  virtual ~MLLMClient() = default;
  // Must be safe for concurrent calls. `context` carries the text prompt the
  // image was generated from.
  virtual std::string ask(const ImageU8& image, const std::string& context,
                          const std::string& question) = 0;
};

// Fixture client: replays a response list (repeating the last entry once
// exhausted) and records every question for protocol assertions.
class ScriptedMLLM : public MLLMClient {
 public:
  explicit ScriptedMLLM(std::vector<std::string> responses) : responses_(std::move(responses)) {}
  std::string ask(const ImageU8& image, const std::string& context,
                  const std::string& question) override;
  std::vector<std::string> questions() const;
  int calls() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> responses_;
  std::vector<std::string> questions_;
  std::size_t next_ = 0;
};

inline constexpr const char* kDescribeQuestion = "Describe the image";
inline constexpr const char* kScoreQuestion = "Predict the image-text alignment score";

struct ScoreOutcome {
  double score = 0.0;       // in [0,1]
  std::string description;  // answer to the describe question
  int attempts = 0;         // score-question attempts spent
  bool clamped = false;     // raw reply was outside [0,100]
};

// Two-question alignment scoring: describe, then rate 0-100 (scaled to
// [0,1]). The score question is retried up to twice on an unparsable reply.
ScoreOutcome gpt4score(const ImageU8& image, const std::string& prompt, MLLMClient& mllm);

// Caption the image, then cosine similarity between caption and prompt
// embeddings.
double gpt4clip_score(const ImageU8& image, const std::string& prompt, MLLMClient& mllm,
                      saa::TextEncoder& encoder);

double normalize_human_score(int raw);

struct RankedSample {
  std::vector<double> metric;
  std::vector<double> human;
};

double kendall_tau(const RankedSample& sample);   // tau-b
double spearman_rho(const RankedSample& sample);  // Pearson over average ranks

// Extracts the trailing number from free-form text, if any.
std::optional<double> last_number(const std::string& text);

// Tie-aware average ranks (1-based).
std::vector<double> average_ranks(const std::vector<double>& values);

struct ScoreRecord {
  std::string prompt_id;
  std::string category;  // realistic_analytical | creativity_imagination
  std::string method;
  std::string metric;
  double value = 0.0;
};

inline constexpr const char* kCategoryRealistic = "realistic_analytical";
inline constexpr const char* kCategoryCreative = "creativity_imagination";

struct ReportRow {
  std::string method;
  std::string metric;
  std::string category;  // one of the two categories, or "average"
  double mean = 0.0;
  int count = 0;  // for "average": number of category means combined
};

struct Report {
  std::vector<ReportRow> rows;
  std::string to_csv() const;
  std::string to_table() const;
};

// Per (method, metric): one row per present category plus an "average" row
// equal to the mean of the present category means. Category means are always
// carried alongside the average so a reader can recompute (or dispute) it.
Report aggregate_report(const std::vector<ScoreRecord>& records);

}  // namespace scenegen::eval
