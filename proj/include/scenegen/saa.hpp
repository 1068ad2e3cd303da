#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenegen/plan.hpp"

namespace scenegen::saa {

struct DegenerateEmbeddingError : Error {
  using Error::Error;
};

struct EmbeddingVector {
  std::vector<double> values;
  int dim() const { return static_cast<int>(values.size()); }
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  // Must be safe for concurrent calls.
  virtual EmbeddingVector encode(const std::string& text) = 0;
};

// Deterministic stand-in for a real text encoder: the text hash seeds a
// gaussian draw, so equal strings embed identically across runs and builds.
class HashTextEncoder : public TextEncoder {
 public:
  explicit HashTextEncoder(int dim = 64, std::uint64_t seed = 9) : dim_(dim), seed_(seed) {}
  EmbeddingVector encode(const std::string& text) override;

 private:
  int dim_;
  std::uint64_t seed_;
};

struct SaaOptions {
  bool include_background = false;  // include the background prompt as an extra fixed vector
  int max_exhaustive = 4096;        // combination budget for exact search
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Mean pairwise cosine over the chosen descriptions (one per object), plus
// object-background pairs when a background embedding is supplied. A lone
// object with no background scores 1 by convention.
double score_combination(const std::vector<int>& choice,
                         const std::vector<std::vector<EmbeddingVector>>& embeddings,
                         const EmbeddingVector* background = nullptr);

// Chooses one description per object maximizing score_combination:
// exhaustively when the candidate product is within max_exhaustive,
// greedy coordinate ascent from the all-zeros tuple otherwise. Ties go to
// the lexicographically smallest index tuple.
ResolvedPlan select_descriptions(const LayoutPlan& plan, TextEncoder& encoder,
                                 const SaaOptions& options = {});

}  // namespace scenegen::saa
