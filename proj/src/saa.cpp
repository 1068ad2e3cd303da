#include "scenegen/saa.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scenegen/rng.hpp"

namespace scenegen::saa {

EmbeddingVector HashTextEncoder::encode(const std::string& text) {
  Rng rng(seed_ ^ fnv1a64(text));
  EmbeddingVector e;
  e.values.resize(static_cast<std::size_t>(dim_));
  for (auto& x : e.values) x = rng.gaussian();
  return e;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    throw ShapeError("cosine_similarity: dimension mismatch (" + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw DegenerateEmbeddingError("cosine_similarity: zero-norm embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double score_combination(const std::vector<int>& choice,
                         const std::vector<std::vector<EmbeddingVector>>& embeddings,
                         const EmbeddingVector* background) {
  const int n = static_cast<int>(embeddings.size());
  if (static_cast<int>(choice.size()) != n)
    throw ArgumentError("score_combination: choice/embedding count mismatch");
  for (int i = 0; i < n; ++i) {
    if (choice[i] < 0 || choice[i] >= static_cast<int>(embeddings[i].size()))
      throw ArgumentError("score_combination: choice index out of range for object " +
                          std::to_string(i));
  }
  double sum = 0.0;
  int pairs = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      sum += cosine_similarity(embeddings[i][choice[i]], embeddings[j][choice[j]]);
      ++pairs;
    }
    if (background != nullptr) {
      sum += cosine_similarity(embeddings[i][choice[i]], *background);
      ++pairs;
    }
  }
  if (pairs == 0) return 1.0;
  return sum / pairs;
}

namespace {

std::vector<int> decode_combination(std::uint64_t index, const std::vector<int>& sizes) {
  std::vector<int> choice(sizes.size(), 0);
  for (int i = static_cast<int>(sizes.size()) - 1; i >= 0; --i) {
    choice[static_cast<std::size_t>(i)] = static_cast<int>(index % sizes[static_cast<std::size_t>(i)]);
    index /= sizes[static_cast<std::size_t>(i)];
  }
  return choice;
}

}  // namespace

ResolvedPlan select_descriptions(const LayoutPlan& plan, TextEncoder& encoder,
                                 const SaaOptions& options) {
  validate_plan(plan);
  const int n = static_cast<int>(plan.objects.size());

  std::vector<std::vector<EmbeddingVector>> embeddings(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& obj = plan.objects[static_cast<std::size_t>(i)];
    try {
      for (const auto& text : obj.candidates)
        embeddings[static_cast<std::size_t>(i)].push_back(encoder.encode(obj.name + ", " + text));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("object '" + obj.name + "': encoder failure: " + e.what());
    }
  }
  EmbeddingVector bg;
  const EmbeddingVector* bg_ptr = nullptr;
  if (options.include_background) {
    bg = encoder.encode(plan.background_prompt);
    bg_ptr = &bg;
  }

  std::vector<int> sizes(static_cast<std::size_t>(n));
  std::uint64_t total = 1;
  bool overflow = false;
  for (int i = 0; i < n; ++i) {
    sizes[static_cast<std::size_t>(i)] =
        static_cast<int>(plan.objects[static_cast<std::size_t>(i)].candidates.size());
    if (total > static_cast<std::uint64_t>(options.max_exhaustive)) overflow = true;
    total *= static_cast<std::uint64_t>(sizes[static_cast<std::size_t>(i)]);
  }
  if (total > static_cast<std::uint64_t>(options.max_exhaustive)) overflow = true;

  std::vector<int> best;
  if (!overflow) {
    // Linear index order is lexicographic tuple order, so keeping the first
    // strictly-better score realizes the tie rule directly.
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::uint64_t idx = 0; idx < total; ++idx) {
      auto choice = decode_combination(idx, sizes);
      double s = score_combination(choice, embeddings, bg_ptr);
      if (s > best_score) {
        best_score = s;
        best = std::move(choice);
      }
    }
  } else {
    best.assign(static_cast<std::size_t>(n), 0);
    bool changed = true;
    while (changed) {
      changed = false;
      for (int i = 0; i < n; ++i) {
        int best_c = best[static_cast<std::size_t>(i)];
        double best_s = score_combination(best, embeddings, bg_ptr);
        auto trial = best;
        for (int c = 0; c < sizes[static_cast<std::size_t>(i)]; ++c) {
          trial[static_cast<std::size_t>(i)] = c;
          double s = score_combination(trial, embeddings, bg_ptr);
          if (s > best_s || (s == best_s && c < best_c)) {
            best_s = s;
            best_c = c;
          }
        }
        if (best_c != best[static_cast<std::size_t>(i)]) {
          best[static_cast<std::size_t>(i)] = best_c;
          changed = true;
        }
      }
    }
  }

  ResolvedPlan resolved;
  resolved.plan = plan;
  resolved.chosen = std::move(best);
  validate_resolved(resolved);
  return resolved;
}

}  // namespace scenegen::saa
