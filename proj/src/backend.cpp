#include "scenegen/backend.hpp"

#include <cctype>

namespace scenegen::backend {

std::vector<std::string> tokenize(const std::string& prompt) {
  std::vector<std::string> tokens;
  tokens.push_back("<bos>");
  std::string cur;
  for (unsigned char ch : prompt) {
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

PromptBinding tokenize_and_bind(const std::string& text, const std::vector<std::string>& names,
                                const std::string& negative_text) {
  PromptBinding bound;
  bound.text = text;
  bound.negative_text = negative_text;
  bound.tokens = tokenize(text);
  bound.negative_tokens = tokenize(negative_text);
  std::vector<bool> claimed(bound.tokens.size(), false);

  for (const auto& name : names) {
    auto want = tokenize(name);
    want.erase(want.begin());  // drop <bos>
    if (want.empty()) throw BindingError("object '" + name + "': no bindable tokens");

    int found = -1;
    const int n = static_cast<int>(bound.tokens.size());
    const int m = static_cast<int>(want.size());
    for (int start = 1; start + m <= n; ++start) {
      bool ok = true;
      for (int j = 0; j < m && ok; ++j) {
        if (claimed[static_cast<std::size_t>(start + j)] ||
            bound.tokens[static_cast<std::size_t>(start + j)] != want[static_cast<std::size_t>(j)])
          ok = false;
      }
      if (ok) {
        found = start;
        break;
      }
    }
    if (found < 0)
      throw BindingError("object '" + name + "': tokens not found in prompt \"" + text + "\"");

    attn::TokenSpan span;
    for (int j = 0; j < m; ++j) {
      span.indices.push_back(found + j);
      claimed[static_cast<std::size_t>(found + j)] = true;
    }
    bound.names.push_back(name);
    bound.spans.push_back(std::move(span));
  }
  return bound;
}

Latent make_shared_initial_latent(std::uint64_t seed, int channels, int height, int width) {
  Rng rng(seed);
  Latent z(channels, height, width);
  for (auto& x : z.v) x = rng.gaussian();
  return z;
}

}  // namespace scenegen::backend
