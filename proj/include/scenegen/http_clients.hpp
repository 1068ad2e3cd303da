#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "scenegen/evaluation.hpp"
#include "scenegen/layout.hpp"

namespace scenegen::net {

std::string base64_encode(std::span<const std::uint8_t> bytes);

// Chat-completions style endpoint. The API key is read from the named
// environment variable at construction; a missing key is a ConfigError.
class HttpLLMClient : public layout::LLMClient {
 public:
  HttpLLMClient(std::string base_url, std::string model,
                const std::string& api_key_env = "SCENEGEN_LLM_API_KEY");
  std::string send(const layout::LLMRequest& request) override;

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_;
};

// Vision endpoint: the image travels as a base64 data URI alongside the
// prompt context and question.
class HttpMLLMClient : public eval::MLLMClient {
 public:
  HttpMLLMClient(std::string base_url, std::string model,
                 const std::string& api_key_env = "SCENEGEN_MLLM_API_KEY");
  std::string ask(const ImageU8& image, const std::string& context,
                  const std::string& question) override;

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_;
};

}  // namespace scenegen::net
