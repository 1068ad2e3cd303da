#include "scenegen/http_clients.hpp"

#include <cstdlib>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

namespace scenegen::net {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  static const char* kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(kAlphabet[(n >> 6) & 63]);
    out.push_back(kAlphabet[n & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t n = bytes[i] << 16;
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(kAlphabet[(n >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

namespace {

std::string require_env(const std::string& name) {
  const char* value = std::getenv(name.c_str());
  if (value == nullptr || *value == '\0')
    throw ConfigError("environment variable " + name + " is not set");
  return value;
}

std::string post_chat(const std::string& base_url, const std::string& api_key,
                      const nlohmann::json& body) {
  httplib::Client client(base_url);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);
  httplib::Headers headers = {{"Authorization", "Bearer " + api_key}};
  auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
  if (!res) throw IoError("no response from " + base_url);
  if (res->status != 200)
    throw IoError("chat endpoint returned status " + std::to_string(res->status) + ": " + res->body);
  try {
    const auto doc = nlohmann::json::parse(res->body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed chat completion response: ") + e.what());
  }
}

}  // namespace

HttpLLMClient::HttpLLMClient(std::string base_url, std::string model,
                             const std::string& api_key_env)
    : base_url_(std::move(base_url)), model_(std::move(model)), api_key_(require_env(api_key_env)) {}

std::string HttpLLMClient::send(const layout::LLMRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", request.system_instructions}});
  for (const auto& [input, output] : request.examples) {
    messages.push_back({{"role", "user"}, {"content", input}});
    messages.push_back({{"role", "assistant"}, {"content", output}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_payload}});
  return post_chat(base_url_, api_key_, {{"model", model_}, {"messages", messages}});
}

HttpMLLMClient::HttpMLLMClient(std::string base_url, std::string model,
                               const std::string& api_key_env)
    : base_url_(std::move(base_url)), model_(std::move(model)), api_key_(require_env(api_key_env)) {}

std::string HttpMLLMClient::ask(const ImageU8& image, const std::string& context,
                                const std::string& question) {
  std::ostringstream ppm;
  ppm << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  ppm.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
  const std::string payload = ppm.str();
  const std::string uri =
      "data:image/x-portable-pixmap;base64," +
      base64_encode(std::span<const std::uint8_t>(
          reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));

  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", "Prompt: " + context + "\n" + question}});
  content.push_back({{"type", "image_url"}, {"image_url", {{"url", uri}}}});
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "user"}, {"content", content}});
  return post_chat(base_url_, api_key_, {{"model", model_}, {"messages", messages}});
}

}  // namespace scenegen::net
