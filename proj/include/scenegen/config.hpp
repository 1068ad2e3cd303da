#pragma once

#include <string>

#include "scenegen/sampler.hpp"

namespace scenegen::harness {

struct RunConfig {
  std::string backend = "toy";  // toy | adapter
  sampler::GuidanceConfig guidance;
  bool saa_include_background = false;
  int saa_max_exhaustive = 4096;
  std::string out_dir = "runs";
  bool strict = false;
  bool force = false;
  int jobs = 1;
  int repeats = 1;  // seeds per prompt (seed, seed+1, ...)
  std::string template_id = "default";
  int llm_retries = 2;
  std::string llm_mode = "offline";  // offline | http
  std::string mllm_mode = "stub";    // stub | http
  std::string llm_base_url = "http://127.0.0.1:8080";
  std::string llm_model = "gpt-4";
  std::string mllm_base_url = "http://127.0.0.1:8080";
  std::string mllm_model = "gpt-4-vision";
};

// Overlays JSON config-file values onto `config`; unknown keys are a
// ConfigError so typos do not silently fall back to defaults.
void apply_config_file(RunConfig& config, const std::string& path);

// Range/enum checks shared by every CLI verb.
void validate_config(const RunConfig& config);

}  // namespace scenegen::harness
