#include "scenegen/config.hpp"

#include "json.hpp"
#include "scenegen/artifact_io.hpp"

namespace scenegen::harness {

void apply_config_file(RunConfig& config, const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file " + path + ": expected an object");

  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "backend")
        config.backend = value.get<std::string>();
      else if (key == "alpha")
        config.guidance.weights.alpha = value.get<double>();
      else if (key == "beta")
        config.guidance.weights.beta = value.get<double>();
      else if (key == "gamma")
        config.guidance.weights.gamma = value.get<double>();
      else if (key == "k_fraction")
        config.guidance.weights.k_fraction = value.get<double>();
      else if (key == "steps")
        config.guidance.steps = value.get<int>();
      else if (key == "r")
        config.guidance.replace_fraction = value.get<double>();
      else if (key == "guidance_scale")
        config.guidance.guidance_scale = value.get<double>();
      else if (key == "grad_updates_per_step")
        config.guidance.grad_updates_per_step = value.get<int>();
      else if (key == "seed")
        config.guidance.seed = value.get<std::uint64_t>();
      else if (key == "saliency_quantile")
        config.guidance.saliency_quantile = value.get<double>();
      else if (key == "saa_include_background")
        config.saa_include_background = value.get<bool>();
      else if (key == "saa_max_exhaustive")
        config.saa_max_exhaustive = value.get<int>();
      else if (key == "out")
        config.out_dir = value.get<std::string>();
      else if (key == "strict")
        config.strict = value.get<bool>();
      else if (key == "jobs")
        config.jobs = value.get<int>();
      else if (key == "repeats")
        config.repeats = value.get<int>();
      else if (key == "template")
        config.template_id = value.get<std::string>();
      else if (key == "llm_retries")
        config.llm_retries = value.get<int>();
      else if (key == "llm_mode")
        config.llm_mode = value.get<std::string>();
      else if (key == "mllm_mode")
        config.mllm_mode = value.get<std::string>();
      else if (key == "llm_base_url")
        config.llm_base_url = value.get<std::string>();
      else if (key == "llm_model")
        config.llm_model = value.get<std::string>();
      else if (key == "mllm_base_url")
        config.mllm_base_url = value.get<std::string>();
      else if (key == "mllm_model")
        config.mllm_model = value.get<std::string>();
      else
        throw ConfigError("config file " + path + ": unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

void validate_config(const RunConfig& config) {
  if (config.backend != "toy" && config.backend != "adapter")
    throw ConfigError("unknown backend '" + config.backend + "' (expected toy or adapter)");
  if (config.guidance.steps < 1) throw ConfigError("steps must be at least 1");
  if (config.guidance.weights.alpha < 0.0) throw ConfigError("alpha must be nonnegative");
  if (config.guidance.weights.beta < 0.0 || config.guidance.weights.gamma < 0.0)
    throw ConfigError("beta and gamma must be nonnegative");
  if (config.guidance.weights.k_fraction <= 0.0 || config.guidance.weights.k_fraction > 1.0)
    throw ConfigError("k-fraction must be in (0,1]");
  if (config.guidance.replace_fraction < 0.0 || config.guidance.replace_fraction > 1.0)
    throw ConfigError("r must be in [0,1]");
  if (config.guidance.guidance_scale < 0.0) throw ConfigError("guidance-scale must be nonnegative");
  if (config.guidance.grad_updates_per_step < 0)
    throw ConfigError("grad updates per step must be nonnegative");
  if (config.guidance.saliency_quantile <= 0.0 || config.guidance.saliency_quantile >= 1.0)
    throw ConfigError("saliency quantile must be in (0,1)");
  if (config.jobs < 1) throw ConfigError("jobs must be at least 1");
  if (config.repeats < 1) throw ConfigError("repeats must be at least 1");
  if (config.llm_retries < 0) throw ConfigError("llm retries must be nonnegative");
  if (config.llm_mode != "offline" && config.llm_mode != "http")
    throw ConfigError("llm_mode must be offline or http");
  if (config.mllm_mode != "stub" && config.mllm_mode != "http")
    throw ConfigError("mllm_mode must be stub or http");
  if (config.out_dir.empty()) throw ConfigError("output directory must not be empty");
}

}  // namespace scenegen::harness
