#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scenegen/harness.hpp"
#include "scenegen/http_clients.hpp"

namespace {

using scenegen::harness::RunConfig;

struct FlagSet {
  std::string config_path;
  std::string prompt;
  std::string benchmark;
  std::string backend;
  std::string out;
  std::uint64_t seed = 0;
  double alpha = 0, beta = 0, gamma = 0, r = 0, guidance_scale = 0, k_fraction = 0;
  int steps = 0, jobs = 0, repeats = 0;
  bool strict = false, force = false;

  CLI::Option* o_config = nullptr;
  CLI::Option* o_backend = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_alpha = nullptr;
  CLI::Option* o_beta = nullptr;
  CLI::Option* o_gamma = nullptr;
  CLI::Option* o_r = nullptr;
  CLI::Option* o_gs = nullptr;
  CLI::Option* o_kf = nullptr;
  CLI::Option* o_steps = nullptr;
  CLI::Option* o_jobs = nullptr;
  CLI::Option* o_repeats = nullptr;
};

void add_shared_flags(CLI::App* sub, FlagSet& f) {
  f.o_config = sub->add_option("--config", f.config_path, "JSON config file");
  f.o_out = sub->add_option("--out", f.out, "output directory (default runs)");
  f.o_jobs = sub->add_option("--jobs", f.jobs, "parallel workers (default 1)");
}

void add_generate_flags(CLI::App* sub, FlagSet& f) {
  add_shared_flags(sub, f);
  sub->add_option("--prompt", f.prompt, "single prompt text");
  sub->add_option("--benchmark", f.benchmark, "benchmark JSON file");
  f.o_backend = sub->add_option("--backend", f.backend, "denoising backend: toy or adapter");
  f.o_seed = sub->add_option("--seed", f.seed, "base random seed");
  f.o_alpha = sub->add_option("--alpha", f.alpha, "object-constraint step size");
  f.o_beta = sub->add_option("--beta", f.beta, "background guidance weight");
  f.o_gamma = sub->add_option("--gamma", f.gamma, "background suppression weight");
  f.o_r = sub->add_option("--r", f.r, "replacement window fraction");
  f.o_steps = sub->add_option("--steps", f.steps, "denoising steps");
  f.o_gs = sub->add_option("--guidance-scale", f.guidance_scale, "classifier-free guidance scale");
  f.o_kf = sub->add_option("--k-fraction", f.k_fraction, "top-k fraction for the losses");
  f.o_repeats = sub->add_option("--repeats", f.repeats, "seeds per prompt");
  sub->add_flag("--strict", f.strict, "strict benchmark validation");
  sub->add_flag("--force", f.force, "re-run completed artifact directories");
}

RunConfig build_config(const FlagSet& f) {
  RunConfig config;
  if (f.o_config && f.o_config->count()) scenegen::harness::apply_config_file(config, f.config_path);
  if (f.o_backend && f.o_backend->count()) config.backend = f.backend;
  if (f.o_out && f.o_out->count()) config.out_dir = f.out;
  if (f.o_seed && f.o_seed->count()) config.guidance.seed = f.seed;
  if (f.o_alpha && f.o_alpha->count()) config.guidance.weights.alpha = f.alpha;
  if (f.o_beta && f.o_beta->count()) config.guidance.weights.beta = f.beta;
  if (f.o_gamma && f.o_gamma->count()) config.guidance.weights.gamma = f.gamma;
  if (f.o_r && f.o_r->count()) config.guidance.replace_fraction = f.r;
  if (f.o_gs && f.o_gs->count()) config.guidance.guidance_scale = f.guidance_scale;
  if (f.o_kf && f.o_kf->count()) config.guidance.weights.k_fraction = f.k_fraction;
  if (f.o_steps && f.o_steps->count()) config.guidance.steps = f.steps;
  if (f.o_jobs && f.o_jobs->count()) config.jobs = f.jobs;
  if (f.o_repeats && f.o_repeats->count()) config.repeats = f.repeats;
  config.strict = f.strict;
  config.force = f.force;
  scenegen::harness::validate_config(config);
  return config;
}

scenegen::harness::Clients make_clients(const RunConfig& config) {
  auto clients = scenegen::harness::offline_clients();
  if (config.llm_mode == "http") {
    clients.make_llm = [config] {
      return std::make_unique<scenegen::net::HttpLLMClient>(config.llm_base_url, config.llm_model);
    };
  }
  if (config.mllm_mode == "http") {
    clients.make_mllm = [config] {
      return std::make_unique<scenegen::net::HttpMLLMClient>(config.mllm_base_url,
                                                             config.mllm_model);
    };
  }
  return clients;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layout-guided scene generation and evaluation"};
  app.require_subcommand(1);

  FlagSet gen_flags;
  auto* gen = app.add_subcommand("generate", "synthesize layouts and render images");
  add_generate_flags(gen, gen_flags);

  FlagSet eval_flags;
  auto* evaluate = app.add_subcommand("evaluate", "score generated images");
  add_shared_flags(evaluate, eval_flags);
  std::vector<std::string> eval_dirs;
  evaluate->add_option("dirs", eval_dirs, "artifact directories (default: all under --out)");

  auto* report = app.add_subcommand("report", "aggregate an existing scores.csv");
  std::string scores_path;
  report->add_option("scores", scores_path, "path to scores.csv (default <out>/scores.csv)");
  FlagSet report_flags;
  report_flags.o_out = report->add_option("--out", report_flags.out, "output directory");

  auto* inspect = app.add_subcommand("inspect-trace", "summarize one artifact directory");
  std::string inspect_dir;
  inspect->add_option("dir", inspect_dir, "artifact directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : scenegen::harness::kExitConfig;
  }

  try {
    if (gen->parsed()) {
      const RunConfig config = build_config(gen_flags);
      const bool have_prompt = !gen_flags.prompt.empty();
      const bool have_benchmark = !gen_flags.benchmark.empty();
      if (have_prompt == have_benchmark)
        throw scenegen::ConfigError("generate needs exactly one of --prompt or --benchmark");

      std::vector<scenegen::harness::GenerateJob> jobs;
      if (have_benchmark) {
        const auto set = scenegen::harness::load_benchmark(gen_flags.benchmark, config.strict);
        jobs = scenegen::harness::jobs_from_benchmark(set, config);
      } else {
        jobs = scenegen::harness::jobs_from_prompt(gen_flags.prompt, config);
      }
      return scenegen::harness::run_generate(config, jobs, make_clients(config), std::cout);
    }

    if (evaluate->parsed()) {
      const RunConfig config = build_config(eval_flags);
      const std::vector<std::string> dirs =
          eval_dirs.empty() ? scenegen::harness::list_run_dirs(config.out_dir) : eval_dirs;
      return scenegen::harness::run_evaluate(config, dirs, make_clients(config), std::cout);
    }

    if (report->parsed()) {
      std::string path = scores_path;
      if (path.empty()) {
        const std::string out =
            report_flags.o_out->count() ? report_flags.out : std::string("runs");
        path = out + "/scores.csv";
      }
      return scenegen::harness::run_report(path, std::cout);
    }

    if (inspect->parsed()) {
      return scenegen::harness::inspect_trace(inspect_dir, std::cout);
    }
  } catch (const scenegen::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return scenegen::harness::kExitConfig;
  } catch (const scenegen::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return scenegen::harness::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return scenegen::harness::kExitConfig;
  }
  return scenegen::harness::kExitOk;
}
