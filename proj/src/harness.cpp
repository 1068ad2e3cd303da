#include "scenegen/harness.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "scenegen/artifact_io.hpp"
#include "scenegen/sampler.hpp"
#include "scenegen/toy_backend.hpp"

namespace fs = std::filesystem;

namespace scenegen::harness {

namespace {

constexpr const char* kManifestName = "run.json";
constexpr const char* kMethodName = "scenegen";

// Offline scorer: caption echoes the prompt, the score hashes image bytes and
// prompt so reruns are stable without any endpoint.
class StubMLLM : public eval::MLLMClient {
 public:
  std::string ask(const ImageU8& image, const std::string& context,
                  const std::string& question) override {
    if (question == eval::kDescribeQuestion) return "a rendered scene for: " + context;
    const std::string_view bytes(reinterpret_cast<const char*>(image.rgb.data()),
                                 image.rgb.size());
    const std::uint64_t h = fnv1a64(bytes) ^ fnv1a64(context);
    return "Alignment score: " + std::to_string(60 + static_cast<int>(h % 36));
  }
};

std::string hex8(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(8) << static_cast<std::uint32_t>(h & 0xffffffffu);
  return os.str();
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::unique_ptr<backend::DenoisingBackend> make_backend(const RunConfig& config) {
  if (config.backend == "toy") {
    backend::ToyBackendConfig toy;
    toy.steps = config.guidance.steps;
    return std::make_unique<backend::ToyBackend>(toy);
  }
  throw ConfigError("the 'adapter' backend is a declared interface only; use --backend toy");
}

bool run_is_complete(const std::string& dir) {
  const fs::path manifest = fs::path(dir) / kManifestName;
  std::error_code ec;
  if (!fs::exists(manifest, ec)) return false;
  try {
    const auto doc = nlohmann::json::parse(io::read_text_file(manifest.string()));
    return doc.value("status", "") == "complete";
  } catch (...) {
    return false;
  }
}

std::string losses_csv(const sampler::PipelineResult& result) {
  std::ostringstream os;
  os << "step,loss_name,object,value\n" << std::setprecision(17);
  for (const auto& trace : result.traces) {
    for (std::size_t s = 0; s < trace.losses.size(); ++s)
      os << s << ",object_constraint," << csv_quote(trace.name) << ',' << trace.losses[s] << '\n';
    for (std::size_t s = 0; s < trace.in_box.size(); ++s)
      os << s << ",object_in_box_fraction," << csv_quote(trace.name) << ',' << trace.in_box[s]
         << '\n';
  }
  for (std::size_t i = 0; i < result.traces.size(); ++i) {
    const auto& name = result.traces[i].name;
    for (std::size_t s = 0; s < result.scene.bg_losses[i].size(); ++s)
      os << s << ",background_constraint," << csv_quote(name) << ','
         << result.scene.bg_losses[i][s] << '\n';
    for (std::size_t s = 0; s < result.scene.bg_in_box[i].size(); ++s)
      os << s << ",background_in_box_fraction," << csv_quote(name) << ','
         << result.scene.bg_in_box[i][s] << '\n';
  }
  return os.str();
}

void write_artifacts(const std::string& dir, const RunConfig& config, const GenerateJob& job,
                     const sampler::PipelineResult& result, backend::DenoisingBackend& be) {
  fs::create_directories(dir);
  const auto in_dir = [&](const std::string& name) { return (fs::path(dir) / name).string(); };

  io::write_text_file(in_dir("plan.json"), layout::resolved_to_json(result.resolved).dump(2) + "\n");

  backend::LatentState final_state;
  final_state.t = 0;
  final_state.z = result.scene.final_z;
  io::write_ppm(in_dir("image.ppm"), be.decode(final_state));

  nlohmann::json objects = nlohmann::json::array();
  for (std::size_t i = 0; i < result.traces.size(); ++i) {
    const auto& trace = result.traces[i];
    const std::string idx = std::to_string(i);

    std::vector<double> latents;
    for (const auto& z : trace.latents) latents.insert(latents.end(), z.v.begin(), z.v.end());
    io::write_doubles(in_dir("trace_latent_" + idx + ".bin"), latents);

    std::vector<double> attn_values;
    for (const auto& a : trace.attentions)
      attn_values.insert(attn_values.end(), a.values.begin(), a.values.end());
    io::write_doubles(in_dir("trace_attn_" + idx + ".bin"), attn_values);

    backend::LatentState object_state;
    object_state.t = 0;
    object_state.z = trace.latents.back();
    io::write_ppm(in_dir("object_" + idx + ".ppm"), be.decode(object_state));

    nlohmann::json obj;
    obj["name"] = trace.name;
    obj["prompt"] = trace.prompt;
    obj["box"] = {trace.box.x, trace.box.y, trace.box.w, trace.box.h};
    obj["span"] = trace.span.indices;
    obj["tokens"] = trace.attentions.front().tokens;
    obj["files"] = {{"image", "object_" + idx + ".ppm"},
                    {"latents", "trace_latent_" + idx + ".bin"},
                    {"attentions", "trace_attn_" + idx + ".bin"}};
    objects.push_back(obj);
  }

  io::write_text_file(in_dir("losses.csv"), losses_csv(result));

  nlohmann::json manifest;
  manifest["schema"] = 1;
  manifest["status"] = "complete";
  manifest["prompt"] = job.prompt;
  manifest["category"] = job.category;
  manifest["subcategory"] = job.subcategory;
  manifest["seed"] = job.seed;
  manifest["backend"] = config.backend;
  manifest["scene_prompt"] = result.scene.prompt;
  manifest["replace_steps"] = result.scene.replace_steps;
  manifest["config"] = {{"alpha", config.guidance.weights.alpha},
                        {"beta", config.guidance.weights.beta},
                        {"gamma", config.guidance.weights.gamma},
                        {"k_fraction", config.guidance.weights.k_fraction},
                        {"steps", config.guidance.steps},
                        {"r", config.guidance.replace_fraction},
                        {"guidance_scale", config.guidance.guidance_scale},
                        {"grad_updates_per_step", config.guidance.grad_updates_per_step},
                        {"saliency_quantile", config.guidance.saliency_quantile}};
  manifest["latent"] = {{"channels", be.channels()},
                        {"height", be.latent_height()},
                        {"width", be.latent_width()}};
  manifest["files"] = {{"image", "image.ppm"}, {"plan", "plan.json"}, {"losses", "losses.csv"}};
  manifest["objects"] = objects;
  // The manifest lands last: its presence with status "complete" is what
  // marks the directory resumable.
  io::write_text_file(in_dir(kManifestName), manifest.dump(2) + "\n");
}

RunOutcome execute_job(const RunConfig& config, const GenerateJob& job,
                       layout::LLMClient& llm) {
  RunOutcome outcome;
  outcome.prompt = job.prompt;
  outcome.dir = (fs::path(config.out_dir) / artifact_dir_name(job.index, job.prompt, job.seed)).string();

  if (!config.force && run_is_complete(outcome.dir)) {
    outcome.ok = true;
    outcome.skipped = true;
    return outcome;
  }

  try {
    const UserPrompt user{job.prompt, job.subcategory};
    const LayoutPlan plan = layout::synthesize_details(user, llm, config.llm_retries);
    saa::HashTextEncoder encoder;
    saa::SaaOptions options;
    options.include_background = config.saa_include_background;
    options.max_exhaustive = config.saa_max_exhaustive;
    const ResolvedPlan resolved = saa::select_descriptions(plan, encoder, options);

    const auto be = make_backend(config);
    sampler::GuidanceConfig guidance = config.guidance;
    guidance.seed = job.seed;
    const sampler::PipelineResult result = sampler::run_pipeline(*be, resolved, guidance);

    write_artifacts(outcome.dir, config, job, result, *be);
    outcome.ok = true;
  } catch (const Error& e) {
    outcome.error = e.what();
  }
  return outcome;
}

}  // namespace

Clients offline_clients() {
  Clients clients;
  clients.make_llm = [] { return std::make_unique<layout::OfflinePlannerClient>(); };
  clients.make_mllm = [] { return std::make_unique<StubMLLM>(); };
  return clients;
}

std::string artifact_dir_name(int index, const std::string& prompt, std::uint64_t seed) {
  std::ostringstream os;
  os << "run" << std::setfill('0') << std::setw(4) << index << "_s" << seed << '_'
     << hex8(fnv1a64(prompt));
  return os.str();
}

std::vector<GenerateJob> jobs_from_benchmark(const BenchmarkSet& set, const RunConfig& config) {
  std::vector<GenerateJob> jobs;
  int index = 0;
  for (const auto& prompt : set.prompts) {
    for (int rep = 0; rep < config.repeats; ++rep) {
      GenerateJob job;
      job.prompt = prompt.text;
      job.category = prompt.category;
      job.subcategory = prompt.subcategory;
      job.seed = config.guidance.seed + static_cast<std::uint64_t>(rep);
      job.index = index++;
      jobs.push_back(std::move(job));
    }
  }
  return jobs;
}

std::vector<GenerateJob> jobs_from_prompt(const std::string& prompt, const RunConfig& config) {
  std::vector<GenerateJob> jobs;
  for (int rep = 0; rep < config.repeats; ++rep) {
    GenerateJob job;
    job.prompt = prompt;
    job.seed = config.guidance.seed + static_cast<std::uint64_t>(rep);
    job.index = rep;
    jobs.push_back(std::move(job));
  }
  return jobs;
}

int run_generate(const RunConfig& config, const std::vector<GenerateJob>& jobs,
                 const Clients& clients, std::ostream& log,
                 std::vector<RunOutcome>* outcomes_out) {
  validate_config(config);
  if (config.backend != "toy")
    throw ConfigError("the 'adapter' backend is a declared interface only; use --backend toy");
  fs::create_directories(config.out_dir);

  std::vector<RunOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> cursor{0};
  std::mutex log_mu;

  auto worker = [&] {
    const auto llm = clients.make_llm();
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= jobs.size()) break;
      outcomes[i] = execute_job(config, jobs[i], *llm);
      std::lock_guard<std::mutex> lock(log_mu);
      const auto& o = outcomes[i];
      if (o.skipped)
        log << "skip " << o.dir << " (complete)\n";
      else if (o.ok)
        log << "done " << o.dir << '\n';
      else
        log << "FAIL " << o.dir << ": " << o.error << '\n';
    }
  };

  const int workers = std::max(1, std::min<int>(config.jobs, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int failed = 0;
  for (const auto& o : outcomes)
    if (!o.ok) ++failed;
  log << outcomes.size() - static_cast<std::size_t>(failed) << "/" << outcomes.size()
      << " runs complete\n";
  if (outcomes_out) *outcomes_out = std::move(outcomes);
  return failed == 0 ? kExitOk : kExitPartial;
}

int run_evaluate(const RunConfig& config, const std::vector<std::string>& run_dirs,
                 const Clients& clients, std::ostream& log,
                 std::vector<eval::ScoreRecord>* records_out) {
  validate_config(config);
  fs::create_directories(config.out_dir);

  std::vector<eval::ScoreRecord> records;
  std::vector<std::string> failures;
  std::atomic<std::size_t> cursor{0};
  std::mutex mu;

  auto worker = [&] {
    const auto mllm = clients.make_mllm();
    saa::HashTextEncoder encoder;
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= run_dirs.size()) break;
      const std::string& dir = run_dirs[i];
      try {
        const auto manifest =
            nlohmann::json::parse(io::read_text_file((fs::path(dir) / kManifestName).string()));
        const std::string prompt = manifest.at("prompt").get<std::string>();
        const std::string category = manifest.value("category", "");
        const ImageU8 image = io::read_ppm((fs::path(dir) / "image.ppm").string());
        const std::string id = fs::path(dir).filename().string();

        const auto outcome = eval::gpt4score(image, prompt, *mllm);
        const double clip = eval::gpt4clip_score(image, prompt, *mllm, encoder);

        std::lock_guard<std::mutex> lock(mu);
        records.push_back({id, category, kMethodName, "gpt4score", outcome.score});
        records.push_back({id, category, kMethodName, "gpt4clip", clip});
        if (outcome.clamped) log << "warn " << id << ": raw score clamped into [0,100]\n";
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        failures.push_back(dir);
        log << "FAIL " << dir << ": " << e.what() << '\n';
      }
    }
  };

  const int workers =
      std::max(1, std::min<int>(config.jobs, static_cast<int>(std::max<std::size_t>(run_dirs.size(), 1))));
  std::vector<std::thread> pool;
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // Stable output order regardless of worker interleaving.
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.prompt_id != b.prompt_id) return a.prompt_id < b.prompt_id;
    return a.metric < b.metric;
  });

  std::ostringstream scores;
  scores << "prompt_id,category,method,metric,value\n" << std::setprecision(17);
  for (const auto& r : records) {
    scores << csv_quote(r.prompt_id) << ',' << r.category << ',' << r.method << ',' << r.metric
           << ',' << r.value << '\n';
  }
  io::write_text_file((fs::path(config.out_dir) / "scores.csv").string(), scores.str());

  std::vector<eval::ScoreRecord> categorized;
  for (const auto& r : records) {
    if (r.category == eval::kCategoryRealistic || r.category == eval::kCategoryCreative)
      categorized.push_back(r);
  }
  const eval::Report report = eval::aggregate_report(categorized);
  io::write_text_file((fs::path(config.out_dir) / "report.csv").string(), report.to_csv());
  io::write_text_file((fs::path(config.out_dir) / "report.txt").string(), report.to_table());
  log << report.to_table();

  if (records_out) *records_out = std::move(records);
  return failures.empty() ? kExitOk : kExitPartial;
}

int run_report(const std::string& scores_csv_path, std::ostream& out) {
  const std::string text = io::read_text_file(scores_csv_path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("scores file is empty: " + scores_csv_path);

  std::vector<eval::ScoreRecord> records;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream row(line);
    eval::ScoreRecord r;
    std::string value;
    if (!std::getline(row, r.prompt_id, ',') || !std::getline(row, r.category, ',') ||
        !std::getline(row, r.method, ',') || !std::getline(row, r.metric, ',') ||
        !std::getline(row, value))
      throw ParseError("malformed scores row: " + line);
    try {
      r.value = std::stod(value);
    } catch (const std::exception&) {
      throw ParseError("malformed score value: " + value);
    }
    if (r.category == eval::kCategoryRealistic || r.category == eval::kCategoryCreative)
      records.push_back(std::move(r));
  }
  out << eval::aggregate_report(records).to_table();
  return kExitOk;
}

int inspect_trace(const std::string& run_dir, std::ostream& out) {
  const auto manifest =
      nlohmann::json::parse(io::read_text_file((fs::path(run_dir) / kManifestName).string()));
  out << "prompt:       " << manifest.at("prompt").get<std::string>() << '\n';
  out << "scene prompt: " << manifest.at("scene_prompt").get<std::string>() << '\n';
  out << "seed:         " << manifest.at("seed").get<std::uint64_t>() << '\n';
  const int steps = manifest.at("config").at("steps").get<int>();
  out << "steps:        " << steps << " (replace window " << manifest.at("replace_steps").get<int>()
      << ")\n";
  const auto& latent = manifest.at("latent");
  const int c = latent.at("channels").get<int>();
  const int h = latent.at("height").get<int>();
  const int w = latent.at("width").get<int>();
  out << "latent:       " << c << 'x' << h << 'x' << w << '\n';

  for (const auto& obj : manifest.at("objects")) {
    const auto name = obj.at("name").get<std::string>();
    const auto box = obj.at("box");
    out << "object '" << name << "': box [" << box[0].get<double>() << ", " << box[1].get<double>()
        << ", " << box[2].get<double>() << ", " << box[3].get<double>() << "], span";
    for (const auto& idx : obj.at("span")) out << ' ' << idx.get<int>();
    out << '\n';

    const auto files = obj.at("files");
    const std::size_t latent_count = static_cast<std::size_t>(steps) * c * h * w;
    io::read_doubles((fs::path(run_dir) / files.at("latents").get<std::string>()).string(),
                     latent_count);
    const std::size_t attn_count =
        static_cast<std::size_t>(steps) * h * w * static_cast<std::size_t>(obj.at("tokens").get<int>());
    io::read_doubles((fs::path(run_dir) / files.at("attentions").get<std::string>()).string(),
                     attn_count);
  }
  out << "trace files verified against manifest shapes\n";
  return kExitOk;
}

std::vector<std::string> list_run_dirs(const std::string& out_dir) {
  std::vector<std::string> dirs;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(out_dir, ec)) {
    if (entry.is_directory() && fs::exists(entry.path() / kManifestName)) {
      dirs.push_back(entry.path().string());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace scenegen::harness
