#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "scenegen/benchset.hpp"
#include "scenegen/config.hpp"
#include "scenegen/evaluation.hpp"
#include "scenegen/layout.hpp"

namespace scenegen::harness {

// Exit codes shared by the CLI and the harness entry points.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitPartial = 2;

struct GenerateJob {
  std::string prompt;
  std::string category;     // empty for ad-hoc prompts
  std::string subcategory;  // empty for ad-hoc prompts
  std::uint64_t seed = 0;
  int index = 0;  // position in the job list; part of the artifact dir name
};

struct RunOutcome {
  std::string dir;  // artifact directory (under out_dir)
  std::string prompt;
  bool ok = false;
  bool skipped = false;  // already complete and --force not given
  std::string error;
};

// Client factories are per-worker so implementations need not be shared
// across threads.
struct Clients {
  std::function<std::unique_ptr<layout::LLMClient>()> make_llm;
  std::function<std::unique_ptr<eval::MLLMClient>()> make_mllm;
};

// Network-free defaults: the deterministic offline planner and the stub
// scorer.
Clients offline_clients();

std::string artifact_dir_name(int index, const std::string& prompt, std::uint64_t seed);

std::vector<GenerateJob> jobs_from_benchmark(const BenchmarkSet& set, const RunConfig& config);
std::vector<GenerateJob> jobs_from_prompt(const std::string& prompt, const RunConfig& config);

// Runs every job (config.jobs workers), persists one artifact directory per
// job, and reports per-job outcomes. Returns kExitOk or kExitPartial.
int run_generate(const RunConfig& config, const std::vector<GenerateJob>& jobs,
                 const Clients& clients, std::ostream& log,
                 std::vector<RunOutcome>* outcomes = nullptr);

// Scores each artifact directory with gpt4score and gpt4clip, writes
// scores.csv, report.csv, and report.txt under config.out_dir.
int run_evaluate(const RunConfig& config, const std::vector<std::string>& run_dirs,
                 const Clients& clients, std::ostream& log,
                 std::vector<eval::ScoreRecord>* records_out = nullptr);

// Re-aggregates an existing scores.csv and prints the table.
int run_report(const std::string& scores_csv_path, std::ostream& out);

// Prints a human-readable summary of one artifact directory and verifies
// trace file sizes against the manifest.
int inspect_trace(const std::string& run_dir, std::ostream& out);

// Artifact directories under config.out_dir that hold a run manifest.
std::vector<std::string> list_run_dirs(const std::string& out_dir);

}  // namespace scenegen::harness
