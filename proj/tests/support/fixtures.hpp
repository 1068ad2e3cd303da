#pragma once

// Shared test scaffolding: a scratch directory, small plan builders, and a
// runner for the command-line binary (path injected via SCENEGEN_CLI_PATH).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "scenegen/plan.hpp"
#include "scenegen/toy_backend.hpp"

namespace testkit {

class TempDir {
 public:
  TempDir() {
    const auto base = std::filesystem::temp_directory_path();
    for (int attempt = 0; attempt < 10000; ++attempt) {
      auto candidate = base / ("scenegen_test_" + std::to_string(::getpid()) + "_" +
                               std::to_string(counter()++));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = std::move(candidate);
        return;
      }
    }
    throw std::runtime_error("cannot create scratch directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& name = "") const {
    return name.empty() ? path_.string() : (path_ / name).string();
  }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline scenegen::LayoutPlan two_object_plan() {
  scenegen::LayoutPlan plan;
  plan.background_prompt = "A grassland scene";
  plan.negative_prompt = "blurry";
  scenegen::ObjectSpec rat;
  rat.name = "rat";
  rat.box = {0.05, 0.35, 0.4, 0.45};
  rat.candidates = {"crouched low, stalking forward", "leaping mid-air"};
  scenegen::ObjectSpec lion;
  lion.name = "lion";
  lion.box = {0.55, 0.3, 0.4, 0.5};
  lion.candidates = {"backing away with wide eyes", "cowering behind tall grass"};
  plan.objects = {rat, lion};
  return plan;
}

inline scenegen::ResolvedPlan two_object_resolved() {
  scenegen::ResolvedPlan resolved;
  resolved.plan = two_object_plan();
  resolved.chosen = {0, 0};
  return resolved;
}

inline scenegen::backend::ToyBackendConfig small_backend_config(int steps) {
  scenegen::backend::ToyBackendConfig config;
  config.steps = steps;
  return config;
}

#ifdef SCENEGEN_CLI_PATH

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI with stdout/stderr captured into the scratch directory.
inline CliResult run_cli(const std::string& args, const TempDir& scratch) {
  const std::string out_file = scratch.str("cli_stdout.txt");
  const std::string err_file = scratch.str("cli_stderr.txt");
  const std::string cmd =
      std::string(SCENEGEN_CLI_PATH) + " " + args + " > " + out_file + " 2> " + err_file;
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

#endif  // SCENEGEN_CLI_PATH

}  // namespace testkit
