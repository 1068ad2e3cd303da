#include <doctest/doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenegen/artifact_io.hpp"
#include "scenegen/harness.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using namespace scenegen;

namespace {

const char* kGen = "generate --prompt \"a rat is hunting a lion\" --steps 5 --seed 3";

std::string only_run_dir(const std::string& out_dir) {
  const auto dirs = harness::list_run_dirs(out_dir);
  REQUIRE(dirs.size() == 1);
  return dirs[0];
}

}  // namespace

TEST_CASE("generate renders a prompt into an artifact directory") {
  testkit::TempDir tmp;
  const std::string out = tmp.str("runs");
  const auto result = testkit::run_cli(std::string(kGen) + " --out " + out, tmp);
  CHECK(result.code == 0);
  CHECK(result.out.find("done ") != std::string::npos);
  CHECK(result.out.find("1/1 runs complete") != std::string::npos);

  const std::string dir = only_run_dir(out);
  for (const char* name : {"run.json", "plan.json", "image.ppm", "losses.csv"}) {
    CAPTURE(name);
    CHECK(fs::exists(fs::path(dir) / name));
  }
  const auto manifest = nlohmann::json::parse(testkit::slurp(dir + "/run.json"));
  CHECK(manifest.at("status") == "complete");
  CHECK(manifest.at("prompt") == "a rat is hunting a lion");
  CHECK(manifest.at("config").at("steps") == 5);
}

TEST_CASE("generate requires exactly one input source") {
  testkit::TempDir tmp;
  const auto both = testkit::run_cli(
      "generate --prompt \"x\" --benchmark b.json --out " + tmp.str("r"), tmp);
  CHECK(both.code == 1);
  CHECK(both.err.find("exactly one") != std::string::npos);

  const auto neither = testkit::run_cli("generate --out " + tmp.str("r2"), tmp);
  CHECK(neither.code == 1);
  CHECK(neither.err.find("exactly one") != std::string::npos);
}

TEST_CASE("generate rejects invalid configuration on the command line") {
  testkit::TempDir tmp;
  const auto bad_steps =
      testkit::run_cli("generate --prompt \"x\" --steps 0 --out " + tmp.str("r"), tmp);
  CHECK(bad_steps.code == 1);
  CHECK(bad_steps.err.find("config error") != std::string::npos);

  const auto bad_backend =
      testkit::run_cli("generate --prompt \"x\" --backend cuda --out " + tmp.str("r2"), tmp);
  CHECK(bad_backend.code == 1);

  const auto missing_bench = testkit::run_cli(
      "generate --benchmark " + tmp.str("absent.json") + " --out " + tmp.str("r3"), tmp);
  CHECK(missing_bench.code == 1);
}

TEST_CASE("generate expands a benchmark file and honors --strict") {
  testkit::TempDir tmp;
  const std::string bench = tmp.str("bench.json");
  io::write_text_file(bench, R"({
    "categories": {
      "realistic_analytical": {"factual_or_literal_descriptions": ["A red barn beside a silo."]},
      "creativity_imagination": {"role_reversal": ["A sheep herding a dog."]}
    }
  })");
  const std::string out = tmp.str("runs");
  const auto result = testkit::run_cli(
      "generate --benchmark " + bench + " --strict --steps 4 --out " + out, tmp);
  CHECK(result.code == 0);
  CHECK(harness::list_run_dirs(out).size() == 2);

  const std::string lopsided = tmp.str("one_category.json");
  io::write_text_file(lopsided, R"({"categories": {"realistic_analytical": {}}})");
  const auto rejected = testkit::run_cli(
      "generate --benchmark " + lopsided + " --strict --out " + tmp.str("r2"), tmp);
  CHECK(rejected.code == 1);
}

TEST_CASE("a completed run is skipped unless --force is given") {
  testkit::TempDir tmp;
  const std::string out = tmp.str("runs");
  const std::string cmd = std::string(kGen) + " --out " + out;
  REQUIRE(testkit::run_cli(cmd, tmp).code == 0);

  const auto second = testkit::run_cli(cmd, tmp);
  CHECK(second.code == 0);
  CHECK(second.out.find("skip ") != std::string::npos);

  const auto forced = testkit::run_cli(cmd + " --force", tmp);
  CHECK(forced.code == 0);
  CHECK(forced.out.find("done ") != std::string::npos);
  CHECK(forced.out.find("skip ") == std::string::npos);
}

TEST_CASE("command-line flags override config-file values") {
  testkit::TempDir tmp;
  const std::string config = tmp.str("config.json");
  io::write_text_file(config, R"({"alpha": 5.0, "steps": 4, "seed": 11})");
  const std::string out = tmp.str("runs");

  const auto result = testkit::run_cli("generate --prompt \"a rat is hunting a lion\" --config " +
                                           config + " --alpha 7 --out " + out,
                                       tmp);
  CHECK(result.code == 0);

  const auto manifest =
      nlohmann::json::parse(testkit::slurp(only_run_dir(out) + "/run.json"));
  CHECK(manifest.at("config").at("alpha") == doctest::Approx(7.0));  // flag wins
  CHECK(manifest.at("config").at("steps") == 4);                     // file value kept
  CHECK(manifest.at("seed") == 11);

  const std::string typo = tmp.str("typo.json");
  io::write_text_file(typo, R"({"alhpa": 5.0})");
  const auto rejected = testkit::run_cli(
      "generate --prompt \"x\" --config " + typo + " --out " + tmp.str("r2"), tmp);
  CHECK(rejected.code == 1);
  CHECK(rejected.err.find("alhpa") != std::string::npos);
}

TEST_CASE("evaluate scores every run under the output directory") {
  testkit::TempDir tmp;
  const std::string out = tmp.str("runs");
  REQUIRE(testkit::run_cli(std::string(kGen) + " --out " + out, tmp).code == 0);

  const auto result = testkit::run_cli("evaluate --out " + out, tmp);
  CHECK(result.code == 0);
  for (const char* name : {"scores.csv", "report.csv", "report.txt"}) {
    CAPTURE(name);
    CHECK(fs::exists(fs::path(out) / name));
  }
  const std::string scores = testkit::slurp(out + "/scores.csv");
  CHECK(scores.rfind("prompt_id,category,method,metric,value\n", 0) == 0);
  CHECK(scores.find("gpt4score") != std::string::npos);
  CHECK(scores.find("gpt4clip") != std::string::npos);
  CHECK(result.out.find("method") != std::string::npos);
}

TEST_CASE("report re-prints the aggregate table from scores.csv") {
  testkit::TempDir tmp;
  const std::string path = tmp.str("scores.csv");
  io::write_text_file(path,
                      "prompt_id,category,method,metric,value\n"
                      "run0,realistic_analytical,scenegen,gpt4score,0.9\n"
                      "run1,creativity_imagination,scenegen,gpt4score,0.7\n");
  const auto result = testkit::run_cli("report " + path, tmp);
  CHECK(result.code == 0);
  CHECK(result.out.find("method") != std::string::npos);
  CHECK(result.out.find("0.800") != std::string::npos);

  const auto missing = testkit::run_cli("report " + tmp.str("absent.csv"), tmp);
  CHECK(missing.code == 1);
}

TEST_CASE("inspect-trace summarizes one run and validates its traces") {
  testkit::TempDir tmp;
  const std::string out = tmp.str("runs");
  REQUIRE(testkit::run_cli(std::string(kGen) + " --out " + out, tmp).code == 0);
  const std::string dir = only_run_dir(out);

  const auto result = testkit::run_cli("inspect-trace " + dir, tmp);
  CHECK(result.code == 0);
  CHECK(result.out.find("trace files verified against manifest shapes") != std::string::npos);

  const auto bogus = testkit::run_cli("inspect-trace " + tmp.str("nowhere"), tmp);
  CHECK(bogus.code == 1);

  const auto missing_arg = testkit::run_cli("inspect-trace", tmp);
  CHECK(missing_arg.code == 1);
}

TEST_CASE("the CLI rejects unknown verbs and prints help cleanly") {
  testkit::TempDir tmp;
  CHECK(testkit::run_cli("frobnicate", tmp).code == 1);
  CHECK(testkit::run_cli("", tmp).code == 1);
  CHECK(testkit::run_cli("--help", tmp).code == 0);
  CHECK(testkit::run_cli("generate --help", tmp).code == 0);
}
