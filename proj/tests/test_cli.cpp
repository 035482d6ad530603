#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "grpolab/experiment.hpp"
#include "json.hpp"

using namespace grpolab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("grpolab_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

json small_env() {
  return json{{"alphabet_size", 3}, {"eos_id", 2},
              {"prompts", json::array({json::array({0, 0.5}), json::array({1, 0.5})})},
              {"max_len", 3},       {"reward_rule", "bounded-random"},
              {"reward_seed", 5},   {"z_max", 2.0}};
}

std::string write_spec(const TempDir& dir, const json& spec, const std::string& name = "spec.json") {
  const fs::path p = dir.path / name;
  std::ofstream out(p);
  out << spec.dump(2);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("mse-sweep smoke: one csv row per estimator and G") {
  TempDir dir;
  json spec;
  spec["command"] = "mse-sweep";
  spec["seed"] = 11;
  spec["env"] = small_env();
  spec["out"] = (dir.path / "results").string();
  spec["params"] = {{"estimators", {"vanilla", "leave_one_out"}},
                    {"B", 1},
                    {"G_list", {2, 4}},
                    {"reps", 200},
                    {"exact", true}};
  const RunOutcome outcome = run_experiment(write_spec(dir, spec), {});
  REQUIRE(outcome.exit_code == 0);
  const std::string csv = slurp(fs::path(outcome.out_dir) / "mse_sweep.csv");
  int lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 1 + 4);  // header + 2 estimators x 2 group sizes
  CHECK(fs::exists(fs::path(outcome.out_dir) / "manifest.json"));
  CHECK(fs::exists(fs::path(outcome.out_dir) / "result.json"));
  CHECK(fs::exists(fs::path(outcome.out_dir) / "summary.txt"));
}

TEST_CASE("identical specs give byte-identical result csvs in fresh directories") {
  TempDir dir;
  json spec;
  spec["command"] = "mse-sweep";
  spec["seed"] = 7;
  spec["env"] = small_env();
  spec["out"] = (dir.path / "results").string();
  spec["params"] = {{"estimators", {"leave_one_out"}}, {"B", 2}, {"G_list", {4}}, {"reps", 300}};
  const std::string path = write_spec(dir, spec);
  const RunOutcome a = run_experiment(path, {});
  const RunOutcome b = run_experiment(path, {});
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(a.out_dir != b.out_dir);  // append-only reruns
  CHECK(slurp(fs::path(a.out_dir) / "mse_sweep.csv") == slurp(fs::path(b.out_dir) / "mse_sweep.csv"));
  CHECK(slurp(fs::path(a.out_dir) / "result.json") == slurp(fs::path(b.out_dir) / "result.json"));
}

TEST_CASE("worker count does not change results") {
  TempDir dir;
  json spec;
  spec["command"] = "mse-sweep";
  spec["seed"] = 9;
  spec["env"] = small_env();
  spec["out"] = (dir.path / "results").string();
  spec["params"] = {{"estimators", {"leave_one_out"}}, {"B", 1}, {"G_list", {4}}, {"reps", 500}};
  const std::string path = write_spec(dir, spec);
  RunOverrides one;
  one.workers = 1;
  RunOverrides many;
  many.workers = 6;
  const RunOutcome a = run_experiment(path, one);
  const RunOutcome b = run_experiment(path, many);
  CHECK(slurp(fs::path(a.out_dir) / "mse_sweep.csv") == slurp(fs::path(b.out_dir) / "mse_sweep.csv"));
}

TEST_CASE("validate lists diagnostics without running") {
  TempDir dir;
  json spec;
  spec["command"] = "mse-sweep";
  spec["env"] = small_env();
  spec["params"] = {{"G_list", {1, 2}}, {"estimators", {"leave_one_out"}}};
  // missing seed and G=1 with leave_one_out: two diagnostics
  const auto diags = validate_experiment(write_spec(dir, spec));
  REQUIRE(diags.size() >= 2);
  bool seed_diag = false, g_diag = false;
  for (const auto& d : diags) {
    seed_diag = seed_diag || d.find("seed") != std::string::npos;
    g_diag = g_diag || d.find("G >= 2") != std::string::npos;
  }
  CHECK(seed_diag);
  CHECK(g_diag);

  json good;
  good["command"] = "arcsin-check";
  good["seed"] = 3;
  good["env"] = small_env();
  good["params"] = {{"G", 16}};
  CHECK(validate_experiment(write_spec(dir, good, "good.json")).empty());
}

TEST_CASE("runtime rejections exit 3 with a machine-readable error") {
  TempDir dir;
  json spec;
  spec["command"] = "asymptotics";
  spec["seed"] = 2;
  spec["out"] = (dir.path / "results").string();
  spec["params"] = {{"quadratic", {{"m", {{"diag", {2.0, 0.5}}}},
                                   {"gamma", {{"scaled_identity", 1.0}}}}},
                    {"beta", 0.9},  // needs beta > 1 for lambda_min = 0.5
                    {"n", 50},
                    {"runs", 5},
                    {"mixture_samples", 50}};
  const RunOutcome outcome = run_experiment(write_spec(dir, spec), {});
  CHECK(outcome.exit_code == 3);
  const json err = json::parse(outcome.error_json);
  CHECK(err["code"] == 3);
  CHECK(err["error"].get<std::string>().find("beta") != std::string::npos);
}

TEST_CASE("asymptotics smoke run writes the report") {
  TempDir dir;
  json spec;
  spec["command"] = "asymptotics";
  spec["seed"] = 4;
  spec["out"] = (dir.path / "results").string();
  spec["params"] = {{"quadratic", {{"m", {{"diag", {2.0, 0.0}}}},
                                   {"gamma", {{"scaled_identity", 0.5}}}}},
                    {"beta", 0.8},
                    {"n", 400},
                    {"runs", 60},
                    {"mixture_samples", 2000}};
  const RunOutcome outcome = run_experiment(write_spec(dir, spec), {});
  REQUIRE(outcome.exit_code == 0);
  const json result = json::parse(slurp(fs::path(outcome.out_dir) / "result.json"));
  CHECK(result["asymptotics"]["rank"] == 1);
  CHECK(fs::exists(fs::path(outcome.out_dir) / "scaled_gaps.csv"));
}

TEST_CASE("train smoke writes a trace and manifests echo the resolved env") {
  TempDir dir;
  json spec;
  spec["command"] = "train";
  spec["seed"] = 6;
  spec["env"] = small_env();
  spec["out"] = (dir.path / "results").string();
  spec["params"] = {{"B", 2}, {"G", 4}, {"n", 10},
                    {"schedule", {{"kind", "constant"}, {"beta", 0.2}}},
                    {"baseline", "leave_one_out"},
                    {"snapshot_stride", 5}};
  const RunOutcome outcome = run_experiment(write_spec(dir, spec), {});
  REQUIRE(outcome.exit_code == 0);
  CHECK(fs::exists(fs::path(outcome.out_dir) / "trace.csv"));
  CHECK(fs::exists(fs::path(outcome.out_dir) / "snapshot_5.csv"));
  CHECK(fs::exists(fs::path(outcome.out_dir) / "snapshot_10.csv"));
  const json manifest = json::parse(slurp(fs::path(outcome.out_dir) / "manifest.json"));
  CHECK(manifest["resolved_env"]["alphabet_size"] == 3);
  CHECK(manifest["seed"] == 6);
}
