#include "darwin/project.hpp"

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "darwin/errors.hpp"
#include "doctest.h"
#include "json.hpp"
#include "testutil.hpp"

using namespace darwin;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

const char* kBagProgram = R"(#include <cstdio>
#include <set>

int main() {
  auto* bag = new std::multiset<int>();
  for (int v : {5, 3, 3, 9, 1, 1, 7}) bag->insert(v);
  const bool ok = bag->size() == 7;
  delete bag;
  if (!ok) return 1;
  std::puts("ok");
  return 0;
}
)";

const char* kBagStore = R"({
  "language_id": "generic-demo",
  "file_globs": ["**/*.cpp"],
  "groups": [
    {
      "adt_name": "Bag",
      "impls": [
        {"name": "multiset", "type_token": "std::multiset", "ctor_token": "std::multiset"},
        {"name": "set", "type_token": "std::set", "ctor_token": "std::set"}
      ]
    }
  ]
})";

// A self-contained project whose variant space is {multiset, set}; the set
// variant builds but fails the test, so the search must keep the original.
struct ProjectFixture {
  TempDir dir;
  fs::path config_path;

  ProjectFixture() {
    testutil::write_file(dir / "proj/main.cpp", kBagProgram);
    testutil::write_file(dir / "store.json", kBagStore);
    testutil::write_file(dir / "darwin.json", config_json());
    config_path = dir / "darwin.json";
  }

  std::string config_json(const std::string& out_dir = "run") const {
    return std::string(R"({
  "source_root": "proj",
  "store": "store.json",
  "build_cmd": "c++ -O0 -std=c++17 -o app main.cpp",
  "test_cmd": "./app",
  "out_dir": ")") +
           out_dir + R"(",
  "search": {
    "population_size": 4,
    "max_evaluations": 6,
    "rng_seed": 9
  },
  "eval": {
    "runs_search": 2,
    "warmup_search": 0,
    "runs_verify": 8,
    "warmup_verify": 2,
    "timeout_s": 60
  }
})";
  }
};

std::string run_cli(const std::string& args, int& exit_code) {
  const std::string cmd = std::string(DARWIN_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::string output;
  char buf[512];
  while (fgets(buf, sizeof buf, pipe)) output += buf;
  const int status = pclose(pipe);
  exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return output;
}

}  // namespace

TEST_CASE("config loading resolves paths and rejects unknown keys") {
  ProjectFixture fx;
  const auto config = load_project_config(fx.config_path);
  CHECK(config.source_root == fx.dir / "proj");
  CHECK(config.out_dir == fx.dir / "run");
  CHECK(config.search.population_size == 4);
  CHECK(config.eval.runs_verify == 8);

  testutil::write_file(fx.dir / "bad.json", R"({"source_root": ".", "bogus": 1})");
  CHECK_THROWS_AS(load_project_config(fx.dir / "bad.json"), ConfigFileError);
  CHECK_THROWS_AS(load_project_config(fx.dir / "missing.json"), ConfigFileError);
}

TEST_CASE("extract writes a manifest and prints the space") {
  ProjectFixture fx;
  std::ostringstream log;
  const int rc = cmd_extract(load_project_config(fx.config_path), log);
  CHECK(rc == 0);
  CHECK(fs::exists(fx.dir / "run/manifest.json"));
  CHECK(log.str().find("sites: 1") != std::string::npos);
  CHECK(log.str().find("genes: 1") != std::string::npos);
  CHECK(log.str().find("search space: 2") != std::string::npos);
}

TEST_CASE("a project without sites exits NOTHING_TO_OPTIMIZE") {
  ProjectFixture fx;
  testutil::write_file(fx.dir / "proj/main.cpp", "int main() { return 0; }\n");
  std::ostringstream log;
  const int rc = cmd_extract(load_project_config(fx.config_path), log);
  CHECK(rc == 3);
}

TEST_CASE("a missing store file is a config error") {
  ProjectFixture fx;
  auto config = load_project_config(fx.config_path);
  config.store_ref = (fx.dir / "nope.json").string();
  std::ostringstream log;
  CHECK(cmd_extract(config, log) == 2);
}

TEST_CASE("optimize, report and apply round-trip on the fixture project") {
  ProjectFixture fx;
  const auto config = load_project_config(fx.config_path);
  const auto source_before = testutil::snapshot_tree(fx.dir / "proj");

  std::ostringstream log;
  REQUIRE(cmd_optimize(config, log) == 0);
  CHECK(fs::exists(fx.dir / "run/history.jsonl"));
  CHECK(fs::exists(fx.dir / "run/baseline.json"));
  CHECK(fs::exists(fx.dir / "run/state.json"));
  CHECK(fs::exists(fx.dir / "run/cache.jsonl"));

  // the source tree is never touched
  CHECK(testutil::snapshot_tree(fx.dir / "proj") == source_before);

  std::ostringstream report_log;
  REQUIRE(cmd_report(fx.dir / "run", report_log) == 0);
  CHECK(fs::exists(fx.dir / "run/report.md"));
  CHECK(fs::exists(fx.dir / "run/pareto.json"));

  // the set variant fails its test, so the front is the baseline genome
  const auto pareto = nlohmann::json::parse(testutil::read_file(fx.dir / "run/pareto.json"));
  REQUIRE(pareto.at("solutions").size() == 1);
  CHECK(pareto.at("solutions")[0].at("genome") == std::vector<int>{0});
  CHECK(pareto.at("solutions")[0].at("classification") == "DOMINATED");

  std::ostringstream apply_log;
  REQUIRE(cmd_apply(fx.dir / "run", "best-time", fx.dir / "applied", false,
                    apply_log) == 0);
  CHECK(testutil::snapshot_tree(fx.dir / "applied") ==
        testutil::snapshot_tree(fx.dir / "run/best-time"));

  // applying the seed genome reproduces the source exactly
  CHECK(testutil::read_file(fx.dir / "applied/main.cpp") == kBagProgram);

  std::ostringstream err_log;
  CHECK(cmd_apply(fx.dir / "run", "77", fx.dir / "applied2", false, err_log) == 2);
  CHECK(err_log.str().find("no solution") != std::string::npos);

  CHECK(cmd_apply(fx.dir / "run", "best-time", fx.dir / "applied", false, err_log) ==
        2);  // target not empty
}

TEST_CASE("a rerun replays the cache and reproduces the history") {
  ProjectFixture fx;
  const auto config = load_project_config(fx.config_path);

  std::ostringstream log;
  REQUIRE(cmd_optimize(config, log) == 0);
  const auto history_first = testutil::read_file(fx.dir / "run/history.jsonl");
  REQUIRE(!history_first.empty());

  std::ostringstream log2;
  REQUIRE(cmd_optimize(config, log2) == 0);
  CHECK(testutil::read_file(fx.dir / "run/history.jsonl") == history_first);
}

TEST_CASE("re-reporting a run is byte-identical") {
  ProjectFixture fx;
  const auto config = load_project_config(fx.config_path);
  std::ostringstream log;
  REQUIRE(cmd_optimize(config, log) == 0);
  REQUIRE(cmd_report(fx.dir / "run", log) == 0);
  const auto report_first = testutil::read_file(fx.dir / "run/report.md");
  const auto pareto_first = testutil::read_file(fx.dir / "run/pareto.json");

  REQUIRE(cmd_report(fx.dir / "run", log) == 0);
  CHECK(testutil::read_file(fx.dir / "run/report.md") == report_first);
  CHECK(testutil::read_file(fx.dir / "run/pareto.json") == pareto_first);
}

TEST_CASE("parallel workers produce the same outcome set") {
  ProjectFixture fx;
  auto config = load_project_config(fx.config_path);
  config.eval.workers = 2;
  config.out_dir = fx.dir / "run-parallel";
  std::ostringstream log;
  REQUIRE(cmd_optimize(config, log) == 0);
  REQUIRE(cmd_report(config.out_dir, log) == 0);
  const auto pareto =
      nlohmann::json::parse(testutil::read_file(config.out_dir / "pareto.json"));
  REQUIRE(pareto.at("solutions").size() == 1);
  CHECK(pareto.at("solutions")[0].at("genome") == std::vector<int>{0});
}

TEST_CASE("a zero budget returns the baseline with a warning") {
  ProjectFixture fx;
  auto config = load_project_config(fx.config_path);
  config.search.max_evaluations = 0;
  std::ostringstream log;
  REQUIRE(cmd_optimize(config, log) == 0);
  CHECK(log.str().find("warning") != std::string::npos);

  std::ifstream history(fx.dir / "run/history.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(history, line)) ++lines;
  CHECK(lines == 1);

  std::ostringstream report_log;
  REQUIRE(cmd_report(fx.dir / "run", report_log) == 0);
  const auto pareto = testutil::read_file(fx.dir / "run/pareto.json");
  CHECK(pareto.find("\"DOMINATED\"") != std::string::npos);  // the baseline itself
}

TEST_CASE("a corrupted history line is reported with its number") {
  ProjectFixture fx;
  const auto config = load_project_config(fx.config_path);
  std::ostringstream log;
  REQUIRE(cmd_optimize(config, log) == 0);

  auto lines = testutil::read_file(fx.dir / "run/history.jsonl");
  const auto first_newline = lines.find('\n');
  lines.insert(first_newline + 1, "{garbage\n");
  testutil::write_file(fx.dir / "run/history.jsonl", lines);

  std::ostringstream report_log;
  CHECK(cmd_report(fx.dir / "run", report_log) == 6);
  CHECK(report_log.str().find("line 2") != std::string::npos);
}

TEST_CASE("report without a run directory is NoRunFound") {
  TempDir dir;
  std::ostringstream log;
  CHECK(cmd_report(dir / "nowhere", log) == 2);
}

TEST_CASE("an infeasible baseline aborts the optimization") {
  ProjectFixture fx;
  auto config = load_project_config(fx.config_path);
  config.eval.test_cmd = "false";
  std::ostringstream log;
  CHECK(cmd_optimize(config, log) == 4);
  CHECK(log.str().find("baseline") != std::string::npos);
}

TEST_CASE("DARWIN_WORKDIR relocates variant builds") {
  ProjectFixture fx;
  setenv("DARWIN_WORKDIR", (fx.dir / "elsewhere").c_str(), 1);
  const auto config = load_project_config(fx.config_path);
  unsetenv("DARWIN_WORKDIR");
  CHECK(config.eval.workdir_root == fx.dir / "elsewhere");
}

TEST_CASE("apply --in-place rewrites only templated files in the source") {
  ProjectFixture fx;
  const auto config = load_project_config(fx.config_path);
  std::ostringstream log;
  REQUIRE(cmd_optimize(config, log) == 0);
  REQUIRE(cmd_report(fx.dir / "run", log) == 0);

  REQUIRE(cmd_apply(fx.dir / "run", "0", {}, /*in_place=*/true, log) == 0);
  // solution 0 is the seed genome here, so in-place writes identical bytes
  CHECK(testutil::read_file(fx.dir / "proj/main.cpp") == kBagProgram);
}

TEST_CASE("cli binary: extract and error paths") {
  ProjectFixture fx;
  int rc = 0;

  const auto out = run_cli("extract " + fx.config_path.string(), rc);
  CHECK(rc == 0);
  CHECK(out.find("sites: 1") != std::string::npos);
  CHECK(out.find("search space: 2") != std::string::npos);

  run_cli("extract " + (fx.dir / "missing.json").string(), rc);
  CHECK(rc == 2);

  testutil::write_file(fx.dir / "proj/main.cpp", "int main() { return 0; }\n");
  run_cli("extract " + fx.config_path.string(), rc);
  CHECK(rc == 3);

  run_cli("bogus-subcommand", rc);
  CHECK(rc != 0);
}

TEST_CASE("cli binary: flag overrides reach the search") {
  ProjectFixture fx;
  int rc = 0;
  const auto out = run_cli("extract " + fx.config_path.string() + " --max-sites 1 --ranking STATIC_COUNT --out " +
                               (fx.dir / "run2").string(),
                           rc);
  CHECK(rc == 0);
  CHECK(fs::exists(fx.dir / "run2/manifest.json"));
}
