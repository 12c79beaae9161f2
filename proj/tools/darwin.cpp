// Command-line frontend: extract -> optimize -> report -> apply.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "darwin/errors.hpp"
#include "darwin/project.hpp"

namespace {

struct Overrides {
  std::string store;
  int budget = -1;
  int pop = -1;
  long long seed = -1;
  int runs_search = -1;
  int runs_verify = -1;
  int warmup = -1;
  double sample_period = -1;
  double timeout = -1;
  int workers = -1;
  double rate = -1;
  std::string ranking;
  int max_sites = -1;
  std::string out_dir;

  void add_flags(CLI::App* app) {
    app->add_option("--store", store, "Builtin store id or store file path");
    app->add_option("--budget", budget, "Maximum number of evaluations");
    app->add_option("--pop", pop, "Population size");
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--runs-search", runs_search, "Test runs per search evaluation");
    app->add_option("--runs-verify", runs_verify, "Test runs per verify measurement");
    app->add_option("--warmup", warmup, "Warmup runs to discard (both modes)");
    app->add_option("--sample-period", sample_period, "Resource sample period, seconds");
    app->add_option("--timeout", timeout, "Per-run timeout, seconds (0 = 10x baseline)");
    app->add_option("--workers", workers, "Concurrent build/evaluate workers");
    app->add_option("--rate", rate, "Machine cost per hour");
    app->add_option("--ranking", ranking,
                    "Site ranking: ALL, STATIC_COUNT, or HOTNESS_FILE:<path>");
    app->add_option("--max-sites", max_sites, "Cap on ranked sites");
    app->add_option("--out", out_dir, "Run directory (overrides config out_dir)");
  }

  void apply(darwin::ProjectConfig& config) const {
    namespace fs = std::filesystem;
    if (!store.empty()) config.store_ref = store;
    if (budget >= 0) config.search.max_evaluations = budget;
    if (pop >= 0) config.search.population_size = pop;
    if (seed >= 0) config.search.rng_seed = static_cast<std::uint64_t>(seed);
    if (runs_search >= 0) config.eval.runs_search = runs_search;
    if (runs_verify >= 0) config.eval.runs_verify = runs_verify;
    if (warmup >= 0) {
      config.eval.warmup_search = warmup;
      config.eval.warmup_verify = warmup;
    }
    if (sample_period > 0) config.eval.sample_period_s = sample_period;
    if (timeout >= 0) config.eval.timeout_s = timeout;
    if (workers >= 1) config.eval.workers = workers;
    if (rate >= 0) config.eval.rate_per_hour = rate;
    if (!ranking.empty()) {
      if (ranking == "ALL") {
        config.ranking.mode = darwin::SiteRanking::Mode::All;
      } else if (ranking == "STATIC_COUNT") {
        config.ranking.mode = darwin::SiteRanking::Mode::StaticCount;
      } else if (ranking.rfind("HOTNESS_FILE:", 0) == 0) {
        config.ranking.mode = darwin::SiteRanking::Mode::HotnessFile;
        config.ranking.hotness_path = ranking.substr(std::string("HOTNESS_FILE:").size());
      } else {
        throw darwin::ConfigFileError("unknown --ranking value: " + ranking);
      }
    }
    if (max_sites >= 0) config.ranking.max_sites = max_sites;
    if (!out_dir.empty()) config.out_dir = fs::absolute(out_dir);
  }
};

darwin::ProjectConfig load_with_overrides(const std::string& config_path,
                                          const Overrides& overrides) {
  auto config = darwin::load_project_config(config_path);
  overrides.apply(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data structure selection and tuning through search"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir;
  std::string solution_id;
  std::string target;
  bool in_place = false;
  Overrides overrides;

  auto* extract = app.add_subcommand("extract", "Scan the project and write a manifest");
  extract->add_option("config", config_path, "Project config file")->required();
  overrides.add_flags(extract);

  auto* optimize = app.add_subcommand("optimize", "Search for better variants");
  optimize->add_option("config", config_path, "Project config file")->required();
  overrides.add_flags(optimize);

  auto* report = app.add_subcommand("report", "Verify the front and write the report");
  report->add_option("run_dir", run_dir, "Run directory")->required();

  auto* apply = app.add_subcommand("apply", "Materialize one solution");
  apply->add_option("run_dir", run_dir, "Run directory")->required();
  apply->add_option("solution", solution_id,
                    "Solution id, or best-time/best-memory/best-cpu")
      ->required();
  apply->add_option("target", target, "Destination directory");
  apply->add_flag("--in-place", in_place, "Rewrite the original sources");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(darwin::ExitCode::ConfigError);
  }

  try {
    if (extract->parsed()) {
      return darwin::cmd_extract(load_with_overrides(config_path, overrides), std::cout);
    }
    if (optimize->parsed()) {
      return darwin::cmd_optimize(load_with_overrides(config_path, overrides), std::cout);
    }
    if (report->parsed()) {
      return darwin::cmd_report(run_dir, std::cout);
    }
    return darwin::cmd_apply(run_dir, solution_id, target, in_place, std::cout);
  } catch (const darwin::Error& e) {
    std::cout << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  }
}
