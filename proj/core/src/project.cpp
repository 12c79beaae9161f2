#include "darwin/project.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "darwin/diff.hpp"
#include "darwin/errors.hpp"
#include "darwin/manifest.hpp"
#include "darwin/report.hpp"
#include "json.hpp"

namespace darwin {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known = known || it.key() == key;
    if (!known) throw ConfigFileError(where + ": unknown key \"" + it.key() + "\"");
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigFileError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

json config_to_json(const ProjectConfig& c) {
  json j;
  j["source_root"] = c.source_root.generic_string();
  j["store"] = c.store_ref;
  if (!c.file_globs.empty()) j["file_globs"] = c.file_globs;
  json ranking;
  switch (c.ranking.mode) {
    case SiteRanking::Mode::All: ranking["mode"] = "ALL"; break;
    case SiteRanking::Mode::StaticCount:
      ranking["mode"] = "STATIC_COUNT";
      ranking["max_sites"] = c.ranking.max_sites;
      break;
    case SiteRanking::Mode::HotnessFile:
      ranking["mode"] = "HOTNESS_FILE";
      ranking["max_sites"] = c.ranking.max_sites;
      ranking["path"] = c.ranking.hotness_path.generic_string();
      break;
  }
  j["ranking"] = std::move(ranking);
  j["search"] = {{"population_size", c.search.population_size},
                 {"max_evaluations", c.search.max_evaluations},
                 {"crossover_prob", c.search.crossover_prob},
                 {"mutation_prob_per_gene", c.search.mutation_prob_per_gene},
                 {"rng_seed", c.search.rng_seed},
                 {"convergence_generations", c.search.convergence_generations},
                 {"convergence_tolerance", c.search.convergence_tolerance}};
  j["eval"] = {{"build_cmd", c.eval.build_cmd},
               {"test_cmd", c.eval.test_cmd},
               {"runs_search", c.eval.runs_search},
               {"runs_verify", c.eval.runs_verify},
               {"warmup_search", c.eval.warmup_search},
               {"warmup_verify", c.eval.warmup_verify},
               {"sample_period_s", c.eval.sample_period_s},
               {"timeout_s", c.eval.timeout_s},
               {"rate_per_hour", c.eval.rate_per_hour},
               {"currency", c.eval.currency},
               {"workers", c.eval.workers}};
  j["out_dir"] = c.out_dir.generic_string();
  return j;
}

ProjectConfig config_from_json(const json& j, const fs::path& base_dir,
                               const std::string& origin) {
  reject_unknown(j,
                 {"source_root", "store", "build_cmd", "test_cmd", "file_globs",
                  "ranking", "search", "eval", "out_dir"},
                 origin);
  ProjectConfig c;
  try {
    c.source_root = base_dir / fs::path(j.at("source_root").get<std::string>());
    c.store_ref = j.at("store").get<std::string>();
    // a store file path resolves against the config directory; builtin ids
    // pass through untouched
    const fs::path store_path = base_dir / fs::path(c.store_ref);
    if (!fs::path(c.store_ref).is_absolute() && fs::exists(store_path)) {
      c.store_ref = store_path.string();
    }
    if (j.contains("build_cmd")) c.eval.build_cmd = j.at("build_cmd").get<std::string>();
    if (j.contains("test_cmd")) c.eval.test_cmd = j.at("test_cmd").get<std::string>();
    if (j.contains("file_globs")) {
      c.file_globs = j.at("file_globs").get<std::vector<std::string>>();
    }
    if (j.contains("ranking")) {
      const auto& r = j.at("ranking");
      reject_unknown(r, {"mode", "max_sites", "path"}, origin + "/ranking");
      const auto mode = r.at("mode").get<std::string>();
      if (mode == "ALL") {
        c.ranking.mode = SiteRanking::Mode::All;
      } else if (mode == "STATIC_COUNT") {
        c.ranking.mode = SiteRanking::Mode::StaticCount;
        c.ranking.max_sites = r.at("max_sites").get<int>();
      } else if (mode == "HOTNESS_FILE") {
        c.ranking.mode = SiteRanking::Mode::HotnessFile;
        c.ranking.max_sites = r.value("max_sites", 0);
        c.ranking.hotness_path = base_dir / fs::path(r.at("path").get<std::string>());
      } else {
        throw ConfigFileError(origin + ": unknown ranking mode \"" + mode + "\"");
      }
    }
    if (j.contains("search")) {
      const auto& s = j.at("search");
      reject_unknown(s,
                     {"population_size", "max_evaluations", "crossover_prob",
                      "mutation_prob_per_gene", "rng_seed", "convergence_generations",
                      "convergence_tolerance"},
                     origin + "/search");
      c.search.population_size = s.value("population_size", c.search.population_size);
      c.search.max_evaluations = s.value("max_evaluations", c.search.max_evaluations);
      c.search.crossover_prob = s.value("crossover_prob", c.search.crossover_prob);
      c.search.mutation_prob_per_gene =
          s.value("mutation_prob_per_gene", c.search.mutation_prob_per_gene);
      c.search.rng_seed = s.value("rng_seed", c.search.rng_seed);
      c.search.convergence_generations =
          s.value("convergence_generations", c.search.convergence_generations);
      c.search.convergence_tolerance =
          s.value("convergence_tolerance", c.search.convergence_tolerance);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      reject_unknown(e,
                     {"build_cmd", "test_cmd", "runs_search", "runs_verify",
                      "warmup_search", "warmup_verify", "sample_period_s", "timeout_s",
                      "rate_per_hour", "currency", "workers"},
                     origin + "/eval");
      if (e.contains("build_cmd")) c.eval.build_cmd = e.at("build_cmd").get<std::string>();
      if (e.contains("test_cmd")) c.eval.test_cmd = e.at("test_cmd").get<std::string>();
      c.eval.runs_search = e.value("runs_search", c.eval.runs_search);
      c.eval.runs_verify = e.value("runs_verify", c.eval.runs_verify);
      c.eval.warmup_search = e.value("warmup_search", c.eval.warmup_search);
      c.eval.warmup_verify = e.value("warmup_verify", c.eval.warmup_verify);
      c.eval.sample_period_s = e.value("sample_period_s", c.eval.sample_period_s);
      c.eval.timeout_s = e.value("timeout_s", c.eval.timeout_s);
      c.eval.rate_per_hour = e.value("rate_per_hour", c.eval.rate_per_hour);
      c.eval.currency = e.value("currency", c.eval.currency);
      c.eval.workers = e.value("workers", c.eval.workers);
    }
    c.out_dir = base_dir / fs::path(j.value("out_dir", "darwin-out"));
  } catch (const json::exception& e) {
    throw ConfigFileError(origin + ": " + e.what());
  }

  if (const char* workdir = std::getenv("DARWIN_WORKDIR")) {
    if (*workdir) c.eval.workdir_root = fs::path(workdir);
  }
  return c;
}

// Holds an exclusive advisory lock for the lifetime of an optimize run.
class RunLock {
 public:
  explicit RunLock(const fs::path& run_dir) {
    fs::create_directories(run_dir);
    const fs::path lock_path = run_dir / ".lock";
    fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + lock_path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw ConfigFileError("another optimize run holds " + lock_path.string());
    }
  }
  ~RunLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

json measurement_to_json(const Measurement& m) {
  json samples = json::array();
  for (const auto& s : m.samples) {
    samples.push_back({s.wall_time, static_cast<double>(s.peak_rss), s.cpu_load});
  }
  return json{{"objectives", m.objectives},
              {"samples", std::move(samples)},
              {"machine_seconds", m.total_machine_seconds}};
}

Measurement measurement_from_json(const json& j) {
  Measurement m;
  const auto& obj = j.at("objectives");
  m.objectives = {obj.at(0).get<double>(), obj.at(1).get<double>(),
                  obj.at(2).get<double>()};
  for (const auto& s : j.at("samples")) {
    m.samples.push_back({s.at(0).get<double>(),
                         static_cast<std::uint64_t>(s.at(1).get<double>()),
                         s.at(2).get<double>()});
  }
  m.total_machine_seconds = j.value("machine_seconds", 0.0);
  return m;
}

}  // namespace

void ProjectConfig::validate() const {
  if (!fs::exists(source_root)) {
    throw ConfigFileError("source_root does not exist: " + source_root.string());
  }
  if (store_ref.empty()) throw ConfigFileError("store is required");
  if (eval.build_cmd.empty()) throw ConfigFileError("build_cmd is required");
  if (eval.test_cmd.empty()) throw ConfigFileError("test_cmd is required");
  if (out_dir.empty()) throw ConfigFileError("out_dir is required");
  search.validate();
  eval.validate();
}

ProjectConfig load_project_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigFileError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigFileError(path.string() + ": expected an object");
  return config_from_json(j, fs::absolute(path).parent_path(), path.string());
}

Store resolve_store(const ProjectConfig& config) {
  try {
    return builtin_store(config.store_ref);
  } catch (const UnknownStoreId&) {
  }
  if (!fs::exists(config.store_ref)) {
    throw ConfigFileError("store \"" + config.store_ref +
                          "\" is neither a builtin id nor an existing file");
  }
  return load_store(config.store_ref);
}

std::string history_record_to_jsonl(const HistoryRecord& r) {
  json j;
  j["gen"] = r.generation;
  j["hash"] = r.hash;
  j["genome"] = r.genome.values;
  j["rank"] = r.rank;
  if (r.outcome.feasible) {
    j["outcome"] = "FEASIBLE";
    j["objectives"] = r.outcome.measurement.objectives;
  } else {
    j["outcome"] = fail_stage_name(r.outcome.stage);
  }
  return j.dump();
}

HistoryRecord history_record_from_jsonl(const std::string& line) {
  HistoryRecord r;
  json j = json::parse(line);  // json::exception propagates to the caller
  r.generation = j.at("gen").get<int>();
  r.hash = j.at("hash").get<std::string>();
  r.genome.values = j.at("genome").get<std::vector<int>>();
  r.rank = j.at("rank").get<int>();
  const auto outcome = j.at("outcome").get<std::string>();
  if (outcome == "FEASIBLE") {
    r.outcome.feasible = true;
    const auto& obj = j.at("objectives");
    r.outcome.measurement.objectives = {obj.at(0).get<double>(),
                                        obj.at(1).get<double>(),
                                        obj.at(2).get<double>()};
  } else {
    r.outcome = EvalOutcome::fail(fail_stage_parse(outcome), "");
  }
  return r;
}

namespace {

Extraction extract_or_load(const ProjectConfig& config, std::ostream& log,
                           bool reuse_manifest) {
  const fs::path manifest_path = config.out_dir / "manifest.json";
  if (reuse_manifest && fs::exists(manifest_path)) {
    log << "using manifest " << manifest_path.string() << "\n";
    return load_manifest(manifest_path);
  }
  const Store store = resolve_store(config);
  auto extraction = scan_project(config.source_root, store, config.ranking,
                                 config.file_globs, {config.out_dir});
  fs::create_directories(config.out_dir);
  save_manifest(extraction, manifest_path);
  return extraction;
}

struct RunState {
  int evaluations = 0;
  int generations = 0;
  bool converged = false;
  bool complete = false;
  double machine_seconds = 0;
};

void save_state(const fs::path& run_dir, const RunState& s) {
  json j{{"evaluations", s.evaluations},
         {"generations", s.generations},
         {"converged", s.converged},
         {"complete", s.complete},
         {"machine_seconds", s.machine_seconds}};
  write_text(run_dir / "state.json", j.dump(2) + "\n");
}

RunState load_state(const fs::path& run_dir) {
  RunState s;
  const fs::path path = run_dir / "state.json";
  if (!fs::exists(path)) return s;
  try {
    json j = json::parse(read_text(path));
    s.evaluations = j.value("evaluations", 0);
    s.generations = j.value("generations", 0);
    s.converged = j.value("converged", false);
    s.complete = j.value("complete", false);
    s.machine_seconds = j.value("machine_seconds", 0.0);
  } catch (const std::exception&) {
    // stale state is rebuilt by the next optimize
  }
  return s;
}

int handle_errors(std::ostream& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::InternalError);
  }
}

}  // namespace

int cmd_extract(const ProjectConfig& config, std::ostream& log) {
  return handle_errors(log, [&]() -> int {
    config.validate();
    auto extraction = extract_or_load(config, log, /*reuse_manifest=*/false);
    const auto& schema = extraction.schema;
    log << "sites: " << schema.sites.size() << "\n";
    log << "genes: " << schema.genes.size() << "\n";
    log << "search space: " << search_space_size(schema).to_string() << "\n";
    log << "manifest: " << (config.out_dir / "manifest.json").string() << "\n";
    if (schema.sites.empty() || schema.genes.empty()) {
      log << "nothing to optimize\n";
      return static_cast<int>(ExitCode::NothingToOptimize);
    }
    return 0;
  });
}

int cmd_optimize(const ProjectConfig& config, std::ostream& log) {
  return handle_errors(log, [&]() -> int {
    config.validate();
    RunLock lock(config.out_dir);

    auto extraction = extract_or_load(config, log, /*reuse_manifest=*/true);
    if (extraction.schema.sites.empty() || extraction.schema.genes.empty()) {
      log << "nothing to optimize\n";
      return static_cast<int>(ExitCode::NothingToOptimize);
    }

    write_text(config.out_dir / "config.json", config_to_json(config).dump(2) + "\n");

    Evaluator evaluator(extraction, config.eval, config.out_dir);
    RunState prior = load_state(config.out_dir);

    log << "measuring baseline (" << config.eval.runs_verify << " runs)\n";
    const Measurement baseline = evaluator.measure_baseline();
    write_text(config.out_dir / "baseline.json",
               measurement_to_json(baseline).dump(2) + "\n");
    log << "baseline: time " << baseline.objectives[0] << " s, rss "
        << baseline.objectives[1] << " B, cpu " << baseline.objectives[2] << "\n";

    std::ofstream history(config.out_dir / "history.jsonl",
                          std::ios::binary | std::ios::trunc);
    if (!history) throw IoError("cannot write history file");
    HistorySink sink = [&](const HistoryRecord& r) {
      history << history_record_to_jsonl(r) << "\n";
    };

    RunState state;
    if (config.search.max_evaluations == 0) {
      log << "warning: budget is 0, returning the baseline only\n";
      sink({0, genome_hash(extraction.schema.seed), extraction.schema.seed, 0,
            EvalOutcome::ok(baseline)});
      history.flush();
      state.complete = true;
      state.machine_seconds = prior.machine_seconds + evaluator.total_machine_seconds();
      save_state(config.out_dir, state);
      return 0;
    }

    EvalFn eval_fn = [&](const Genome& g) {
      return evaluator.evaluate(g, EvalMode::Search);
    };
    BatchEvalFn batch;
    if (config.eval.workers > 1) {
      batch = [&](const std::vector<Genome>& genomes) {
        std::vector<EvalOutcome> outcomes(genomes.size());
        std::vector<std::thread> threads;
        std::atomic<std::size_t> next{0};
        const int workers =
            std::min<int>(config.eval.workers, static_cast<int>(genomes.size()));
        for (int w = 0; w < workers; ++w) {
          threads.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < genomes.size();
                 i = next.fetch_add(1)) {
              outcomes[i] = evaluator.evaluate(genomes[i], EvalMode::Search);
            }
          });
        }
        for (auto& t : threads) t.join();
        return outcomes;
      };
    }

    auto result = nsga2_run(extraction.schema, eval_fn, config.search, sink, batch);
    history.flush();

    state.evaluations = result.evaluations;
    state.generations = result.generations;
    state.converged = result.converged;
    state.complete = true;
    state.machine_seconds = prior.machine_seconds + evaluator.total_machine_seconds();
    save_state(config.out_dir, state);

    log << "search finished: " << result.evaluations << " evaluations, "
        << result.generations << " generations"
        << (result.converged ? " (converged)" : "") << "\n";
    log << "front: " << result.front.size() << " feasible solution(s)\n";
    log << "run directory: " << config.out_dir.string() << "\n";
    return 0;
  });
}

namespace {

// Front = rank-0 feasible members of the last generation, unique by hash.
std::vector<Genome> front_from_history(const fs::path& history_path) {
  if (!fs::exists(history_path)) {
    throw NoRunFound("no history at " + history_path.string());
  }
  std::ifstream in(history_path, std::ios::binary);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);

  std::vector<HistoryRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      records.push_back(history_record_from_jsonl(lines[i]));
    } catch (const std::exception&) {
      if (i + 1 == lines.size()) continue;  // torn tail of an interrupted run
      throw RunCorruptError("history line " + std::to_string(i + 1) +
                            " is not a valid record");
    }
  }
  if (records.empty()) throw NoRunFound("history is empty: " + history_path.string());

  int last_gen = 0;
  for (const auto& r : records) last_gen = std::max(last_gen, r.generation);
  std::vector<Genome> front;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.generation != last_gen || r.rank != 0 || !r.outcome.feasible) continue;
    if (seen.insert(r.hash).second) front.push_back(r.genome);
  }
  return front;
}

}  // namespace

int cmd_report(const fs::path& run_dir, std::ostream& log) {
  return handle_errors(log, [&]() -> int {
    const fs::path config_path = run_dir / "config.json";
    const fs::path manifest_path = run_dir / "manifest.json";
    const fs::path baseline_path = run_dir / "baseline.json";
    if (!fs::exists(config_path) || !fs::exists(manifest_path)) {
      throw NoRunFound("not a run directory (missing config.json/manifest.json): " +
                       run_dir.string());
    }
    if (!fs::exists(baseline_path)) {
      throw NoRunFound("no baseline measurement in " + run_dir.string() +
                       "; run optimize first");
    }

    json cfg_json;
    try {
      cfg_json = json::parse(read_text(config_path));
    } catch (const json::exception& e) {
      throw RunCorruptError(config_path.string() + ": " + e.what());
    }
    ProjectConfig config =
        config_from_json(cfg_json, fs::absolute(run_dir), config_path.string());
    auto extraction = load_manifest(manifest_path);
    Measurement baseline;
    try {
      baseline = measurement_from_json(json::parse(read_text(baseline_path)));
    } catch (const json::exception& e) {
      throw RunCorruptError(baseline_path.string() + ": " + e.what());
    }

    auto front = front_from_history(run_dir / "history.jsonl");
    log << "front: " << front.size() << " genome(s) to verify\n";

    Evaluator evaluator(extraction, config.eval, run_dir);
    evaluator.set_baseline_wall(baseline.objectives[0]);
    auto report = build_report(front, baseline, evaluator);

    RunState state = load_state(run_dir);
    report.machine_seconds = state.machine_seconds + evaluator.total_machine_seconds();
    report.cost = cost_estimate(report.machine_seconds, report.rate_per_hour);
    state.machine_seconds = report.machine_seconds;
    save_state(run_dir, state);

    emit_artifacts(report, extraction, run_dir);
    log << "report: " << (run_dir / "report.md").string() << "\n";
    log << "pareto: " << (run_dir / "pareto.json").string() << "\n";
    log << report.solutions.size() << " solution(s): " << report.strictly_dominant
        << " strictly dominant, " << report.non_dominated << " non-dominated\n";
    return 0;
  });
}

int cmd_apply(const fs::path& run_dir, const std::string& solution_id,
              const fs::path& target, bool in_place, std::ostream& log) {
  return handle_errors(log, [&]() -> int {
    const fs::path pareto_path = run_dir / "pareto.json";
    if (!fs::exists(pareto_path)) {
      throw NoRunFound("no pareto.json in " + run_dir.string() + "; run report first");
    }
    json pareto = json::parse(read_text(pareto_path));
    auto extraction = load_manifest(run_dir / "manifest.json");

    const auto& solutions = pareto.at("solutions");
    if (solutions.empty()) throw UnknownSolution("the front has no feasible solutions");

    int picked = -1;
    if (solution_id == "best-time" || solution_id == "best-memory" ||
        solution_id == "best-cpu") {
      const int obj =
          solution_id == "best-time" ? 0 : solution_id == "best-memory" ? 1 : 2;
      double best = 0;
      for (std::size_t i = 0; i < solutions.size(); ++i) {
        const double v = solutions[i].at("objectives").at(obj).get<double>();
        if (picked < 0 || v < best) {
          picked = static_cast<int>(i);
          best = v;
        }
      }
    } else {
      for (std::size_t i = 0; i < solutions.size(); ++i) {
        if (std::to_string(solutions[i].at("id").get<int>()) == solution_id) {
          picked = static_cast<int>(i);
          break;
        }
      }
      if (picked < 0) {
        throw UnknownSolution("no solution \"" + solution_id +
                              "\" (use an id from pareto.json or best-time/"
                              "best-memory/best-cpu)");
      }
    }

    Genome genome;
    genome.values = solutions[picked].at("genome").get<std::vector<int>>();

    if (in_place) {
      for (const auto& tf : extraction.files) {
        write_text(extraction.source_root / tf.path,
                   render_file(tf, extraction.schema, extraction.store, genome));
      }
      log << "applied solution " << solutions[picked].at("id").get<int>()
          << " in place at " << extraction.source_root.string() << "\n";
      return 0;
    }

    if (target.empty()) throw ConfigFileError("apply needs a target directory");
    if (fs::exists(target) && !fs::is_empty(target)) {
      throw TargetNotEmpty("target exists and is not empty: " + target.string());
    }
    materialize(extraction, genome, target, {run_dir});
    log << "applied solution " << solutions[picked].at("id").get<int>() << " to "
        << target.string() << "\n";
    return 0;
  });
}

}  // namespace darwin
