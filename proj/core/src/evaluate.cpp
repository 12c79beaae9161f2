#include "darwin/evaluate.hpp"

#include <algorithm>
#include <fstream>

#include "darwin/errors.hpp"
#include "darwin/sampling.hpp"
#include "darwin/stats.hpp"
#include "json.hpp"

namespace darwin {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Timed runs are serialized machine-wide within the process so concurrent
// builds cannot disturb a measurement in flight.
std::mutex g_measurement_lock;

}  // namespace

void EvalConfig::validate() const {
  if (build_cmd.empty()) throw SandboxSetupError("build_cmd is empty");
  if (test_cmd.empty()) throw SandboxSetupError("test_cmd is empty");
  if (runs_search < warmup_search + 1) {
    throw SandboxSetupError("runs_search must exceed warmup_search");
  }
  if (runs_verify < warmup_verify + 2) {
    throw SandboxSetupError("runs_verify must be at least warmup_verify + 2");
  }
  if (sample_period_s <= 0) throw SandboxSetupError("sample_period must be positive");
  if (workers < 1) throw SandboxSetupError("workers must be >= 1");
}

std::vector<double> Measurement::objective_samples(int index) const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    switch (index) {
      case 0: out.push_back(s.wall_time); break;
      case 1: out.push_back(static_cast<double>(s.peak_rss)); break;
      default: out.push_back(s.cpu_load); break;
    }
  }
  return out;
}

EvalOutcome EvalOutcome::ok(Measurement m) {
  EvalOutcome o;
  o.feasible = true;
  o.measurement = std::move(m);
  return o;
}

EvalOutcome EvalOutcome::fail(FailStage stage, std::string detail) {
  EvalOutcome o;
  o.feasible = false;
  o.stage = stage;
  o.detail = std::move(detail);
  return o;
}

const char* fail_stage_name(FailStage stage) {
  switch (stage) {
    case FailStage::BuildFailed: return "BUILD_FAILED";
    case FailStage::TestsFailed: return "TESTS_FAILED";
    default: return "TIMEOUT";
  }
}

FailStage fail_stage_parse(const std::string& name) {
  if (name == "BUILD_FAILED") return FailStage::BuildFailed;
  if (name == "TESTS_FAILED") return FailStage::TestsFailed;
  if (name == "TIMEOUT") return FailStage::Timeout;
  throw ParseError("unknown failure stage \"" + name + "\"");
}

namespace {

json outcome_to_json(const EvalOutcome& o) {
  json j;
  j["feasible"] = o.feasible;
  if (o.feasible) {
    j["objectives"] = o.measurement.objectives;
    j["machine_seconds"] = o.measurement.total_machine_seconds;
    json samples = json::array();
    for (const auto& s : o.measurement.samples) {
      samples.push_back({s.wall_time, static_cast<double>(s.peak_rss), s.cpu_load});
    }
    j["samples"] = std::move(samples);
  } else {
    j["stage"] = fail_stage_name(o.stage);
    j["detail"] = o.detail;
  }
  return j;
}

EvalOutcome outcome_from_json(const json& j) {
  if (j.at("feasible").get<bool>()) {
    Measurement m;
    const auto obj = j.at("objectives");
    m.objectives = {obj.at(0).get<double>(), obj.at(1).get<double>(),
                    obj.at(2).get<double>()};
    m.total_machine_seconds = j.value("machine_seconds", 0.0);
    for (const auto& s : j.at("samples")) {
      m.samples.push_back({s.at(0).get<double>(),
                           static_cast<std::uint64_t>(s.at(1).get<double>()),
                           s.at(2).get<double>()});
    }
    return EvalOutcome::ok(std::move(m));
  }
  return EvalOutcome::fail(fail_stage_parse(j.at("stage").get<std::string>()),
                           j.value("detail", ""));
}

std::string cache_key(EvalMode mode, const std::string& hash) {
  return (mode == EvalMode::Search ? std::string("SEARCH:") : std::string("VERIFY:")) +
         hash;
}

}  // namespace

Evaluator::Evaluator(Extraction extraction, EvalConfig config, fs::path run_dir)
    : extraction_(std::move(extraction)),
      config_(std::move(config)),
      run_dir_(std::move(run_dir)),
      cache_path_(run_dir_ / "cache.jsonl") {
  config_.validate();
  if (config_.workdir_root.empty()) config_.workdir_root = run_dir_ / "work";
  fs::create_directories(run_dir_);

  if (fs::exists(cache_path_)) {
    std::ifstream in(cache_path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        json j = json::parse(line);
        cache_[j.at("key").get<std::string>()] = outcome_from_json(j.at("outcome"));
      } catch (const json::exception&) {
        // a torn final line from an interrupted run is re-evaluated
      }
    }
  }
}

double Evaluator::effective_timeout() const {
  if (config_.timeout_s > 0) return config_.timeout_s;
  if (baseline_wall_) return std::max(1.0, 10.0 * *baseline_wall_);
  return 300.0;
}

void Evaluator::persist(const std::string& key, const EvalOutcome& outcome) {
  std::ofstream out(cache_path_, std::ios::app);
  json j;
  j["key"] = key;
  j["outcome"] = outcome_to_json(outcome);
  out << j.dump() << "\n";
}

EvalOutcome Evaluator::run_uncached(const Genome& genome, EvalMode mode) {
  extraction_.schema.ensure_bounds(genome);
  const std::string hash = genome_hash(genome);
  const fs::path workdir = config_.workdir_root / ("variant-" + hash);

  std::error_code ec;
  fs::remove_all(workdir, ec);
  materialize(extraction_, genome, workdir, {config_.workdir_root, run_dir_});

  const std::vector<std::pair<std::string, std::string>> env = {
      {"DARWIN_VARIANT_ID", hash}};
  double spent = 0;

  // build gate; generous cap so slow compiles are not misread as timeouts
  const double build_timeout =
      std::max(300.0, baseline_wall_ ? 20.0 * *baseline_wall_ : 300.0);
  ++launches_;
  auto build = run_sampled(config_.build_cmd, workdir, env, config_.sample_period_s,
                           build_timeout, false);
  spent += build.wall_seconds;
  if (build.exit_code != 0) {
    account(spent);
    fs::remove_all(workdir, ec);
    return EvalOutcome::fail(FailStage::BuildFailed,
                             build.timed_out ? "build timed out" : build.output_tail);
  }

  const int runs = mode == EvalMode::Search ? config_.runs_search : config_.runs_verify;
  const int warmup = mode == EvalMode::Search ? config_.warmup_search
                                              : config_.warmup_verify;
  const double timeout = effective_timeout();

  Measurement m;
  for (int r = 0; r < runs; ++r) {
    RunResource run;
    {
      std::lock_guard<std::mutex> lock(g_measurement_lock);
      ++launches_;
      run = run_sampled(config_.test_cmd, workdir, env, config_.sample_period_s,
                        timeout, true);
    }
    spent += run.wall_seconds;
    if (run.timed_out) {
      account(spent);
      fs::remove_all(workdir, ec);
      return EvalOutcome::fail(FailStage::Timeout,
                               "run " + std::to_string(r + 1) + " exceeded " +
                                   std::to_string(timeout) + " s");
    }
    if (run.exit_code != 0) {
      account(spent);
      fs::remove_all(workdir, ec);
      return EvalOutcome::fail(FailStage::TestsFailed,
                               "exit " + std::to_string(run.exit_code) + "\n" +
                                   run.output_tail);
    }
    if (r >= warmup) {
      m.samples.push_back(
          {run.wall_seconds, run.peak_rss, run.cpu_seconds / run.wall_seconds});
    }
  }

  for (int o = 0; o < 3; ++o) {
    const auto vals = m.objective_samples(o);
    m.objectives[o] = median(vals);
  }
  m.total_machine_seconds = spent;
  account(spent);
  fs::remove_all(workdir, ec);
  return EvalOutcome::ok(std::move(m));
}

EvalOutcome Evaluator::evaluate(const Genome& genome, EvalMode mode) {
  const std::string hash = genome_hash(genome);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = cache_.find(cache_key(mode, hash));
    if (it != cache_.end()) return it->second;
    if (mode == EvalMode::Search) {
      // a VERIFY measurement is a strictly better estimate; reuse it
      it = cache_.find(cache_key(EvalMode::Verify, hash));
      if (it != cache_.end()) return it->second;
    }
  }

  EvalOutcome outcome = run_uncached(genome, mode);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    const auto key = cache_key(mode, hash);
    auto [it, inserted] = cache_.emplace(key, outcome);
    if (inserted) persist(key, outcome);
    return it->second;  // first completed entry wins
  }
}

Measurement Evaluator::measure_baseline() {
  auto outcome = evaluate(extraction_.schema.seed, EvalMode::Verify);
  if (!outcome.feasible) {
    throw BaselineInfeasibleError(std::string("baseline is infeasible (") +
                                  fail_stage_name(outcome.stage) + "): " +
                                  outcome.detail);
  }
  baseline_wall_ = outcome.measurement.objectives[0];
  return outcome.measurement;
}

void Evaluator::set_baseline_wall(double seconds) {
  if (seconds > 0) baseline_wall_ = seconds;
}

void Evaluator::account(double seconds) {
  std::lock_guard<std::mutex> lock(stats_mutex_);
  machine_seconds_ += seconds;
}

double Evaluator::total_machine_seconds() const {
  std::lock_guard<std::mutex> lock(stats_mutex_);
  return machine_seconds_;
}

}  // namespace darwin
