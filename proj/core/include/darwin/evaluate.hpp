#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "darwin/extract.hpp"

namespace darwin {

struct EvalConfig {
  std::string build_cmd;
  std::string test_cmd;
  std::filesystem::path workdir_root;
  int runs_search = 5;
  int runs_verify = 30;
  int warmup_search = 1;
  int warmup_verify = 2;
  double sample_period_s = 0.1;
  double timeout_s = 0;  // 0: derived as 10x the baseline wall time
  double rate_per_hour = 0.41;
  std::string currency = "£";
  int workers = 1;

  void validate() const;  // throws SandboxSetupError
};

// One timed test execution.
struct RunSample {
  double wall_time = 0;          // seconds
  std::uint64_t peak_rss = 0;    // bytes, max over samples of the tree sum
  double cpu_load = 0;           // (user+system cpu seconds) / wall_time
};

struct Measurement {
  std::vector<RunSample> samples;          // post-warmup
  std::array<double, 3> objectives{};      // medians: time_s, mem_bytes, cpu_load
  double total_machine_seconds = 0;        // includes build and warmup runs

  std::vector<double> objective_samples(int index) const;
};

enum class FailStage { BuildFailed, TestsFailed, Timeout };

struct EvalOutcome {
  bool feasible = false;
  Measurement measurement;  // feasible only
  FailStage stage = FailStage::BuildFailed;
  std::string detail;

  static EvalOutcome ok(Measurement m);
  static EvalOutcome fail(FailStage stage, std::string detail);
};

const char* fail_stage_name(FailStage stage);
FailStage fail_stage_parse(const std::string& name);

enum class EvalMode { Search, Verify };

// Materializes a genome, builds it, runs the test command repeatedly, and
// aggregates process-tree resource samples. Outcomes are cached by
// (mode, genome hash); in SEARCH mode a VERIFY result satisfies the query.
// The cache persists as an append-only JSONL file under the run directory.
class Evaluator {
 public:
  Evaluator(Extraction extraction, EvalConfig config,
            std::filesystem::path run_dir);

  EvalOutcome evaluate(const Genome& genome, EvalMode mode);

  // VERIFY measurement of the seed genome; throws BaselineInfeasibleError.
  Measurement measure_baseline();

  // Seeds the derived per-run timeout (10x baseline wall time) when the
  // baseline was measured by an earlier invocation.
  void set_baseline_wall(double seconds);

  double total_machine_seconds() const;
  std::uint64_t subprocess_launches() const { return launches_; }

  const Extraction& extraction() const { return extraction_; }
  const EvalConfig& config() const { return config_; }

 private:
  EvalOutcome run_uncached(const Genome& genome, EvalMode mode);
  double effective_timeout() const;
  void persist(const std::string& key, const EvalOutcome& outcome);

  void account(double seconds);

  Extraction extraction_;
  EvalConfig config_;
  std::filesystem::path run_dir_;
  std::filesystem::path cache_path_;
  std::map<std::string, EvalOutcome> cache_;  // "MODE:hash" -> outcome
  std::mutex cache_mutex_;
  mutable std::mutex stats_mutex_;
  double machine_seconds_ = 0;
  std::atomic<std::uint64_t> launches_{0};
  std::optional<double> baseline_wall_;
};

}  // namespace darwin
