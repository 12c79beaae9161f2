#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "darwin/evaluate.hpp"
#include "darwin/search.hpp"
#include "darwin/stats.hpp"

namespace darwin {

struct DdsChange {
  int site_id = 0;
  std::string group;
  std::string from_impl;
  std::string to_impl;
};

struct CapacityChange {
  int site_id = 0;
  std::string from;  // "ORIGINAL" or a value
  std::string to;
};

struct SolutionRecord {
  int id = 0;
  Genome genome;
  std::string hash;
  Measurement verify;                    // VERIFY-mode re-measurement
  std::array<double, 3> percent{};       // 100 * solution / baseline
  BaselineClass classification = BaselineClass::Dominated;
  std::array<bool, 3> significant{};     // one-sided Mann-Whitney p < alpha
  std::array<double, 3> p_values{};
  std::vector<DdsChange> dds_changes;
  std::vector<CapacityChange> capacity_changes;
  int changed_lines = 0;
  std::string diff_rel_path;
  std::string diff_text;
};

struct TallyRow {
  std::string from_impl;
  std::string to_impl;
  std::array<int, 3> counts{};  // per objective-best subset
};

struct FrontReport {
  Measurement baseline;
  std::array<CiEstimate, 3> baseline_ci{};
  std::vector<SolutionRecord> solutions;
  int strictly_dominant = 0;
  int non_dominated = 0;
  int dominated = 0;
  int infeasible_on_verify = 0;
  std::vector<TallyRow> tally;
  double machine_seconds = 0;
  double rate_per_hour = 0;
  std::string currency;
  double cost = 0;
  double significance_alpha = 0.05;
};

// Re-measures every front member in VERIFY mode, classifies against the
// baseline, scales to percent-of-baseline, and runs one-sided Mann-Whitney
// tests per objective on the VERIFY samples.
FrontReport build_report(const std::vector<Genome>& front, const Measurement& baseline,
                         Evaluator& evaluator);

// Directed implementation-change counts over the per-objective-best subsets.
// A solution counts in every subset where it is the best for that objective.
std::vector<TallyRow> dds_change_tally(const std::vector<SolutionRecord>& solutions);

// seconds / 3600 * rate, rounded to 2 decimals.
double cost_estimate(double total_machine_seconds, double rate_per_hour);

// Gene-level difference of a genome against the seed.
void describe_changes(const Extraction& extraction, const Genome& genome,
                      std::vector<DdsChange>& dds, std::vector<CapacityChange>& caps);

std::string render_report_md(const FrontReport& report);
std::string render_pareto_json(const FrontReport& report);

// Writes report.md, pareto.json, diffs/solution-<k>.patch and the
// best-per-objective variant trees (best-time/, best-memory/, best-cpu/).
// Re-emitting the same report is byte-identical.
void emit_artifacts(const FrontReport& report, const Extraction& extraction,
                    const std::filesystem::path& out_dir);

}  // namespace darwin
