#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "darwin/evaluate.hpp"
#include "darwin/extract.hpp"
#include "darwin/search.hpp"

namespace darwin {

// The project configuration file: where the sources live, how to build and
// test them, and every tunable knob. Relative paths resolve against the
// directory containing the config file.
struct ProjectConfig {
  std::filesystem::path source_root;
  std::string store_ref;  // builtin id or path to a store file
  std::vector<std::string> file_globs;
  SiteRanking ranking;
  SearchParams search;
  EvalConfig eval;
  std::filesystem::path out_dir;

  void validate() const;  // throws ConfigFileError
};

ProjectConfig load_project_config(const std::filesystem::path& path);

// Resolves store_ref: a known builtin id, otherwise a store file path.
Store resolve_store(const ProjectConfig& config);

// One history line as persisted to <run>/history.jsonl.
std::string history_record_to_jsonl(const HistoryRecord& record);
HistoryRecord history_record_from_jsonl(const std::string& line);

// Command drivers behind the CLI. They print progress to `log` and return a
// process exit code (see ExitCode).
int cmd_extract(const ProjectConfig& config, std::ostream& log);
int cmd_optimize(const ProjectConfig& config, std::ostream& log);
int cmd_report(const std::filesystem::path& run_dir, std::ostream& log);
int cmd_apply(const std::filesystem::path& run_dir, const std::string& solution_id,
              const std::filesystem::path& target, bool in_place, std::ostream& log);

}  // namespace darwin
