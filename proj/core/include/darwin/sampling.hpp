#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace darwin {

// One polled snapshot of a process tree.
struct TreeSample {
  std::uint64_t rss_bytes = 0;  // summed resident set of the tree
  double cpu_seconds = 0;       // summed cumulative user+system time
};

// Polls /proc for the descendant tree of a pid (ppid closure).
TreeSample sample_process_tree(int root_pid);

// Result of one sampled command execution.
struct RunResource {
  int exit_code = -1;
  bool timed_out = false;
  double wall_seconds = 0;
  double cpu_seconds = 0;        // OS accounting at exit (user+system, tree)
  std::uint64_t peak_rss = 0;    // max over samples of summed tree RSS
  int sample_count = 0;          // 0 means the tree exited before the first poll
  std::string output_tail;       // last chunk of combined stdout/stderr
};

// Runs `command` through the shell in `workdir`, sampling the process tree
// every `period_s`. The child gets its own process group; on timeout the
// whole group is killed. When the tree exits before any poll lands, a final
// sample is synthesized from the OS accounting so peak_rss is never zero for
// a process that ran. timeout_s <= 0 disables the timeout.
RunResource run_sampled(const std::string& command, const std::filesystem::path& workdir,
                        const std::vector<std::pair<std::string, std::string>>& env,
                        double period_s, double timeout_s, bool sample = true);

}  // namespace darwin
