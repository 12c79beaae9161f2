#include "darwin/sampling.hpp"

#include <dirent.h>
#include <fcntl.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "darwin/errors.hpp"

namespace darwin {

namespace {

long page_size() {
  static const long ps = sysconf(_SC_PAGESIZE);
  return ps;
}

long clock_ticks() {
  static const long hz = sysconf(_SC_CLK_TCK);
  return hz;
}

struct ProcStat {
  int pid = 0;
  int ppid = 0;
  long rss_pages = 0;
  double cpu_seconds = 0;
};

// Parses /proc/<pid>/stat; comm may contain spaces/parens, so fields are
// taken after the last ')'.
bool read_proc_stat(int pid, ProcStat& out) {
  char path[64];
  std::snprintf(path, sizeof path, "/proc/%d/stat", pid);
  std::ifstream in(path);
  if (!in) return false;
  std::string line;
  if (!std::getline(in, line)) return false;
  const auto close_paren = line.rfind(')');
  if (close_paren == std::string::npos) return false;

  out.pid = pid;
  // fields after comm: state(3) ppid(4) ... utime(14) stime(15) ... rss(24)
  std::istringstream rest(line.substr(close_paren + 2));
  std::string state;
  long dummy_l;
  unsigned long utime, stime, dummy_ul;
  rest >> state >> out.ppid;
  for (int f = 5; f <= 13; ++f) rest >> dummy_ul;
  rest >> utime >> stime;
  long cutime, cstime;
  rest >> cutime >> cstime;
  for (int f = 18; f <= 22; ++f) rest >> dummy_l;
  unsigned long vsize;
  rest >> vsize >> out.rss_pages;
  if (!rest) return false;
  out.cpu_seconds = static_cast<double>(utime + stime) / clock_ticks();
  return true;
}

std::vector<int> all_pids() {
  std::vector<int> pids;
  DIR* dir = opendir("/proc");
  if (!dir) return pids;
  while (dirent* e = readdir(dir)) {
    char* end = nullptr;
    long pid = std::strtol(e->d_name, &end, 10);
    if (end && *end == '\0' && pid > 0) pids.push_back(static_cast<int>(pid));
  }
  closedir(dir);
  return pids;
}

}  // namespace

TreeSample sample_process_tree(int root_pid) {
  std::vector<ProcStat> stats;
  for (int pid : all_pids()) {
    ProcStat st;
    if (read_proc_stat(pid, st)) stats.push_back(st);
  }

  std::set<int> tree{root_pid};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& st : stats) {
      if (tree.count(st.ppid) && !tree.count(st.pid)) {
        tree.insert(st.pid);
        grew = true;
      }
    }
  }

  TreeSample sample;
  for (const auto& st : stats) {
    if (!tree.count(st.pid)) continue;
    sample.rss_bytes += static_cast<std::uint64_t>(st.rss_pages) * page_size();
    sample.cpu_seconds += st.cpu_seconds;
  }
  return sample;
}

RunResource run_sampled(const std::string& command, const std::filesystem::path& workdir,
                        const std::vector<std::pair<std::string, std::string>>& env,
                        double period_s, double timeout_s, bool sample) {
  if (command.empty()) throw SandboxSetupError("empty command");

  char tail_template[] = "/tmp/darwin-run-XXXXXX";
  int log_fd = mkstemp(tail_template);
  if (log_fd < 0) throw SandboxSetupError("cannot create output capture file");
  unlink(tail_template);

  const pid_t pid = fork();
  if (pid < 0) {
    close(log_fd);
    throw SandboxSetupError("fork failed: " + std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    setpgid(0, 0);
    if (chdir(workdir.c_str()) != 0) _exit(127);
    for (const auto& [key, value] : env) setenv(key.c_str(), value.c_str(), 1);
    dup2(log_fd, STDOUT_FILENO);
    dup2(log_fd, STDERR_FILENO);
    close(log_fd);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  setpgid(pid, pid);  // also set from the parent side; failure is benign

  RunResource res;
  const auto start = std::chrono::steady_clock::now();
  const auto period = std::chrono::duration<double>(period_s);
  auto next_sample = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);

  int status = 0;
  struct rusage ru{};
  bool done = false;
  while (!done) {
    pid_t waited = wait4(pid, &status, WNOHANG, &ru);
    if (waited == pid) {
      done = true;
      break;
    }
    if (waited < 0 && errno != EINTR) break;

    const auto now = std::chrono::steady_clock::now();
    if (timeout_s > 0 &&
        std::chrono::duration<double>(now - start).count() > timeout_s) {
      kill(-pid, SIGKILL);
      res.timed_out = true;
      wait4(pid, &status, 0, &ru);
      done = true;
      break;
    }
    if (sample && now >= next_sample) {
      const auto snap = sample_process_tree(pid);
      res.peak_rss = std::max(res.peak_rss, snap.rss_bytes);
      res.cpu_seconds = std::max(res.cpu_seconds, snap.cpu_seconds);
      ++res.sample_count;
      next_sample += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }

  const auto end = std::chrono::steady_clock::now();
  res.wall_seconds = std::chrono::duration<double>(end - start).count();
  if (res.wall_seconds <= 0) res.wall_seconds = 1e-9;
  res.exit_code = res.timed_out ? -1
                  : WIFEXITED(status) ? WEXITSTATUS(status)
                                      : 128 + WTERMSIG(status);

  // OS accounting is authoritative for CPU; it covers the waited tree.
  const double accounted = static_cast<double>(ru.ru_utime.tv_sec) +
                           ru.ru_utime.tv_usec / 1e6 +
                           static_cast<double>(ru.ru_stime.tv_sec) +
                           ru.ru_stime.tv_usec / 1e6;
  res.cpu_seconds = std::max(res.cpu_seconds, accounted);
  if (res.sample_count == 0) {
    // tree finished before the first poll; synthesize one sample
    res.peak_rss = static_cast<std::uint64_t>(ru.ru_maxrss) * 1024;
    res.sample_count = 1;
  }

  // keep the last chunk of output for failure reporting
  off_t size = lseek(log_fd, 0, SEEK_END);
  const off_t tail = std::min<off_t>(size, 2000);
  if (tail > 0) {
    res.output_tail.resize(static_cast<std::size_t>(tail));
    lseek(log_fd, size - tail, SEEK_SET);
    ssize_t got = read(log_fd, res.output_tail.data(), static_cast<std::size_t>(tail));
    res.output_tail.resize(got > 0 ? static_cast<std::size_t>(got) : 0);
  }
  close(log_fd);
  return res;
}

}  // namespace darwin
