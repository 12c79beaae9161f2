#include "darwin/diff.hpp"

#include <cstdio>
#include <random>

#include "darwin/errors.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace darwin;
using testutil::TempDir;

namespace {

// Counts changed lines from GNU diff output with the same pairing rule
// (paired delete+insert blocks count once).
int gnu_diff_changed(const std::filesystem::path& a, const std::filesystem::path& b) {
  const std::string cmd =
      "diff -u " + a.string() + " " + b.string() + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  int changed = 0;
  int removed_run = 0;
  int added_run = 0;
  auto flush = [&] {
    changed += std::max(removed_run, added_run);
    removed_run = added_run = 0;
  };
  char line[4096];
  while (fgets(line, sizeof line, pipe)) {
    if (line[0] == '-' && line[1] != '-') {
      ++removed_run;
    } else if (line[0] == '+' && line[1] != '+') {
      ++added_run;
    } else if (line[0] != '\\') {
      flush();
    }
  }
  flush();
  pclose(pipe);
  return changed;
}

}  // namespace

TEST_CASE("identical inputs produce an empty diff") {
  const auto d = unified_diff_text("a\nb\n", "a\nb\n", "x.txt");
  CHECK(d.unified.empty());
  CHECK(d.changed == 0);
  CHECK(d.added == 0);
  CHECK(d.removed == 0);
}

TEST_CASE("a single-line token swap counts as one changed line") {
  const std::string before = "one\ntwo\nList x = new ArrayList<T>();\nfour\n";
  const std::string after = "one\ntwo\nList x = new LinkedList<T>();\nfour\n";
  const auto d = unified_diff_text(before, after, "x.java");
  CHECK(d.changed == 1);
  CHECK(d.added == 1);
  CHECK(d.removed == 1);
  CHECK(d.unified.find("-List x = new ArrayList<T>();") != std::string::npos);
  CHECK(d.unified.find("+List x = new LinkedList<T>();") != std::string::npos);
  CHECK(d.unified.find("@@ -1,4 +1,4 @@") != std::string::npos);
}

TEST_CASE("insertions and deletions count their lengths") {
  const auto ins = unified_diff_text("a\nc\n", "a\nb1\nb2\nc\n", "x");
  CHECK(ins.changed == 2);
  CHECK(ins.added == 2);
  CHECK(ins.removed == 0);

  const auto del = unified_diff_text("a\nb\nc\n", "a\n", "x");
  CHECK(del.changed == 2);
  CHECK(del.removed == 2);
}

TEST_CASE("patches apply back cleanly") {
  std::mt19937_64 rng(5);
  const char* words[] = {"alpha", "beta", "gamma", "delta", "epsilon"};
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::string> lines;
    const int n = 5 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) lines.push_back(words[rng() % 5]);

    auto join = [](const std::vector<std::string>& ls, bool trailing) {
      std::string out;
      for (std::size_t i = 0; i < ls.size(); ++i) {
        out += ls[i];
        if (i + 1 < ls.size() || trailing) out += "\n";
      }
      return out;
    };

    std::vector<std::string> edited = lines;
    const int edits = 1 + static_cast<int>(rng() % 5);
    for (int e = 0; e < edits && !edited.empty(); ++e) {
      const std::size_t pos = rng() % edited.size();
      switch (rng() % 3) {
        case 0: edited[pos] = "CHANGED"; break;
        case 1: edited.erase(edited.begin() + pos); break;
        default: edited.insert(edited.begin() + pos, "INSERTED"); break;
      }
    }

    const bool t1 = rng() % 2 == 0;
    const bool t2 = rng() % 2 == 0;
    const std::string before = join(lines, t1);
    const std::string after = join(edited, t2);
    const auto d = unified_diff_text(before, after, "f.txt");
    CHECK(apply_unified_patch(before, d.unified) == after);
  }
}

TEST_CASE("no-newline endings survive the round trip") {
  const std::string before = "a\nb";
  const std::string after = "a\nc";
  const auto d = unified_diff_text(before, after, "x");
  CHECK(d.unified.find("\\ No newline at end of file") != std::string::npos);
  CHECK(apply_unified_patch(before, d.unified) == after);

  const auto gained = unified_diff_text("a\nb", "a\nb\n", "x");
  CHECK(apply_unified_patch("a\nb", gained.unified) == "a\nb\n");
}

TEST_CASE("tree diff counts match GNU diff") {
  TempDir dir;
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::string before, after;
    const int n = 10 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      // unique line bodies keep the minimal edit script unambiguous, so the
      // reference tool and ours must pair lines identically
      const std::string line = "line-" + std::to_string(i) + "\n";
      before += line;
      after += rng() % 5 == 0 ? "edited-" + std::to_string(i) + "\n" : line;
    }
    const auto a_path = dir / ("a" + std::to_string(trial));
    const auto b_path = dir / ("b" + std::to_string(trial));
    testutil::write_file(a_path, before);
    testutil::write_file(b_path, after);

    const auto mine = unified_diff_text(before, after, "f");
    CHECK(mine.changed == gnu_diff_changed(a_path, b_path));
  }
}

TEST_CASE("system patch accepts the generated diffs") {
  TempDir dir;
  const std::string before = "alpha\nbeta\ngamma\ndelta\nepsilon\nzeta\n";
  const std::string after = "alpha\nBETA\ngamma\ndelta\nnew-line\nepsilon\nzeta\n";
  testutil::write_file(dir / "work/f.txt", before);
  const auto d = unified_diff_text(before, after, "work/f.txt");
  testutil::write_file(dir / "change.patch", d.unified);

  const std::string cmd = "cd " + dir.path().string() +
                          " && patch -p1 -s < change.patch && cat work/f.txt";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::string output;
  char buf[256];
  while (fgets(buf, sizeof buf, pipe)) output += buf;
  const int rc = pclose(pipe);
  CHECK(rc == 0);
  CHECK(output == after);
}

TEST_CASE("tree diff walks both sides") {
  TempDir dir;
  testutil::write_file(dir / "orig/same.txt", "unchanged\n");
  testutil::write_file(dir / "orig/mod.txt", "a\nb\n");
  testutil::write_file(dir / "orig/only-orig.txt", "gone\n");
  testutil::write_file(dir / "var/same.txt", "unchanged\n");
  testutil::write_file(dir / "var/mod.txt", "a\nB\n");
  testutil::write_file(dir / "var/only-var.txt", "added\n");

  const auto tree = unified_diff_trees(dir / "orig", dir / "var");
  CHECK(tree.files.size() == 3);  // mod + both one-sided files
  CHECK(tree.changed_lines == 3);
  CHECK_THROWS_AS(unified_diff_trees(dir / "missing", dir / "var"), IoError);
}
