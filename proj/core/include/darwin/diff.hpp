#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace darwin {

struct FileDiff {
  std::string path;
  std::string unified;  // empty when identical
  int added = 0;
  int removed = 0;
  int changed = 0;  // paired delete+insert runs count once
};

struct TreeDiff {
  std::vector<FileDiff> files;
  int changed_lines = 0;

  std::string full_text() const;
};

// Unified diff (3 context lines) between two texts; labels become the
// ---/+++ headers. Identical inputs yield an empty diff.
FileDiff unified_diff_text(const std::string& before, const std::string& after,
                           const std::string& label, int context = 3);

// Walks both trees; files only on one side diff against empty.
TreeDiff unified_diff_trees(const std::filesystem::path& original,
                            const std::filesystem::path& variant);

// Applies a unified diff produced by unified_diff_text back onto `before`.
// Used by tests and `apply`; throws on a context mismatch.
std::string apply_unified_patch(const std::string& before, const std::string& patch);

}  // namespace darwin
