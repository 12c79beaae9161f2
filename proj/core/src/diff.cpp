#include "darwin/diff.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "darwin/errors.hpp"

namespace darwin {

namespace fs = std::filesystem;

namespace {

// Sentinel appended to a final line that lacks a trailing newline, so the
// line matcher distinguishes "x" from "x\n" and the emitter knows where the
// no-newline marker belongs.
const std::string kNoEol = "\x01<noeol>";

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  if (text.empty()) return lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') {
      lines.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  if (start < text.size()) lines.push_back(text.substr(start) + kNoEol);
  return lines;
}

bool has_noeol(const std::string& line) {
  return line.size() >= kNoEol.size() &&
         line.compare(line.size() - kNoEol.size(), kNoEol.size(), kNoEol) == 0;
}

std::string strip_noeol(const std::string& line) {
  return has_noeol(line) ? line.substr(0, line.size() - kNoEol.size()) : line;
}

void append_line(std::string& out, char prefix, const std::string& line) {
  out += prefix;
  out += strip_noeol(line);
  out += '\n';
  if (has_noeol(line)) out += "\\ No newline at end of file\n";
}

// One block of the line-level edit script.
struct Opcode {
  enum class Tag { Equal, Replace, Delete, Insert } tag;
  int a_lo, a_hi, b_lo, b_hi;
};

// Myers shortest-edit-script matching. Returns matched line index pairs in
// order; an empty result means "replace everything".
std::vector<std::pair<int, int>> myers_matches(const std::vector<std::string>& a,
                                               const std::vector<std::string>& b) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  const int limit = n + m;
  const int offset = limit;
  std::vector<int> v(2 * limit + 1, 0);
  std::vector<std::vector<int>> trace;

  int distance = -1;
  for (int d = 0; d <= limit && distance < 0; ++d) {
    trace.push_back(v);
    for (int k = -d; k <= d; k += 2) {
      int x;
      if (k == -d || (k != d && v[offset + k - 1] < v[offset + k + 1])) {
        x = v[offset + k + 1];
      } else {
        x = v[offset + k - 1] + 1;
      }
      int y = x - k;
      while (x < n && y < m && a[x] == b[y]) {
        ++x;
        ++y;
      }
      v[offset + k] = x;
      if (x >= n && y >= m) {
        distance = d;
        break;
      }
    }
  }
  if (distance <= 0) return {};

  std::vector<std::pair<int, int>> matches;
  int x = n;
  int y = m;
  for (int d = distance; d > 0; --d) {
    const auto& pv = trace[d];
    const int k = x - y;
    int prev_k;
    if (k == -d || (k != d && pv[offset + k - 1] < pv[offset + k + 1])) {
      prev_k = k + 1;
    } else {
      prev_k = k - 1;
    }
    const int prev_x = pv[offset + prev_k];
    const int prev_y = prev_x - prev_k;
    while (x > prev_x && y > prev_y) {
      matches.push_back({x - 1, y - 1});
      --x;
      --y;
    }
    if (prev_k == k + 1) {
      --y;
    } else {
      --x;
    }
  }
  while (x > 0 && y > 0) {
    matches.push_back({x - 1, y - 1});
    --x;
    --y;
  }
  std::reverse(matches.begin(), matches.end());
  return matches;
}

std::vector<Opcode> opcodes_from_matches(std::vector<std::pair<int, int>> matches,
                                         const std::vector<std::string>& a,
                                         const std::vector<std::string>& b) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  if (matches.empty() && !a.empty() && !b.empty() && a == b) {
    // identical inputs reach here only via the distance-0 shortcut
    for (int i = 0; i < n; ++i) matches.push_back({i, i});
  }

  std::vector<Opcode> ops;
  int ai = 0;
  int bi = 0;
  auto emit_gap = [&](int ma, int mb) {
    if (ai < ma && bi < mb) {
      ops.push_back({Opcode::Tag::Replace, ai, ma, bi, mb});
    } else if (ai < ma) {
      ops.push_back({Opcode::Tag::Delete, ai, ma, bi, bi});
    } else if (bi < mb) {
      ops.push_back({Opcode::Tag::Insert, ai, ai, bi, mb});
    }
  };
  std::size_t i = 0;
  while (i < matches.size()) {
    emit_gap(matches[i].first, matches[i].second);
    ai = matches[i].first;
    bi = matches[i].second;
    int run = 0;
    while (i < matches.size() && matches[i].first == ai + run &&
           matches[i].second == bi + run) {
      ++run;
      ++i;
    }
    ops.push_back({Opcode::Tag::Equal, ai, ai + run, bi, bi + run});
    ai += run;
    bi += run;
  }
  emit_gap(n, m);
  return ops;
}

}  // namespace

FileDiff unified_diff_text(const std::string& before, const std::string& after,
                           const std::string& label, int context) {
  FileDiff diff;
  diff.path = label;
  if (before == after) return diff;

  const auto a = split_lines(before);
  const auto b = split_lines(after);
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  auto ops = opcodes_from_matches(myers_matches(a, b), a, b);

  for (const auto& op : ops) {
    switch (op.tag) {
      case Opcode::Tag::Replace:
        diff.removed += op.a_hi - op.a_lo;
        diff.added += op.b_hi - op.b_lo;
        diff.changed += std::max(op.a_hi - op.a_lo, op.b_hi - op.b_lo);
        break;
      case Opcode::Tag::Delete:
        diff.removed += op.a_hi - op.a_lo;
        diff.changed += op.a_hi - op.a_lo;
        break;
      case Opcode::Tag::Insert:
        diff.added += op.b_hi - op.b_lo;
        diff.changed += op.b_hi - op.b_lo;
        break;
      case Opcode::Tag::Equal:
        break;
    }
  }

  std::string body;
  std::size_t op_index = 0;
  while (op_index < ops.size()) {
    while (op_index < ops.size() && ops[op_index].tag == Opcode::Tag::Equal) ++op_index;
    if (op_index >= ops.size()) break;

    std::size_t hunk_end = op_index;
    std::size_t last_change = op_index;
    while (hunk_end < ops.size()) {
      if (ops[hunk_end].tag != Opcode::Tag::Equal) {
        last_change = hunk_end;
        ++hunk_end;
        continue;
      }
      const bool final_block = hunk_end + 1 == ops.size();
      const int gap = ops[hunk_end].a_hi - ops[hunk_end].a_lo;
      if (final_block || gap > 2 * context) break;
      ++hunk_end;
    }

    const auto& first = ops[op_index];
    const auto& last = ops[last_change];
    const int a_start = std::max(first.a_lo - context, 0);
    const int a_end = std::min(last.a_hi + context, n);
    const int b_start = std::max(first.b_lo - context, 0);
    const int b_end = std::min(last.b_hi + context, m);

    auto range = [](int start, int count) {
      std::string s = std::to_string(count == 0 ? start : start + 1);
      if (count != 1) s += "," + std::to_string(count);
      return s;
    };
    body += "@@ -" + range(a_start, a_end - a_start) + " +" +
            range(b_start, b_end - b_start) + " @@\n";

    for (int i = a_start; i < first.a_lo; ++i) append_line(body, ' ', a[i]);
    for (std::size_t oi = op_index; oi <= last_change; ++oi) {
      const auto& op = ops[oi];
      if (op.tag == Opcode::Tag::Equal) {
        for (int i = op.a_lo; i < op.a_hi; ++i) append_line(body, ' ', a[i]);
        continue;
      }
      for (int i = op.a_lo; i < op.a_hi; ++i) append_line(body, '-', a[i]);
      for (int i = op.b_lo; i < op.b_hi; ++i) append_line(body, '+', b[i]);
    }
    for (int i = last.a_hi; i < a_end; ++i) append_line(body, ' ', a[i]);

    op_index = last_change + 1;
  }

  diff.unified = "--- a/" + label + "\n+++ b/" + label + "\n" + body;
  return diff;
}

std::string TreeDiff::full_text() const {
  std::string out;
  for (const auto& f : files) out += f.unified;
  return out;
}

namespace {

std::string read_file_or_empty(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void collect_files(const fs::path& root, std::set<std::string>& out) {
  if (!fs::exists(root)) throw IoError("tree does not exist: " + root.string());
  for (auto it = fs::recursive_directory_iterator(
           root, fs::directory_options::skip_permission_denied);
       it != fs::recursive_directory_iterator(); ++it) {
    if (it->is_directory() && it->path().filename() == ".git") {
      it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file()) {
      out.insert(fs::relative(it->path(), root).generic_string());
    }
  }
}

}  // namespace

TreeDiff unified_diff_trees(const fs::path& original, const fs::path& variant) {
  std::set<std::string> rel_paths;
  collect_files(original, rel_paths);
  collect_files(variant, rel_paths);

  TreeDiff tree;
  for (const auto& rel : rel_paths) {
    auto fd = unified_diff_text(read_file_or_empty(original / rel),
                                read_file_or_empty(variant / rel), rel);
    tree.changed_lines += fd.changed;
    if (!fd.unified.empty()) tree.files.push_back(std::move(fd));
  }
  return tree;
}

std::string apply_unified_patch(const std::string& before, const std::string& patch) {
  const auto a = split_lines(before);
  std::vector<std::string> out;  // lines, kNoEol sentinel on an unterminated tail
  std::size_t src = 0;

  std::istringstream in(patch);
  std::string line;
  char last_tag = 0;
  while (std::getline(in, line)) {
    if (line.rfind("--- ", 0) == 0 || line.rfind("+++ ", 0) == 0) continue;
    if (line.rfind("@@", 0) == 0) {
      int a_line = 0;
      int a_count = 1;
      if (std::sscanf(line.c_str(), "@@ -%d,%d", &a_line, &a_count) < 1) {
        throw IoError("bad hunk header: " + line);
      }
      const std::size_t hunk_start = a_count == 0 ? a_line : a_line - 1;
      while (src < hunk_start && src < a.size()) out.push_back(a[src++]);
      last_tag = 0;
      continue;
    }
    if (line.rfind('\\', 0) == 0) {
      if ((last_tag == '+' || last_tag == ' ') && !out.empty()) {
        out.back() += kNoEol;
      }
      continue;
    }
    const char tag = line.empty() ? ' ' : line[0];
    const std::string content = line.empty() ? "" : line.substr(1);
    last_tag = tag;
    switch (tag) {
      case ' ':
        if (src >= a.size() || strip_noeol(a[src]) != content) {
          throw IoError("context mismatch applying patch at source line " +
                        std::to_string(src + 1));
        }
        out.push_back(content);
        ++src;
        break;
      case '-':
        if (src >= a.size() || strip_noeol(a[src]) != content) {
          throw IoError("removed-line mismatch applying patch at source line " +
                        std::to_string(src + 1));
        }
        ++src;
        break;
      case '+':
        out.push_back(content);
        break;
      default:
        throw IoError("unexpected patch line: " + line);
    }
  }
  while (src < a.size()) out.push_back(a[src++]);

  std::string result;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (has_noeol(out[i])) {
      result += strip_noeol(out[i]);
    } else {
      result += out[i];
      result += '\n';
    }
  }
  return result;
}

}  // namespace darwin
