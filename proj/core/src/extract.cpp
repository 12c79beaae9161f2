#include "darwin/extract.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <unordered_map>

#include "darwin/errors.hpp"

namespace darwin {

namespace fs = std::filesystem;

namespace {

bool is_ident(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Token occurrences are whole-word: not embedded in an identifier and not
// the tail of a qualified C++ name. A leading '.' is fine (Java qualified
// names appear in constructor calls).
bool token_boundary(const std::string& text, std::size_t begin, std::size_t end) {
  if (begin > 0) {
    char prev = text[begin - 1];
    if (is_ident(prev) || prev == ':') return false;
  }
  if (end < text.size() && is_ident(text[end])) return false;
  return true;
}

std::size_t skip_ws(const std::string& text, std::size_t pos) {
  while (pos < text.size() && is_space(text[pos])) ++pos;
  return pos;
}

// Balanced angle brackets starting at '<'. Declaration and constructor
// generics never legitimately contain statement punctuation, so hitting it
// aborts the match.
bool scan_generics(const std::string& text, std::size_t& pos) {
  int depth = 0;
  for (std::size_t i = pos; i < text.size(); ++i) {
    char c = text[i];
    if (c == '<') {
      ++depth;
    } else if (c == '>') {
      if (--depth == 0) {
        pos = i + 1;
        return true;
      }
    } else if (c == ';' || c == '{' || c == '}') {
      return false;
    }
  }
  return false;
}

bool scan_parens(const std::string& text, std::size_t& pos, ByteRange& interior) {
  int depth = 0;
  std::size_t open = pos;
  for (std::size_t i = pos; i < text.size(); ++i) {
    char c = text[i];
    if (c == '(') {
      if (depth++ == 0) open = i;
    } else if (c == ')') {
      if (--depth == 0) {
        interior = {open + 1, i};
        pos = i + 1;
        return true;
      }
    }
  }
  return false;
}

bool preceded_by_ctor_keyword(const std::string& text, std::size_t pos,
                              const std::string& keyword) {
  std::size_t i = pos;
  auto skip_ws_back = [&] {
    while (i > 0 && is_space(text[i - 1])) --i;
  };
  skip_ws_back();
  // optional dotted qualification path, e.g. "new java.util.ArrayList"
  while (i > 0 && text[i - 1] == '.') {
    --i;
    skip_ws_back();
    std::size_t end = i;
    while (i > 0 && is_ident(text[i - 1])) --i;
    if (i == end) return false;
    skip_ws_back();
  }
  if (i < keyword.size()) return false;
  std::size_t kw_begin = i - keyword.size();
  if (text.compare(kw_begin, keyword.size(), keyword) != 0) return false;
  if (kw_begin > 0 && is_ident(text[kw_begin - 1])) return false;
  return true;
}

struct TokenEntry {
  std::string token;
  int ctor_group = -1;  // group index when this token heads a constructor call
  int ctor_impl = -1;
  int decl_group = -1;  // group index when this token is a declarable type
  int decl_impl = -1;
};

std::vector<TokenEntry> build_token_table(const Store& store) {
  std::map<std::string, TokenEntry> table;
  for (std::size_t g = 0; g < store.groups.size(); ++g) {
    const auto effective = store.groups[g].effective_impls();
    for (std::size_t i = 0; i < effective.size(); ++i) {
      const auto& impl = effective[i];
      auto& ctor_entry = table[impl.ctor_token];
      ctor_entry.token = impl.ctor_token;
      if (ctor_entry.ctor_group == -1) {
        ctor_entry.ctor_group = static_cast<int>(g);
        ctor_entry.ctor_impl = static_cast<int>(i);
      } else if (ctor_entry.ctor_group != static_cast<int>(g)) {
        throw ValidationError("ctor_token \"" + impl.ctor_token +
                              "\" is claimed by two groups");
      }
      if (store.groups[g].rewrite_declarations) {
        auto& decl_entry = table[impl.type_token];
        decl_entry.token = impl.type_token;
        decl_entry.decl_group = static_cast<int>(g);
        decl_entry.decl_impl = static_cast<int>(i);
      }
    }
  }
  std::vector<TokenEntry> out;
  out.reserve(table.size());
  for (auto& [token, entry] : table) out.push_back(std::move(entry));
  // longest first so "std::vector" wins over a hypothetical "std" prefix token
  std::sort(out.begin(), out.end(), [](const TokenEntry& a, const TokenEntry& b) {
    if (a.token.size() != b.token.size()) return a.token.size() > b.token.size();
    return a.token < b.token;
  });
  return out;
}

bool group_has_capacity_impl(const AdtGroup& group) {
  for (const auto& impl : group.effective_impls()) {
    if (impl.capacity_arg) return true;
  }
  return false;
}

// Classifies a constructor argument list: empty (possibly whitespace) or a
// single plain integer literal may carry a capacity gene.
CapacitySlot classify_capacity(const std::string& text, const ByteRange& interior,
                               const AdtGroup& group) {
  CapacitySlot slot;
  if (!group_has_capacity_impl(group) || group.capacity_domain.empty()) return slot;
  std::size_t a = interior.begin;
  std::size_t b = interior.end;
  while (a < b && is_space(text[a])) ++a;
  while (b > a && is_space(text[b - 1])) --b;
  if (a == b) {
    slot.kind = CapacityKind::EmptyArgs;
    slot.args = interior;
    return slot;
  }
  bool digits = true;
  for (std::size_t i = a; i < b; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
      digits = false;
      break;
    }
  }
  if (digits && b - a <= 9) {
    slot.kind = CapacityKind::IntLiteral;
    slot.args = interior;
    slot.original_value = std::stol(text.substr(a, b - a));
  }
  return slot;
}

}  // namespace

FileScan scan_text(const std::string& text, const Store& store,
                   const std::string& rel_path, int first_site_id) {
  const auto table = build_token_table(store);
  const std::string keyword = store.ctor_keyword();

  FileScan scan;
  int next_id = first_site_id;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const TokenEntry* hit = nullptr;
    for (const auto& entry : table) {
      if (text.compare(pos, entry.token.size(), entry.token) != 0) continue;
      if (!token_boundary(text, pos, pos + entry.token.size())) continue;
      hit = &entry;
      break;
    }
    if (!hit) {
      ++pos;
      continue;
    }

    const std::size_t token_end = pos + hit->token.size();
    Site site;
    site.file = rel_path;
    site.token = {pos, token_end};
    bool matched = false;

    // constructor call: keyword before, optional generics + argument list after
    if (hit->ctor_group >= 0 && preceded_by_ctor_keyword(text, pos, keyword)) {
      std::size_t p = skip_ws(text, token_end);
      bool ok = true;
      if (p < text.size() && text[p] == '<') ok = scan_generics(text, p);
      if (ok) {
        p = skip_ws(text, p);
        ByteRange interior;
        if (p < text.size() && text[p] == '(' && scan_parens(text, p, interior)) {
          site.kind = SiteKind::CtorCall;
          site.group_index = hit->ctor_group;
          site.original_impl = hit->ctor_impl;
          site.capacity =
              classify_capacity(text, interior, store.groups[hit->ctor_group]);
          matched = true;
        }
      }
    }

    // declared type: optional generics, then an identifier
    if (!matched && hit->decl_group >= 0) {
      std::size_t p = token_end;
      bool ok = true;
      if (p < text.size() && text[p] == '<') ok = scan_generics(text, p);
      if (ok) {
        p = skip_ws(text, p);
        if (p < text.size() && is_ident(text[p]) &&
            !std::isdigit(static_cast<unsigned char>(text[p]))) {
          site.kind = SiteKind::TypeDecl;
          site.group_index = hit->decl_group;
          site.original_impl = hit->decl_impl;
          matched = true;
        }
      }
    }

    if (matched) {
      site.id = next_id++;
      scan.sites.push_back(site);
      scan.slots.push_back({site.id, SlotKind::Dds, site.token});
      if (site.capacity.kind != CapacityKind::None) {
        scan.slots.push_back({site.id, SlotKind::Cap, site.capacity.args});
      }
      pos = token_end;
    } else {
      ++pos;
    }
  }

  std::sort(scan.slots.begin(), scan.slots.end(),
            [](const TemplateSlot& a, const TemplateSlot& b) {
              return a.span.begin < b.span.begin;
            });
  ensure_disjoint_slots(scan.slots, rel_path);
  return scan;
}

void ensure_disjoint_slots(const std::vector<TemplateSlot>& slots,
                           const std::string& file) {
  for (std::size_t i = 1; i < slots.size(); ++i) {
    if (slots[i - 1].span.overlaps(slots[i].span)) {
      std::ostringstream msg;
      msg << file << ": overlapping substitution spans [" << slots[i - 1].span.begin
          << "," << slots[i - 1].span.end << ") and [" << slots[i].span.begin << ","
          << slots[i].span.end << ")";
      throw OverlapError(msg.str());
    }
  }
}

std::vector<Site> rank_sites(const std::vector<Site>& sites, const SiteRanking& ranking) {
  if (ranking.mode == SiteRanking::Mode::All) return sites;

  std::vector<Site> ordered = sites;
  if (ranking.mode == SiteRanking::Mode::StaticCount) {
    std::unordered_map<std::string, int> per_file;
    for (const auto& s : sites) ++per_file[s.file];
    std::stable_sort(ordered.begin(), ordered.end(), [&](const Site& a, const Site& b) {
      int ca = per_file[a.file];
      int cb = per_file[b.file];
      if (ca != cb) return ca > cb;
      return a.id < b.id;
    });
  } else {
    std::ifstream in(ranking.hotness_path);
    if (!in) {
      throw HotnessFileMissing("hotness file not found: " +
                               ranking.hotness_path.string());
    }
    std::unordered_map<std::string, double> weights;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw HotnessFileMalformed(ranking.hotness_path.string() + ":" +
                                   std::to_string(line_no) + ": expected <path>\\t<weight>");
      }
      try {
        std::size_t used = 0;
        double w = std::stod(line.substr(tab + 1), &used);
        if (used == 0) throw std::invalid_argument("empty");
        weights[line.substr(0, tab)] = w;
      } catch (const std::exception&) {
        throw HotnessFileMalformed(ranking.hotness_path.string() + ":" +
                                   std::to_string(line_no) + ": bad weight");
      }
    }
    auto weight_of = [&](const Site& s) {
      auto it = weights.find(s.file);
      return it == weights.end() ? 0.0 : it->second;
    };
    std::stable_sort(ordered.begin(), ordered.end(), [&](const Site& a, const Site& b) {
      double wa = weight_of(a);
      double wb = weight_of(b);
      if (wa != wb) return wa > wb;
      return a.id < b.id;
    });
  }

  if (ranking.max_sites > 0 &&
      ordered.size() > static_cast<std::size_t>(ranking.max_sites)) {
    ordered.resize(ranking.max_sites);
  }
  return ordered;
}

bool glob_match(std::string_view pattern, std::string_view path) {
  auto split = [](std::string_view s) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i == s.size() || s[i] == '/') {
        parts.push_back(s.substr(start, i - start));
        start = i + 1;
      }
    }
    return parts;
  };

  // single-segment match with '*' and '?'
  std::function<bool(std::string_view, std::string_view)> seg =
      [&](std::string_view p, std::string_view t) -> bool {
    if (p.empty()) return t.empty();
    if (p[0] == '*') {
      for (std::size_t k = 0; k <= t.size(); ++k) {
        if (seg(p.substr(1), t.substr(k))) return true;
      }
      return false;
    }
    if (t.empty()) return false;
    if (p[0] == '?' || p[0] == t[0]) return seg(p.substr(1), t.substr(1));
    return false;
  };

  const auto ps = split(pattern);
  const auto ts = split(path);
  std::function<bool(std::size_t, std::size_t)> match = [&](std::size_t pi,
                                                            std::size_t ti) -> bool {
    if (pi == ps.size()) return ti == ts.size();
    if (ps[pi] == "**") {
      if (match(pi + 1, ti)) return true;
      return ti < ts.size() && match(pi, ti + 1);
    }
    if (ti == ts.size()) return false;
    return seg(ps[pi], ts[ti]) && match(pi + 1, ti + 1);
  };
  return match(0, 0);
}

namespace {

bool path_is_within(const fs::path& child, const fs::path& ancestor) {
  auto c = child.lexically_normal();
  auto a = ancestor.lexically_normal();
  auto ci = c.begin();
  for (auto ai = a.begin(); ai != a.end(); ++ai, ++ci) {
    if (ai->empty()) continue;  // trailing slash artifact
    if (ci == c.end() || *ci != *ai) return false;
  }
  return true;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

GenomeSchema build_schema(const std::vector<Site>& sites, const Store& store) {
  GenomeSchema schema;
  schema.sites = sites;
  for (const auto& site : schema.sites) {
    const auto effective = store.groups[site.group_index].effective_impls();
    if (effective.size() >= 2) {
      schema.genes.push_back(
          {site.id, GeneKind::Impl, static_cast<int>(effective.size())});
      schema.seed.values.push_back(site.original_impl);
    }
    if (site.capacity.kind != CapacityKind::None) {
      int domain = static_cast<int>(store.groups[site.group_index].capacity_domain.size());
      schema.genes.push_back({site.id, GeneKind::Capacity, domain + 1});
      schema.seed.values.push_back(0);  // ORIGINAL
    }
  }
  return schema;
}

}  // namespace

bool GenomeSchema::in_bounds(const Genome& g) const {
  if (g.values.size() != genes.size()) return false;
  for (std::size_t i = 0; i < genes.size(); ++i) {
    if (g.values[i] < 0 || g.values[i] >= genes[i].cardinality) return false;
  }
  return true;
}

void GenomeSchema::ensure_bounds(const Genome& g) const {
  if (g.values.size() != genes.size()) {
    throw GeneOutOfRange("genome has " + std::to_string(g.values.size()) +
                         " genes, schema expects " + std::to_string(genes.size()));
  }
  for (std::size_t i = 0; i < genes.size(); ++i) {
    if (g.values[i] < 0 || g.values[i] >= genes[i].cardinality) {
      throw GeneOutOfRange("gene " + std::to_string(i) + " value " +
                           std::to_string(g.values[i]) + " outside cardinality " +
                           std::to_string(genes[i].cardinality));
    }
  }
}

int GenomeSchema::impl_gene_of(int site_id) const {
  for (std::size_t i = 0; i < genes.size(); ++i) {
    if (genes[i].site_id == site_id && genes[i].kind == GeneKind::Impl)
      return static_cast<int>(i);
  }
  return -1;
}

int GenomeSchema::capacity_gene_of(int site_id) const {
  for (std::size_t i = 0; i < genes.size(); ++i) {
    if (genes[i].site_id == site_id && genes[i].kind == GeneKind::Capacity)
      return static_cast<int>(i);
  }
  return -1;
}

Extraction scan_project(const fs::path& source_root, const Store& store,
                        const SiteRanking& ranking,
                        const std::vector<std::string>& glob_override,
                        const std::vector<fs::path>& exclude_dirs) {
  if (!fs::exists(source_root)) {
    throw IoError("source root does not exist: " + source_root.string());
  }
  ensure_valid(store);
  const auto& globs = glob_override.empty() ? store.file_globs : glob_override;

  std::vector<std::string> rel_paths;
  for (auto it = fs::recursive_directory_iterator(
           source_root, fs::directory_options::skip_permission_denied);
       it != fs::recursive_directory_iterator(); ++it) {
    const auto& entry = *it;
    if (entry.is_directory()) {
      const auto name = entry.path().filename().string();
      bool excluded = name == ".git";
      for (const auto& ex : exclude_dirs) {
        excluded = excluded || path_is_within(entry.path(), ex);
      }
      if (excluded) it.disable_recursion_pending();
      continue;
    }
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), source_root).generic_string();
    for (const auto& g : globs) {
      if (glob_match(g, rel)) {
        rel_paths.push_back(rel);
        break;
      }
    }
  }
  std::sort(rel_paths.begin(), rel_paths.end());

  std::vector<Site> all_sites;
  std::unordered_map<std::string, std::string> contents;
  for (const auto& rel : rel_paths) {
    const auto text = read_file(source_root / rel);
    auto scan = scan_text(text, store, rel, static_cast<int>(all_sites.size()));
    all_sites.insert(all_sites.end(), scan.sites.begin(), scan.sites.end());
    if (!scan.sites.empty()) contents.emplace(rel, text);
  }

  // apply the ranking cap, then renumber survivors in scan order
  auto kept = rank_sites(all_sites, ranking);
  std::sort(kept.begin(), kept.end(),
            [](const Site& a, const Site& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i].id = static_cast<int>(i);

  Extraction extraction;
  extraction.source_root = fs::absolute(source_root);
  extraction.store = store;
  extraction.schema = build_schema(kept, store);

  std::map<std::string, TemplatedFile> files;
  for (const auto& site : kept) {
    auto [it, inserted] = files.try_emplace(site.file);
    auto& tf = it->second;
    if (inserted) {
      tf.path = site.file;
      tf.original = contents.at(site.file);
    }
    tf.slots.push_back({site.id, SlotKind::Dds, site.token});
    if (site.capacity.kind != CapacityKind::None) {
      tf.slots.push_back({site.id, SlotKind::Cap, site.capacity.args});
    }
  }
  for (auto& [rel, tf] : files) {
    std::sort(tf.slots.begin(), tf.slots.end(),
              [](const TemplateSlot& a, const TemplateSlot& b) {
                return a.span.begin < b.span.begin;
              });
    extraction.files.push_back(std::move(tf));
  }
  return extraction;
}

std::string dds_text(const Site& site, const Store& store, int impl_value) {
  const auto effective = store.groups[site.group_index].effective_impls();
  const auto& impl = effective.at(impl_value);
  return site.kind == SiteKind::CtorCall ? impl.ctor_token : impl.type_token;
}

std::string render_file(const TemplatedFile& file, const GenomeSchema& schema,
                        const Store& store, const Genome& genome) {
  schema.ensure_bounds(genome);
  std::string out;
  out.reserve(file.original.size());
  std::size_t cursor = 0;
  for (const auto& slot : file.slots) {
    out.append(file.original, cursor, slot.span.begin - cursor);
    const Site& site = schema.sites.at(slot.site_id);
    if (slot.kind == SlotKind::Dds) {
      int gene = schema.impl_gene_of(site.id);
      int value = gene >= 0 ? genome.values[gene] : site.original_impl;
      out += dds_text(site, store, value);
    } else {
      int gene = schema.capacity_gene_of(site.id);
      int value = gene >= 0 ? genome.values[gene] : 0;
      if (value == 0) {
        out.append(file.original, slot.span.begin, slot.span.size());
      } else {
        out += std::to_string(
            store.groups[site.group_index].capacity_domain.at(value - 1));
      }
    }
    cursor = slot.span.end;
  }
  out.append(file.original, cursor, file.original.size() - cursor);
  return out;
}

void materialize(const Extraction& extraction, const Genome& genome,
                 const fs::path& out_root,
                 const std::vector<fs::path>& exclude_dirs) {
  extraction.schema.ensure_bounds(genome);
  const auto& root = extraction.source_root;
  if (!fs::exists(root)) throw IoError("source root vanished: " + root.string());

  fs::create_directories(out_root);
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(
           root, fs::directory_options::skip_permission_denied);
       it != fs::recursive_directory_iterator(); ++it) {
    const auto& entry = *it;
    const auto rel = fs::relative(entry.path(), root);
    if (entry.is_directory()) {
      bool excluded = entry.path().filename() == ".git" ||
                      path_is_within(entry.path(), fs::absolute(out_root));
      for (const auto& ex : exclude_dirs) {
        excluded = excluded || path_is_within(entry.path(), ex);
      }
      if (excluded) {
        it.disable_recursion_pending();
        continue;
      }
      fs::create_directories(out_root / rel);
      continue;
    }
    if (!entry.is_regular_file()) continue;
    fs::create_directories((out_root / rel).parent_path());
    fs::copy_file(entry.path(), out_root / rel, fs::copy_options::overwrite_existing, ec);
    if (ec) throw IoError("copy failed: " + entry.path().string() + ": " + ec.message());
  }

  for (const auto& tf : extraction.files) {
    write_file(out_root / tf.path,
               render_file(tf, extraction.schema, extraction.store, genome));
  }
}

BigUint search_space_size(const GenomeSchema& schema) {
  BigUint size(1);
  for (const auto& gene : schema.genes) {
    size.mul(static_cast<std::uint32_t>(gene.cardinality));
  }
  return size;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string genome_hash(const Genome& genome) {
  std::string bytes;
  bytes.reserve(genome.values.size() * 4 + 4);
  auto put = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put(static_cast<std::uint32_t>(genome.values.size()));
  for (int v : genome.values) put(static_cast<std::uint32_t>(v));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

}  // namespace darwin
