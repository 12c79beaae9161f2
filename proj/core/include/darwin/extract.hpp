#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "darwin/bigint.hpp"
#include "darwin/store.hpp"

namespace darwin {

struct ByteRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // half-open

  std::size_t size() const { return end - begin; }
  bool overlaps(const ByteRange& other) const {
    return begin < other.end && other.begin < end;
  }
  bool operator==(const ByteRange&) const = default;
};

enum class SiteKind { CtorCall, TypeDecl };

enum class CapacityKind { None, EmptyArgs, IntLiteral };

struct CapacitySlot {
  CapacityKind kind = CapacityKind::None;
  ByteRange args;           // interior of the constructor parentheses
  long original_value = 0;  // IntLiteral only

  bool operator==(const CapacitySlot&) const = default;
};

// One source location eligible for substitution: a constructor call head or
// a declared type token. `token` is the byte range the substitution replaces.
struct Site {
  int id = 0;
  std::string file;  // relative to the scanned root
  ByteRange token;
  SiteKind kind = SiteKind::CtorCall;
  int group_index = 0;
  int original_impl = 0;  // index into the group's effective impls
  CapacitySlot capacity;

  bool operator==(const Site&) const = default;
};

enum class SlotKind { Dds, Cap };

struct TemplateSlot {
  int site_id = 0;
  SlotKind kind = SlotKind::Dds;
  ByteRange span;

  bool operator==(const TemplateSlot&) const = default;
};

// A source file split into literal runs and substitution slots. Rendering
// with each slot's original text reproduces `original` byte-exactly.
struct TemplatedFile {
  std::string path;  // relative
  std::string original;
  std::vector<TemplateSlot> slots;  // ordered by span, non-overlapping

  bool operator==(const TemplatedFile&) const = default;
};

enum class GeneKind { Impl, Capacity };

struct GeneDescriptor {
  int site_id = 0;
  GeneKind kind = GeneKind::Impl;
  int cardinality = 0;

  bool operator==(const GeneDescriptor&) const = default;
};

struct Genome {
  std::vector<int> values;

  bool operator==(const Genome&) const = default;
};

struct GenomeSchema {
  std::vector<Site> sites;
  std::vector<GeneDescriptor> genes;
  Genome seed;

  bool in_bounds(const Genome& g) const;
  void ensure_bounds(const Genome& g) const;  // throws GeneOutOfRange
  // Gene index for a site, -1 when the site has no such gene.
  int impl_gene_of(int site_id) const;
  int capacity_gene_of(int site_id) const;

  bool operator==(const GenomeSchema&) const = default;
};

struct SiteRanking {
  enum class Mode { All, StaticCount, HotnessFile };
  Mode mode = Mode::All;
  int max_sites = 0;  // StaticCount / HotnessFile cap
  std::filesystem::path hotness_path;
};

// Everything optimize/report need about a scanned project.
struct Extraction {
  std::filesystem::path source_root;
  Store store;
  std::vector<TemplatedFile> files;  // files containing at least one slot
  GenomeSchema schema;
};

// Scans one file's contents. Sites get ids first_site_id, first_site_id+1, ...
// in byte-offset order. Exposed for tests; scan_project drives it.
struct FileScan {
  std::vector<Site> sites;
  std::vector<TemplateSlot> slots;
};
FileScan scan_text(const std::string& text, const Store& store,
                   const std::string& rel_path, int first_site_id);

// Scans every file matching the store's (or override) globs under root.
// Sites are ordered by (file path, byte offset); when the ranking caps sites,
// dropped sites stay literal text and do not appear in the schema.
Extraction scan_project(const std::filesystem::path& source_root, const Store& store,
                        const SiteRanking& ranking,
                        const std::vector<std::string>& glob_override = {},
                        const std::vector<std::filesystem::path>& exclude_dirs = {});

// Ranks sites per the ranking mode and truncates to max_sites when capped;
// ALL is the identity.
std::vector<Site> rank_sites(const std::vector<Site>& sites, const SiteRanking& ranking);

// Throws OverlapError when two substitution spans intersect.
void ensure_disjoint_slots(const std::vector<TemplateSlot>& slots, const std::string& file);

// Substitution text for a site under a gene assignment.
std::string dds_text(const Site& site, const Store& store, int impl_value);

// Renders one templated file under a genome.
std::string render_file(const TemplatedFile& file, const GenomeSchema& schema,
                        const Store& store, const Genome& genome);

// Writes the full variant tree: non-templated files copied byte-exactly,
// templated files rendered under `genome`. The seed genome reproduces the
// input tree byte for byte.
void materialize(const Extraction& extraction, const Genome& genome,
                 const std::filesystem::path& out_root,
                 const std::vector<std::filesystem::path>& exclude_dirs = {});

// Product of gene cardinalities (empty schema -> 1).
BigUint search_space_size(const GenomeSchema& schema);

// Shell-style glob with "**" crossing directory separators.
bool glob_match(std::string_view pattern, std::string_view path);

// Stable 64-bit content/genome hashing used for cache keys and variant ids.
std::uint64_t fnv1a64(std::string_view bytes);
std::string genome_hash(const Genome& genome);

}  // namespace darwin
