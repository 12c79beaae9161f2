#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace darwin {

// One concrete, interchangeable implementation of an abstract data type:
// the exact source tokens it is written with and whether its constructor
// accepts a single integer pre-allocation argument.
struct ImplSpec {
  std::string name;
  std::string type_token;
  std::string ctor_token;
  bool capacity_arg = false;

  bool operator==(const ImplSpec&) const = default;
};

// A set of mutually replaceable implementations for one abstract data type.
// Impl order is stable: index 0..N-1 is the gene value space.
struct AdtGroup {
  std::string adt_name;
  std::optional<std::string> supertype_token;
  bool rewrite_declarations = false;
  std::vector<int> capacity_domain;  // strictly positive, strictly increasing
  std::vector<ImplSpec> impls;

  // The impl list the extractor works against. When declaration rewriting is
  // enabled, the supertype participates as one more equivalent choice.
  std::vector<ImplSpec> effective_impls() const;

  bool operator==(const AdtGroup&) const = default;
};

struct Store {
  std::string language_id;
  std::vector<std::string> file_globs;
  std::vector<AdtGroup> groups;

  // Keyword that introduces a constructor call for this store's language
  // profile (precedes the ctor token, possibly via a qualified path).
  std::string ctor_keyword() const { return "new"; }

  // Resolves a type token to the single group that owns it, considering
  // effective impls. Returns -1 when no group matches.
  int group_index_for_token(std::string_view type_token) const;

  bool operator==(const Store&) const = default;
};

enum class Severity { Info, Warning, Error };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string location;  // "group/token" style path into the store
  std::string message;
};

// File format: one UTF-8 JSON document, unknown keys rejected.
Store load_store(const std::filesystem::path& path);
Store parse_store(const std::string& text, const std::string& origin);
std::string emit_store(const Store& store);
void save_store(const Store& store, const std::filesystem::path& path);

// Built-in stores: "java-collections" and "generic-demo".
Store builtin_store(const std::string& language_id);

std::vector<Diagnostic> validate_store(const Store& store);

// Throws ValidationError on the first Error-severity diagnostic.
void ensure_valid(const Store& store);

}  // namespace darwin
