#include "darwin/store.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "darwin/errors.hpp"
#include "json.hpp"

namespace darwin {

using nlohmann::json;

std::vector<ImplSpec> AdtGroup::effective_impls() const {
  std::vector<ImplSpec> out = impls;
  if (rewrite_declarations && supertype_token) {
    out.push_back(ImplSpec{adt_name, *supertype_token, *supertype_token, false});
  }
  return out;
}

int Store::group_index_for_token(std::string_view type_token) const {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& impl : groups[g].effective_impls()) {
      if (impl.type_token == type_token) return static_cast<int>(g);
    }
  }
  return -1;
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ParseError(where + ": unknown key \"" + it.key() + "\"");
    }
  }
}

bool has_whitespace(const std::string& s) {
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return true;
  }
  return false;
}

ImplSpec parse_impl(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": impl must be an object");
  reject_unknown_keys(j, {"name", "type_token", "ctor_token", "capacity_arg"}, where);
  ImplSpec impl;
  impl.name = j.at("name").get<std::string>();
  impl.type_token = j.at("type_token").get<std::string>();
  impl.ctor_token = j.at("ctor_token").get<std::string>();
  impl.capacity_arg = j.value("capacity_arg", false);
  return impl;
}

AdtGroup parse_group(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": group must be an object");
  reject_unknown_keys(j,
                      {"adt_name", "supertype_token", "rewrite_declarations",
                       "capacity_domain", "impls"},
                      where);
  AdtGroup group;
  group.adt_name = j.at("adt_name").get<std::string>();
  if (j.contains("supertype_token")) {
    group.supertype_token = j.at("supertype_token").get<std::string>();
  }
  group.rewrite_declarations = j.value("rewrite_declarations", false);
  if (j.contains("capacity_domain")) {
    for (const auto& v : j.at("capacity_domain")) {
      group.capacity_domain.push_back(v.get<int>());
    }
  }
  if (!j.contains("impls") || !j.at("impls").is_array()) {
    throw ParseError(where + ": missing impls array");
  }
  for (const auto& ij : j.at("impls")) {
    group.impls.push_back(parse_impl(ij, where + "/" + group.adt_name));
  }
  return group;
}

}  // namespace

Store parse_store(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(origin + ": store must be a JSON object");
  reject_unknown_keys(j, {"language_id", "file_globs", "groups"}, origin);

  Store store;
  try {
    store.language_id = j.at("language_id").get<std::string>();
    if (j.contains("file_globs")) {
      for (const auto& g : j.at("file_globs")) {
        store.file_globs.push_back(g.get<std::string>());
      }
    }
    if (!j.contains("groups") || !j.at("groups").is_array()) {
      throw ParseError(origin + ": missing groups array");
    }
    for (const auto& gj : j.at("groups")) {
      store.groups.push_back(parse_group(gj, origin));
    }
  } catch (const json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }

  ensure_valid(store);
  return store;
}

Store load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open store file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_store(buf.str(), path.string());
}

std::string emit_store(const Store& store) {
  json j;
  j["language_id"] = store.language_id;
  j["file_globs"] = store.file_globs;
  j["groups"] = json::array();
  for (const auto& group : store.groups) {
    json gj;
    gj["adt_name"] = group.adt_name;
    if (group.supertype_token) gj["supertype_token"] = *group.supertype_token;
    gj["rewrite_declarations"] = group.rewrite_declarations;
    gj["capacity_domain"] = group.capacity_domain;
    gj["impls"] = json::array();
    for (const auto& impl : group.impls) {
      gj["impls"].push_back({{"name", impl.name},
                             {"type_token", impl.type_token},
                             {"ctor_token", impl.ctor_token},
                             {"capacity_arg", impl.capacity_arg}});
    }
    j["groups"].push_back(std::move(gj));
  }
  return j.dump(2) + "\n";
}

void save_store(const Store& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write store file: " + path.string());
  out << emit_store(store);
}

std::vector<Diagnostic> validate_store(const Store& store) {
  std::vector<Diagnostic> diags;
  auto error = [&](std::string where, std::string msg) {
    diags.push_back({Severity::Error, std::move(where), std::move(msg)});
  };
  auto info = [&](std::string where, std::string msg) {
    diags.push_back({Severity::Info, std::move(where), std::move(msg)});
  };

  if (store.groups.empty()) error("store", "groups list is empty");

  // A type token must map to exactly one group; tokens of enabled supertypes
  // participate in the mapping.
  std::unordered_map<std::string, std::string> token_owner;
  for (const auto& group : store.groups) {
    bool any_capacity = false;
    std::set<std::string> local_tokens;
    for (const auto& impl : group.effective_impls()) {
      if (impl.type_token.empty() || has_whitespace(impl.type_token)) {
        error(group.adt_name + "/" + impl.name, "type_token must be non-empty without whitespace");
      }
      if (impl.ctor_token.empty() || has_whitespace(impl.ctor_token)) {
        error(group.adt_name + "/" + impl.name, "ctor_token must be non-empty without whitespace");
      }
      if (!local_tokens.insert(impl.type_token).second) {
        error(group.adt_name + "/" + impl.type_token,
              "duplicate type_token within group \"" + group.adt_name + "\"");
      }
      auto [it, inserted] = token_owner.emplace(impl.type_token, group.adt_name);
      if (!inserted && it->second != group.adt_name) {
        error(group.adt_name + "/" + impl.type_token,
              "type_token \"" + impl.type_token + "\" already owned by group \"" +
                  it->second + "\"");
      }
      any_capacity = any_capacity || impl.capacity_arg;
    }
    if (group.impls.size() < 2 && !(group.impls.size() == 1 && any_capacity)) {
      error(group.adt_name,
            "group needs at least two impls, or one impl with capacity_arg");
    }
    for (std::size_t i = 0; i < group.capacity_domain.size(); ++i) {
      if (group.capacity_domain[i] <= 0) {
        error(group.adt_name, "capacity_domain values must be strictly positive");
        break;
      }
      if (i > 0 && group.capacity_domain[i] <= group.capacity_domain[i - 1]) {
        error(group.adt_name, "capacity_domain must be strictly increasing");
        break;
      }
    }
    if (group.supertype_token && !group.rewrite_declarations) {
      info(group.adt_name,
           "supertype_token set but rewrite_declarations is false; declarations are left alone");
    }
  }
  return diags;
}

void ensure_valid(const Store& store) {
  for (const auto& d : validate_store(store)) {
    if (d.severity == Severity::Error) {
      throw ValidationError(d.location + ": " + d.message);
    }
  }
}

namespace {

constexpr int kDefaultCapacityDomain[] = {1, 4, 16, 64, 256, 1024, 4096};

// Builtin groups leave supertype_token unset; users who want declaration
// rewriting add the interface token when they enable it.
AdtGroup java_group(std::string adt, std::vector<ImplSpec> impls) {
  AdtGroup g;
  g.adt_name = std::move(adt);
  g.capacity_domain.assign(std::begin(kDefaultCapacityDomain), std::end(kDefaultCapacityDomain));
  g.impls = std::move(impls);
  return g;
}

ImplSpec java_impl(const char* token, bool capacity_arg) {
  return ImplSpec{token, token, token, capacity_arg};
}

Store make_java_collections() {
  Store s;
  s.language_id = "java-collections";
  s.file_globs = {"**/*.java"};
  s.groups.push_back(java_group(
      "List", {java_impl("ArrayList", true), java_impl("LinkedList", false)}));
  s.groups.push_back(java_group(
      "Map", {java_impl("HashMap", true), java_impl("LinkedHashMap", true)}));
  s.groups.push_back(java_group(
      "Set", {java_impl("HashSet", true), java_impl("LinkedHashSet", true)}));
  s.groups.push_back(java_group(
      "Concurrent List",
      {java_impl("Vector", true), java_impl("CopyOnWriteArrayList", false)}));
  s.groups.push_back(java_group(
      "Concurrent Deque",
      {java_impl("ConcurrentLinkedDeque", false), java_impl("LinkedBlockingDeque", true)}));
  s.groups.push_back(java_group(
      "Thread Safe Queue",
      {java_impl("ArrayBlockingQueue", true), java_impl("SynchronousQueue", false),
       java_impl("LinkedBlockingQueue", true), java_impl("DelayQueue", false),
       java_impl("ConcurrentLinkedQueue", false), java_impl("LinkedTransferQueue", false)}));
  return s;
}

Store make_generic_demo() {
  Store s;
  s.language_id = "generic-demo";
  s.file_globs = {"**/*.cpp", "**/*.cc", "**/*.cxx", "**/*.hpp", "**/*.h"};
  AdtGroup seq;
  seq.adt_name = "Sequence";
  seq.impls = {ImplSpec{"vector", "std::vector", "std::vector", false},
               ImplSpec{"deque", "std::deque", "std::deque", false}};
  s.groups.push_back(std::move(seq));
  return s;
}

}  // namespace

Store builtin_store(const std::string& language_id) {
  if (language_id == "java-collections") return make_java_collections();
  if (language_id == "generic-demo") return make_generic_demo();
  throw UnknownStoreId("no builtin store named \"" + language_id + "\"");
}

}  // namespace darwin
