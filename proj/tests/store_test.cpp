#include "darwin/store.hpp"

#include <algorithm>
#include <random>

#include "darwin/errors.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace darwin;

namespace {

const char* kListStore = R"({
  "language_id": "java-collections",
  "file_globs": ["**/*.java"],
  "groups": [
    {
      "adt_name": "List",
      "capacity_domain": [1, 4, 16],
      "impls": [
        {"name": "array-list", "type_token": "ArrayList", "ctor_token": "ArrayList", "capacity_arg": true},
        {"name": "linked-list", "type_token": "LinkedList", "ctor_token": "LinkedList"}
      ]
    }
  ]
})";

}  // namespace

TEST_CASE("parse_store accepts a two-impl list group") {
  const Store store = parse_store(kListStore, "test");
  REQUIRE(store.groups.size() == 1);
  CHECK(store.groups[0].adt_name == "List");
  REQUIRE(store.groups[0].impls.size() == 2);
  CHECK(store.groups[0].impls[0].type_token == "ArrayList");
  CHECK(store.groups[0].impls[1].type_token == "LinkedList");
  CHECK(store.groups[0].impls[0].capacity_arg);
  CHECK_FALSE(store.groups[0].impls[1].capacity_arg);
}

TEST_CASE("a single-impl group without a tunable constructor is rejected") {
  const char* text = R"({
    "language_id": "x", "groups": [
      {"adt_name": "List", "impls": [
        {"name": "a", "type_token": "ArrayList", "ctor_token": "ArrayList"}]}]})";
  CHECK_THROWS_AS(parse_store(text, "test"), ValidationError);
}

TEST_CASE("a single-impl group with a tunable constructor is allowed") {
  const char* text = R"({
    "language_id": "x", "groups": [
      {"adt_name": "List", "capacity_domain": [4, 8], "impls": [
        {"name": "a", "type_token": "ArrayList", "ctor_token": "ArrayList",
         "capacity_arg": true}]}]})";
  CHECK_NOTHROW(parse_store(text, "test"));
}

TEST_CASE("a token claimed by two groups is rejected") {
  const char* text = R"({
    "language_id": "x", "groups": [
      {"adt_name": "Map", "impls": [
        {"name": "a", "type_token": "HashMap", "ctor_token": "HashMap"},
        {"name": "b", "type_token": "TreeMap", "ctor_token": "TreeMap"}]},
      {"adt_name": "Other", "impls": [
        {"name": "c", "type_token": "HashMap", "ctor_token": "HashMap"},
        {"name": "d", "type_token": "X", "ctor_token": "X"}]}]})";
  CHECK_THROWS_AS(parse_store(text, "test"), ValidationError);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_AS(parse_store(R"({"language_id": "x", "groups": [], "extra": 1})", "t"),
                  ParseError);
  const char* impl_extra = R"({
    "language_id": "x", "groups": [
      {"adt_name": "L", "impls": [
        {"name": "a", "type_token": "A", "ctor_token": "A", "bogus": true},
        {"name": "b", "type_token": "B", "ctor_token": "B"}]}]})";
  CHECK_THROWS_AS(parse_store(impl_extra, "t"), ParseError);
}

TEST_CASE("malformed json is a parse error") {
  CHECK_THROWS_AS(parse_store("{not json", "t"), ParseError);
}

TEST_CASE("tokens with whitespace are rejected") {
  const char* text = R"({
    "language_id": "x", "groups": [
      {"adt_name": "L", "impls": [
        {"name": "a", "type_token": "Array List", "ctor_token": "ArrayList"},
        {"name": "b", "type_token": "B", "ctor_token": "B"}]}]})";
  CHECK_THROWS_AS(parse_store(text, "t"), ValidationError);
}

TEST_CASE("builtin java-collections matches the shipped catalogue") {
  const Store store = builtin_store("java-collections");
  REQUIRE(store.groups.size() == 6);

  auto find = [&](const std::string& name) -> const AdtGroup& {
    for (const auto& g : store.groups) {
      if (g.adt_name == name) return g;
    }
    REQUIRE(false);
    return store.groups[0];
  };

  CHECK(find("List").impls.size() == 2);
  CHECK(find("Map").impls.size() == 2);
  CHECK(find("Set").impls.size() == 2);
  CHECK(find("Concurrent List").impls.size() == 2);
  CHECK(find("Concurrent Deque").impls.size() == 2);
  CHECK(find("Thread Safe Queue").impls.size() == 6);

  CHECK(find("List").impls[0].type_token == "ArrayList");
  CHECK(find("List").impls[1].type_token == "LinkedList");
  CHECK(find("Thread Safe Queue").impls[0].type_token == "ArrayBlockingQueue");
  CHECK(find("Thread Safe Queue").impls[1].type_token == "SynchronousQueue");

  // log-spaced capacity domain around the JDK default
  CHECK(find("List").capacity_domain == std::vector<int>{1, 4, 16, 64, 256, 1024, 4096});

  CHECK(validate_store(store).empty());
}

TEST_CASE("builtin generic-demo has one two-impl group") {
  const Store store = builtin_store("generic-demo");
  REQUIRE(store.groups.size() == 1);
  REQUIRE(store.groups[0].impls.size() == 2);
  CHECK(store.groups[0].impls[0].type_token == "std::vector");
  CHECK(store.groups[0].impls[1].type_token == "std::deque");
  CHECK(validate_store(store).empty());
}

TEST_CASE("unknown builtin id") {
  CHECK_THROWS_AS(builtin_store("nope"), UnknownStoreId);
}

TEST_CASE("validate_store flags a non-increasing capacity domain") {
  Store store = builtin_store("java-collections");
  store.groups[0].capacity_domain = {16, 8};
  const auto diags = validate_store(store);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].severity == Severity::Error);
  CHECK(diags[0].location == "List");
}

TEST_CASE("supertype without declaration rewriting is informational only") {
  Store store = builtin_store("java-collections");
  // builtins carry supertype tokens with rewriting off; force one explicitly
  store.groups[0].supertype_token = "List";
  store.groups[0].rewrite_declarations = false;
  bool any_error = false;
  for (const auto& d : validate_store(store)) any_error |= d.severity == Severity::Error;
  CHECK_FALSE(any_error);
}

TEST_CASE("effective impls append the supertype only when rewriting") {
  Store store = builtin_store("java-collections");
  CHECK(store.groups[0].effective_impls().size() == 2);
  store.groups[0].supertype_token = "List";
  CHECK(store.groups[0].effective_impls().size() == 2);
  store.groups[0].rewrite_declarations = true;
  const auto effective = store.groups[0].effective_impls();
  REQUIRE(effective.size() == 3);
  CHECK(effective[2].type_token == "List");
  CHECK(effective[2].ctor_token == "List");
  CHECK_FALSE(effective[2].capacity_arg);
}

TEST_CASE("store round-trips through emit and parse") {
  for (const char* id : {"java-collections", "generic-demo"}) {
    const Store store = builtin_store(id);
    CHECK(parse_store(emit_store(store), "round-trip") == store);
  }

  Store custom = testutil::toy_store(true, true);
  CHECK(parse_store(emit_store(custom), "round-trip") == custom);

  // generated stores with assorted shapes survive the trip too
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    Store store;
    store.language_id = "gen-" + std::to_string(trial);
    store.file_globs = {"**/*.x"};
    const int groups = 1 + static_cast<int>(rng() % 3);
    for (int g = 0; g < groups; ++g) {
      AdtGroup group;
      group.adt_name = "G" + std::to_string(g);
      if (rng() % 2) {
        group.supertype_token = "Base" + std::to_string(trial) + "_" + std::to_string(g);
        group.rewrite_declarations = rng() % 2 == 0;
      }
      int cap = 1 + static_cast<int>(rng() % 4);
      for (int c = 0; c < static_cast<int>(rng() % 3); ++c) {
        group.capacity_domain.push_back(cap);
        cap += 1 + static_cast<int>(rng() % 10);
      }
      const int impls = 2 + static_cast<int>(rng() % 4);
      for (int i = 0; i < impls; ++i) {
        const std::string token =
            "T" + std::to_string(trial) + "_" + std::to_string(g) + "_" + std::to_string(i);
        group.impls.push_back({token, token, token, rng() % 2 == 0});
      }
      store.groups.push_back(std::move(group));
    }
    CHECK(parse_store(emit_store(store), "round-trip") == store);
  }
}

TEST_CASE("save and load a store file") {
  testutil::TempDir tmp;
  const Store store = builtin_store("java-collections");
  save_store(store, tmp / "store.json");
  CHECK(load_store(tmp / "store.json") == store);
  CHECK_THROWS_AS(load_store(tmp / "missing.json"), ParseError);
}

TEST_CASE("every type token resolves to exactly one group") {
  const Store store = builtin_store("java-collections");
  for (std::size_t g = 0; g < store.groups.size(); ++g) {
    for (const auto& impl : store.groups[g].impls) {
      CHECK(store.group_index_for_token(impl.type_token) == static_cast<int>(g));
    }
  }
  CHECK(store.group_index_for_token("NoSuchThing") == -1);
}
