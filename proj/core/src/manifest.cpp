#include "darwin/manifest.hpp"

#include <fstream>
#include <sstream>

#include "darwin/errors.hpp"
#include "json.hpp"

namespace darwin {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kManifestVersion = 1;

json range_to_json(const ByteRange& r) { return json{{"begin", r.begin}, {"end", r.end}}; }

ByteRange range_from_json(const json& j) {
  return ByteRange{j.at("begin").get<std::size_t>(), j.at("end").get<std::size_t>()};
}

const char* site_kind_name(SiteKind k) {
  return k == SiteKind::CtorCall ? "CTOR_CALL" : "TYPE_DECL";
}

SiteKind site_kind_parse(const std::string& s) {
  if (s == "CTOR_CALL") return SiteKind::CtorCall;
  if (s == "TYPE_DECL") return SiteKind::TypeDecl;
  throw ParseError("manifest: bad site kind \"" + s + "\"");
}

const char* capacity_kind_name(CapacityKind k) {
  switch (k) {
    case CapacityKind::EmptyArgs: return "EMPTY_ARGS";
    case CapacityKind::IntLiteral: return "INT_LITERAL";
    default: return "NONE";
  }
}

CapacityKind capacity_kind_parse(const std::string& s) {
  if (s == "EMPTY_ARGS") return CapacityKind::EmptyArgs;
  if (s == "INT_LITERAL") return CapacityKind::IntLiteral;
  if (s == "NONE") return CapacityKind::None;
  throw ParseError("manifest: bad capacity kind \"" + s + "\"");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void save_manifest(const Extraction& extraction, const fs::path& path) {
  json j;
  j["version"] = kManifestVersion;
  j["source_root"] = extraction.source_root.generic_string();
  j["store"] = json::parse(emit_store(extraction.store));

  j["sites"] = json::array();
  for (const auto& site : extraction.schema.sites) {
    json sj{{"id", site.id},
            {"file", site.file},
            {"token", range_to_json(site.token)},
            {"kind", site_kind_name(site.kind)},
            {"group", site.group_index},
            {"original_impl", site.original_impl},
            {"capacity_kind", capacity_kind_name(site.capacity.kind)}};
    if (site.capacity.kind != CapacityKind::None) {
      sj["capacity_args"] = range_to_json(site.capacity.args);
      sj["capacity_original"] = site.capacity.original_value;
    }
    j["sites"].push_back(std::move(sj));
  }

  j["genes"] = json::array();
  for (const auto& gene : extraction.schema.genes) {
    j["genes"].push_back({{"site", gene.site_id},
                          {"kind", gene.kind == GeneKind::Impl ? "IMPL" : "CAPACITY"},
                          {"cardinality", gene.cardinality}});
  }
  j["seed_genome"] = extraction.schema.seed.values;

  j["files"] = json::array();
  for (const auto& tf : extraction.files) {
    json fj{{"path", tf.path},
            {"content_hash", fnv1a64(tf.original)},
            {"slots", json::array()}};
    for (const auto& slot : tf.slots) {
      fj["slots"].push_back({{"site", slot.site_id},
                             {"kind", slot.kind == SlotKind::Dds ? "DDS" : "CAP"},
                             {"span", range_to_json(slot.span)}});
    }
    j["files"].push_back(std::move(fj));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
}

Extraction load_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }

  Extraction extraction;
  try {
    if (j.at("version").get<int>() != kManifestVersion) {
      throw ParseError("manifest " + path.string() + ": unsupported version");
    }
    extraction.source_root = fs::path(j.at("source_root").get<std::string>());
    extraction.store = parse_store(j.at("store").dump(), path.string() + "#store");

    for (const auto& sj : j.at("sites")) {
      Site site;
      site.id = sj.at("id").get<int>();
      site.file = sj.at("file").get<std::string>();
      site.token = range_from_json(sj.at("token"));
      site.kind = site_kind_parse(sj.at("kind").get<std::string>());
      site.group_index = sj.at("group").get<int>();
      site.original_impl = sj.at("original_impl").get<int>();
      site.capacity.kind = capacity_kind_parse(sj.at("capacity_kind").get<std::string>());
      if (site.capacity.kind != CapacityKind::None) {
        site.capacity.args = range_from_json(sj.at("capacity_args"));
        site.capacity.original_value = sj.at("capacity_original").get<long>();
      }
      extraction.schema.sites.push_back(std::move(site));
    }
    for (const auto& gj : j.at("genes")) {
      GeneDescriptor gene;
      gene.site_id = gj.at("site").get<int>();
      gene.kind = gj.at("kind").get<std::string>() == "IMPL" ? GeneKind::Impl
                                                             : GeneKind::Capacity;
      gene.cardinality = gj.at("cardinality").get<int>();
      extraction.schema.genes.push_back(gene);
    }
    extraction.schema.seed.values = j.at("seed_genome").get<std::vector<int>>();

    for (const auto& fj : j.at("files")) {
      TemplatedFile tf;
      tf.path = fj.at("path").get<std::string>();
      tf.original = read_file(extraction.source_root / tf.path);
      if (fnv1a64(tf.original) != fj.at("content_hash").get<std::uint64_t>()) {
        throw StaleManifest("manifest " + path.string() + ": " + tf.path +
                            " changed since extraction; re-run extract");
      }
      for (const auto& slj : fj.at("slots")) {
        tf.slots.push_back({slj.at("site").get<int>(),
                            slj.at("kind").get<std::string>() == "DDS" ? SlotKind::Dds
                                                                       : SlotKind::Cap,
                            range_from_json(slj.at("span"))});
      }
      extraction.files.push_back(std::move(tf));
    }
  } catch (const json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
  return extraction;
}

}  // namespace darwin
