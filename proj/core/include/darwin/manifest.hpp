#pragma once

#include <filesystem>

#include "darwin/extract.hpp"

namespace darwin {

// The extraction manifest pins an Extraction to disk so extract, optimize,
// report, and apply can run as separate invocations. Literal bytes are not
// embedded; each templated file records a content hash and is re-read from
// the source tree on load, failing with StaleManifest when it changed.
void save_manifest(const Extraction& extraction, const std::filesystem::path& path);
Extraction load_manifest(const std::filesystem::path& path);

}  // namespace darwin
