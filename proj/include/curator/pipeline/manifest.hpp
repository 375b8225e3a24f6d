#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "curator/pipeline/run_store.hpp"

namespace curator {

inline constexpr int kManifestSchemaVersion = 1;

/// Versioned record of a run: config snapshot, backend identifiers, per-stage
/// statistics and every candidate. Layout is documented in docs/manifest.md.
nlohmann::json build_manifest(const RunState& run, const nlohmann::json& backend_ids);

/// Manifest with every "*_at" key removed, recursively.
nlohmann::json strip_timestamps(const nlohmann::json& j);

/// FormatError on a foreign document or an unsupported schema_version.
nlohmann::json load_manifest(const std::filesystem::path& p);

/// Candidate records of a manifest, in manifest order.
std::vector<GenerationCandidate> manifest_candidates(const nlohmann::json& manifest);

/// Counts recomputed from the candidate records; equals manifest["statistics"]
/// for any manifest produced by build_manifest.
nlohmann::json tally_statistics(const std::vector<GenerationCandidate>& candidates);

/// Plain-text per-stage counts and score distributions.
std::string manifest_summary(const nlohmann::json& manifest);

}  // namespace curator
