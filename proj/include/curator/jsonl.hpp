#pragma once

// Append-only JSON Lines files with crash tolerance: every append is
// fsync'ed, and a torn final line left by a crash is dropped (and truncated
// away) on the next read. A malformed line anywhere else is corruption.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace curator {

/// Parsed lines of the file in order; empty if it does not exist. Throws
/// FormatError on a malformed terminated line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& p);

/// Appends one compact line and fsyncs before returning. Not internally
/// synchronized; callers serialize appends to the same file.
void append_jsonl(const std::filesystem::path& p, const nlohmann::json& record);

}  // namespace curator
